//! CSV ingestion and result serialisation.
//!
//! `sample.csv`: `area,welfare,het_weight,survey_weight,x1..xp`; an empty
//! `survey_weight` means 1. `census.csv`: `area,het_weight,count,x1..xp`,
//! one row per block of identical out-of-sample units; a zero-count row
//! declares a fully sampled area. With `intercept` set, a leading column of
//! ones is added to every covariate vector. Numbers are written with 17
//! significant digits so that they parse back to the same `f64`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use crate::diagnostics::UnitDiagnostics;
use crate::error::{Error, Result};
use crate::model::{AreaId, CensusFrame, CensusRow, SampleRecord, SurveySample};
use crate::shift::SkewnessPoint;
use crate::simulation::StudyMetrics;
use crate::summaries::PosteriorSummary;

pub const SAMPLE_COLUMNS: [&str; 4] = ["area", "welfare", "het_weight", "survey_weight"];
pub const CENSUS_COLUMNS: [&str; 3] = ["area", "het_weight", "count"];
pub const SUMMARY_COLUMNS: [&str; 12] = [
    "area",
    "indicator",
    "mean",
    "variance",
    "sd",
    "cv_percent",
    "et_lo",
    "et_hi",
    "hpd_lo",
    "hpd_hi",
    "n_d",
    "N_d",
];
pub const METRIC_COLUMNS: [&str; 12] = [
    "indicator",
    "area",
    "n_d",
    "mc_mean_hb",
    "mc_mean_true",
    "mse",
    "cov_et_pct",
    "cov_hpd_pct",
    "width_et",
    "width_hpd",
    "mean_cv_pct",
    "mean_cv_direct_pct",
];
pub const DIAGNOSTIC_COLUMNS: [&str; 9] = [
    "area",
    "unit",
    "y",
    "deleted_mean",
    "deleted_var",
    "r_di",
    "cpo",
    "survey_weight",
    "flags",
];

/// 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_optional(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

struct Table<'a> {
    source: &'a str,
    records: Vec<(u64, StringRecord)>,
    width: usize,
}

fn schema(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Schema {
        source_name: source.to_string(),
        line,
        message: message.into(),
    }
}

fn read_table<'a, R: Read>(reader: R, source: &'a str, leading: &[&str]) -> Result<Table<'a>> {
    let mut rdr = ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| schema(source, 1, e.to_string()))?
        .clone();
    if header.len() < leading.len()
        || header
            .iter()
            .zip(leading)
            .any(|(h, want)| !h.eq_ignore_ascii_case(want))
    {
        return Err(schema(
            source,
            1,
            format!("header must start with {}, found {:?}", leading.join(","), header.iter().collect::<Vec<_>>()),
        ));
    }
    let width = header.len();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            schema(source, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(schema(source, line, format!("expected {width} fields, found {}", rec.len())));
        }
        records.push((line, rec));
    }
    Ok(Table { source, records, width })
}

impl Table<'_> {
    fn number<T: std::str::FromStr>(&self, line: u64, rec: &StringRecord, col: usize, name: &str) -> Result<T> {
        rec[col]
            .parse()
            .map_err(|_| schema(self.source, line, format!("{name}: cannot parse {:?}", &rec[col])))
    }

    fn covariates(&self, line: u64, rec: &StringRecord, from: usize, intercept: bool) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.width - from + 1);
        if intercept {
            x.push(1.0);
        }
        for c in from..self.width {
            x.push(self.number(line, rec, c, &format!("covariate {}", c - from + 1))?);
        }
        Ok(x)
    }
}

pub fn read_sample<R: Read>(reader: R, source: &str, intercept: bool) -> Result<SurveySample> {
    let t = read_table(reader, source, &SAMPLE_COLUMNS)?;
    let p = t.width - SAMPLE_COLUMNS.len() + usize::from(intercept);
    if p == 0 {
        return Err(schema(source, 1, "no covariate columns and no intercept"));
    }
    if t.records.is_empty() {
        return Err(schema(source, 1, "no sample rows"));
    }
    let mut records = Vec::with_capacity(t.records.len());
    for (line, rec) in &t.records {
        let area: AreaId = t.number(*line, rec, 0, "area")?;
        let welfare: f64 = t.number(*line, rec, 1, "welfare")?;
        let het: f64 = t.number(*line, rec, 2, "het_weight")?;
        let survey: f64 = if rec[3].is_empty() {
            1.0
        } else {
            t.number(*line, rec, 3, "survey_weight")?
        };
        let x = t.covariates(*line, rec, SAMPLE_COLUMNS.len(), intercept)?;
        records.push(
            SampleRecord::new(area, welfare, x)
                .with_het_weight(het)
                .with_survey_weight(survey),
        );
    }
    SurveySample::new(records, p)
}

/// Census frame with `N_d = n_d + Σ counts` for every area listed in the
/// file. Sampled areas absent from the file are left out so that validation
/// names them.
pub fn read_census<R: Read>(reader: R, source: &str, intercept: bool, sample: &SurveySample) -> Result<CensusFrame> {
    let t = read_table(reader, source, &CENSUS_COLUMNS)?;
    let p = t.width - CENSUS_COLUMNS.len() + usize::from(intercept);
    if p != sample.p() {
        return Err(schema(
            source,
            1,
            format!("census has {p} covariates (with intercept) but the sample has {}", sample.p()),
        ));
    }
    let mut rows = Vec::new();
    let mut sizes: BTreeMap<AreaId, u64> = BTreeMap::new();
    for (line, rec) in &t.records {
        let area: AreaId = t.number(*line, rec, 0, "area")?;
        let het_weight: f64 = t.number(*line, rec, 1, "het_weight")?;
        let count: u64 = t.number(*line, rec, 2, "count")?;
        let covariates = t.covariates(*line, rec, CENSUS_COLUMNS.len(), intercept)?;
        *sizes.entry(area).or_insert(0) += count;
        if count > 0 {
            rows.push(CensusRow {
                area,
                het_weight,
                count,
                covariates,
            });
        }
    }
    let counts = sample.area_counts();
    for (area, size) in sizes.iter_mut() {
        *size += counts.get(area).copied().unwrap_or(0) as u64;
    }
    Ok(CensusFrame::new(rows, sizes))
}

pub fn read_sample_path(path: &std::path::Path, intercept: bool) -> Result<SurveySample> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_sample(f, &path.display().to_string(), intercept)
}

pub fn read_census_path(path: &std::path::Path, intercept: bool, sample: &SurveySample) -> Result<CensusFrame> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_census(f, &path.display().to_string(), intercept, sample)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    WriterBuilder::new().from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn write_rows<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(header).map_err(csv_err)?;
    for r in rows {
        wtr.write_record(&r).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes covariates as stored, dropping the leading intercept column when
/// `intercept` is set.
pub fn write_sample<W: Write>(w: W, sample: &SurveySample, intercept: bool) -> Result<()> {
    let skip = usize::from(intercept);
    let mut header: Vec<String> = SAMPLE_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=sample.p() - skip).map(|j| format!("x{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        w,
        &header,
        sample.records().iter().map(|r| {
            let mut row = vec![
                r.area.to_string(),
                format_number(r.welfare),
                format_number(r.het_weight),
                format_number(r.survey_weight),
            ];
            row.extend(r.covariates[skip..].iter().map(|&x| format_number(x)));
            row
        }),
    )
}

pub fn write_census<W: Write>(w: W, census: &CensusFrame, intercept: bool) -> Result<()> {
    let skip = usize::from(intercept);
    let p = census.rows().first().map_or(skip, |r| r.covariates.len());
    let mut header: Vec<String> = CENSUS_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=p - skip).map(|j| format!("x{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        w,
        &header,
        census.rows().iter().map(|r| {
            let mut row = vec![r.area.to_string(), format_number(r.het_weight), r.count.to_string()];
            row.extend(r.covariates[skip..].iter().map(|&x| format_number(x)));
            row
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub area: AreaId,
    pub indicator: String,
    pub summary: PosteriorSummary,
    pub sample_size: usize,
    pub population: u64,
}

pub fn write_summaries<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    write_rows(
        w,
        &SUMMARY_COLUMNS,
        rows.iter().map(|r| {
            let s = &r.summary;
            vec![
                r.area.to_string(),
                r.indicator.clone(),
                format_number(s.mean),
                format_number(s.variance),
                format_number(s.sd),
                format_optional(s.cv.map(|c| 100.0 * c)),
                format_number(s.et_interval.0),
                format_number(s.et_interval.1),
                format_number(s.hpd_interval.0),
                format_number(s.hpd_interval.1),
                r.sample_size.to_string(),
                r.population.to_string(),
            ]
        }),
    )
}

/// Long format: `area,indicator,h,value`.
pub fn write_draws<W: Write>(w: W, areas: &[AreaId], draws: &[crate::predictor::IndicatorDraws]) -> Result<()> {
    let mut rows = Vec::new();
    for (a, id) in areas.iter().enumerate() {
        for d in draws {
            for (h, v) in d.values[a].iter().enumerate() {
                rows.push(vec![id.to_string(), d.name.clone(), (h + 1).to_string(), format_number(*v)]);
            }
        }
    }
    write_rows(w, &["area", "indicator", "h", "value"], rows)
}

pub fn write_metrics<W: Write>(w: W, metrics: &StudyMetrics) -> Result<()> {
    let rows = metrics.indicators.iter().flat_map(|ind| {
        ind.areas.iter().map(move |m| {
            vec![
                ind.name.clone(),
                m.area.to_string(),
                m.sample_size.to_string(),
                format_number(m.mc_mean_hb),
                format_number(m.mc_mean_true),
                format_number(m.mse),
                format_number(m.cov_et_pct),
                format_number(m.cov_hpd_pct),
                format_number(m.width_et),
                format_number(m.width_hpd),
                format_optional(m.mean_cv_pct),
                format_optional(m.mean_cv_direct_pct),
            ]
        })
    });
    write_rows(w, &METRIC_COLUMNS, rows)
}

pub fn write_diagnostics<W: Write>(w: W, rows: &[UnitDiagnostics]) -> Result<()> {
    write_rows(
        w,
        &DIAGNOSTIC_COLUMNS,
        rows.iter().map(|d| {
            vec![
                d.area.to_string(),
                (d.unit + 1).to_string(),
                format_number(d.y),
                format_number(d.deleted_mean),
                format_number(d.deleted_var),
                format_number(d.residual),
                format_number(d.cpo),
                format_number(d.survey_weight),
                d.flags.labels().join(";"),
            ]
        }),
    )
}

pub fn write_skewness_curve<W: Write>(w: W, curve: &[SkewnessPoint]) -> Result<()> {
    write_rows(
        w,
        &["shift", "skewness"],
        curve
            .iter()
            .map(|p| vec![format_number(p.shift), format_number(p.skewness)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = "area,welfare,het_weight,survey_weight,x1\n1,5.5,1,10,0.2\n1,7,2,,0.4\n2,3.25,1,5,1\n";

    #[test]
    fn reads_sample_with_intercept() {
        let s = read_sample(SAMPLE.as_bytes(), "s", true).unwrap();
        assert_eq!(s.p(), 2);
        assert_eq!(s.records()[1].covariates, vec![1.0, 0.4]);
        assert_eq!(s.records()[1].survey_weight, 1.0);
        assert_eq!(s.records()[1].het_weight, 2.0);
        let s = read_sample(SAMPLE.as_bytes(), "s", false).unwrap();
        assert_eq!(s.p(), 1);
    }

    #[test]
    fn schema_errors() {
        let bad_header = "area,income,het_weight,survey_weight,x1\n1,2,1,1,0\n";
        assert!(matches!(read_sample(bad_header.as_bytes(), "s", true), Err(Error::Schema { line: 1, .. })));
        let bad_number = "area,welfare,het_weight,survey_weight\n1,abc,1,1\n";
        let e = read_sample(bad_number.as_bytes(), "s", true).unwrap_err();
        assert!(matches!(e, Error::Schema { line: 2, .. }), "{e}");
        let ragged = "area,welfare,het_weight,survey_weight\n1,2,1\n";
        assert!(read_sample(ragged.as_bytes(), "s", true).is_err());
        let no_cov = "area,welfare,het_weight,survey_weight\n1,2,1,1\n";
        assert!(read_sample(no_cov.as_bytes(), "s", false).is_err());
    }

    #[test]
    fn census_sizes_and_zero_rows() {
        let s = read_sample(SAMPLE.as_bytes(), "s", true).unwrap();
        let census = "area,het_weight,count,x1\n1,1,10,0.3\n2,1,0,0\n3,1,4,0.5\n";
        let c = read_census(census.as_bytes(), "c", true, &s).unwrap();
        assert_eq!(c.rows().len(), 2);
        assert_eq!(c.area_sizes()[&1], 12);
        assert_eq!(c.area_sizes()[&2], 1);
        assert_eq!(c.area_sizes()[&3], 4);
        let wrong_p = "area,het_weight,count\n1,1,10\n";
        assert!(read_census(wrong_p.as_bytes(), "c", true, &s).is_err());
    }

    #[test]
    fn number_format_has_17_digits() {
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
        assert_eq!(format_number(-2.5), "-2.5000000000000000e0");
    }

    proptest! {
        #[test]
        fn f64_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(format_number(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }

        #[test]
        fn sample_and_census_round_trip(
            rows in proptest::collection::vec((1i64..5, 0.01f64..1e6, 0.1f64..10.0, 0.5f64..100.0, -1e3f64..1e3), 1..30),
            counts in proptest::collection::vec(1u64..50, 4),
        ) {
            let records: Vec<_> = rows
                .iter()
                .map(|&(a, e, w, sw, x)| SampleRecord::new(a, e, vec![1.0, x]).with_het_weight(w).with_survey_weight(sw))
                .collect();
            let sample = SurveySample::new(records, 2).unwrap();
            let mut buf = Vec::new();
            write_sample(&mut buf, &sample, true).unwrap();
            let back = read_sample(buf.as_slice(), "rt", true).unwrap();
            prop_assert_eq!(&back, &sample);

            let census_rows: Vec<_> = counts
                .iter()
                .enumerate()
                .map(|(i, &c)| CensusRow { area: i as i64 + 1, het_weight: 1.5, count: c, covariates: vec![1.0, i as f64 * 0.1] })
                .collect();
            let frame = CensusFrame::from_rows(census_rows, &sample);
            let mut buf = Vec::new();
            write_census(&mut buf, &frame, true).unwrap();
            let back = read_census(buf.as_slice(), "rt", true, &sample).unwrap();
            prop_assert_eq!(back, frame);
        }
    }
}
