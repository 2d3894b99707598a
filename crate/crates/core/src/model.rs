//! Survey sample, census frame and the validated estimation problem.
//!
//! The sample holds welfare on its original scale; [`validate_problem`]
//! applies the transform, checks the posterior propriety condition (full
//! column rank of the stacked sample covariates) and precomputes every
//! ρ-independent quantity used by the grid: weighted area means, within-area
//! centred responses and covariates, and the within-area scatter matrices.

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::transform::TransformSpec;

pub type AreaId = i64;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub area: AreaId,
    pub welfare: f64,
    /// Known heteroscedasticity weight; the unit error variance is `σ²/w`.
    pub het_weight: f64,
    /// Design weight. Only used by the direct estimator and diagnostics export.
    pub survey_weight: f64,
    /// Full covariate vector, intercept included when the model has one.
    pub covariates: Vec<f64>,
}

impl SampleRecord {
    pub fn new(area: AreaId, welfare: f64, covariates: Vec<f64>) -> Self {
        Self {
            area,
            welfare,
            het_weight: 1.0,
            survey_weight: 1.0,
            covariates,
        }
    }

    pub fn with_het_weight(mut self, w: f64) -> Self {
        self.het_weight = w;
        self
    }

    pub fn with_survey_weight(mut self, w: f64) -> Self {
        self.survey_weight = w;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveySample {
    records: Vec<SampleRecord>,
    p: usize,
}

impl SurveySample {
    pub fn new(records: Vec<SampleRecord>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("covariate count p must be >= 1".into()));
        }
        if records.is_empty() {
            return Err(Error::InsufficientSample { n: 0, p });
        }
        for (row, r) in records.iter().enumerate() {
            if r.covariates.len() != p {
                return Err(Error::CovariateLength {
                    row,
                    found: r.covariates.len(),
                    expected: p,
                });
            }
        }
        Ok(Self { records, p })
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The sample with one unit removed.
    pub fn without(&self, index: usize) -> Result<Self> {
        if index >= self.records.len() {
            return Err(Error::InvalidArgument(format!("unit {index} out of range")));
        }
        let mut records = self.records.clone();
        records.remove(index);
        Self::new(records, self.p)
    }

    pub fn area_counts(&self) -> BTreeMap<AreaId, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.area).or_insert(0) += 1;
        }
        counts
    }

    pub fn with_welfare(&self, welfare: &[f64]) -> Result<Self> {
        if welfare.len() != self.records.len() {
            return Err(Error::InvalidArgument("welfare length mismatch".into()));
        }
        let records = self
            .records
            .iter()
            .zip(welfare)
            .map(|(r, &e)| SampleRecord {
                welfare: e,
                ..r.clone()
            })
            .collect();
        Self::new(records, self.p)
    }
}

/// A block of `count` identical out-of-sample population units.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow {
    pub area: AreaId,
    pub het_weight: f64,
    pub count: u64,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CensusFrame {
    rows: Vec<CensusRow>,
    area_sizes: BTreeMap<AreaId, u64>,
}

impl CensusFrame {
    /// Frame with explicit population sizes `N_d`, checked against the sample
    /// during validation.
    pub fn new(rows: Vec<CensusRow>, area_sizes: BTreeMap<AreaId, u64>) -> Self {
        Self { rows, area_sizes }
    }

    /// Frame whose `N_d` are derived as `n_d + Σ counts`. Sampled areas with
    /// no census rows are left out, so validation will report them.
    pub fn from_rows(rows: Vec<CensusRow>, sample: &SurveySample) -> Self {
        let mut area_sizes: BTreeMap<AreaId, u64> = BTreeMap::new();
        for r in &rows {
            *area_sizes.entry(r.area).or_insert(0) += r.count;
        }
        for (area, n) in sample.area_counts() {
            if let Some(size) = area_sizes.get_mut(&area) {
                *size += n as u64;
            }
        }
        Self { rows, area_sizes }
    }

    /// Frame for fully enumerated sampled areas: every `N_d = n_d`.
    pub fn fully_sampled(sample: &SurveySample) -> Self {
        let area_sizes = sample
            .area_counts()
            .into_iter()
            .map(|(a, n)| (a, n as u64))
            .collect();
        Self {
            rows: Vec::new(),
            area_sizes,
        }
    }

    pub fn rows(&self) -> &[CensusRow] {
        &self.rows
    }

    pub fn area_sizes(&self) -> &BTreeMap<AreaId, u64> {
        &self.area_sizes
    }

    pub fn total_areas(&self) -> usize {
        self.area_sizes.len()
    }
}

/// Weighted sample means of one area.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaSummary {
    pub x_bar: DVector<f64>,
    pub y_bar: f64,
    pub weight_total: f64,
}

/// `x̄ = Σ w x / w·`, `ȳ = Σ w y / w·`, `w· = Σ w`. `None` for an empty area.
pub fn area_weighted_means<R: AsRef<[f64]>>(
    covariates: &[R],
    responses: &[f64],
    weights: &[f64],
) -> Option<AreaSummary> {
    let first = covariates.first()?;
    let p = first.as_ref().len();
    let mut x_sum = DVector::zeros(p);
    let mut y_sum = 0.0;
    let mut w_sum = 0.0;
    for ((x, &y), &w) in covariates.iter().zip(responses).zip(weights) {
        for (acc, &xi) in x_sum.iter_mut().zip(x.as_ref()) {
            *acc += w * xi;
        }
        y_sum += w * y;
        w_sum += w;
    }
    Some(AreaSummary {
        x_bar: x_sum / w_sum,
        y_bar: y_sum / w_sum,
        weight_total: w_sum,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Area {
    pub id: AreaId,
    /// `N_d`.
    pub population: u64,
    /// Indices into the sample units, in input order.
    pub units: Vec<usize>,
    /// Contiguous range of this area's census rows.
    pub census: Range<usize>,
    /// `None` for nonsampled areas.
    pub summary: Option<AreaSummary>,
}

impl Area {
    pub fn sample_size(&self) -> usize {
        self.units.len()
    }

    pub fn is_sampled(&self) -> bool {
        self.summary.is_some()
    }

    pub fn out_of_sample(&self) -> u64 {
        self.population - self.units.len() as u64
    }
}

#[derive(Debug, Clone)]
pub struct ValidatedProblem {
    transform: TransformSpec,
    p: usize,
    /// Stacked sample covariates, `n × p`.
    x: DMatrix<f64>,
    y: DVector<f64>,
    welfare: Vec<f64>,
    het_weight: Vec<f64>,
    survey_weight: Vec<f64>,
    unit_area: Vec<usize>,
    /// Census covariates grouped by area, `rows × p`.
    census_x: DMatrix<f64>,
    census_weight: Vec<f64>,
    census_count: Vec<u64>,
    areas: Vec<Area>,
    sampled_areas: usize,
    centered_x: DMatrix<f64>,
    centered_y: DVector<f64>,
    within_xx: DMatrix<f64>,
    within_xy: DVector<f64>,
}

impl ValidatedProblem {
    pub fn transform(&self) -> TransformSpec {
        self.transform
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// `D`, all areas in the frame.
    pub fn area_count(&self) -> usize {
        self.areas.len()
    }

    /// `D*`, areas with `n_d > 0`.
    pub fn sampled_area_count(&self) -> usize {
        self.sampled_areas
    }

    pub fn areas(&self) -> &[Area] {
        &self.areas
    }

    pub fn area_index(&self, id: AreaId) -> Option<usize> {
        self.areas.binary_search_by_key(&id, |a| a.id).ok()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn responses(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn welfare(&self) -> &[f64] {
        &self.welfare
    }

    pub fn het_weights(&self) -> &[f64] {
        &self.het_weight
    }

    pub fn survey_weights(&self) -> &[f64] {
        &self.survey_weight
    }

    /// Position in [`Self::areas`] of each sample unit.
    pub fn unit_areas(&self) -> &[usize] {
        &self.unit_area
    }

    pub fn census_design(&self) -> &DMatrix<f64> {
        &self.census_x
    }

    pub fn census_weights(&self) -> &[f64] {
        &self.census_weight
    }

    pub fn census_counts(&self) -> &[u64] {
        &self.census_count
    }

    pub(crate) fn centered(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.centered_x, &self.centered_y)
    }

    pub(crate) fn within_scatter(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.within_xx, &self.within_xy)
    }
}

/// Checks the inputs, transforms welfare and precomputes area summaries.
pub fn validate_problem(
    sample: &SurveySample,
    census: &CensusFrame,
    transform: TransformSpec,
) -> Result<ValidatedProblem> {
    let p = sample.p();
    let n = sample.len();
    if n < p + 1 {
        return Err(Error::InsufficientSample { n, p });
    }

    let mut y = DVector::zeros(n);
    for (row, r) in sample.records().iter().enumerate() {
        if !r.welfare.is_finite() || r.covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        if !(r.het_weight > 0.0) || !r.het_weight.is_finite() {
            return Err(Error::NonPositiveWeight {
                what: "heteroscedasticity weight",
                row,
                value: r.het_weight,
            });
        }
        if !(r.survey_weight > 0.0) || !r.survey_weight.is_finite() {
            return Err(Error::NonPositiveWeight {
                what: "survey weight",
                row,
                value: r.survey_weight,
            });
        }
        y[row] = transform.apply(r.welfare).map_err(|e| match e {
            Error::TransformDomain { welfare, shift, .. } => Error::TransformDomain {
                row,
                welfare,
                shift,
            },
            other => other,
        })?;
    }

    for (row, r) in census.rows().iter().enumerate() {
        if r.covariates.len() != p {
            return Err(Error::CovariateLength {
                row,
                found: r.covariates.len(),
                expected: p,
            });
        }
        if r.covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("census"));
        }
        if !(r.het_weight > 0.0) || !r.het_weight.is_finite() {
            return Err(Error::NonPositiveWeight {
                what: "census heteroscedasticity weight",
                row,
                value: r.het_weight,
            });
        }
        if r.count == 0 {
            return Err(Error::NonPositiveWeight {
                what: "census count",
                row,
                value: 0.0,
            });
        }
    }

    let sample_counts = sample.area_counts();
    for &area in sample_counts.keys() {
        if !census.area_sizes().contains_key(&area) {
            return Err(Error::AreaMissingFromCensus { area });
        }
    }
    let mut census_counts: BTreeMap<AreaId, u64> = BTreeMap::new();
    for r in census.rows() {
        *census_counts.entry(r.area).or_insert(0) += r.count;
    }
    for (&area, &count) in &census_counts {
        if !census.area_sizes().contains_key(&area) {
            return Err(Error::AreaSizeMismatch {
                area,
                census: count,
                sample: sample_counts.get(&area).copied().unwrap_or(0),
                size: 0,
            });
        }
    }
    for (&area, &size) in census.area_sizes() {
        let c = census_counts.get(&area).copied().unwrap_or(0);
        let s = sample_counts.get(&area).copied().unwrap_or(0);
        if c + s as u64 != size || size == 0 {
            return Err(Error::AreaSizeMismatch {
                area,
                census: c,
                sample: s,
                size,
            });
        }
    }

    let x = DMatrix::from_fn(n, p, |i, j| sample.records()[i].covariates[j]);
    let rank = design_rank(&x);
    if rank < p {
        return Err(Error::RankDeficient { rank, p });
    }

    // Areas in id order; census rows regrouped to be contiguous per area.
    let ids: Vec<AreaId> = census.area_sizes().keys().copied().collect();
    let index_of = |id: AreaId| ids.binary_search(&id).expect("area present");
    let mut units_by_area: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
    let mut unit_area = Vec::with_capacity(n);
    for (i, r) in sample.records().iter().enumerate() {
        let a = index_of(r.area);
        units_by_area[a].push(i);
        unit_area.push(a);
    }
    let mut census_order: Vec<usize> = (0..census.rows().len()).collect();
    census_order.sort_by_key(|&k| index_of(census.rows()[k].area));
    let census_x = DMatrix::from_fn(census_order.len(), p, |i, j| {
        census.rows()[census_order[i]].covariates[j]
    });
    let census_weight: Vec<f64> = census_order
        .iter()
        .map(|&k| census.rows()[k].het_weight)
        .collect();
    let census_count: Vec<u64> = census_order.iter().map(|&k| census.rows()[k].count).collect();

    let mut areas = Vec::with_capacity(ids.len());
    let mut cursor = 0usize;
    for (a, &id) in ids.iter().enumerate() {
        let start = cursor;
        while cursor < census_order.len() && index_of(census.rows()[census_order[cursor]].area) == a {
            cursor += 1;
        }
        let units = std::mem::take(&mut units_by_area[a]);
        let summary = {
            let xs: Vec<&[f64]> = units
                .iter()
                .map(|&i| sample.records()[i].covariates.as_slice())
                .collect();
            let ys: Vec<f64> = units.iter().map(|&i| y[i]).collect();
            let ws: Vec<f64> = units.iter().map(|&i| sample.records()[i].het_weight).collect();
            area_weighted_means(&xs, &ys, &ws)
        };
        areas.push(Area {
            id,
            population: census.area_sizes()[&id],
            units,
            census: start..cursor,
            summary,
        });
    }
    let sampled_areas = areas.iter().filter(|a| a.is_sampled()).count();

    let het_weight: Vec<f64> = sample.records().iter().map(|r| r.het_weight).collect();
    let mut centered_x = x.clone();
    let mut centered_y = y.clone();
    for (i, &a) in unit_area.iter().enumerate() {
        let s = areas[a].summary.as_ref().expect("unit area is sampled");
        for j in 0..p {
            centered_x[(i, j)] -= s.x_bar[j];
        }
        centered_y[i] -= s.y_bar;
    }
    let w = DVector::from_column_slice(&het_weight);
    let mut weighted_cx = centered_x.clone();
    for (i, mut row) in weighted_cx.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let within_xx = centered_x.transpose() * &weighted_cx;
    let within_xy = weighted_cx.transpose() * &centered_y;

    Ok(ValidatedProblem {
        transform,
        p,
        welfare: sample.records().iter().map(|r| r.welfare).collect(),
        survey_weight: sample.records().iter().map(|r| r.survey_weight).collect(),
        het_weight,
        x,
        y,
        unit_area,
        census_x,
        census_weight,
        census_count,
        areas,
        sampled_areas,
        centered_x,
        centered_y,
        within_xx,
        within_xy,
    })
}

fn design_rank(x: &DMatrix<f64>) -> usize {
    let svd = x.clone().svd(false, false);
    let max_sv = svd.singular_values.max();
    if max_sv == 0.0 {
        return 0;
    }
    let tol = max_sv * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON;
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}
