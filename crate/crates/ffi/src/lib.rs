//! C ABI for `hbsae`.
//!
//! Objects are opaque handles created by `hbsae_*_new` functions and released
//! with the matching `hbsae_*_free`. Every fallible call returns an
//! [`HbsaeStatus`] code; the message of the last failure on the calling
//! thread is available from [`hbsae_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hbsae::config::{RunConfig, TransformChoice};
use hbsae::io::SummaryRow;
use hbsae::pipeline::{self, Estimate};
use hbsae::{CensusFrame, CensusRow, Error, SampleRecord, SurveySample};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HbsaeStatus {
    Ok = 0,
    /// Invalid argument or option.
    Usage = 2,
    /// The data fail model validation.
    Validation = 3,
    /// A required pointer was null.
    NullPointer = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

/// Survey sample handle.
pub struct HbsaeSample(SurveySample);

/// Census frame handle.
pub struct HbsaeCensus(CensusFrame);

/// Estimation result handle.
pub struct HbsaeEstimate(Estimate);

/// Estimation settings. Initialise with `hbsae_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HbsaeOptions {
    /// Posterior draws H.
    pub draws: usize,
    /// Grid resolution R.
    pub grid: usize,
    pub epsilon: f64,
    /// Credible level in (0, 1).
    pub level: f64,
    pub seed: u64,
    /// Poverty line in welfare units.
    pub poverty_line: f64,
    /// 0 identity, 1 log shift by `shift`.
    pub transform: u32,
    pub shift: f64,
}

/// Posterior summary of one area and indicator.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HbsaeSummary {
    pub area: i64,
    /// Position of the indicator's alpha in the list passed to the estimate.
    pub indicator: usize,
    pub mean: f64,
    pub sd: f64,
    /// `sd / mean`; NaN when undefined.
    pub cv: f64,
    pub et_lower: f64,
    pub et_upper: f64,
    pub hpd_lower: f64,
    pub hpd_upper: f64,
    pub sample_size: usize,
    pub population: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Failure {
    Null(&'static str),
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HbsaeStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HbsaeStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("{name} is null"));
            HbsaeStatus::NullPointer
        }
        Ok(Err(Failure::Usage(m))) => {
            set_error(m);
            HbsaeStatus::Usage
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            if e.is_validation() {
                HbsaeStatus::Validation
            } else {
                HbsaeStatus::Usage
            }
        }
        Err(_) => {
            set_error("internal panic".to_string());
            HbsaeStatus::Panic
        }
    }
}

unsafe fn required<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn optional<'a, T>(p: *const T, len: usize) -> Option<&'a [T]> {
    (!p.is_null() && len > 0).then(|| slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hbsae_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Fills `out` with the default estimation settings.
///
/// # Safety
/// `out` must point to writable memory for one `HbsaeOptions`.
#[no_mangle]
pub unsafe extern "C" fn hbsae_options_default(out: *mut HbsaeOptions) -> HbsaeStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let c = RunConfig::default();
        *out = HbsaeOptions {
            draws: c.draws,
            grid: c.grid,
            epsilon: c.epsilon,
            level: c.level,
            seed: hbsae::config::DEFAULT_SEED,
            poverty_line: f64::NAN,
            transform: 0,
            shift: 0.0,
        };
        Ok(())
    })
}

/// Builds a sample of `n` units with `p` covariates each. `covariates` is
/// row-major `n × p` and must include the intercept column when wanted.
/// `het_weights` and `survey_weights` may be null, meaning all ones.
///
/// # Safety
/// Non-null array arguments must hold `n` (or `n * p`) elements and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn hbsae_sample_new(
    n: usize,
    p: usize,
    areas: *const i64,
    welfare: *const f64,
    het_weights: *const f64,
    survey_weights: *const f64,
    covariates: *const f64,
    out: *mut *mut HbsaeSample,
) -> HbsaeStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let areas = required(areas, n, "areas")?;
        let welfare = required(welfare, n, "welfare")?;
        let x = required(covariates, n * p, "covariates")?;
        let het = optional(het_weights, n);
        let svy = optional(survey_weights, n);
        let records = (0..n)
            .map(|i| {
                let mut r = SampleRecord::new(areas[i], welfare[i], x[i * p..(i + 1) * p].to_vec());
                if let Some(w) = het {
                    r = r.with_het_weight(w[i]);
                }
                if let Some(w) = svy {
                    r = r.with_survey_weight(w[i]);
                }
                r
            })
            .collect();
        store(out, HbsaeSample(SurveySample::new(records, p)?));
        Ok(())
    })
}

/// Number of units in a sample, or 0 for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hbsae_sample_len(sample: *const HbsaeSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.len())
}

/// Builds a census of `rows` non-sampled covariate patterns. Each row has an
/// area, a unit count and `p` covariates (row-major). Area sizes are the
/// counts plus the sampled units. `het_weights` may be null.
///
/// # Safety
/// `sample` must be a live handle; arrays must hold `rows` (or `rows * p`)
/// elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hbsae_census_new(
    sample: *const HbsaeSample,
    rows: usize,
    p: usize,
    areas: *const i64,
    counts: *const u64,
    het_weights: *const f64,
    covariates: *const f64,
    out: *mut *mut HbsaeCensus,
) -> HbsaeStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let sample = handle(sample, "sample")?;
        if p != sample.0.p() {
            return Err(Failure::Usage(format!(
                "census has {p} covariates but the sample has {}",
                sample.0.p()
            )));
        }
        let areas = required(areas, rows, "areas")?;
        let counts = required(counts, rows, "counts")?;
        let x = required(covariates, rows * p, "covariates")?;
        let het = optional(het_weights, rows);
        let census_rows = (0..rows)
            .map(|i| CensusRow {
                area: areas[i],
                het_weight: het.map_or(1.0, |w| w[i]),
                count: counts[i],
                covariates: x[i * p..(i + 1) * p].to_vec(),
            })
            .collect();
        store(out, HbsaeCensus(CensusFrame::from_rows(census_rows, &sample.0)));
        Ok(())
    })
}

/// Runs the estimate for FGT indicators with the given alphas.
///
/// # Safety
/// `sample` and `census` must be live handles; `alphas` must hold
/// `alpha_count` values; `options` may be null for the defaults but then
/// no poverty line is set and the call fails; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hbsae_estimate(
    sample: *const HbsaeSample,
    census: *const HbsaeCensus,
    alphas: *const f64,
    alpha_count: usize,
    options: *const HbsaeOptions,
    out: *mut *mut HbsaeEstimate,
) -> HbsaeStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let sample = handle(sample, "sample")?;
        let census = handle(census, "census")?;
        let alphas = required(alphas, alpha_count, "alphas")?;
        let opts = match options.as_ref() {
            Some(o) => *o,
            None => {
                let mut o = std::mem::MaybeUninit::uninit();
                hbsae_options_default(o.as_mut_ptr());
                o.assume_init()
            }
        };
        let mut config = RunConfig::default();
        config.draws = opts.draws;
        config.grid = opts.grid;
        config.epsilon = opts.epsilon;
        config.level = opts.level;
        config.seed = Some(opts.seed);
        config.alphas = alphas.to_vec();
        config.poverty_line = opts.poverty_line.is_finite().then_some(opts.poverty_line);
        config.transform = match opts.transform {
            0 => TransformChoice::Identity,
            1 => TransformChoice::LogShift(opts.shift),
            t => return Err(Failure::Usage(format!("unknown transform code {t}"))),
        };
        let est = pipeline::estimate(&sample.0, &census.0, &config, opts.seed)?;
        store(out, HbsaeEstimate(est));
        Ok(())
    })
}

/// Number of summary rows (areas × indicators), or 0 for a null handle.
///
/// # Safety
/// `estimate` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hbsae_estimate_len(estimate: *const HbsaeEstimate) -> usize {
    estimate.as_ref().map_or(0, |e| e.0.rows.len())
}

/// Copies summary row `index` into `out`. Rows are ordered by area, then by
/// indicator.
///
/// # Safety
/// `estimate` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hbsae_estimate_summary(
    estimate: *const HbsaeEstimate,
    index: usize,
    out: *mut HbsaeSummary,
) -> HbsaeStatus {
    guard(|| {
        let est = handle(estimate, "estimate")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let rows = &est.0.rows;
        let row: &SummaryRow = rows
            .get(index)
            .ok_or_else(|| Failure::Usage(format!("row {index} out of range 0..{}", rows.len())))?;
        let indicators = est.0.draws.len().max(1);
        let s = &row.summary;
        *out = HbsaeSummary {
            area: row.area,
            indicator: index % indicators,
            mean: s.mean,
            sd: s.sd,
            cv: s.cv.unwrap_or(f64::NAN),
            et_lower: s.et_interval.0,
            et_upper: s.et_interval.1,
            hpd_lower: s.hpd_interval.0,
            hpd_upper: s.hpd_interval.1,
            sample_size: row.sample_size,
            population: row.population,
        };
        Ok(())
    })
}

/// Releases a sample. Null is ignored.
///
/// # Safety
/// `sample` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hbsae_sample_free(sample: *mut HbsaeSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Releases a census. Null is ignored.
///
/// # Safety
/// `census` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hbsae_census_free(census: *mut HbsaeCensus) {
    if !census.is_null() {
        drop(Box::from_raw(census));
    }
}

/// Releases an estimate. Null is ignored.
///
/// # Safety
/// `estimate` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hbsae_estimate_free(estimate: *mut HbsaeEstimate) {
    if !estimate.is_null() {
        drop(Box::from_raw(estimate));
    }
}
