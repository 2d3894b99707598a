//! Census completion and indicator evaluation per posterior draw.
//!
//! For each draw θ^(h) the out-of-sample units of every area are generated
//! from `N(x'β + u_d, σ²/w)` and mapped back to welfare. Census rows are
//! count-aggregated; accumulable indicators (FGT, unit means) are evaluated
//! in a single streaming pass, and only [`IndicatorSpec::Custom`] needs the
//! full welfare vector of an area.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::RhoGrid;
use crate::model::{Area, ValidatedProblem};
use crate::rng::{Purpose, SeededStream, StreamRng};
use crate::sampler::{draw_parameters, ParameterDraw};
use crate::transform::TransformSpec;

pub type UnitTerm = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type AreaFunction = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Target area parameter δ_d = h(welfare of all units in d).
#[derive(Clone)]
pub enum IndicatorSpec {
    /// Foster–Greer–Thorbecke measure with poverty line `z` in welfare units.
    Fgt { alpha: f64, poverty_line: f64 },
    /// Area mean of a per-unit term; accumulated without materialising.
    UnitMean { name: String, term: UnitTerm },
    /// Arbitrary function of the area's full welfare vector (sample units
    /// first, in input order, then generated units).
    Custom { name: String, h: AreaFunction },
}

impl fmt::Debug for IndicatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndicatorSpec::Fgt { alpha, poverty_line } => f
                .debug_struct("Fgt")
                .field("alpha", alpha)
                .field("poverty_line", poverty_line)
                .finish(),
            IndicatorSpec::UnitMean { name, .. } => write!(f, "UnitMean({name})"),
            IndicatorSpec::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl IndicatorSpec {
    pub fn fgt(alpha: f64, poverty_line: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(invalid(format!("FGT alpha must be >= 0, got {alpha}")));
        }
        if !(poverty_line > 0.0) || !poverty_line.is_finite() {
            return Err(invalid(format!("poverty line must be > 0, got {poverty_line}")));
        }
        Ok(IndicatorSpec::Fgt { alpha, poverty_line })
    }

    pub fn custom(name: impl Into<String>, h: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        IndicatorSpec::Custom {
            name: name.into(),
            h: Arc::new(h),
        }
    }

    pub fn unit_mean(name: impl Into<String>, term: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        IndicatorSpec::UnitMean {
            name: name.into(),
            term: Arc::new(term),
        }
    }

    /// Label used in output files: `F0`, `F1`, `F0.5`, or the custom name.
    pub fn name(&self) -> String {
        match self {
            IndicatorSpec::Fgt { alpha, .. } => format!("F{alpha}"),
            IndicatorSpec::UnitMean { name, .. } | IndicatorSpec::Custom { name, .. } => name.clone(),
        }
    }

    fn term(&self, welfare: f64) -> f64 {
        match self {
            IndicatorSpec::Fgt { alpha, poverty_line } => fgt_term(welfare, *alpha, *poverty_line),
            IndicatorSpec::UnitMean { term, .. } => term(welfare),
            IndicatorSpec::Custom { .. } => unreachable!("custom indicators are not additive"),
        }
    }
}

/// `((z − e)/z)^α · 1{e < z}`, with the α = 0 term equal to the indicator.
#[inline]
pub fn fgt_term(welfare: f64, alpha: f64, poverty_line: f64) -> f64 {
    if welfare < poverty_line {
        if alpha == 0.0 {
            1.0
        } else {
            let gap = (poverty_line - welfare) / poverty_line;
            if alpha == 1.0 {
                gap
            } else {
                gap.powf(alpha)
            }
        }
    } else {
        0.0
    }
}

/// FGT value of an area from its sample welfare and its generated
/// out-of-sample welfare; `N_d` is the combined length.
pub fn fgt_for_draw(sample: &[f64], generated: &[f64], alpha: f64, poverty_line: f64) -> f64 {
    let mut acc = 0.0;
    for &e in sample.iter().chain(generated) {
        acc += fgt_term(e, alpha, poverty_line);
    }
    acc / (sample.len() + generated.len()) as f64
}

/// Per-area posterior draws of one indicator, `values[area][h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorDraws {
    pub name: String,
    pub values: Vec<Vec<f64>>,
}

impl IndicatorDraws {
    pub fn draws(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

/// Calls `sink(y)` for every out-of-sample unit of `area`, on the response
/// scale, in census-row order.
fn for_each_generated(
    problem: &ValidatedProblem,
    draw: &ParameterDraw,
    area_pos: usize,
    rng: &mut StreamRng,
    mut sink: impl FnMut(f64),
) {
    let area = &problem.areas()[area_pos];
    let cx = problem.census_design();
    let u = draw.u[area_pos];
    for row in area.census.clone() {
        let mut mean = u;
        for j in 0..problem.p() {
            mean += cx[(row, j)] * draw.beta[j];
        }
        let sd = (draw.sigma2 / problem.census_weights()[row]).sqrt();
        for _ in 0..problem.census_counts()[row] {
            let z: f64 = rng.sample(StandardNormal);
            sink(mean + sd * z);
        }
    }
}

fn completion_stream(stream: &SeededStream, h: u64, area: &Area) -> SeededStream {
    stream.child(h).purpose(Purpose::Completion).area(area.id)
}

/// Generated out-of-sample welfare of one area for one draw. An area with
/// no census rows (sampling fraction one) yields an empty vector.
pub fn complete_area(
    problem: &ValidatedProblem,
    draw: &ParameterDraw,
    area_pos: usize,
    stream: &SeededStream,
) -> Vec<f64> {
    let t = problem.transform();
    let mut out = Vec::with_capacity(problem.areas()[area_pos].out_of_sample() as usize);
    for_each_generated(problem, draw, area_pos, &mut stream.rng(), |y| out.push(t.invert(y)));
    out
}

fn sample_welfare(problem: &ValidatedProblem, area: &Area) -> Vec<f64> {
    area.units.iter().map(|&i| problem.welfare()[i]).collect()
}

/// Response-scale cut above which a unit cannot be poor; slightly loose so
/// the exact welfare comparison decides every borderline case.
fn response_cut(transform: TransformSpec, poverty_line: f64) -> f64 {
    match transform.threshold(poverty_line) {
        Some(t) => t + 1e-9 * (1.0 + t.abs()),
        None => f64::INFINITY,
    }
}

enum Accumulator {
    Additive { sum: f64, cut: f64 },
    Materialized(Vec<f64>),
}

/// Evaluates every indicator for one (draw, area) in one streaming pass.
fn evaluate_area(
    problem: &ValidatedProblem,
    specs: &[IndicatorSpec],
    sample_sums: &[f64],
    draw: &ParameterDraw,
    area_pos: usize,
    rng: &mut StreamRng,
) -> Vec<f64> {
    let area = &problem.areas()[area_pos];
    let t = problem.transform();
    let mut accs: Vec<Accumulator> = specs
        .iter()
        .zip(sample_sums)
        .map(|(spec, &s)| match spec {
            IndicatorSpec::Fgt { poverty_line, .. } => Accumulator::Additive {
                sum: s,
                cut: response_cut(t, *poverty_line),
            },
            IndicatorSpec::UnitMean { .. } => Accumulator::Additive {
                sum: s,
                cut: f64::INFINITY,
            },
            IndicatorSpec::Custom { .. } => {
                let mut v = Vec::with_capacity(area.population as usize);
                v.extend(sample_welfare(problem, area));
                Accumulator::Materialized(v)
            }
        })
        .collect();
    let needs_all = specs.iter().any(|s| !matches!(s, IndicatorSpec::Fgt { .. }));
    let max_cut = accs
        .iter()
        .map(|a| match a {
            Accumulator::Additive { cut, .. } => *cut,
            Accumulator::Materialized(_) => f64::INFINITY,
        })
        .fold(f64::NEG_INFINITY, f64::max);
    for_each_generated(problem, draw, area_pos, rng, |y| {
        if !needs_all && y >= max_cut {
            return;
        }
        let e = t.invert(y);
        for (acc, spec) in accs.iter_mut().zip(specs) {
            match acc {
                Accumulator::Additive { sum, cut } => {
                    if y < *cut {
                        *sum += spec.term(e);
                    }
                }
                Accumulator::Materialized(v) => v.push(e),
            }
        }
    });
    let n = area.population as f64;
    accs.into_iter()
        .zip(specs)
        .map(|(acc, spec)| match (acc, spec) {
            (Accumulator::Additive { sum, .. }, _) => sum / n,
            (Accumulator::Materialized(v), IndicatorSpec::Custom { h, .. }) => h(&v),
            (Accumulator::Materialized(_), _) => unreachable!(),
        })
        .collect()
}

/// `Σ_{i∈s_d} term(E_di)` per (spec, area), summed in unit order.
fn sample_sums(problem: &ValidatedProblem, specs: &[IndicatorSpec]) -> Vec<Vec<f64>> {
    problem
        .areas()
        .iter()
        .map(|area| {
            specs
                .iter()
                .map(|spec| match spec {
                    IndicatorSpec::Custom { .. } => 0.0,
                    _ => {
                        let mut acc = 0.0;
                        for &i in &area.units {
                            acc += spec.term(problem.welfare()[i]);
                        }
                        acc
                    }
                })
                .collect()
        })
        .collect()
}

fn check_specs(specs: &[IndicatorSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(invalid("at least one indicator is required"));
    }
    for s in specs {
        if let IndicatorSpec::Fgt { alpha, poverty_line } = s {
            IndicatorSpec::fgt(*alpha, *poverty_line)?;
        }
    }
    Ok(())
}

fn transpose(per_draw: Vec<Vec<Vec<f64>>>, specs: &[IndicatorSpec], areas: usize) -> Vec<IndicatorDraws> {
    let h_count = per_draw.len();
    specs
        .iter()
        .enumerate()
        .map(|(s, spec)| IndicatorDraws {
            name: spec.name(),
            values: (0..areas)
                .map(|a| (0..h_count).map(|h| per_draw[h][a][s]).collect())
                .collect(),
        })
        .collect()
}

/// Indicator draws for given parameter draws. Draw `h` completes area `d`
/// with stream `stream/h/completion/d`.
pub fn indicator_draws(
    problem: &ValidatedProblem,
    params: &[ParameterDraw],
    specs: &[IndicatorSpec],
    stream: &SeededStream,
) -> Result<Vec<IndicatorDraws>> {
    check_specs(specs)?;
    let sums = sample_sums(problem, specs);
    let per_draw: Vec<Vec<Vec<f64>>> = params
        .par_iter()
        .enumerate()
        .map(|(h, draw)| {
            problem
                .areas()
                .iter()
                .enumerate()
                .map(|(a, area)| {
                    let mut rng = completion_stream(stream, h as u64, area).rng();
                    evaluate_area(problem, specs, &sums[a], draw, a, &mut rng)
                })
                .collect()
        })
        .collect();
    Ok(transpose(per_draw, specs, problem.area_count()))
}

/// Full HB pipeline: H parameter draws, census completion, indicator values.
pub fn hb_draws(
    problem: &ValidatedProblem,
    grid: &RhoGrid,
    specs: &[IndicatorSpec],
    draws: usize,
    stream: &SeededStream,
) -> Result<Vec<IndicatorDraws>> {
    let params = draw_parameters(problem, grid, draws, stream)?;
    indicator_draws(problem, &params, specs, stream)
}

/// Subsample drawn from each completed census in the fast variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsampleDesign {
    /// The whole completed census; reproduces [`hb_draws`].
    Census,
    /// Simple random sampling without replacement of a fixed size per area.
    SrsworFixed(usize),
    /// SRSWOR of `max(1, round(f · N_d))` units per area.
    SrsworFraction(f64),
}

impl SubsampleDesign {
    fn size(&self, area: &Area) -> Result<usize> {
        let n = area.population as usize;
        let m = match *self {
            SubsampleDesign::Census => n,
            SubsampleDesign::SrsworFixed(m) => m,
            SubsampleDesign::SrsworFraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(invalid(format!("subsample fraction must lie in (0, 1], got {f}")));
                }
                ((f * n as f64).round() as usize).max(1)
            }
        };
        if m > n {
            return Err(Error::SubsampleTooLarge {
                area: area.id,
                size: m,
                population: area.population,
            });
        }
        if m == 0 {
            return Err(invalid("subsample size must be >= 1"));
        }
        Ok(m)
    }
}

/// Fast HB: from every completed census draw a subsample by `design` and
/// record its design-based (Hájek, equal-weight under SRSWOR) estimate in
/// place of the census value. Custom indicators are applied to the
/// subsample's welfare vector.
pub fn fast_hb_draws(
    problem: &ValidatedProblem,
    grid: &RhoGrid,
    specs: &[IndicatorSpec],
    draws: usize,
    design: SubsampleDesign,
    stream: &SeededStream,
) -> Result<Vec<IndicatorDraws>> {
    check_specs(specs)?;
    let sizes: Vec<usize> = problem
        .areas()
        .iter()
        .map(|a| design.size(a))
        .collect::<Result<_>>()?;
    let params = draw_parameters(problem, grid, draws, stream)?;
    let per_draw: Vec<Vec<Vec<f64>>> = params
        .par_iter()
        .enumerate()
        .map(|(h, draw)| {
            problem
                .areas()
                .iter()
                .enumerate()
                .map(|(a, area)| {
                    let mut welfare = sample_welfare(problem, area);
                    welfare.extend(complete_area(problem, draw, a, &completion_stream(stream, h as u64, area)));
                    let selected: Vec<f64> = if design == SubsampleDesign::Census {
                        welfare
                    } else {
                        let mut rng = stream.child(h as u64).purpose(Purpose::Subsample).area(area.id).rng();
                        let mut idx = rand::seq::index::sample(&mut rng, welfare.len(), sizes[a]).into_vec();
                        idx.sort_unstable();
                        idx.into_iter().map(|i| welfare[i]).collect()
                    };
                    specs
                        .iter()
                        .map(|spec| match spec {
                            IndicatorSpec::Custom { h, .. } => h(&selected),
                            _ => {
                                let mut acc = 0.0;
                                for &e in &selected {
                                    acc += spec.term(e);
                                }
                                acc / selected.len() as f64
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(transpose(per_draw, specs, problem.area_count()))
}
