//! End-to-end estimation and diagnostics driven by a [`RunConfig`].

use crate::config::{RunConfig, TransformChoice};
use crate::diagnostics::{diagnose, DiagnosticsConfig, UnitDiagnostics};
use crate::error::{invalid, Result};
use crate::grid::build_rho_grid;
use crate::io::SummaryRow;
use crate::model::{validate_problem, CensusFrame, SurveySample, ValidatedProblem};
use crate::predictor::{fast_hb_draws, IndicatorDraws, IndicatorSpec};
use crate::rng::SeededStream;
use crate::sampler::draw_parameters;
use crate::shift::{select_shift, ShiftSelection};
use crate::summaries::summarize;
use crate::transform::TransformSpec;

#[derive(Debug, Clone)]
pub struct Estimate {
    pub problem: ValidatedProblem,
    pub transform: TransformSpec,
    pub shift: Option<ShiftSelection>,
    pub draws: Vec<IndicatorDraws>,
    pub rows: Vec<SummaryRow>,
}

/// Shift candidates that keep every sampled welfare value in the log domain.
pub fn admissible_shifts(sample: &SurveySample, candidates: &[f64]) -> Vec<f64> {
    let min = sample
        .records()
        .iter()
        .map(|r| r.welfare)
        .fold(f64::INFINITY, f64::min);
    candidates.iter().copied().filter(|c| min + c > 0.0).collect()
}

pub fn resolve_transform(
    sample: &SurveySample,
    census: &CensusFrame,
    config: &RunConfig,
) -> Result<(TransformSpec, Option<ShiftSelection>)> {
    match config.transform {
        TransformChoice::Identity => Ok((TransformSpec::Identity, None)),
        TransformChoice::LogShift(c) => Ok((TransformSpec::log_shift(c)?, None)),
        TransformChoice::LogShiftAuto => {
            let candidates = admissible_shifts(sample, &config.shift_candidates);
            if candidates.is_empty() {
                return Err(invalid("no shift candidate keeps all welfare values in the log domain"));
            }
            let sel = select_shift(sample, census, &candidates, config.grid, config.epsilon)?;
            Ok((TransformSpec::log_shift(sel.shift)?, Some(sel)))
        }
    }
}

pub fn indicator_specs(config: &RunConfig) -> Result<Vec<IndicatorSpec>> {
    let z = config
        .poverty_line
        .ok_or_else(|| invalid("a poverty line z is required for FGT indicators"))?;
    config.alphas.iter().map(|&a| IndicatorSpec::fgt(a, z)).collect()
}

pub fn estimate(sample: &SurveySample, census: &CensusFrame, config: &RunConfig, seed: u64) -> Result<Estimate> {
    config.check_estimation()?;
    let specs = indicator_specs(config)?;
    let (transform, shift) = resolve_transform(sample, census, config)?;
    let problem = validate_problem(sample, census, transform)?;
    let grid = build_rho_grid(&problem, config.grid, config.epsilon)?;
    let draws = fast_hb_draws(
        &problem,
        &grid,
        &specs,
        config.draws,
        config.subsample_design(),
        &SeededStream::new(seed),
    )?;
    let mut rows = Vec::with_capacity(problem.area_count() * draws.len());
    for (a, area) in problem.areas().iter().enumerate() {
        for d in &draws {
            rows.push(SummaryRow {
                area: area.id,
                indicator: d.name.clone(),
                summary: summarize(&d.values[a], config.level)?,
                sample_size: area.sample_size(),
                population: area.population,
            });
        }
    }
    Ok(Estimate {
        problem,
        transform,
        shift,
        draws,
        rows,
    })
}

pub fn diagnostics(sample: &SurveySample, census: &CensusFrame, config: &RunConfig, seed: u64) -> Result<Vec<UnitDiagnostics>> {
    config.check_estimation()?;
    let (transform, _) = resolve_transform(sample, census, config)?;
    let problem = validate_problem(sample, census, transform)?;
    let grid = build_rho_grid(&problem, config.grid, config.epsilon)?;
    let params = draw_parameters(&problem, &grid, config.draws, &SeededStream::new(seed))?;
    let dc = DiagnosticsConfig {
        low_cpo: config.low_cpo,
        extreme_cpo: config.extreme_cpo,
        ..DiagnosticsConfig::default()
    };
    diagnose(&problem, &params, &dc)
}
