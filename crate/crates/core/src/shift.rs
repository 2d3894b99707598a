//! Choice of the log-shift constant `c` in `Y = ln(E + c)`.
//!
//! For each candidate the model is fitted at the posterior mode of ρ and the
//! residuals `Y − x'β̂ − λ_d(ȳ_d − x̄_d'β̂)` are formed; the candidate whose
//! residual skewness is closest to zero wins, the smaller `c` on ties.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::build_rho_grid;
use crate::model::{validate_problem, CensusFrame, SurveySample, ValidatedProblem};
use crate::transform::TransformSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewnessPoint {
    pub shift: f64,
    pub skewness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSelection {
    pub shift: f64,
    /// One point per candidate, in the order given.
    pub curve: Vec<SkewnessPoint>,
}

/// Fisher's moment coefficient `m₃ / m₂^{3/2}` with divisor `n`. Zero for a
/// constant vector.
pub fn sample_skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 <= 0.0 {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}

/// Residuals of the plug-in fit at the modal grid ρ.
pub fn modal_residuals(problem: &ValidatedProblem, resolution: usize, epsilon: f64) -> Result<Vec<f64>> {
    let grid = build_rho_grid(problem, resolution, epsilon)?;
    let point = &grid.points()[grid.mode_index()];
    let beta = &point.beta_hat;
    let effects: Vec<f64> = problem
        .areas()
        .iter()
        .zip(&point.lambda)
        .map(|(area, l)| match &area.summary {
            Some(s) => l * (s.y_bar - s.x_bar.dot(beta)),
            None => 0.0,
        })
        .collect();
    let x = problem.design();
    Ok((0..problem.n())
        .map(|i| problem.responses()[i] - x.row(i).transpose().dot(beta) - effects[problem.unit_areas()[i]])
        .collect())
}

pub fn select_shift(
    sample: &SurveySample,
    census: &CensusFrame,
    candidates: &[f64],
    resolution: usize,
    epsilon: f64,
) -> Result<ShiftSelection> {
    if candidates.is_empty() {
        return Err(invalid("shift candidate grid is empty"));
    }
    let curve: Vec<SkewnessPoint> = candidates
        .par_iter()
        .map(|&c| {
            let problem = validate_problem(sample, census, TransformSpec::log_shift(c)?)?;
            let residuals = modal_residuals(&problem, resolution, epsilon)?;
            Ok(SkewnessPoint {
                shift: c,
                skewness: sample_skewness(&residuals),
            })
        })
        .collect::<Result<_>>()?;
    let best = curve
        .iter()
        .min_by(|a, b| {
            a.skewness
                .abs()
                .total_cmp(&b.skewness.abs())
                .then(a.shift.total_cmp(&b.shift))
        })
        .expect("nonempty curve");
    Ok(ShiftSelection {
        shift: best.shift,
        curve,
    })
}
