//! Leave-one-out diagnostics from a single set of full-data posterior draws.
//!
//! Deleting unit `di` reweights draw `h` by `v_h ∝ 1/f(Y_di | θ_h)`, so the
//! deleted predictive moments, standardized cross-validation residuals and
//! conditional predictive ordinates need no refit. All reciprocal-density
//! sums are done in log space.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::ValidatedProblem;
use crate::sampler::ParameterDraw;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsConfig {
    /// Units with CPO below this are reported as low.
    pub low_cpo: f64,
    /// Units with CPO below this are reported as extreme outliers.
    pub extreme_cpo: f64,
    /// Floor applied to a deleted variance made non-positive by MC noise.
    pub variance_floor: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            low_cpo: 0.025,
            extreme_cpo: 0.014,
            variance_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UnitFlags {
    pub low_cpo: bool,
    pub extreme: bool,
    pub variance_clamped: bool,
    /// Log densities were not finite; uniform weights were used.
    pub density_failure: bool,
}

impl UnitFlags {
    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.extreme {
            out.push("extreme");
        } else if self.low_cpo {
            out.push("low_cpo");
        }
        if self.variance_clamped {
            out.push("variance_clamped");
        }
        if self.density_failure {
            out.push("density_failure");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitDiagnostics {
    /// Position of the unit in the sample.
    pub unit: usize,
    pub area: i64,
    pub y: f64,
    pub deleted_mean: f64,
    pub deleted_var: f64,
    pub residual: f64,
    pub cpo: f64,
    pub survey_weight: f64,
    pub flags: UnitFlags,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeletedMoments {
    pub mean: f64,
    pub var: f64,
    pub clamped: bool,
}

#[inline]
pub fn normal_log_density(y: f64, mean: f64, var: f64) -> f64 {
    let r = y - mean;
    -0.5 * (LN_2PI + var.ln() + r * r / var)
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Conditional mean `x'β_h + u_d,h` of one unit under each draw.
pub fn unit_means(x: &[f64], area_pos: usize, draws: &[ParameterDraw]) -> Vec<f64> {
    draws
        .iter()
        .map(|d| x.iter().zip(d.beta.iter()).map(|(a, b)| a * b).sum::<f64>() + d.u[area_pos])
        .collect()
}

/// `log f(Y | θ_h)` with `f` the normal density `N(x'β + u_d, σ²/w)`.
pub fn unit_log_densities(y: f64, x: &[f64], het_weight: f64, area_pos: usize, draws: &[ParameterDraw]) -> Vec<f64> {
    unit_means(x, area_pos, draws)
        .into_iter()
        .zip(draws)
        .map(|(m, d)| normal_log_density(y, m, d.sigma2 / het_weight))
        .collect()
}

/// `v_h = f_h⁻¹ / Σ_k f_k⁻¹` from log densities. The flag is set, and the
/// weights are uniform, when any log density is not finite.
pub fn importance_weights_from_log_densities(log_f: &[f64]) -> (Vec<f64>, bool) {
    let h = log_f.len();
    if h == 0 {
        return (Vec::new(), true);
    }
    if log_f.iter().any(|l| !l.is_finite()) {
        return (vec![1.0 / h as f64; h], true);
    }
    let lse = log_sum_exp(log_f.iter().map(|l| -l));
    (log_f.iter().map(|l| (-l - lse).exp()).collect(), false)
}

pub fn importance_weights(
    y: f64,
    x: &[f64],
    het_weight: f64,
    area_pos: usize,
    draws: &[ParameterDraw],
) -> (Vec<f64>, bool) {
    importance_weights_from_log_densities(&unit_log_densities(y, x, het_weight, area_pos, draws))
}

/// Harmonic mean of the conditional densities, `[H⁻¹ Σ f_h⁻¹]⁻¹`.
pub fn cpo_from_log_densities(log_f: &[f64]) -> Result<f64> {
    if log_f.is_empty() {
        return Err(invalid("CPO needs at least one draw"));
    }
    if log_f.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("log density"));
    }
    let lse = log_sum_exp(log_f.iter().map(|l| -l));
    Ok(((log_f.len() as f64).ln() - lse).exp())
}

pub fn cpo(y: f64, x: &[f64], het_weight: f64, area_pos: usize, draws: &[ParameterDraw]) -> Result<f64> {
    cpo_from_log_densities(&unit_log_densities(y, x, het_weight, area_pos, draws))
}

/// Weighted moments of `Y_di` given the sample without `di`:
/// `E ≈ Σ v_h m_h`, `E[Y²] ≈ Σ v_h (σ²_h/w + m_h²)`.
pub fn deleted_moments(
    x: &[f64],
    het_weight: f64,
    area_pos: usize,
    draws: &[ParameterDraw],
    weights: &[f64],
    variance_floor: f64,
) -> DeletedMoments {
    let means = unit_means(x, area_pos, draws);
    let mut first = 0.0;
    let mut second = 0.0;
    for ((m, d), v) in means.iter().zip(draws).zip(weights) {
        first += v * m;
        second += v * (d.sigma2 / het_weight + m * m);
    }
    let var = second - first * first;
    if var > variance_floor {
        DeletedMoments {
            mean: first,
            var,
            clamped: false,
        }
    } else {
        DeletedMoments {
            mean: first,
            var: variance_floor,
            clamped: true,
        }
    }
}

/// `(Y − E[Y | y_s(di)]) / √V[Y | y_s(di)]`.
pub fn cv_residual(y: f64, moments: &DeletedMoments) -> Result<f64> {
    if !(moments.var > 0.0) {
        return Err(invalid("deleted variance must be positive"));
    }
    Ok((y - moments.mean) / moments.var.sqrt())
}

/// Diagnostics for every sample unit, in sample order.
pub fn diagnose(problem: &ValidatedProblem, draws: &[ParameterDraw], config: &DiagnosticsConfig) -> Result<Vec<UnitDiagnostics>> {
    if draws.is_empty() {
        return Err(invalid("diagnostics need at least one draw"));
    }
    let x = problem.design();
    (0..problem.n())
        .into_par_iter()
        .map(|i| {
            let a = problem.unit_areas()[i];
            let xi: Vec<f64> = x.row(i).iter().copied().collect();
            let y = problem.responses()[i];
            let w = problem.het_weights()[i];
            let log_f = unit_log_densities(y, &xi, w, a, draws);
            let (weights, density_failure) = importance_weights_from_log_densities(&log_f);
            let moments = deleted_moments(&xi, w, a, draws, &weights, config.variance_floor);
            let cpo = cpo_from_log_densities(&log_f).unwrap_or(0.0);
            let residual = cv_residual(y, &moments)?;
            Ok(UnitDiagnostics {
                unit: i,
                area: problem.areas()[a].id,
                y,
                deleted_mean: moments.mean,
                deleted_var: moments.var,
                residual,
                cpo,
                survey_weight: problem.survey_weights()[i],
                flags: UnitFlags {
                    low_cpo: cpo < config.low_cpo,
                    extreme: cpo < config.extreme_cpo,
                    variance_clamped: moments.clamped,
                    density_failure,
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn draw(beta: f64, u: f64, sigma2: f64) -> ParameterDraw {
        ParameterDraw {
            rho: 0.5,
            sigma2,
            beta: DVector::from_vec(vec![beta]),
            u: vec![u],
        }
    }

    #[test]
    fn uniform_when_densities_equal() {
        let (v, flag) = importance_weights_from_log_densities(&[-1.3; 8]);
        assert!(!flag);
        for w in v {
            assert!((w - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn two_draw_hand_values() {
        let lf = [0.2f64.ln(), 0.3f64.ln()];
        let (v, _) = importance_weights_from_log_densities(&lf);
        assert!((v[0] - 0.6).abs() < 1e-12);
        assert!((v[1] - 0.4).abs() < 1e-12);
        assert!((cpo_from_log_densities(&lf).unwrap() - 0.24).abs() < 1e-12);
        assert!((cpo_from_log_densities(&[0.7f64.ln(); 5]).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn weights_normalised_even_far_in_tail() {
        let lf: Vec<f64> = (0..100).map(|i| -5000.0 - i as f64 * 3.7).collect();
        let (v, flag) = importance_weights_from_log_densities(&lf);
        assert!(!flag);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (v, flag) = importance_weights_from_log_densities(&[f64::NEG_INFINITY, -1.0]);
        assert!(flag);
        assert_eq!(v, vec![0.5, 0.5]);
    }

    #[test]
    fn degenerate_draw_moments() {
        let draws = vec![draw(2.0, 0.5, 0.8); 10];
        let v = vec![0.1; 10];
        let m = deleted_moments(&[1.0], 2.0, 0, &draws, &v, 1e-12);
        assert!((m.mean - 2.5).abs() < 1e-12);
        assert!((m.var - 0.4).abs() < 1e-12);

        let draws = vec![draw(1.0, 0.0, 1.0), draw(3.0, 0.0, 0.5), draw(9.0, 0.0, 4.0)];
        let m = deleted_moments(&[1.0], 1.0, 0, &draws, &[0.0, 1.0, 0.0], 1e-12);
        assert_eq!((m.mean, m.var), (3.0, 0.5));
    }

    #[test]
    fn residual_cases() {
        let m = DeletedMoments { mean: 2.0, var: 4.0, clamped: false };
        assert_eq!(cv_residual(2.0, &m).unwrap(), 0.0);
        assert_eq!(cv_residual(4.0, &m).unwrap(), 1.0);
        let z = DeletedMoments { mean: 0.0, var: 0.0, clamped: true };
        assert!(cv_residual(1.0, &z).is_err());
    }

    #[test]
    fn cpo_bounded_by_max_density() {
        let draws: Vec<_> = (0..50).map(|i| draw(1.0 + 0.01 * i as f64, 0.1, 0.5 + 0.02 * i as f64)).collect();
        let lf = unit_log_densities(1.7, &[1.0], 1.0, 0, &draws);
        let c = cpo_from_log_densities(&lf).unwrap();
        let max = lf.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
        assert!(c <= max);
    }

    #[test]
    fn clamp_flagged() {
        let draws = vec![draw(1.0, 0.0, 1e-20); 3];
        let m = deleted_moments(&[1.0], 1.0, 0, &draws, &[1.0 / 3.0; 3], 1e-12);
        assert!(m.clamped);
        assert_eq!(m.var, 1e-12);
    }

    #[test]
    fn flag_labels() {
        let f = UnitFlags { low_cpo: true, extreme: true, variance_clamped: false, density_failure: false };
        assert_eq!(f.labels(), vec!["extreme"]);
        let f = UnitFlags { low_cpo: true, ..Default::default() };
        assert_eq!(f.labels(), vec!["low_cpo"]);
    }
}
