//! Closed-form posterior quantities on a grid of intraclass correlations.
//!
//! For fixed ρ the marginal posterior of (β, σ²) is normal–inverse-gamma with
//! parameters `Q(ρ)`, `β̂(ρ) = Q⁻¹p`, `γ(ρ)`. The unnormalised log posterior
//! of ρ combines these with the shrinkage factors λ_d(ρ); it is normalised
//! over the grid by log-sum-exp.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::distr::weighted::WeightedIndex;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::ValidatedProblem;

pub const DEFAULT_GRID_SIZE: usize = 1000;
pub const DEFAULT_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GridPoint {
    pub rho: f64,
    /// Shrinkage factor per area, aligned with `problem.areas()`. Zero for
    /// nonsampled areas (`w_d· = 0`), which makes the area-effect conditional
    /// collapse to the prior.
    pub lambda: Vec<f64>,
    pub q: DMatrix<f64>,
    /// Lower Cholesky factor of `q`.
    pub q_factor: DMatrix<f64>,
    pub p_vec: DVector<f64>,
    pub beta_hat: DVector<f64>,
    pub gamma: f64,
    pub log_det_q: f64,
    pub log_kernel: f64,
}

/// `(1 − ρ)/ρ`, the prior precision ratio of the area effects.
#[inline]
pub fn precision_ratio(rho: f64) -> f64 {
    (1.0 - rho) / rho
}

/// `λ_d(ρ) = w_d· / (w_d· + (1 − ρ)/ρ)`.
#[inline]
pub fn shrinkage(weight_total: f64, rho: f64) -> f64 {
    weight_total / (weight_total + precision_ratio(rho))
}

pub fn grid_point(problem: &ValidatedProblem, rho: f64) -> Result<GridPoint> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid(format!("rho must lie in (0, 1), got {rho}")));
    }
    let k = precision_ratio(rho);
    let p = problem.p();
    let (within_xx, within_xy) = problem.within_scatter();
    let mut q = within_xx.clone();
    let mut p_vec = within_xy.clone();
    let mut lambda = vec![0.0; problem.area_count()];
    let mut sum_log_lambda = 0.0;
    for (a, area) in problem.areas().iter().enumerate() {
        let Some(s) = &area.summary else { continue };
        let l = shrinkage(s.weight_total, rho);
        lambda[a] = l;
        sum_log_lambda += l.ln();
        let c = k * l;
        q.ger(c, &s.x_bar, &s.x_bar, 1.0);
        p_vec.axpy(c * s.y_bar, &s.x_bar, 1.0);
    }
    // Symmetrise against rank-one rounding before factorising.
    let q = (&q + q.transpose()) * 0.5;
    let chol = Cholesky::<f64, Dyn>::new(q.clone()).ok_or(Error::SingularGridPoint { rho })?;
    let beta_hat = chol.solve(&p_vec);
    let q_factor = chol.l();
    let log_det_q = 2.0 * q_factor.diagonal().iter().map(|d| d.ln()).sum::<f64>();

    let (cx, cy) = problem.centered();
    let fitted = cx * &beta_hat;
    let mut gamma = 0.0;
    for ((&y, &f), &w) in cy.iter().zip(fitted.iter()).zip(problem.het_weights()) {
        let r = y - f;
        gamma += w * r * r;
    }
    for (a, area) in problem.areas().iter().enumerate() {
        let Some(s) = &area.summary else { continue };
        let r = s.y_bar - s.x_bar.dot(&beta_hat);
        gamma += k * lambda[a] * r * r;
    }

    let n = problem.n() as f64;
    let d_star = problem.sampled_area_count() as f64;
    let log_kernel = 0.5 * d_star * k.ln() - 0.5 * log_det_q - 0.5 * (n - p as f64) * gamma.ln()
        + 0.5 * sum_log_lambda;

    Ok(GridPoint {
        rho,
        lambda,
        q,
        q_factor,
        p_vec,
        beta_hat,
        gamma,
        log_det_q,
        log_kernel,
    })
}

/// Discretised posterior of ρ.
#[derive(Debug, Clone)]
pub struct RhoGrid {
    resolution: usize,
    epsilon: f64,
    points: Vec<GridPoint>,
    masses: Vec<f64>,
    rejected: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl RhoGrid {
    /// Builds the normalised grid from already evaluated points.
    pub fn from_points(points: Vec<GridPoint>, resolution: usize, epsilon: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let log_kernels: Vec<f64> = points.iter().map(|g| g.log_kernel).collect();
        let masses = normalize_log_kernels(&log_kernels)?;
        let index = WeightedIndex::new(masses.iter().copied())
            .map_err(|e| invalid(format!("grid masses: {e}")))?;
        Ok(Self {
            resolution,
            epsilon,
            points,
            masses,
            rejected: Vec::new(),
            index,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Grid values of ρ dropped because `Q(ρ)` failed to factorise.
    pub fn rejected(&self) -> &[f64] {
        &self.rejected
    }

    pub(crate) fn index_distribution(&self) -> &WeightedIndex<f64> {
        &self.index
    }

    /// Index of the highest-mass grid point (first on ties).
    pub fn mode_index(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.masses.iter().enumerate() {
            if m > self.masses[best] {
                best = i;
            }
        }
        best
    }

    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.masses
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }
}

/// `exp(l_r − max l) / Σ exp(l_s − max l)`.
pub fn normalize_log_kernels(log_kernels: &[f64]) -> Result<Vec<f64>> {
    let max = log_kernels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("log kernel"));
    }
    let mut masses: Vec<f64> = log_kernels.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = masses.iter().sum();
    // total >= 1 because the maximum contributes exp(0).
    assert!(total >= 1.0);
    for m in &mut masses {
        *m /= total;
    }
    Ok(masses)
}

/// Grid `ρ_r = (r − 0.5)/R`, `r = 1, …, R − 1`, restricted to `[ε, 1 − ε]`.
pub fn grid_rhos(resolution: usize, epsilon: f64) -> Vec<f64> {
    (1..resolution)
        .map(|r| (r as f64 - 0.5) / resolution as f64)
        .filter(|&rho| rho >= epsilon && rho <= 1.0 - epsilon)
        .collect()
}

pub fn build_rho_grid(problem: &ValidatedProblem, resolution: usize, epsilon: f64) -> Result<RhoGrid> {
    if resolution < 10 {
        return Err(invalid(format!("grid size R must be >= 10, got {resolution}")));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(invalid(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    let evaluated: Vec<(f64, Result<GridPoint>)> = grid_rhos(resolution, epsilon)
        .into_par_iter()
        .map(|rho| (rho, grid_point(problem, rho)))
        .collect();
    let mut points = Vec::with_capacity(evaluated.len());
    let mut rejected = Vec::new();
    for (rho, gp) in evaluated {
        match gp {
            Ok(g) if g.log_kernel.is_finite() => points.push(g),
            Ok(_) | Err(Error::SingularGridPoint { .. }) => rejected.push(rho),
            Err(e) => return Err(e),
        }
    }
    let mut grid = RhoGrid::from_points(points, resolution, epsilon)?;
    grid.rejected = rejected;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_problem, CensusFrame, SampleRecord, SurveySample};
    use crate::transform::TransformSpec;

    fn small_problem() -> ValidatedProblem {
        let ys = [1.0, 2.5, 3.0, 4.0, 6.5, 5.0];
        let ws = [1.0, 2.0, 0.5, 1.0, 1.5, 3.0];
        let recs = ys
            .iter()
            .zip(ws)
            .enumerate()
            .map(|(i, (&y, w))| SampleRecord::new(if i < 3 { 1 } else { 2 }, y, vec![1.0]).with_het_weight(w))
            .collect();
        let s = SurveySample::new(recs, 1).unwrap();
        validate_problem(&s, &CensusFrame::fully_sampled(&s), TransformSpec::Identity).unwrap()
    }

    #[test]
    fn lambda_values() {
        assert!((shrinkage(50.0, 0.5) - 50.0 / 51.0).abs() < 1e-15);
        // (1 - 0.82)/0.82 = 0.219512...
        let l = shrinkage(50.0, 0.82);
        assert!((l - 0.995629).abs() < 1e-6, "{l}");
    }

    #[test]
    fn lambda_increases_with_rho() {
        let mut prev = 0.0;
        for rho in grid_rhos(200, 1e-4) {
            let l = shrinkage(7.5, rho);
            assert!(l > prev && l < 1.0);
            prev = l;
        }
    }

    #[test]
    fn beta_hat_matches_dense_gls_intercept_only() {
        let prob = small_problem();
        let ys = prob.responses().clone();
        let ws = prob.het_weights().to_vec();
        for &rho in &[0.05, 0.3, 0.5, 0.77, 0.99] {
            let g = grid_point(&prob, rho).unwrap();
            // V = blockdiag(diag(1/w) + ρ/(1−ρ) 11'), X = 1.
            let mut v = DMatrix::zeros(6, 6);
            for i in 0..6 {
                for j in 0..6 {
                    let same = (i < 3) == (j < 3);
                    if same {
                        v[(i, j)] = rho / (1.0 - rho);
                    }
                }
                v[(i, i)] += 1.0 / ws[i];
            }
            let vi = v.try_inverse().unwrap();
            let one = DVector::from_element(6, 1.0);
            let xtvx = (one.transpose() * &vi * &one)[0];
            let xtvy = (one.transpose() * &vi * &ys)[0];
            let beta = xtvy / xtvx;
            assert!((g.beta_hat[0] - beta).abs() < 1e-10, "rho {rho}");
            let r = &ys - &one * beta;
            let gamma = (r.transpose() * &vi * &r)[0];
            assert!((g.gamma - gamma).abs() < 1e-10 * gamma.max(1.0));
        }
    }

    #[test]
    fn masses_sum_to_one_and_uniform_kernel() {
        let prob = small_problem();
        let grid = build_rho_grid(&prob, 100, 1e-4).unwrap();
        assert_eq!(grid.points().len(), 99);
        let total: f64 = grid.masses().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);

        let mut pts = grid.points().to_vec();
        for p in &mut pts {
            p.log_kernel = 0.0;
        }
        let flat = RhoGrid::from_points(pts, 100, 1e-4).unwrap();
        for &m in flat.masses() {
            assert!((m - 1.0 / 99.0).abs() < 1e-15);
        }
    }

    #[test]
    fn epsilon_truncates_grid() {
        assert_eq!(grid_rhos(1000, 1e-4).len(), 999);
        let r = grid_rhos(1000, 5e-3);
        assert!(r[0] >= 5e-3 && *r.last().unwrap() <= 1.0 - 5e-3);
        assert_eq!(r.len(), 990);
    }

    #[test]
    fn log_space_normalisation_is_stable() {
        let lk = [-1e6, -1e6 + 1.0, -1e6 + 2.0];
        let m = normalize_log_kernels(&lk).unwrap();
        let e = [(-2f64).exp(), (-1f64).exp(), 1.0];
        let t: f64 = e.iter().sum();
        for i in 0..3 {
            assert!((m[i] - e[i] / t).abs() < 1e-15);
        }
        assert!(normalize_log_kernels(&[f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn rejects_bad_grid_arguments() {
        let prob = small_problem();
        assert!(build_rho_grid(&prob, 9, 1e-4).is_err());
        assert!(build_rho_grid(&prob, 100, 0.0).is_err());
        assert!(build_rho_grid(&prob, 100, 0.5).is_err());
    }
}
