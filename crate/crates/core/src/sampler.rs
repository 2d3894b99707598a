//! Exact joint posterior draws by the chain rule: ρ from the grid, then
//! σ² | ρ, then β | σ², ρ, then u | β, σ², ρ. Draws are independent; there is
//! no Markov chain to monitor.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::{grid_point, precision_ratio, GridPoint, RhoGrid};
use crate::model::ValidatedProblem;
use crate::rng::{Purpose, SeededStream};

/// One joint draw θ = (u, β, σ², ρ).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDraw {
    pub rho: f64,
    pub sigma2: f64,
    pub beta: DVector<f64>,
    /// Area effects for every area, aligned with `problem.areas()`.
    pub u: Vec<f64>,
}

/// Samples a grid index from the normalised masses and jitters it by
/// `U(0, 1/R)`, clamped to `[ε, 1 − ε]`.
pub fn draw_rho<R: Rng + ?Sized>(grid: &RhoGrid, rng: &mut R) -> f64 {
    let r = grid.index_distribution().sample(rng);
    let jitter: f64 = rng.random::<f64>() / grid.resolution() as f64;
    (grid.points()[r].rho + jitter).clamp(grid.epsilon(), 1.0 - grid.epsilon())
}

/// Draws the precision `τ ~ Gamma(shape = (n − p)/2, rate = γ/2)` and returns
/// `σ² = 1/τ`. `rand_distr` is parameterised by scale, hence `2/γ`.
pub fn draw_sigma2<R: Rng + ?Sized>(point: &GridPoint, n: usize, p: usize, rng: &mut R) -> Result<f64> {
    let tau = draw_precision(point.gamma, n, p, rng)?;
    Ok(1.0 / tau)
}

pub(crate) fn draw_precision<R: Rng + ?Sized>(gamma: f64, n: usize, p: usize, rng: &mut R) -> Result<f64> {
    if n <= p {
        return Err(invalid(format!("need n > p, got n = {n}, p = {p}")));
    }
    let shape = (n - p) as f64 / 2.0;
    let scale = 2.0 / gamma;
    let dist = Gamma::new(shape, scale).map_err(|e| invalid(format!("gamma({shape}, {scale}): {e}")))?;
    Ok(dist.sample(rng))
}

/// `β ~ N(β̂, σ² Q⁻¹)` via `β = β̂ + σ L⁻ᵀ z` with `Q = L Lᵀ`.
pub fn draw_beta<R: Rng + ?Sized>(point: &GridPoint, sigma2: f64, rng: &mut R) -> DVector<f64> {
    let p = point.beta_hat.len();
    let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let v = point
        .q_factor
        .transpose()
        .solve_upper_triangular(&z)
        .expect("Cholesky factor has a positive diagonal");
    &point.beta_hat + v * sigma2.sqrt()
}

/// Area effects given (ρ, σ², β). Sampled areas use the conditional
/// `N(λ_d(ȳ_d − x̄_d'β), (1 − λ_d) σ² ρ/(1 − ρ))`; nonsampled areas fall back
/// to the prior `N(0, σ² ρ/(1 − ρ))`. Each area reads its own stream.
pub fn draw_area_effects(
    problem: &ValidatedProblem,
    point: &GridPoint,
    sigma2: f64,
    beta: &DVector<f64>,
    stream: &SeededStream,
) -> Vec<f64> {
    let k = precision_ratio(point.rho);
    problem
        .areas()
        .iter()
        .enumerate()
        .map(|(a, area)| {
            let mut rng = stream.area(area.id).rng();
            let z: f64 = rng.sample(StandardNormal);
            match &area.summary {
                Some(s) => {
                    let lambda = point.lambda[a];
                    let mean = lambda * (s.y_bar - s.x_bar.dot(beta));
                    // (1 − λ) ρ/(1 − ρ) = 1/(w_d· + (1 − ρ)/ρ)
                    let var = sigma2 / (s.weight_total + k);
                    mean + var.sqrt() * z
                }
                None => (sigma2 / k).sqrt() * z,
            }
        })
        .collect()
}

/// One full draw from the posterior using stream path `stream`.
pub fn draw_one(problem: &ValidatedProblem, grid: &RhoGrid, stream: &SeededStream) -> Result<ParameterDraw> {
    let rho = draw_rho(grid, &mut stream.purpose(Purpose::Rho).rng());
    let point = grid_point(problem, rho)?;
    let sigma2 = draw_sigma2(&point, problem.n(), problem.p(), &mut stream.purpose(Purpose::Sigma2).rng())?;
    let beta = draw_beta(&point, sigma2, &mut stream.purpose(Purpose::Beta).rng());
    let u = draw_area_effects(problem, &point, sigma2, &beta, &stream.purpose(Purpose::AreaEffect));
    Ok(ParameterDraw { rho, sigma2, beta, u })
}

/// `H` independent draws; draw `h` uses the sub-stream `stream/h`.
pub fn draw_parameters(
    problem: &ValidatedProblem,
    grid: &RhoGrid,
    draws: usize,
    stream: &SeededStream,
) -> Result<Vec<ParameterDraw>> {
    if draws == 0 {
        return Err(invalid("number of draws H must be >= 1"));
    }
    (0..draws as u64)
        .into_par_iter()
        .map(|h| draw_one(problem, grid, &stream.child(h)))
        .collect()
}
