//! Fixtures and independent oracles shared by the integration tests.
//!
//! The oracles work on the full `n × n` covariance `V(ρ)` of the stacked
//! sample, never on the per-area decomposition used by the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

use hbsae::{AreaId, CensusFrame, CensusRow, SampleRecord, SurveySample};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Instance {
    pub sample: SurveySample,
    pub census: CensusFrame,
}

/// Random nested-error instance with `areas` sampled areas of 2..=max_units
/// units each, an intercept plus `p - 1` normal covariates, heteroscedastic
/// weights and one census row per area.
pub fn random_instance(seed: u64, areas: usize, max_units: usize, p: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let sizes: Vec<usize> = (0..areas).map(|_| rng.random_range(2..=max_units)).collect();
    instance_with_sizes(seed, &sizes, p)
}

/// As [`random_instance`] with fixed per-area sample sizes.
pub fn instance_with_sizes(seed: u64, sizes: &[usize], p: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = 0.5 + rng.random::<f64>();
    let rho = 0.1 + 0.8 * rng.random::<f64>();
    let sd_u = sigma * (rho / (1.0 - rho)).sqrt();
    let beta: Vec<f64> = (0..p).map(|_| 3.0 * rng.random::<f64>() - 1.5).collect();
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (a, &units) in sizes.iter().enumerate() {
        let id = a as AreaId + 1;
        let u: f64 = sd_u * rng.sample::<f64, _>(StandardNormal);
        for _ in 0..units {
            let mut x = vec![1.0];
            x.extend((1..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let w = 0.5 + 1.5 * rng.random::<f64>();
            let e: f64 = sigma / w.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let y = x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + u + e;
            records.push(SampleRecord::new(id, y, x).with_het_weight(w));
        }
        let mut x = vec![1.0];
        x.extend((1..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        rows.push(CensusRow {
            area: id,
            het_weight: 1.0,
            count: rng.random_range(1..20),
            covariates: x,
        });
    }
    let sample = SurveySample::new(records, p).unwrap();
    let census = CensusFrame::from_rows(rows, &sample);
    Instance { sample, census }
}

/// Stacked `X`, `y` and `V(ρ) = blockdiag(diag(1/w) + ρ/(1−ρ)·11')`.
pub fn dense_system(sample: &SurveySample, rho: f64) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let r = sample.records();
    let n = r.len();
    let p = sample.p();
    let x = DMatrix::from_fn(n, p, |i, j| r[i].covariates[j]);
    let y = DVector::from_fn(n, |i, _| r[i].welfare);
    let ratio = rho / (1.0 - rho);
    let v = DMatrix::from_fn(n, n, |i, j| {
        let mut s = if r[i].area == r[j].area { ratio } else { 0.0 };
        if i == j {
            s += 1.0 / r[i].het_weight;
        }
        s
    });
    (x, y, v)
}

pub struct Gls {
    pub beta_hat: DVector<f64>,
    pub gamma: f64,
    /// `−½ ln|V| − ½ ln|X'V⁻¹X| − (n−p)/2 · ln γ`.
    pub log_kernel: f64,
}

pub fn dense_gls(sample: &SurveySample, rho: f64) -> Gls {
    let (x, y, v) = dense_system(sample, rho);
    let n = x.nrows();
    let p = x.ncols();
    let v_inv = v.clone().try_inverse().expect("V invertible");
    let xtvx = x.transpose() * &v_inv * &x;
    let beta_hat = xtvx.clone().try_inverse().expect("X'V⁻¹X invertible") * (x.transpose() * &v_inv * &y);
    let r = &y - &x * &beta_hat;
    let gamma = (r.transpose() * &v_inv * &r)[(0, 0)];
    let log_kernel =
        -0.5 * v.determinant().ln() - 0.5 * xtvx.determinant().ln() - 0.5 * (n - p) as f64 * gamma.ln();
    Gls {
        beta_hat,
        gamma,
        log_kernel,
    }
}

/// Midpoint grid `(r − 0.5)/R`, `r = 1..R−1`, restricted to `[ε, 1 − ε]`.
pub fn oracle_rhos(resolution: usize, epsilon: f64) -> Vec<f64> {
    (1..resolution)
        .map(|r| (r as f64 - 0.5) / resolution as f64)
        .filter(|&rho| rho >= epsilon && rho <= 1.0 - epsilon)
        .collect()
}

pub fn normalized(log_k: &[f64]) -> Vec<f64> {
    let m = log_k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = log_k.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub struct PosteriorMeans {
    pub sigma2: f64,
    pub beta: DVector<f64>,
    pub u: BTreeMap<AreaId, f64>,
}

/// Posterior means by quadrature over the ρ grid with closed-form inner
/// expectations: `E[σ²|ρ] = γ/(n−p−2)`, `E[β|ρ] = β̂`,
/// `E[u_d|ρ] = λ_d(ȳ_d − x̄_d'β̂)`.
pub fn quadrature_means(sample: &SurveySample, rhos: &[f64]) -> PosteriorMeans {
    let n = sample.len();
    let p = sample.p();
    let fits: Vec<Gls> = rhos.iter().map(|&r| dense_gls(sample, r)).collect();
    let masses = normalized(&fits.iter().map(|f| f.log_kernel).collect::<Vec<_>>());
    let mut sigma2 = 0.0;
    let mut beta = DVector::zeros(p);
    let mut u: BTreeMap<AreaId, f64> = BTreeMap::new();
    for ((fit, &rho), m) in fits.iter().zip(rhos).zip(&masses) {
        sigma2 += m * fit.gamma / (n - p - 2) as f64;
        beta += &fit.beta_hat * *m;
        let mut groups: BTreeMap<AreaId, (f64, f64, DVector<f64>)> = BTreeMap::new();
        for r in sample.records() {
            let g = groups.entry(r.area).or_insert((0.0, 0.0, DVector::zeros(p)));
            g.0 += r.het_weight;
            g.1 += r.het_weight * r.welfare;
            g.2 += DVector::from_column_slice(&r.covariates) * r.het_weight;
        }
        for (area, (wt, wy, wx)) in groups {
            let lambda = wt / (wt + (1.0 - rho) / rho);
            let resid = wy / wt - (wx / wt).dot(&fit.beta_hat);
            *u.entry(area).or_insert(0.0) += m * lambda * resid;
        }
    }
    PosteriorMeans { sigma2, beta, u }
}

/// Sample mean and its standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
