//! Frequentist evaluation of the HB estimators under the model.
//!
//! A synthetic population with fixed Bernoulli covariates and fixed sample
//! indices is regenerated `I` times from the nested error model. Each
//! replicate records the true area FGT values, the HB posterior summaries
//! and the direct Hájek estimates; these are reduced per area in replicate
//! order, so results do not depend on the number of worker threads.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::build_rho_grid;
use crate::model::{validate_problem, AreaId, CensusFrame, CensusRow, SampleRecord, SurveySample};
use crate::predictor::{fgt_term, hb_draws, IndicatorSpec};
use crate::rng::{Purpose, SeededStream};
use crate::summaries::summarize;
use crate::transform::TransformSpec;

/// Covariate law `X₁ ~ Bernoulli(base + slope·d/D)`, `X₂ ~ Bernoulli(p2)`,
/// preceded by an intercept. Only the first `β.len()` columns are used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariateLaw {
    pub p1_base: f64,
    pub p1_slope: f64,
    pub p2: f64,
}

impl Default for CovariateLaw {
    fn default() -> Self {
        Self {
            p1_base: 0.3,
            p1_slope: 0.5,
            p2: 0.2,
        }
    }
}

impl CovariateLaw {
    /// Success probability of `X₁` in area `d` (1-based) out of `D`.
    pub fn p1(&self, d: usize, areas: usize) -> f64 {
        self.p1_base + self.p1_slope * d as f64 / areas as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// `N_d` per area.
    pub population_sizes: Vec<u64>,
    /// `n_d` per area; zero marks a nonsampled area.
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub draws: usize,
    pub grid_size: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub rho: f64,
    pub poverty_line: f64,
    pub alphas: Vec<f64>,
    pub level: f64,
    pub covariates: CovariateLaw,
}

/// σ_u² = 0.15², σ² = 0.25.
const STUDY_RHO: f64 = 0.0225 / 0.2725;

impl SimConfig {
    fn base(areas: usize, population: u64, sample: usize) -> Self {
        Self {
            population_sizes: vec![population; areas],
            sample_sizes: vec![sample; areas],
            replicates: 200,
            draws: 500,
            grid_size: 500,
            epsilon: 5e-4,
            seed: 20_240_601,
            beta: vec![3.0, 0.03, -0.04],
            sigma2: 0.25,
            rho: STUDY_RHO,
            poverty_line: 12.0,
            alphas: vec![0.0, 1.0],
            level: 0.95,
            covariates: CovariateLaw::default(),
        }
    }

    pub const PRESETS: [&'static str; 4] = ["paper-s5-scaled", "paper-s5-cv-curve", "paper-s5-full", "smoke"];

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-s5-scaled" => Ok(Self::base(80, 250, 50)),
            "paper-s5-full" => Ok(Self {
                replicates: 1000,
                draws: 1000,
                grid_size: 1000,
                ..Self::base(80, 250, 50)
            }),
            "paper-s5-cv-curve" => {
                let mut c = Self::base(80, 250, 0);
                c.sample_sizes = [20, 30, 40, 50].iter().flat_map(|&n| [n; 20]).collect();
                c.beta = vec![3.0];
                c.replicates = 100;
                Ok(c)
            }
            "smoke" => Ok(Self {
                replicates: 1,
                draws: 100,
                grid_size: 100,
                ..Self::base(6, 40, 8)
            }),
            other => Err(invalid(format!(
                "unknown preset {other:?}; expected one of {}",
                Self::PRESETS.join(", ")
            ))),
        }
    }

    pub fn areas(&self) -> usize {
        self.population_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.areas();
        if d == 0 || self.sample_sizes.len() != d {
            return Err(invalid("population and sample size schedules must be nonempty and of equal length"));
        }
        for (a, (&big, &small)) in self.population_sizes.iter().zip(&self.sample_sizes).enumerate() {
            if small as u64 > big || big == 0 {
                return Err(invalid(format!("area {}: need 0 <= n_d <= N_d and N_d >= 1", a + 1)));
            }
        }
        if self.replicates == 0 {
            return Err(invalid("replicates must be >= 1"));
        }
        if !(1..=3).contains(&self.beta.len()) {
            return Err(invalid("beta must have 1 to 3 coefficients"));
        }
        if !(self.sigma2 > 0.0) || !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(invalid("need sigma2 > 0 and 0 < rho < 1"));
        }
        if self.alphas.is_empty() {
            return Err(invalid("at least one FGT alpha is required"));
        }
        for &alpha in &self.alphas {
            IndicatorSpec::fgt(alpha, self.poverty_line)?;
        }
        let l = &self.covariates;
        for d in 1..=d {
            let p = l.p1(d, self.areas());
            if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&l.p2) {
                return Err(invalid("covariate probabilities must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Root stream of the study, keyed by `seed`.
    pub fn root(&self) -> SeededStream {
        SeededStream::new(self.seed)
    }
}

/// Fixed covariates of every population unit, one row per unit including
/// the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub areas: Vec<Vec<Vec<f64>>>,
}

pub fn generate_population(config: &SimConfig, stream: &SeededStream) -> Result<Population> {
    config.validate()?;
    let d_count = config.areas();
    let p = config.beta.len();
    let areas = (0..d_count)
        .map(|a| {
            let d = a + 1;
            let mut rng = stream.area(d as AreaId).rng();
            let p1 = config.covariates.p1(d, d_count);
            (0..config.population_sizes[a])
                .map(|_| {
                    let x1 = f64::from(u8::from(rng.random_bool(p1)));
                    let x2 = f64::from(u8::from(rng.random_bool(config.covariates.p2)));
                    [1.0, x1, x2][..p].to_vec()
                })
                .collect()
        })
        .collect();
    Ok(Population { areas })
}

/// Responses `Y = x'β + u_d + e` for one replicate, per area.
pub fn generate_responses(config: &SimConfig, population: &Population, stream: &SeededStream) -> Vec<Vec<f64>> {
    let sd_u = (config.sigma2 * config.rho / (1.0 - config.rho)).sqrt();
    let sd_e = config.sigma2.sqrt();
    population
        .areas
        .iter()
        .enumerate()
        .map(|(a, units)| {
            let mut rng = stream.area(a as AreaId + 1).rng();
            let u = sd_u * rng.sample::<f64, _>(StandardNormal);
            units
                .iter()
                .map(|x| {
                    let e: f64 = rng.sample(StandardNormal);
                    x.iter().zip(&config.beta).map(|(a, b)| a * b).sum::<f64>() + u + sd_e * e
                })
                .collect()
        })
        .collect()
}

/// Sorted SRSWOR indices per area, drawn independently across areas.
pub fn srswor_sample(population_sizes: &[u64], sample_sizes: &[usize], stream: &SeededStream) -> Result<Vec<Vec<usize>>> {
    if population_sizes.len() != sample_sizes.len() {
        return Err(invalid("size schedules differ in length"));
    }
    population_sizes
        .iter()
        .zip(sample_sizes)
        .enumerate()
        .map(|(a, (&big, &small))| {
            if small as u64 > big {
                return Err(invalid(format!("area {}: n_d = {small} exceeds N_d = {big}", a + 1)));
            }
            let mut rng = stream.area(a as AreaId + 1).rng();
            let mut idx = index::sample(&mut rng, big as usize, small).into_vec();
            idx.sort_unstable();
            Ok(idx)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectEstimate {
    pub estimate: f64,
    /// Linearised design variance; `None` for a single unit.
    pub variance: Option<f64>,
}

impl DirectEstimate {
    pub fn cv(&self) -> Option<f64> {
        match self.variance {
            Some(v) if self.estimate > 0.0 => Some(v.sqrt() / self.estimate),
            _ => None,
        }
    }
}

/// Hájek estimate `Σ wᵢ g(Eᵢ) / Σ wᵢ` of an FGT measure with the
/// linearisation variance `(1 − n/N) · n/(n−1) · Σ wᵢ²(gᵢ − F̂)² / (Σ wᵢ)²`.
/// With equal weights this is the SRSWOR variance of a sample mean. The
/// correction is skipped when `population` is `None`.
pub fn direct_fgt(
    welfare: &[f64],
    weights: &[f64],
    alpha: f64,
    poverty_line: f64,
    population: Option<u64>,
) -> Result<DirectEstimate> {
    let n = welfare.len();
    if n == 0 {
        return Err(invalid("direct estimator needs at least one unit"));
    }
    if weights.len() != n || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(invalid("direct estimator needs one positive weight per unit"));
    }
    let g: Vec<f64> = welfare.iter().map(|&e| fgt_term(e, alpha, poverty_line)).collect();
    let total: f64 = weights.iter().sum();
    let estimate = g.iter().zip(weights).map(|(g, w)| g * w).sum::<f64>() / total;
    let variance = (n >= 2).then(|| {
        let fpc = population.map_or(1.0, |big| 1.0 - n as f64 / big as f64);
        let ss: f64 = g.iter().zip(weights).map(|(g, w)| (w * (g - estimate)).powi(2)).sum();
        fpc.max(0.0) * n as f64 / (n - 1) as f64 * ss / (total * total)
    });
    Ok(DirectEstimate { estimate, variance })
}

/// Population FGT value of every area on the welfare scale `E = exp(Y)`.
pub fn true_fgt(responses: &[Vec<f64>], alpha: f64, poverty_line: f64) -> Vec<f64> {
    responses
        .iter()
        .map(|ys| ys.iter().map(|y| fgt_term(y.exp(), alpha, poverty_line)).sum::<f64>() / ys.len() as f64)
        .collect()
}

/// FGT value of the whole population.
pub fn population_fgt(responses: &[Vec<f64>], alpha: f64, poverty_line: f64) -> f64 {
    let n: usize = responses.iter().map(Vec::len).sum();
    responses
        .iter()
        .flatten()
        .map(|y| fgt_term(y.exp(), alpha, poverty_line))
        .sum::<f64>()
        / n as f64
}

/// Per-area outcome of one replicate for one indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaOutcome {
    pub truth: f64,
    pub hb: f64,
    pub hb_cv: Option<f64>,
    pub et: (f64, f64),
    pub hpd: (f64, f64),
    pub direct: Option<DirectEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    /// `[indicator][area]`.
    pub indicators: Vec<Vec<AreaOutcome>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaMetrics {
    pub area: AreaId,
    pub sample_size: usize,
    pub population: u64,
    pub mc_mean_hb: f64,
    pub mc_mean_true: f64,
    pub mse: f64,
    /// Mean of `hb − truth` and its Monte Carlo standard error.
    pub mean_error: f64,
    pub error_se: f64,
    pub cov_et_pct: f64,
    pub cov_hpd_pct: f64,
    pub width_et: f64,
    pub width_hpd: f64,
    pub mean_cv_pct: Option<f64>,
    /// Over replicates where the direct CV is defined.
    pub mean_cv_direct_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledMetrics {
    pub cov_et_pct: f64,
    pub cov_hpd_pct: f64,
    pub width_et: f64,
    pub width_hpd: f64,
    pub mse: f64,
    pub mean_cv_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMetrics {
    pub name: String,
    pub areas: Vec<AreaMetrics>,
    pub pooled: PooledMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyMetrics {
    pub replicates: usize,
    pub indicators: Vec<IndicatorMetrics>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Sample and census frame of one replicate. The census aggregates the
/// out-of-sample units of each area by covariate pattern.
pub fn replicate_data(
    population: &Population,
    responses: &[Vec<f64>],
    sample_idx: &[Vec<usize>],
) -> Result<(SurveySample, CensusFrame)> {
    let p = population.areas.first().and_then(|a| a.first()).map_or(1, Vec::len);
    let mut records = Vec::new();
    let mut rows = Vec::new();
    let mut sizes = BTreeMap::new();
    for (a, units) in population.areas.iter().enumerate() {
        let id = a as AreaId + 1;
        sizes.insert(id, units.len() as u64);
        let mut in_sample = vec![false; units.len()];
        for &i in &sample_idx[a] {
            in_sample[i] = true;
            records.push(SampleRecord::new(id, responses[a][i].exp(), units[i].clone()));
        }
        let mut patterns: BTreeMap<Vec<u64>, (Vec<f64>, u64)> = BTreeMap::new();
        for (i, x) in units.iter().enumerate() {
            if !in_sample[i] {
                let key = x.iter().map(|v| v.to_bits()).collect();
                patterns.entry(key).or_insert_with(|| (x.clone(), 0)).1 += 1;
            }
        }
        rows.extend(patterns.into_values().map(|(covariates, count)| CensusRow {
            area: id,
            het_weight: 1.0,
            count,
            covariates,
        }));
    }
    Ok((SurveySample::new(records, p)?, CensusFrame::new(rows, sizes)))
}

/// One replicate: fresh responses, HB fit and direct estimates.
pub fn run_replicate(
    config: &SimConfig,
    population: &Population,
    sample_idx: &[Vec<usize>],
    replicate: usize,
) -> Result<ReplicateOutcome> {
    let stream = config.root().purpose(Purpose::Replicate).child(replicate as u64);
    let responses = generate_responses(config, population, &stream.purpose(Purpose::Responses));
    let (sample, census) = replicate_data(population, &responses, sample_idx)?;
    let problem = validate_problem(&sample, &census, TransformSpec::log_shift(0.0)?)?;
    let grid = build_rho_grid(&problem, config.grid_size, config.epsilon)?;
    let specs = config
        .alphas
        .iter()
        .map(|&a| IndicatorSpec::fgt(a, config.poverty_line))
        .collect::<Result<Vec<_>>>()?;
    let draws = hb_draws(&problem, &grid, &specs, config.draws, &stream.purpose(Purpose::Posterior))?;
    let indicators = config
        .alphas
        .iter()
        .zip(&draws)
        .map(|(&alpha, d)| {
            let truth = true_fgt(&responses, alpha, config.poverty_line);
            problem
                .areas()
                .iter()
                .enumerate()
                .map(|(a, area)| {
                    // areas are sorted by id, and ids are 1..=D
                    let s = summarize(&d.values[a], config.level)?;
                    let direct = if area.is_sampled() {
                        let welfare: Vec<f64> = area.units.iter().map(|&i| problem.welfare()[i]).collect();
                        let weights = vec![area.population as f64 / welfare.len() as f64; welfare.len()];
                        Some(direct_fgt(&welfare, &weights, alpha, config.poverty_line, Some(area.population))?)
                    } else {
                        None
                    };
                    Ok(AreaOutcome {
                        truth: truth[a],
                        hb: s.mean,
                        hb_cv: s.cv,
                        et: s.et_interval,
                        hpd: s.hpd_interval,
                        direct,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateOutcome { indicators })
}

/// Reduces replicate outcomes, in order, to per-area and pooled metrics.
pub fn aggregate(config: &SimConfig, names: &[String], outcomes: &[ReplicateOutcome]) -> StudyMetrics {
    let reps = outcomes.len() as f64;
    let indicators = names
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let areas: Vec<AreaMetrics> = (0..config.areas())
                .map(|a| {
                    let o: Vec<&AreaOutcome> = outcomes.iter().map(|r| &r.indicators[s][a]).collect();
                    let errors: Vec<f64> = o.iter().map(|x| x.hb - x.truth).collect();
                    let mean_error = errors.iter().sum::<f64>() / reps;
                    let error_se = if o.len() > 1 {
                        (errors.iter().map(|e| (e - mean_error).powi(2)).sum::<f64>() / (reps - 1.0) / reps).sqrt()
                    } else {
                        0.0
                    };
                    let hit = |(lo, hi): (f64, f64), t: f64| lo <= t && t <= hi;
                    AreaMetrics {
                        area: a as AreaId + 1,
                        sample_size: config.sample_sizes[a],
                        population: config.population_sizes[a],
                        mc_mean_hb: o.iter().map(|x| x.hb).sum::<f64>() / reps,
                        mc_mean_true: o.iter().map(|x| x.truth).sum::<f64>() / reps,
                        mse: errors.iter().map(|e| e * e).sum::<f64>() / reps,
                        mean_error,
                        error_se,
                        cov_et_pct: 100.0 * o.iter().filter(|x| hit(x.et, x.truth)).count() as f64 / reps,
                        cov_hpd_pct: 100.0 * o.iter().filter(|x| hit(x.hpd, x.truth)).count() as f64 / reps,
                        width_et: o.iter().map(|x| x.et.1 - x.et.0).sum::<f64>() / reps,
                        width_hpd: o.iter().map(|x| x.hpd.1 - x.hpd.0).sum::<f64>() / reps,
                        mean_cv_pct: mean(o.iter().filter_map(|x| x.hb_cv)).map(|c| 100.0 * c),
                        mean_cv_direct_pct: mean(o.iter().filter_map(|x| x.direct.and_then(|d| d.cv())))
                            .map(|c| 100.0 * c),
                    }
                })
                .collect();
            let pooled = PooledMetrics {
                cov_et_pct: mean(areas.iter().map(|m| m.cov_et_pct)).unwrap_or(f64::NAN),
                cov_hpd_pct: mean(areas.iter().map(|m| m.cov_hpd_pct)).unwrap_or(f64::NAN),
                width_et: mean(areas.iter().map(|m| m.width_et)).unwrap_or(f64::NAN),
                width_hpd: mean(areas.iter().map(|m| m.width_hpd)).unwrap_or(f64::NAN),
                mse: mean(areas.iter().map(|m| m.mse)).unwrap_or(f64::NAN),
                mean_cv_pct: mean(areas.iter().filter_map(|m| m.mean_cv_pct)),
            };
            IndicatorMetrics {
                name: name.clone(),
                areas,
                pooled,
            }
        })
        .collect();
    StudyMetrics {
        replicates: outcomes.len(),
        indicators,
    }
}

pub fn run_study(config: &SimConfig) -> Result<StudyMetrics> {
    config.validate()?;
    let root = config.root();
    let population = generate_population(config, &root.purpose(Purpose::Covariates))?;
    let sample_idx = srswor_sample(&config.population_sizes, &config.sample_sizes, &root.purpose(Purpose::SampleSelection))?;
    let outcomes = (0..config.replicates)
        .into_par_iter()
        .map(|i| run_replicate(config, &population, &sample_idx, i))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = config
        .alphas
        .iter()
        .map(|&a| IndicatorSpec::fgt(a, config.poverty_line).map(|s| s.name()))
        .collect::<Result<_>>()?;
    Ok(aggregate(config, &names, &outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariate_probabilities() {
        let law = CovariateLaw::default();
        assert!((law.p1(80, 80) - 0.8).abs() < 1e-15);
        assert!((law.p1(40, 80) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn presets_are_valid() {
        for name in SimConfig::PRESETS {
            SimConfig::preset(name).unwrap().validate().unwrap();
        }
        let cv = SimConfig::preset("paper-s5-cv-curve").unwrap();
        assert_eq!(cv.sample_sizes.iter().filter(|&&n| n == 30).count(), 20);
        assert!(SimConfig::preset("nope").is_err());
    }

    #[test]
    fn srswor_edge_cases() {
        let s = SeededStream::new(3);
        let idx = srswor_sample(&[5, 5, 7], &[5, 0, 3], &s).unwrap();
        assert_eq!(idx[0], vec![0, 1, 2, 3, 4]);
        assert!(idx[1].is_empty());
        assert_eq!(idx[2].len(), 3);
        assert!(idx[2].windows(2).all(|w| w[0] < w[1]));
        assert!(srswor_sample(&[2], &[3], &s).is_err());
    }

    #[test]
    fn inclusion_frequencies_match_design() {
        let (big, small, trials) = (10usize, 3usize, 10_000usize);
        let mut hits = vec![0usize; big];
        for t in 0..trials {
            let idx = srswor_sample(&[big as u64], &[small], &SeededStream::new(9).child(t as u64)).unwrap();
            for i in &idx[0] {
                hits[*i] += 1;
            }
        }
        let p = small as f64 / big as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        for h in hits {
            assert!((h as f64 / trials as f64 - p).abs() < 3.5 * se);
        }
    }

    #[test]
    fn direct_hand_values() {
        let w = [1.0; 4];
        let d = direct_fgt(&[1.0, 20.0, 30.0, 5.0], &w, 0.0, 12.0, None).unwrap();
        assert_eq!(d.estimate, 0.5);
        let d = direct_fgt(&[6.0, 18.0], &[2.0, 2.0], 1.0, 12.0, Some(4)).unwrap();
        assert_eq!(d.estimate, 0.25);
        let d = direct_fgt(&[1.0, 20.0, 30.0], &[1.0; 3], 0.0, 12.0, Some(3)).unwrap();
        assert_eq!(d.variance, Some(0.0));
        assert!(direct_fgt(&[], &[], 0.0, 12.0, None).is_err());
        assert_eq!(direct_fgt(&[3.0], &[1.0], 0.0, 12.0, None).unwrap().variance, None);
    }

    #[test]
    fn direct_equal_weight_variance_is_srswor() {
        let e = [3.0, 15.0, 8.0, 20.0, 11.0, 30.0];
        let g: Vec<f64> = e.iter().map(|&x| fgt_term(x, 1.0, 12.0)).collect();
        let n = g.len() as f64;
        let m = g.iter().sum::<f64>() / n;
        let s2 = g.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = (1.0 - n / 40.0) * s2 / n;
        let d = direct_fgt(&e, &[40.0 / 6.0; 6], 1.0, 12.0, Some(40)).unwrap();
        assert!((d.estimate - m).abs() < 1e-15);
        assert!((d.variance.unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn population_is_reproducible_and_shaped() {
        let c = SimConfig::preset("smoke").unwrap();
        let s = SeededStream::new(1);
        let a = generate_population(&c, &s).unwrap();
        assert_eq!(a, generate_population(&c, &s).unwrap());
        assert_eq!(a.areas.len(), 6);
        assert!(a.areas.iter().all(|u| u.len() == 40 && u.iter().all(|x| x.len() == 3 && x[0] == 1.0)));
    }

    #[test]
    fn census_aggregation_preserves_sizes() {
        let c = SimConfig::preset("smoke").unwrap();
        let s = SeededStream::new(2);
        let pop = generate_population(&c, &s).unwrap();
        let ys = generate_responses(&c, &pop, &s);
        let idx = srswor_sample(&c.population_sizes, &c.sample_sizes, &s).unwrap();
        let (sample, census) = replicate_data(&pop, &ys, &idx).unwrap();
        assert_eq!(sample.len(), 48);
        let total: u64 = census.rows().iter().map(|r| r.count).sum();
        assert_eq!(total, 6 * 32);
        assert!(census.rows().len() <= 6 * 4);
    }

    #[test]
    fn single_replicate_metrics() {
        let c = SimConfig::preset("smoke").unwrap();
        let m = run_study(&c).unwrap();
        assert_eq!(m.replicates, 1);
        assert_eq!(m.indicators.len(), 2);
        for ind in &m.indicators {
            for a in &ind.areas {
                assert!((a.mse - (a.mc_mean_hb - a.mc_mean_true).powi(2)).abs() < 1e-15);
                assert!(a.cov_et_pct == 0.0 || a.cov_et_pct == 100.0);
                assert!(a.width_hpd <= a.width_et + 1e-15);
            }
        }
        assert_eq!(m, run_study(&c).unwrap());
    }
}
