//! Posterior summaries of indicator draws.
//!
//! The variance uses divisor `H`. Interval ranks are 1-based order
//! statistics: equal-tail `(⌈H(1−L)/2⌉, ⌈H(1+L)/2⌉)`; HPD is the shortest
//! window `(δ_(j), δ_(j+m))` with `m = ⌊L·H⌋`, smallest `j` on ties.

use crate::error::{invalid, Error, Result};

/// Slack for rank arithmetic so that e.g. `100 × 1.02 / 2` counts as 51.
const RANK_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
    pub sd: f64,
    /// `sd / mean`; `None` when the mean is not positive.
    pub cv: Option<f64>,
    pub et_interval: (f64, f64),
    pub hpd_interval: (f64, f64),
    pub level: f64,
}

pub fn mean_variance(draws: &[f64]) -> Result<(f64, f64)> {
    if draws.len() < 2 {
        return Err(Error::InsufficientDraws {
            draws: draws.len(),
            level: f64::NAN,
        });
    }
    let h = draws.len() as f64;
    if draws.iter().all(|&d| d == draws[0]) {
        return Ok((draws[0], 0.0));
    }
    let mean = draws.iter().sum::<f64>() / h;
    let variance = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / h;
    Ok((mean, variance))
}

fn check_level(draws: usize, level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("credible level must lie in (0, 1), got {level}")));
    }
    // Each tail must hold at least one draw.
    if (draws as f64) * (1.0 - level) / 2.0 < 1.0 - RANK_SLACK {
        return Err(Error::InsufficientDraws { draws, level });
    }
    Ok(())
}

fn sorted(draws: &[f64]) -> Result<Vec<f64>> {
    if draws.iter().any(|d| d.is_nan()) {
        return Err(Error::NonFinite("draws"));
    }
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn et_ranks(h: usize, level: f64) -> (usize, usize) {
    let hf = h as f64;
    let lo = (hf * (1.0 - level) / 2.0 - RANK_SLACK).ceil() as usize;
    let hi = (hf * (1.0 + level) / 2.0 - RANK_SLACK).ceil() as usize;
    (lo.max(1), hi.min(h))
}

fn equal_tail_sorted(s: &[f64], level: f64) -> (f64, f64) {
    let (lo, hi) = et_ranks(s.len(), level);
    (s[lo - 1], s[hi - 1])
}

fn hpd_sorted(s: &[f64], level: f64) -> (f64, f64) {
    let h = s.len();
    let m = ((level * h as f64 + RANK_SLACK).floor() as usize).min(h - 1);
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for j in 0..(h - m) {
        let w = s[j + m] - s[j];
        if w < best_width {
            best_width = w;
            best = j;
        }
    }
    (s[best], s[best + m])
}

pub fn equal_tail(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    check_level(draws.len(), level)?;
    Ok(equal_tail_sorted(&sorted(draws)?, level))
}

pub fn hpd(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    check_level(draws.len(), level)?;
    Ok(hpd_sorted(&sorted(draws)?, level))
}

pub fn coefficient_of_variation(mean: f64, variance: f64) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(Error::UndefinedCv { mean });
    }
    Ok(variance.sqrt() / mean)
}

pub fn summarize(draws: &[f64], level: f64) -> Result<PosteriorSummary> {
    let (mean, variance) = mean_variance(draws)?;
    check_level(draws.len(), level)?;
    let s = sorted(draws)?;
    Ok(PosteriorSummary {
        mean,
        variance,
        sd: variance.sqrt(),
        cv: coefficient_of_variation(mean, variance).ok(),
        et_interval: equal_tail_sorted(&s, level),
        hpd_interval: hpd_sorted(&s, level),
        level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mean_variance_divisor_h() {
        let (m, v) = mean_variance(&[0.1, 0.2, 0.3]).unwrap();
        assert!((m - 0.2).abs() < 1e-15);
        assert!((v - 0.02 / 3.0).abs() < 1e-15);
        assert_eq!(mean_variance(&[0.4; 7]).unwrap().1, 0.0);
        assert_eq!(mean_variance(&[0.0, 1.0]).unwrap(), (0.5, 0.25));
        assert!(mean_variance(&[1.0]).is_err());
    }

    #[test]
    fn equal_tail_ranks() {
        let d: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(equal_tail(&d, 0.95).unwrap(), (3.0, 98.0));
        assert_eq!(equal_tail(&d, 0.02).unwrap(), (49.0, 51.0));
        assert_eq!(equal_tail(&[2.5; 50], 0.95).unwrap(), (2.5, 2.5));
        assert!(matches!(equal_tail(&d[..39], 0.95), Err(Error::InsufficientDraws { .. })));
        assert!(equal_tail(&d[..40], 0.95).is_ok());
    }

    #[test]
    fn hpd_shortest_window_and_ties() {
        assert_eq!(hpd(&[0.0, 0.0, 0.0, 1.0, 10.0], 0.6).unwrap(), (0.0, 1.0));
        let d: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(hpd(&d, 0.8).unwrap(), (0.0, 8.0));
    }

    #[test]
    fn hpd_narrower_on_skewed_draws() {
        // exp of a deterministic normal-quantile grid: right skewed
        let d: Vec<f64> = (1..=1000)
            .map(|i| {
                let p = (i as f64 - 0.5) / 1000.0;
                // logistic quantile is a fine skew driver here
                ((p / (1.0 - p)).ln() * 0.6).exp()
            })
            .collect();
        let (a, b) = equal_tail(&d, 0.95).unwrap();
        let (c, e) = hpd(&d, 0.95).unwrap();
        assert!(e - c < b - a);
    }

    #[test]
    fn cv_cases() {
        assert!((coefficient_of_variation(0.2, 0.0016).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(coefficient_of_variation(0.3, 0.0).unwrap(), 0.0);
        assert!(matches!(coefficient_of_variation(0.0, 0.1), Err(Error::UndefinedCv { .. })));
    }

    proptest! {
        #[test]
        fn interval_invariants(mut draws in proptest::collection::vec(-5.0f64..5.0, 40..300), level in 0.5f64..0.99) {
            prop_assume!((draws.len() as f64) * (1.0 - level) / 2.0 >= 1.0);
            let s = summarize(&draws, level).unwrap();
            let (el, eh) = s.et_interval;
            let (hl, hh) = s.hpd_interval;
            prop_assert!(el <= eh && hl <= hh);
            prop_assert!(hh - hl <= eh - el + 1e-12);
            draws.sort_by(f64::total_cmp);
            let h = draws.len();
            let median = draws[(h - 1) / 2];
            let median_hi = draws[h / 2];
            prop_assert!(el <= median && median_hi <= eh);
            prop_assert!(hl <= median_hi && median <= hh);
            let inside = draws.iter().filter(|&&x| x >= el && x <= eh).count() as f64 / h as f64;
            prop_assert!(inside >= level - 2.0 / h as f64);
        }
    }
}
