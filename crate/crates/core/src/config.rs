//! Flat `key = value` run configuration shared by all commands.
//!
//! Values are applied in order: built-in defaults, the config file, then
//! command-line flags, so flags win. The seed falls back to `HBSAE_SEED`
//! only when neither the file nor a flag sets it.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::grid::{DEFAULT_EPSILON, DEFAULT_GRID_SIZE};
use crate::predictor::SubsampleDesign;

pub const SEED_ENV: &str = "HBSAE_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformChoice {
    Identity,
    LogShift(f64),
    /// Shift chosen by residual skewness over `shift_candidates`.
    LogShiftAuto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub draws: usize,
    pub grid: usize,
    pub epsilon: f64,
    pub level: f64,
    pub seed: Option<u64>,
    pub alphas: Vec<f64>,
    pub poverty_line: Option<f64>,
    pub transform: TransformChoice,
    pub fast_hb: bool,
    pub subsample: Option<SubsampleDesign>,
    pub shift_candidates: Vec<f64>,
    pub intercept: bool,
    pub threads: Option<usize>,
    pub low_cpo: f64,
    pub extreme_cpo: f64,
    pub preset: Option<String>,
    pub replicates: Option<usize>,
    /// Canonical names of keys set explicitly by a file or flag.
    explicit: BTreeSet<&'static str>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            draws: 1000,
            grid: DEFAULT_GRID_SIZE,
            epsilon: DEFAULT_EPSILON,
            level: 0.95,
            seed: None,
            alphas: vec![0.0, 1.0],
            poverty_line: None,
            transform: TransformChoice::Identity,
            fast_hb: false,
            subsample: None,
            shift_candidates: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            intercept: true,
            threads: None,
            low_cpo: 0.025,
            extreme_cpo: 0.014,
            preset: None,
            replicates: None,
            explicit: BTreeSet::new(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| invalid(format!("{key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(format!("{key}: expected on/off, got {value:?}"))),
    }
}

impl RunConfig {
    pub const KEYS: [&'static str; 17] = [
        "draws",
        "grid",
        "epsilon",
        "level",
        "seed",
        "alpha",
        "z",
        "transform",
        "fast_hb",
        "subsample",
        "shift_candidates",
        "intercept",
        "threads",
        "low_cpo",
        "extreme_cpo",
        "preset",
        "replicates",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let canonical = match key {
            "H" => "draws",
            "R" => "grid",
            "I" => "replicates",
            k => Self::KEYS
                .iter()
                .copied()
                .find(|known| *known == k)
                .unwrap_or("unknown"),
        };
        match key {
            "draws" | "H" => self.draws = parse(key, value)?,
            "grid" | "R" => self.grid = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "level" => self.level = parse(key, value)?,
            "seed" => self.seed = Some(parse(key, value)?),
            "alpha" => self.alphas = parse_list(key, value)?,
            "z" => self.poverty_line = Some(parse(key, value)?),
            "transform" => {
                self.transform = match value {
                    "identity" => TransformChoice::Identity,
                    "logshift:auto" => TransformChoice::LogShiftAuto,
                    v => match v.strip_prefix("logshift:") {
                        Some(c) => TransformChoice::LogShift(parse(key, c)?),
                        None => {
                            return Err(invalid(format!(
                                "transform: expected identity, logshift:<c> or logshift:auto, got {v:?}"
                            )))
                        }
                    },
                }
            }
            "fast_hb" => self.fast_hb = parse_bool(key, value)?,
            "subsample" => {
                self.subsample = Some(if let Some(f) = value.strip_suffix('%') {
                    SubsampleDesign::SrsworFraction(parse::<f64>(key, f)? / 100.0)
                } else if value.contains('.') {
                    SubsampleDesign::SrsworFraction(parse(key, value)?)
                } else {
                    SubsampleDesign::SrsworFixed(parse(key, value)?)
                })
            }
            "shift_candidates" => self.shift_candidates = parse_list(key, value)?,
            "intercept" => self.intercept = parse_bool(key, value)?,
            "threads" => self.threads = Some(parse(key, value)?),
            "low_cpo" => self.low_cpo = parse(key, value)?,
            "extreme_cpo" => self.extreme_cpo = parse(key, value)?,
            "preset" => self.preset = Some(value.to_string()),
            "replicates" | "I" => self.replicates = Some(parse(key, value)?),
            other => {
                return Err(invalid(format!(
                    "unknown configuration key {other:?}; known keys: {}",
                    Self::KEYS.join(", ")
                )))
            }
        }
        self.explicit.insert(canonical);
        Ok(())
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Applies every `key = value` line. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Schema {
                source_name: source.to_string(),
                line: i as u64 + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key.trim(), value).map_err(|e| Error::Schema {
                source_name: source.to_string(),
                line: i as u64 + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Seed from the config, else from `env_value`, else the default.
    pub fn resolve_seed(&self, env_value: Option<&str>) -> Result<u64> {
        match (self.seed, env_value) {
            (Some(s), _) => Ok(s),
            (None, Some(v)) => parse(SEED_ENV, v),
            (None, None) => Ok(DEFAULT_SEED),
        }
    }

    /// Checks the estimation settings before any work starts.
    pub fn check_estimation(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if (self.draws as f64) * (1.0 - self.level) / 2.0 < 1.0 - 1e-9 {
            return Err(invalid(format!(
                "draws = {} leave an empty tail at level {}; need H(1 - level)/2 >= 1",
                self.draws, self.level
            )));
        }
        if self.grid < 10 {
            return Err(invalid("grid must be >= 10"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(invalid("epsilon must lie in (0, 0.5)"));
        }
        if self.alphas.is_empty() {
            return Err(invalid("alpha list is empty"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads must be >= 1"));
        }
        Ok(())
    }

    pub fn subsample_design(&self) -> SubsampleDesign {
        match (self.fast_hb, self.subsample) {
            (true, Some(d)) => d,
            _ => SubsampleDesign::Census,
        }
    }
}
