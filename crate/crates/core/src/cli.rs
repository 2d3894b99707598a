//! Command-line front end. Exit codes: 0 success, 2 usage, schema or
//! configuration error, 3 validation error in the data.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, SEED_ENV};
use crate::error::{invalid, Error, Result};
use crate::io;
use crate::pipeline;
use crate::simulation::{run_study, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hbsae", version, about = "Hierarchical Bayes small area estimation of poverty indicators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior summaries per area and indicator.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: RunArgs,
        /// Also write every indicator draw in long format.
        #[arg(long)]
        draws_out: Option<PathBuf>,
    },
    /// Frequentist simulation study.
    Simulate {
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Leave-one-out residuals and CPOs for every sample unit.
    Diagnose {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Choose the log-shift constant by residual skewness.
    SelectShift {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: RunArgs,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub sample: PathBuf,
    #[arg(long)]
    pub census: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// key = value configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of posterior draws H.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Grid resolution R.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
    /// Comma-separated FGT alphas.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Poverty line in welfare units.
    #[arg(long, short = 'z')]
    pub poverty_line: Option<f64>,
    /// identity, logshift:<c> or logshift:auto.
    #[arg(long)]
    pub transform: Option<String>,
    #[arg(long)]
    pub fast_hb: bool,
    /// Fast-HB subsample: a size, a fraction, or a percentage.
    #[arg(long)]
    pub subsample: Option<String>,
    /// Comma-separated shift candidates.
    #[arg(long, allow_hyphen_values = true)]
    pub candidates: Option<String>,
    #[arg(long)]
    pub no_intercept: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Simulation preset.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Any configuration key, as key=value; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl RunArgs {
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(p) = &self.config {
            c.apply_file(p)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| invalid(format!("--set expects key=value, got {kv:?}")))?;
            c.set(k.trim(), v)?;
        }
        let text = |v: Option<&dyn ToString>| v.map(|v| v.to_string());
        let pairs = [
            ("seed", text(self.seed.as_ref().map(|v| v as _))),
            ("draws", text(self.draws.as_ref().map(|v| v as _))),
            ("grid", text(self.grid.as_ref().map(|v| v as _))),
            ("epsilon", text(self.epsilon.as_ref().map(|v| v as _))),
            ("level", text(self.level.as_ref().map(|v| v as _))),
            ("alpha", self.alpha.clone()),
            ("z", text(self.poverty_line.as_ref().map(|v| v as _))),
            ("transform", self.transform.clone()),
            ("subsample", self.subsample.clone()),
            ("shift_candidates", self.candidates.clone()),
            ("threads", text(self.threads.as_ref().map(|v| v as _))),
            ("replicates", text(self.replicates.as_ref().map(|v| v as _))),
            ("preset", self.preset.clone()),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                c.set(k, &v)?;
            }
        }
        if self.fast_hb {
            c.set("fast_hb", "on")?;
        }
        if self.no_intercept {
            c.set("intercept", "off")?;
        }
        Ok(c)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn seed(config: &RunConfig) -> Result<u64> {
    config.resolve_seed(std::env::var(SEED_ENV).ok().as_deref())
}

fn load(data: &DataArgs, config: &RunConfig) -> Result<(crate::model::SurveySample, crate::model::CensusFrame)> {
    let sample = io::read_sample_path(&data.sample, config.intercept)?;
    let census = io::read_census_path(&data.census, config.intercept, &sample)?;
    Ok((sample, census))
}

/// Simulation settings: the preset, then any configured overrides.
pub fn sim_config(config: &RunConfig, env_seed: Option<&str>) -> Result<SimConfig> {
    let mut sim = SimConfig::preset(config.preset.as_deref().unwrap_or("paper-s5-scaled"))?;
    if let Some(r) = config.replicates {
        sim.replicates = r;
    }
    if config.is_explicit("draws") {
        sim.draws = config.draws;
    }
    if config.is_explicit("grid") {
        sim.grid_size = config.grid;
    }
    if config.is_explicit("epsilon") {
        sim.epsilon = config.epsilon;
    }
    if config.is_explicit("level") {
        sim.level = config.level;
    }
    if config.is_explicit("alpha") {
        sim.alphas = config.alphas.clone();
    }
    if let Some(z) = config.poverty_line {
        sim.poverty_line = z;
    }
    if config.seed.is_some() || env_seed.is_some() {
        sim.seed = config.resolve_seed(env_seed)?;
    }
    Ok(sim)
}

fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Estimate { data, opts, draws_out } => {
            let config = opts.to_config()?;
            config.check_estimation()?;
            let (sample, census) = load(data, &config)?;
            let est = pipeline::estimate(&sample, &census, &config, seed(&config)?)?;
            if let Some(sel) = &est.shift {
                eprintln!("selected log shift c = {}", sel.shift);
            }
            let mut w = output(opts.out.as_deref())?;
            io::write_summaries(&mut w, &est.rows)?;
            w.flush()?;
            if let Some(p) = draws_out {
                let ids: Vec<_> = est.problem.areas().iter().map(|a| a.id).collect();
                let mut w = output(Some(p))?;
                io::write_draws(&mut w, &ids, &est.draws)?;
                w.flush()?;
            }
        }
        Command::Simulate { opts } => {
            let config = opts.to_config()?;
            let sim = sim_config(&config, std::env::var(SEED_ENV).ok().as_deref())?;
            let metrics = run_study(&sim)?;
            for ind in &metrics.indicators {
                let p = &ind.pooled;
                eprintln!(
                    "{}: coverage et {:.2}% hpd {:.2}%, width et {:.5} hpd {:.5}, mean cv {}",
                    ind.name,
                    p.cov_et_pct,
                    p.cov_hpd_pct,
                    p.width_et,
                    p.width_hpd,
                    p.mean_cv_pct.map_or("undefined".to_string(), |c| format!("{c:.2}%"))
                );
            }
            let mut w = output(opts.out.as_deref())?;
            io::write_metrics(&mut w, &metrics)?;
            w.flush()?;
        }
        Command::Diagnose { data, opts } => {
            let config = opts.to_config()?;
            let (sample, census) = load(data, &config)?;
            let rows = pipeline::diagnostics(&sample, &census, &config, seed(&config)?)?;
            let extreme = rows.iter().filter(|r| r.flags.extreme).count();
            eprintln!("{} units, {} with CPO below {}", rows.len(), extreme, config.extreme_cpo);
            let mut w = output(opts.out.as_deref())?;
            io::write_diagnostics(&mut w, &rows)?;
            w.flush()?;
        }
        Command::SelectShift { data, opts } => {
            let config = opts.to_config()?;
            let (sample, census) = load(data, &config)?;
            let candidates = pipeline::admissible_shifts(&sample, &config.shift_candidates);
            if candidates.len() < config.shift_candidates.len() {
                eprintln!(
                    "skipped {} candidate(s) that leave welfare outside the log domain",
                    config.shift_candidates.len() - candidates.len()
                );
            }
            if candidates.is_empty() {
                return Err(invalid("no admissible shift candidate"));
            }
            let sel = crate::shift::select_shift(&sample, &census, &candidates, config.grid, config.epsilon)?;
            println!("{}", sel.shift);
            if let Some(p) = &opts.out {
                let mut w = output(Some(p))?;
                io::write_skewness_curve(&mut w, &sel.curve)?;
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn threads(command: &Command) -> Option<usize> {
    let opts = match command {
        Command::Estimate { opts, .. }
        | Command::Simulate { opts }
        | Command::Diagnose { opts, .. }
        | Command::SelectShift { opts, .. } => opts,
    };
    opts.to_config().ok().and_then(|c| c.threads)
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_USAGE
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match threads(&cli.command) {
        Some(0) => Err(invalid("threads must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(e.to_string()))
            .and_then(|pool| pool.install(|| execute(&cli.command))),
        None => execute(&cli.command),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
