use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, Resolved, RunConfig, DEFAULT_SEED};
use crate::error::{exit, CliError, Result};
use crate::pipeline::{self, InputMode};

#[derive(Debug, Parser)]
#[command(name = "fracdyn", version, about = "Simulate and identify fractional-order control-affine systems")]
pub struct Cli {
    /// Seed for every random draw (initial conditions, inputs).
    #[arg(long, global = true, env = "FRACDYN_SEED")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "FRACDYN_OUT")]
    pub out: Option<PathBuf>,
    /// TOML run configuration; flags and FRACDYN_* variables override it.
    #[arg(long, global = true, env = "FRACDYN_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Input sequence applied at every step.
        #[arg(long, value_enum, default_value = "zero")]
        input: InputMode,
    },
    /// Generate experiment datasets (one per input channel).
    Generate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Learn order, control and drift fields; writes the model and its error surface.
    Learn {
        #[command(flatten)]
        run: RunArgs,
        /// Learn from a saved dataset directory instead of generating one.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Estimate the fractional order only.
    EstimateOrder {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Fit fractional and integer-order models and compare their responses.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Run every benchmark comparison of the reproduction suite.
        #[arg(long = "paper-suite")]
        suite: bool,
    },
    /// Full reproduction: all benchmarks, noiseless and noisy, comparisons and a summary table.
    #[command(name = "bench-paper")]
    Bench,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Benchmark name: vanderpol, lotka, logistic, ultracap.
    #[arg(long, env = "FRACDYN_SYSTEM")]
    pub system: Option<String>,
    #[arg(long, env = "FRACDYN_ALPHA")]
    pub alpha: Option<f64>,
    /// Step size (continuous time only).
    #[arg(long, env = "FRACDYN_H")]
    pub h: Option<f64>,
    #[arg(long, env = "FRACDYN_HORIZON")]
    pub horizon: Option<usize>,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Number of initial conditions M.
    #[arg(long = "M", env = "FRACDYN_M")]
    pub m: Option<usize>,
    /// Number of input trials N.
    #[arg(long = "N", env = "FRACDYN_N")]
    pub n: Option<usize>,
    /// Uniform input range `low,high`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub input_range: Option<Vec<f64>>,
    /// Basis truncation length L.
    #[arg(long = "basis-L", env = "FRACDYN_BASIS_L")]
    pub basis_len: Option<usize>,
    /// Relative measurement noise level.
    #[arg(long, env = "FRACDYN_NOISE")]
    pub noise: Option<f64>,
    #[arg(long, env = "FRACDYN_NOISE_SEED")]
    pub noise_seed: Option<u64>,
    /// Error-surface grid points per axis.
    #[arg(long)]
    pub grid_density: Option<usize>,
}

impl Cli {
    fn resolve(&self, run: &RunArgs) -> Result<Resolved> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let input_range = match run.input_range.as_deref() {
            None => None,
            Some([lo, hi]) => Some([*lo, *hi]),
            Some(_) => return Err(CliError::Config("--input-range takes two values".into())),
        };
        cfg.apply(&Overrides {
            system: run.system.clone(),
            alpha: run.alpha,
            h: run.h,
            horizon: run.horizon,
            x0: run.x0.clone(),
            seed: self.seed,
            out: self.out.clone(),
            m: run.m,
            n: run.n,
            input_range,
            basis_len: run.basis_len,
            noise: run.noise,
            noise_seed: run.noise_seed,
            grid_density: run.grid_density,
        });
        Resolved::from_config(&cfg)
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { run, input } => {
            let r = cli.resolve(run)?;
            let traj = pipeline::run_simulate(&r, *input)?;
            println!("{}: {} steps written to {}", r.name(), traj.horizon(), r.out.display());
        }
        Command::Generate { run } => {
            let r = cli.resolve(run)?;
            let ds = pipeline::run_generate(&r)?;
            println!(
                "{}: {} channel dataset(s), M={}, N={} written to {}",
                r.name(),
                ds.clean.len(),
                r.plan.initial_conditions,
                r.plan.trials,
                r.out.join("dataset").display()
            );
        }
        Command::Learn { run, dataset } => {
            let r = cli.resolve(run)?;
            let o = pipeline::run_learn(&r, dataset.as_deref())?;
            println!("alpha_hat = {}", fmt_vec(o.model.alpha_hat.as_slice()));
            println!(
                "drift max-abs error = {:.6e}, control max-abs error = {:.6e}",
                o.errors.drift.max_abs_error, o.errors.control.max_abs_error
            );
        }
        Command::EstimateOrder { run, dataset } => {
            let r = cli.resolve(run)?;
            let est = pipeline::run_estimate_order(&r, dataset.as_deref())?;
            println!("alpha_hat = {} (raw {})", fmt_vec(est.alpha.as_slice()), fmt_vec(&est.raw));
        }
        Command::Compare { run, suite } => {
            if *suite {
                let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
                for row in pipeline::run_comparison_suite(&out, cli.seed.unwrap_or(DEFAULT_SEED))? {
                    println!(
                        "{} alpha={}: max dev fractional {:.6e}, integer {:.6e}",
                        row.benchmark, row.alpha, row.max_dev_fractional, row.max_dev_integer
                    );
                }
            } else {
                let r = cli.resolve(run)?;
                let c = pipeline::run_compare(&r)?;
                println!(
                    "max dev fractional {:.6e}, integer {:.6e}",
                    c.report.max_dev_fractional, c.report.max_dev_integer
                );
                if let Some(k) = c.report.diverged_at {
                    println!("diverged at step {k} ({}); comparison truncated", c.report.diverged_runs.join(", "));
                }
            }
        }
        Command::Bench => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let s = pipeline::run_bench(&out, cli.seed.unwrap_or(DEFAULT_SEED))?;
            for c in &s.checks {
                println!("{} {}: {:.6e} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.requirement);
            }
            if !s.all_pass() {
                let failed = s.checks.iter().filter(|c| !c.pass).count();
                return Err(CliError::Checks(format!("{failed} reproduction check(s) failed")));
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
