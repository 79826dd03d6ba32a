//! Run configuration: a TOML file, overridden field by field from
//! `FRACDYN_*` environment variables and command-line flags.
//!
//! ```toml
//! system = "vanderpol"
//! alpha = 0.9
//! h = 0.1
//!
//! [plan]
//! M = 50
//! N = 10
//! input_range = [-1.0, 1.0]
//! seed = 42
//!
//! [basis]
//! family = "legendre-tensor"
//! L = 5
//!
//! [noise]
//! level = 0.05
//! seed = 7
//! ```
//!
//! An inline polynomial system replaces the benchmark name:
//!
//! ```toml
//! [system]
//! time_kind = "continuous"
//! domain = [[-1.0, 1.0]]
//! drift = [[{ coef = -1.0, powers = [1] }]]
//! control = [[[{ coef = 1.0, powers = [0] }]]]
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use fracdyn_core::basis::{BasisFamily, BasisSpec};
use fracdyn_core::harness::NoiseSpec;
use fracdyn_core::learn::{ExperimentPlan, InputLaw};
use fracdyn_core::systems::{Benchmark, Polynomial, PolynomialFields};
use fracdyn_core::{ControlAffineSystem, DomainBox, FractionalOrderVector, State, TimeKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 2024;
pub const DEFAULT_H: f64 = 0.1;
pub const DEFAULT_HORIZON: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialSystem {
    pub time_kind: TimeKind,
    pub domain: Vec<[f64; 2]>,
    pub drift: Vec<Polynomial>,
    pub control: Vec<Vec<Polynomial>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemConfig {
    Named(String),
    Polynomial(PolynomialSystem),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub input_range: Option<[f64; 2]>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub family: Option<String>,
    #[serde(rename = "L")]
    pub len: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub level: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub x0: Option<Vec<f64>>,
    pub horizon: Option<usize>,
    /// Constant input applied on every channel; zero when absent.
    pub input: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemConfig>,
    pub alpha: Option<f64>,
    pub h: Option<f64>,
    pub horizon: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub grid_density: Option<usize>,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub compare: CompareConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Field-level overrides collected from flags and the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub system: Option<String>,
    pub alpha: Option<f64>,
    pub h: Option<f64>,
    pub horizon: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub input_range: Option<[f64; 2]>,
    pub basis_len: Option<usize>,
    pub noise: Option<f64>,
    pub noise_seed: Option<u64>,
    pub grid_density: Option<usize>,
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = &o.system {
            self.system = Some(SystemConfig::Named(s.clone()));
        }
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = Some(v);
                }
            };
        }
        set!(self.alpha, o.alpha);
        set!(self.h, o.h);
        set!(self.horizon, o.horizon);
        set!(self.x0, o.x0);
        set!(self.output_dir, o.out);
        set!(self.grid_density, o.grid_density);
        set!(self.plan.m, o.m);
        set!(self.plan.n, o.n);
        set!(self.plan.input_range, o.input_range);
        set!(self.plan.seed, o.seed);
        set!(self.basis.len, o.basis_len);
        if o.noise.is_some() || o.noise_seed.is_some() {
            let noise = self.noise.get_or_insert_with(NoiseConfig::default);
            set!(noise.level, o.noise);
            set!(noise.seed, o.noise_seed);
        }
    }
}

/// A fully specified run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub benchmark: Option<Benchmark>,
    pub system: ControlAffineSystem,
    pub h: f64,
    pub horizon: usize,
    pub x0: State,
    pub plan: ExperimentPlan,
    pub basis: BasisSpec,
    pub noise: Option<NoiseSpec>,
    pub out: PathBuf,
    pub grid_density: usize,
    pub compare_x0: State,
    pub compare_horizon: usize,
    pub compare_input: f64,
}

fn polynomial_system(p: &PolynomialSystem, alpha: Option<f64>) -> Result<ControlAffineSystem> {
    let fields = PolynomialFields {
        drift: p.drift.clone(),
        control: p.control.clone(),
    };
    fields.validate()?;
    let n = p.drift.len();
    let domain = DomainBox::from_bounds(&p.domain.iter().map(|b| (b[0], b[1])).collect::<Vec<_>>())?;
    let alpha = FractionalOrderVector::uniform(alpha.unwrap_or(1.0), n)?;
    Ok(ControlAffineSystem::new(Arc::new(fields), domain, alpha, p.time_kind)?)
}

impl Resolved {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let system_cfg = cfg.system.clone().unwrap_or(SystemConfig::Named(Benchmark::VanDerPol.name().into()));
        let (benchmark, system) = match &system_cfg {
            SystemConfig::Named(name) => {
                let b = Benchmark::from_name(name)?;
                let spec = b.build(cfg.alpha.unwrap_or(b.default_alpha()))?;
                (Some(b), spec.system)
            }
            SystemConfig::Polynomial(p) => (None, polynomial_system(p, cfg.alpha)?),
        };
        let discrete = system.time_kind == TimeKind::Discrete;
        let h = if discrete { 1.0 } else { cfg.h.unwrap_or(DEFAULT_H) };
        let horizon = cfg.horizon.unwrap_or(DEFAULT_HORIZON);
        if horizon == 0 {
            return Err(CliError::Config("horizon must be at least 1".into()));
        }
        let n = system.state_dim();
        let center: State = system
            .domain
            .lower
            .iter()
            .zip(&system.domain.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let default_x0 = benchmark.map_or(center, |b| b.default_comparison_x0());
        let x0 = cfg.x0.clone().unwrap_or_else(|| default_x0.clone());
        let compare_x0 = cfg.compare.x0.clone().or(cfg.x0.clone()).unwrap_or(default_x0);
        for v in [&x0, &compare_x0] {
            if v.len() != n {
                return Err(CliError::Config(format!("x0 needs {n} entries, got {}", v.len())));
            }
        }

        let amp = benchmark.map_or(1.0, |b| b.default_input_amplitude());
        let [low, high] = cfg.plan.input_range.unwrap_or([-amp, amp]);
        let default_m = if benchmark == Some(Benchmark::Logistic) { 200 } else { 50 };
        let default_n = if benchmark == Some(Benchmark::Logistic) { 20 } else { 10 };
        let plan = ExperimentPlan::new(
            cfg.plan.m.unwrap_or(default_m),
            cfg.plan.n.unwrap_or(default_n),
            InputLaw { low, high },
            cfg.plan.seed.unwrap_or(DEFAULT_SEED),
        )?;

        let family = cfg.basis.family.as_deref().unwrap_or(BasisFamily::LegendreTensor.name());
        if family != BasisFamily::LegendreTensor.name() {
            return Err(CliError::Config(format!(
                "unknown basis family `{family}`; the command line supports `{}`",
                BasisFamily::LegendreTensor.name()
            )));
        }
        let len = cfg.basis.len.unwrap_or(benchmark.map_or(5, |b| b.default_basis_len()));
        let basis = BasisSpec::legendre(len, system.domain.clone())?;

        let noise = cfg
            .noise
            .as_ref()
            .map(|nc| NoiseSpec::new(nc.level.unwrap_or(NoiseSpec::DEFAULT_LEVEL), nc.seed.unwrap_or(plan.seed)))
            .transpose()?;

        let grid_density = cfg.grid_density.unwrap_or(if n == 1 { 801 } else { 41 });
        if grid_density == 0 {
            return Err(CliError::Config("grid density must be at least 1".into()));
        }
        Ok(Self {
            benchmark,
            system,
            h,
            horizon,
            x0,
            plan,
            basis,
            noise,
            out: cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            grid_density,
            compare_x0,
            compare_horizon: cfg.compare.horizon.unwrap_or(horizon),
            compare_input: cfg.compare.input.unwrap_or(0.0),
        })
    }

    pub fn name(&self) -> String {
        self.benchmark.map_or_else(|| "polynomial".to_string(), |b| b.name().to_string())
    }
}
