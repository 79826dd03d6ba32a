//! Measurement noise, field error surfaces and response comparisons.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::learn::{ExperimentDataset, LearnedModel};
use crate::rng::stream;
use crate::simulate::{simulate, Trajectory};
use crate::systems::ControlAffineSystem;
use crate::{Error, Result, State};

/// Relative measurement noise: each recorded entry `x` becomes
/// `x + level · |x| · v`, `v ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const DEFAULT_LEVEL: f64 = 0.05;

    pub fn new(level: f64, seed: u64) -> Result<Self> {
        if !level.is_finite() || level < 0.0 {
            return Err(Error::Parameter(format!("noise level must be finite and >= 0, got {level}")));
        }
        Ok(Self { level, seed })
    }
}

struct Perturber {
    level: f64,
    rng: crate::rng::SimRng,
}

impl Perturber {
    fn new(spec: &NoiseSpec, stream_id: u64) -> Self {
        Self {
            level: spec.level,
            rng: stream(spec.seed, stream_id),
        }
    }

    fn state(&mut self, x: &mut [f64]) {
        for v in x {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            if self.level != 0.0 {
                *v += self.level * libm::fabs(*v) * z;
            }
        }
    }

    fn grid(&mut self, g: &mut [Vec<State>]) {
        for x in g.iter_mut().flatten() {
            self.state(x);
        }
    }
}

/// Noisy copy of a trajectory's states; inputs are left as applied.
pub fn add_noise_trajectory(traj: &Trajectory, spec: &NoiseSpec) -> Trajectory {
    let mut out = traj.clone();
    let mut p = Perturber::new(spec, 0);
    for x in &mut out.states {
        p.state(x);
    }
    out
}

/// Noisy copy of every recorded state array of a dataset. Each array draws
/// from its own stream, so e.g. `x1` noise does not depend on whether `x3`
/// exists.
pub fn add_noise_dataset(ds: &ExperimentDataset, spec: &NoiseSpec) -> ExperimentDataset {
    let mut out = ds.clone();
    let mut p = Perturber::new(spec, 0);
    for x in &mut out.x0 {
        p.state(x);
    }
    let grids = [
        &mut out.x1,
        &mut out.x2,
        &mut out.xt2,
        &mut out.x3,
        &mut out.xt3,
    ];
    for (k, g) in grids.into_iter().enumerate() {
        Perturber::new(spec, k as u64 + 1).grid(g);
    }
    out
}

// ---------------------------------------------------------------------------

/// One grid point and field entry of an error surface.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorRow {
    pub x: State,
    /// `f<i>` for drift entries, `g<i><l>` for control entries (one-based).
    pub component: String,
    pub truth: f64,
    pub estimate: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorStats {
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

impl ErrorStats {
    fn of<'a>(errs: impl Iterator<Item = &'a f64>) -> Self {
        let (mut max, mut sum, mut count) = (0.0f64, 0.0, 0usize);
        for &e in errs {
            max = max.max(e);
            sum += e;
            count += 1;
        }
        Self {
            max_abs_error: max,
            mean_abs_error: if count == 0 { 0.0 } else { sum / count as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorReport {
    pub grid_density: usize,
    pub rows: Vec<ErrorRow>,
    pub drift: ErrorStats,
    pub control: ErrorStats,
    pub overall: ErrorStats,
}

impl ErrorReport {
    pub fn max_abs_error(&self) -> f64 {
        self.overall.max_abs_error
    }

    pub fn mean_abs_error(&self) -> f64 {
        self.overall.mean_abs_error
    }
}

/// Pointwise `|truth − estimate|` of every drift and control entry on a
/// uniform grid with `grid_density` points per axis.
pub fn field_error_surface(truth: &ControlAffineSystem, model: &LearnedModel, grid_density: usize) -> Result<ErrorReport> {
    if grid_density == 0 {
        return Err(Error::Usage("grid density must be at least 1".into()));
    }
    let (n, m) = (truth.state_dim(), truth.input_dim());
    if model.state_dim() != n || model.input_dim() != m {
        return Err(Error::Dimension("model and truth dimensions differ".into()));
    }
    if model.f_hat.is_none() {
        return Err(Error::Usage("error surface needs a basis-fitted drift".into()));
    }
    let mut rows = Vec::new();
    for x in truth.domain.grid(grid_density) {
        let f = truth.drift_at(&x);
        let fh = model.eval_drift(&x).unwrap_or_default();
        for r in 0..n {
            rows.push(row(&x, format!("f{}", r + 1), f[r], fh[r]));
        }
        let g = truth.control_at(&x);
        let gh = model.eval_control(&x);
        for r in 0..n {
            for l in 0..m {
                rows.push(row(&x, format!("g{}{}", r + 1, l + 1), g[r * m + l], gh[r * m + l]));
            }
        }
    }
    let drift = ErrorStats::of(rows.iter().filter(|r| r.component.starts_with('f')).map(|r| &r.abs_error));
    let control = ErrorStats::of(rows.iter().filter(|r| r.component.starts_with('g')).map(|r| &r.abs_error));
    let overall = ErrorStats::of(rows.iter().map(|r| &r.abs_error));
    Ok(ErrorReport {
        grid_density,
        rows,
        drift,
        control,
        overall,
    })
}

fn row(x: &[f64], component: String, truth: f64, estimate: f64) -> ErrorRow {
    ErrorRow {
        x: x.to_vec(),
        component,
        truth,
        estimate,
        abs_error: libm::fabs(truth - estimate),
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonReport {
    pub h: f64,
    pub x0: State,
    pub truth: Vec<State>,
    pub fractional: Vec<State>,
    pub integer: Vec<State>,
    /// `‖x_frac(k) − x_truth(k)‖∞`.
    pub dev_fractional: Vec<f64>,
    /// `‖x_int(k) − x_truth(k)‖∞`.
    pub dev_integer: Vec<f64>,
    pub max_dev_fractional: f64,
    pub max_dev_integer: f64,
    pub mean_dev_fractional: f64,
    pub mean_dev_integer: f64,
    /// Requested number of steps.
    pub horizon: usize,
    /// `Some(k)` if a run diverged; trajectories then stop at step `k − 1`.
    pub diverged_at: Option<usize>,
    /// Which runs diverged: `truth`, `fractional`, `integer`.
    pub diverged_runs: Vec<String>,
}

/// Runs `system` for up to `horizon` steps; on divergence returns the
/// prefix that stayed finite and the failing step.
fn run_prefix(system: &ControlAffineSystem, x0: &[f64], inputs: &[State], h: f64) -> Result<(Vec<State>, Option<usize>)> {
    match simulate(system, x0, inputs, h) {
        Ok(t) => Ok((t.states, None)),
        Err(Error::Diverged { step }) => {
            // replay up to the last finite step
            let ok = step.saturating_sub(1);
            let t = simulate(system, x0, &inputs[..ok], h)?;
            Ok((t.states, Some(step)))
        }
        Err(e) => Err(e),
    }
}

/// Simulates the truth and both learned models from the same `x0` and
/// inputs and records per-step sup-norm deviations.
pub fn compare_responses(
    truth: &ControlAffineSystem,
    fractional: &ControlAffineSystem,
    integer: &ControlAffineSystem,
    x0: &[f64],
    inputs: &[State],
    h: f64,
) -> Result<ComparisonReport> {
    for s in [fractional, integer] {
        if s.state_dim() != truth.state_dim() || s.input_dim() != truth.input_dim() || s.time_kind != truth.time_kind {
            return Err(Error::Dimension("compared systems must share dimensions and time base".into()));
        }
    }
    let horizon = inputs.len();
    let (t, dt) = run_prefix(truth, x0, inputs, h)?;
    let (f, df) = run_prefix(fractional, x0, inputs, h)?;
    let (i, di) = run_prefix(integer, x0, inputs, h)?;
    let mut diverged_runs = Vec::new();
    for (name, d) in [("truth", dt), ("fractional", df), ("integer", di)] {
        if d.is_some() {
            diverged_runs.push(String::from(name));
        }
    }
    let len = t.len().min(f.len()).min(i.len());
    let diverged_at = [dt, df, di].into_iter().flatten().min();
    let (mut truth_s, mut frac_s, mut int_s) = (t, f, i);
    truth_s.truncate(len);
    frac_s.truncate(len);
    int_s.truncate(len);
    let sup = |a: &State, b: &State| a.iter().zip(b).map(|(p, q)| libm::fabs(p - q)).fold(0.0, f64::max);
    let dev_fractional: Vec<f64> = frac_s.iter().zip(&truth_s).map(|(a, b)| sup(a, b)).collect();
    let dev_integer: Vec<f64> = int_s.iter().zip(&truth_s).map(|(a, b)| sup(a, b)).collect();
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(ComparisonReport {
        h,
        x0: x0.to_vec(),
        max_dev_fractional: max(&dev_fractional),
        max_dev_integer: max(&dev_integer),
        mean_dev_fractional: mean(&dev_fractional),
        mean_dev_integer: mean(&dev_integer),
        truth: truth_s,
        fractional: frac_s,
        integer: int_s,
        dev_fractional,
        dev_integer,
        horizon,
        diverged_at,
        diverged_runs,
    })
}

/// Zero input sequence of length `horizon`.
pub fn zero_inputs(input_dim: usize, horizon: usize) -> Vec<State> {
    vec![vec![0.0; input_dim]; horizon]
}
