//! Learning fractional order, control field and drift field from designed
//! experiments.
//!
//! For every initial condition `x0⁽ⁱ⁾` and trial `j = 0..=N` the system is
//! driven for two (continuous) or three (discrete) steps. Memory-reset
//! replicas restart from a recorded state with an empty history; the gap
//! between continued and restarted runs depends only on the order:
//!
//! ```text
//! continuous: x2 − x̃2 = (1 − α) (x0 − x1)
//! discrete:   x2 − x̃2 = ½(α − α²) x0
//!             x3 − x̃3 = ½(α − α²) x1 + ⅙(α³ − 3α² + 2α) x0
//! ```
//!
//! Differencing the first step against the reference trial `j = 0` cancels
//! the drift, which turns the control field into a linear regression over
//! the basis; the drift then follows from the first step itself.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::basis::{build_design_row, BasisExpansion, BasisSpec};
use crate::linalg::{lstsq_qr, Matrix};
use crate::rng::stream;
use crate::simulate::{simulate_continuous, simulate_discrete, SimulationConfig};
use crate::systems::{ControlAffine, ControlAffineSystem, DomainBox, TimeKind};
use crate::{Error, FractionalOrderVector, Result, State};

/// Smallest order an estimate is clamped to.
pub const ALPHA_FLOOR: f64 = 1e-6;

/// Samples whose regressor is below `EXCITATION_FLOOR · diameter` are dropped
/// from order estimation.
pub const EXCITATION_FLOOR: f64 = 1e-10;

/// Uniform input law `U[low, high]` with its seed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InputLaw {
    pub low: f64,
    pub high: f64,
}

impl InputLaw {
    pub fn symmetric(amplitude: f64) -> Self {
        Self {
            low: -amplitude,
            high: amplitude,
        }
    }
}

/// `M` initial conditions × `N + 1` input trials (trial 0 is the reference).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentPlan {
    pub initial_conditions: usize,
    pub trials: usize,
    pub input: InputLaw,
    pub seed: u64,
    /// Zero-based input channel excited in this experiment.
    pub active_channel: usize,
}

impl ExperimentPlan {
    pub fn new(initial_conditions: usize, trials: usize, input: InputLaw, seed: u64) -> Result<Self> {
        let plan = Self {
            initial_conditions,
            trials,
            input,
            seed,
            active_channel: 0,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn for_channel(&self, channel: usize) -> Self {
        Self {
            active_channel: channel,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_conditions == 0 || self.trials == 0 {
            return Err(Error::Usage("experiment plan needs M >= 1 and N >= 1".into()));
        }
        if !self.input.low.is_finite() || !self.input.high.is_finite() || self.input.low > self.input.high {
            return Err(Error::Usage("input range must be finite with low <= high".into()));
        }
        Ok(())
    }

    /// Initial conditions, uniform on the domain. Independent of the channel,
    /// so every channel's experiment starts from the same points.
    pub fn initial_states(&self, domain: &DomainBox) -> Vec<State> {
        let mut rng = stream(self.seed, 0);
        (0..self.initial_conditions).map(|_| domain.sample(&mut rng)).collect()
    }

    /// `[u0, u1, u2]` scalar draws for channel `active_channel`, trial `(i, j)`.
    fn input_triples(&self, i: usize) -> Vec<[f64; 3]> {
        let mut rng = stream(self.seed, ((self.active_channel as u64 + 1) << 32) | i as u64);
        let (lo, hi) = (self.input.low, self.input.high);
        (0..=self.trials)
            .map(|_| {
                let mut t = [0.0; 3];
                for v in &mut t {
                    *v = lo + (hi - lo) * rng.random::<f64>();
                }
                t
            })
            .collect()
    }
}

/// Recorded experiments, indexed `[i][j]` with `j = 0` the reference trial.
/// `u2`, `x3`, `xt3` are empty for continuous-time data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDataset {
    pub time_kind: TimeKind,
    pub h: f64,
    pub seed: u64,
    pub active_channel: usize,
    pub input_dim: usize,
    pub domain: DomainBox,
    pub x0: Vec<State>,
    pub u0: Vec<Vec<State>>,
    pub u1: Vec<Vec<State>>,
    pub u2: Vec<Vec<State>>,
    pub x1: Vec<Vec<State>>,
    pub x2: Vec<Vec<State>>,
    pub xt2: Vec<Vec<State>>,
    pub x3: Vec<Vec<State>>,
    pub xt3: Vec<Vec<State>>,
}

impl ExperimentDataset {
    pub fn initial_conditions(&self) -> usize {
        self.x0.len()
    }

    /// `N` (the number of non-reference trials).
    pub fn trials(&self) -> usize {
        self.u0.first().map_or(0, |r| r.len().saturating_sub(1))
    }

    pub fn state_dim(&self) -> usize {
        self.x0.first().map_or(0, Vec::len)
    }

    /// Checks index ranges and that only the active channel is excited.
    pub fn validate(&self) -> Result<()> {
        let m = self.initial_conditions();
        let n = self.state_dim();
        if m == 0 || self.trials() == 0 {
            return Err(Error::Dimension("dataset needs M >= 1 and N >= 1".into()));
        }
        let t = self.trials() + 1;
        let mut grids = vec![&self.u0, &self.u1, &self.x1, &self.x2, &self.xt2];
        if self.time_kind == TimeKind::Discrete {
            grids.extend([&self.u2, &self.x3, &self.xt3]);
        }
        for g in grids {
            if g.len() != m || g.iter().any(|row| row.len() != t) {
                return Err(Error::Dimension("dataset grids must all be M x (N+1)".into()));
            }
        }
        let states = [&self.x1, &self.x2, &self.xt2, &self.x3, &self.xt3];
        if self.x0.iter().any(|x| x.len() != n) || states.iter().any(|g| g.iter().flatten().any(|x| x.len() != n)) {
            return Err(Error::Dimension(alloc::format!("every state must have length {n}")));
        }
        if self.active_channel >= self.input_dim {
            return Err(Error::Usage(alloc::format!(
                "active channel {} out of range for {} inputs",
                self.active_channel + 1,
                self.input_dim
            )));
        }
        for u in [&self.u0, &self.u1, &self.u2].into_iter().flat_map(|g| g.iter().flatten()) {
            if u.len() != self.input_dim {
                return Err(Error::Dimension("input vectors must have the system's input dimension".into()));
            }
            if u.iter().enumerate().any(|(q, &v)| q != self.active_channel && v != 0.0) {
                return Err(Error::Usage(alloc::format!(
                    "dataset excites channels other than the active channel {}",
                    self.active_channel + 1
                )));
            }
        }
        Ok(())
    }
}

fn channel_input(m: usize, channel: usize, value: f64) -> State {
    let mut u = vec![0.0; m];
    u[channel] = value;
    u
}

fn check_plan(system: &ControlAffineSystem, plan: &ExperimentPlan, kind: TimeKind) -> Result<()> {
    plan.validate()?;
    if system.time_kind != kind {
        return Err(Error::Usage(alloc::format!(
            "{kind} experiment requested for a {} system",
            system.time_kind
        )));
    }
    if plan.active_channel >= system.input_dim() {
        return Err(Error::Usage(alloc::format!(
            "active channel {} out of range for {} inputs",
            plan.active_channel + 1,
            system.input_dim()
        )));
    }
    Ok(())
}

fn empty_dataset(system: &ControlAffineSystem, plan: &ExperimentPlan, h: f64) -> ExperimentDataset {
    ExperimentDataset {
        time_kind: system.time_kind,
        h,
        seed: plan.seed,
        active_channel: plan.active_channel,
        input_dim: system.input_dim(),
        domain: system.domain.clone(),
        x0: Vec::new(),
        u0: Vec::new(),
        u1: Vec::new(),
        u2: Vec::new(),
        x1: Vec::new(),
        x2: Vec::new(),
        xt2: Vec::new(),
        x3: Vec::new(),
        xt3: Vec::new(),
    }
}

fn diverged(i: usize, j: usize, offset: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Diverged { step } => Error::DatasetDiverged { i, j, step: step + offset },
        other => other,
    }
}

/// Two consecutive steps from every `(x0⁽ⁱ⁾, trial j)`, plus the replica
/// restarted at `x1` with empty memory and driven by `u1`.
pub fn generate_dataset_continuous(
    system: &ControlAffineSystem,
    plan: &ExperimentPlan,
    config: &SimulationConfig,
) -> Result<ExperimentDataset> {
    check_plan(system, plan, TimeKind::Continuous)?;
    let h = config.h;
    let two = SimulationConfig::new(h, 2)?;
    let one = SimulationConfig::new(h, 1)?;
    let m = system.input_dim();
    let mut ds = empty_dataset(system, plan, h);
    ds.x0 = plan.initial_states(&system.domain);
    for (i, x0) in ds.x0.iter().enumerate() {
        let (mut u0r, mut u1r, mut x1r, mut x2r, mut xt2r) = (vec![], vec![], vec![], vec![], vec![]);
        for (j, t) in plan.input_triples(i).into_iter().enumerate() {
            let u0 = channel_input(m, plan.active_channel, t[0]);
            let u1 = channel_input(m, plan.active_channel, t[1]);
            let run = simulate_continuous(system, x0, &[u0.clone(), u1.clone()], &two).map_err(diverged(i, j, 0))?;
            let x1 = run.states[1].clone();
            let reset = simulate_continuous(system, &x1, core::slice::from_ref(&u1), &one).map_err(diverged(i, j, 1))?;
            u0r.push(u0);
            u1r.push(u1);
            x1r.push(x1);
            x2r.push(run.states[2].clone());
            xt2r.push(reset.states[1].clone());
        }
        ds.u0.push(u0r);
        ds.u1.push(u1r);
        ds.x1.push(x1r);
        ds.x2.push(x2r);
        ds.xt2.push(xt2r);
    }
    Ok(ds)
}

/// Three consecutive steps from every `(x0⁽ⁱ⁾, trial j)`, plus two
/// fresh-memory replicas: one step from `x1` under `u1` (giving `x̃2`) and
/// one step from `x2` under `u2` (giving `x̃3`).
pub fn generate_dataset_discrete(system: &ControlAffineSystem, plan: &ExperimentPlan) -> Result<ExperimentDataset> {
    check_plan(system, plan, TimeKind::Discrete)?;
    let m = system.input_dim();
    let mut ds = empty_dataset(system, plan, 1.0);
    ds.x0 = plan.initial_states(&system.domain);
    for (i, x0) in ds.x0.iter().enumerate() {
        let mut rows: [Vec<State>; 8] = Default::default();
        for (j, t) in plan.input_triples(i).into_iter().enumerate() {
            let us: Vec<State> = t.iter().map(|&v| channel_input(m, plan.active_channel, v)).collect();
            let run = simulate_discrete(system, x0, &us, 3).map_err(diverged(i, j, 0))?;
            let xt2 = simulate_discrete(system, &run.states[1], &us[1..2], 1).map_err(diverged(i, j, 1))?;
            let xt3 = simulate_discrete(system, &run.states[2], &us[2..3], 1).map_err(diverged(i, j, 2))?;
            let [u0, u1, u2, x1, x2, x3, xt2r, xt3r] = &mut rows;
            u0.push(us[0].clone());
            u1.push(us[1].clone());
            u2.push(us[2].clone());
            x1.push(run.states[1].clone());
            x2.push(run.states[2].clone());
            x3.push(run.states[3].clone());
            xt2r.push(xt2.states[1].clone());
            xt3r.push(xt3.states[1].clone());
        }
        let [u0, u1, u2, x1, x2, x3, xt2, xt3] = rows;
        ds.u0.push(u0);
        ds.u1.push(u1);
        ds.u2.push(u2);
        ds.x1.push(x1);
        ds.x2.push(x2);
        ds.x3.push(x3);
        ds.xt2.push(xt2);
        ds.xt3.push(xt3);
    }
    Ok(ds)
}

/// Dispatches on the system's time base.
pub fn generate_dataset(system: &ControlAffineSystem, plan: &ExperimentPlan, h: f64) -> Result<ExperimentDataset> {
    match system.time_kind {
        TimeKind::Continuous => generate_dataset_continuous(system, plan, &SimulationConfig::new(h, 2)?),
        TimeKind::Discrete => generate_dataset_discrete(system, plan),
    }
}

// ---------------------------------------------------------------------------
// Order estimation

/// Root pair of `α − α² = c` and the cubic-identity residual of each root.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RootSelection {
    pub c: f64,
    pub roots: [f64; 2],
    pub residuals: [f64; 2],
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OrderEstimate {
    /// Estimate clamped into `[ALPHA_FLOOR, 1]`.
    pub alpha: FractionalOrderVector,
    /// Unclamped per-component estimates.
    pub raw: Vec<f64>,
    /// Samples that passed the excitation floor, per component.
    pub samples_used: Vec<usize>,
    /// Root-mean-square residual of the order identity, per component.
    pub rms_residual: Vec<f64>,
    /// Discrete data only.
    pub root_selection: Option<Vec<RootSelection>>,
}

/// Weight of a sample whose measurements have magnitude `scale`: the
/// inverse variance under noise proportional to the state magnitude.
fn relative_weight(scale: f64, floor: f64) -> f64 {
    let s = scale.max(floor);
    1.0 / (s * s)
}

fn clamp_order(a: f64) -> f64 {
    if a.is_nan() {
        ALPHA_FLOOR
    } else {
        a.clamp(ALPHA_FLOOR, 1.0)
    }
}

fn samples(ds: &ExperimentDataset) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..ds.initial_conditions()).flat_map(move |i| (0..=ds.trials()).map(move |j| (i, j)))
}

/// Solves `x2 − x̃2 = (1 − α)(x0 − x1)` per component by a weighted
/// least-squares slope through the origin over every `(i, j)` sample.
pub fn estimate_order_continuous(ds: &ExperimentDataset) -> Result<OrderEstimate> {
    if ds.time_kind != TimeKind::Continuous {
        return Err(Error::Usage("continuous order estimation on discrete data".into()));
    }
    ds.validate()?;
    let n = ds.state_dim();
    let floor = EXCITATION_FLOOR * ds.domain.diameter();
    let mut raw = Vec::with_capacity(n);
    let mut used = Vec::with_capacity(n);
    let mut rms = Vec::with_capacity(n);
    for c in 0..n {
        let (mut sde, mut see, mut count) = (0.0, 0.0, 0usize);
        let mut pts = Vec::new();
        for (i, j) in samples(ds) {
            let e = ds.x0[i][c] - ds.x1[i][j][c];
            if libm::fabs(e) < floor {
                continue;
            }
            let d = ds.x2[i][j][c] - ds.xt2[i][j][c];
            let scale = libm::fabs(ds.x2[i][j][c]).max(libm::fabs(ds.xt2[i][j][c]));
            let w = relative_weight(scale, floor.max(f64::MIN_POSITIVE));
            sde += w * d * e;
            see += w * e * e;
            count += 1;
            pts.push((d, e));
        }
        if count == 0 {
            return Err(Error::InsufficientExcitation { component: c });
        }
        let slope = sde / see;
        raw.push(1.0 - slope);
        used.push(count);
        let ss: f64 = pts.iter().map(|(d, e)| (d - slope * e) * (d - slope * e)).sum();
        rms.push(libm::sqrt(ss / count as f64));
    }
    Ok(OrderEstimate {
        alpha: FractionalOrderVector::new(raw.iter().map(|&a| clamp_order(a)).collect())?,
        raw,
        samples_used: used,
        rms_residual: rms,
        root_selection: None,
    })
}

/// `⅙(α³ − 3α² + 2α)`, i.e. `−ψ(α, 3)`.
fn cubic_memory(a: f64) -> f64 {
    (a * a * a - 3.0 * a * a + 2.0 * a) / 6.0
}

/// Discriminants above `−DISCRIMINANT_TOLERANCE` are clamped to zero.
pub const DISCRIMINANT_TOLERANCE: f64 = 0.05;

/// Estimates `c = α − α²` from `2(x2 − x̃2) = c x0`, then picks the root of
/// `α² − α + c = 0` that better satisfies the `x3 − x̃3` identity.
pub fn estimate_order_discrete(ds: &ExperimentDataset) -> Result<OrderEstimate> {
    if ds.time_kind != TimeKind::Discrete {
        return Err(Error::Usage("discrete order estimation on continuous data".into()));
    }
    ds.validate()?;
    let n = ds.state_dim();
    let floor = EXCITATION_FLOOR * ds.domain.diameter();
    let wfloor = floor.max(f64::MIN_POSITIVE);
    let mut raw = Vec::with_capacity(n);
    let mut used = Vec::with_capacity(n);
    let mut rms = Vec::with_capacity(n);
    let mut selections = Vec::with_capacity(n);
    for c in 0..n {
        let (mut sdx, mut sxx, mut count) = (0.0, 0.0, 0usize);
        for (i, j) in samples(ds) {
            let x0 = ds.x0[i][c];
            if libm::fabs(x0) < floor {
                continue;
            }
            let d = ds.x2[i][j][c] - ds.xt2[i][j][c];
            let w = relative_weight(libm::fabs(ds.x2[i][j][c]).max(libm::fabs(ds.xt2[i][j][c])), wfloor);
            sdx += w * 2.0 * d * x0;
            sxx += w * x0 * x0;
            count += 1;
        }
        if count == 0 {
            return Err(Error::InsufficientExcitation { component: c });
        }
        let cc = sdx / sxx;
        let mut disc = 1.0 - 4.0 * cc;
        if disc < 0.0 {
            if disc < -DISCRIMINANT_TOLERANCE {
                return Err(Error::InconsistentData {
                    component: c,
                    discriminant: disc,
                });
            }
            disc = 0.0;
        }
        let root = libm::sqrt(disc);
        let roots = [(1.0 - root) / 2.0, (1.0 + root) / 2.0];

        let residual = |a: f64| -> f64 {
            let half = (a - a * a) / 2.0;
            let cubic = cubic_memory(a);
            let mut acc = 0.0;
            for (i, j) in samples(ds) {
                let d3 = ds.x3[i][j][c] - ds.xt3[i][j][c];
                let r = d3 - half * ds.x1[i][j][c] - cubic * ds.x0[i][c];
                let w = relative_weight(libm::fabs(ds.x3[i][j][c]).max(libm::fabs(ds.xt3[i][j][c])), wfloor);
                acc += w * r * r;
            }
            acc
        };
        let residuals = [residual(roots[0]), residual(roots[1])];
        // roots outside (0, 1] are not admissible; ties go to the larger root
        let admissible = |k: usize| roots[k] > 0.0 && roots[k] <= 1.0;
        let chosen = match (admissible(0), admissible(1)) {
            (true, true) => {
                if residuals[0] < residuals[1] {
                    0
                } else {
                    1
                }
            }
            (true, false) => 0,
            _ => 1,
        };
        let alpha = roots[chosen];
        raw.push(alpha);
        used.push(count);
        let half = (alpha - alpha * alpha) / 2.0;
        let ss: f64 = samples(ds)
            .filter(|&(i, _)| libm::fabs(ds.x0[i][c]) >= floor)
            .map(|(i, j)| {
                let r = ds.x2[i][j][c] - ds.xt2[i][j][c] - half * ds.x0[i][c];
                r * r
            })
            .sum();
        rms.push(libm::sqrt(ss / count as f64));
        selections.push(RootSelection {
            c: cc,
            roots,
            residuals,
            chosen,
        });
    }
    Ok(OrderEstimate {
        alpha: FractionalOrderVector::new(raw.iter().map(|&a| clamp_order(a)).collect())?,
        raw,
        samples_used: used,
        rms_residual: rms,
        root_selection: Some(selections),
    })
}

pub fn estimate_order(ds: &ExperimentDataset) -> Result<OrderEstimate> {
    match ds.time_kind {
        TimeKind::Continuous => estimate_order_continuous(ds),
        TimeKind::Discrete => estimate_order_discrete(ds),
    }
}

// ---------------------------------------------------------------------------
// Field regression

#[derive(Debug, Clone)]
pub struct ControlFit {
    pub channel: usize,
    pub expansion: BasisExpansion,
    pub residual_norm: f64,
    pub condition: f64,
    pub rows: usize,
}

/// Regression targets and design matrix for channel `ds.active_channel`,
/// differencing every trial against trial `reference`.
pub fn control_regression(
    ds: &ExperimentDataset,
    basis: &BasisSpec,
    alpha_hat: &FractionalOrderVector,
    reference: usize,
) -> Result<(Matrix, Vec<f64>)> {
    ds.validate()?;
    let n = ds.state_dim();
    if basis.domain().dim() != n || alpha_hat.len() != n {
        return Err(Error::Dimension("basis, order and dataset state dimensions differ".into()));
    }
    if reference > ds.trials() {
        return Err(Error::Index {
            k: reference,
            len: ds.trials() + 1,
        });
    }
    let ch = ds.active_channel;
    let inv_hpow: Vec<f64> = match ds.time_kind {
        TimeKind::Continuous => alpha_hat.step_powers(ds.h).iter().map(|p| 1.0 / p).collect(),
        TimeKind::Discrete => vec![1.0; n],
    };
    let l = basis.len();
    let mut phi = Matrix::zeros(0, n * l);
    let mut y = Vec::with_capacity(ds.initial_conditions() * ds.trials() * n);
    // rows ordered (1,1), …, (M,1), …, (1,N), …, (M,N)
    for j in (0..=ds.trials()).filter(|&j| j != reference) {
        for i in 0..ds.initial_conditions() {
            let du = ds.u0[i][j][ch] - ds.u0[i][reference][ch];
            phi.append_rows(&build_design_row(basis, &ds.x0[i], du))?;
            for r in 0..n {
                y.push(inv_hpow[r] * (ds.x1[i][j][r] - ds.x1[i][reference][r]));
            }
        }
    }
    Ok((phi, y))
}

/// Least-squares coefficients of the active channel's column of `g`.
pub fn fit_control_field(ds: &ExperimentDataset, basis: &BasisSpec, alpha_hat: &FractionalOrderVector) -> Result<ControlFit> {
    fit_control_field_with_reference(ds, basis, alpha_hat, 0)
}

pub fn fit_control_field_with_reference(
    ds: &ExperimentDataset,
    basis: &BasisSpec,
    alpha_hat: &FractionalOrderVector,
    reference: usize,
) -> Result<ControlFit> {
    let (phi, y) = control_regression(ds, basis, alpha_hat, reference)?;
    let sol = lstsq_qr(&phi, &y)?;
    Ok(ControlFit {
        channel: ds.active_channel,
        expansion: BasisExpansion::new(basis.clone(), sol.coefficients)?,
        residual_norm: sol.residual_norm,
        condition: sol.condition,
        rows: phi.rows(),
    })
}

/// `ĝ(x)` as an `n × m` row-major matrix from per-channel expansions.
pub fn eval_control(g_hat: &[BasisExpansion], x: &[f64]) -> Vec<f64> {
    let m = g_hat.len();
    let cols: Vec<Vec<f64>> = g_hat.iter().map(|e| e.eval(x)).collect();
    let n = cols.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n * m];
    for (l, col) in cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            out[r * m + l] = *v;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct DriftFit {
    /// `(x0⁽ⁱ⁾, f̂(x0⁽ⁱ⁾))`.
    pub samples: Vec<(State, State)>,
    pub expansion: Option<BasisExpansion>,
    pub residual_norm: Option<f64>,
}

/// Drift samples at every initial condition, averaged over trials
/// `j = 1..=N`, and optionally a basis expansion fitted to them.
pub fn fit_drift_field(
    ds: &ExperimentDataset,
    g_hat: &[BasisExpansion],
    alpha_hat: &FractionalOrderVector,
    basis: Option<&BasisSpec>,
) -> Result<DriftFit> {
    ds.validate()?;
    let n = ds.state_dim();
    if alpha_hat.len() != n {
        return Err(Error::Dimension("order and dataset state dimensions differ".into()));
    }
    if g_hat.len() != ds.input_dim {
        return Err(Error::Dimension(alloc::format!(
            "{} control expansions for {} inputs",
            g_hat.len(),
            ds.input_dim
        )));
    }
    let m = ds.input_dim;
    let inv_hpow: Vec<f64> = alpha_hat.step_powers(ds.h).iter().map(|p| 1.0 / p).collect();
    let trials = ds.trials();
    let samples: Vec<(State, State)> = ds
        .x0
        .iter()
        .enumerate()
        .map(|(i, x0)| {
            let g = eval_control(g_hat, x0);
            let mut acc = vec![0.0; n];
            for j in 1..=trials {
                let u = &ds.u0[i][j];
                let x1 = &ds.x1[i][j];
                for r in 0..n {
                    let gu: f64 = (0..m).map(|l| g[r * m + l] * u[l]).sum();
                    acc[r] += match ds.time_kind {
                        TimeKind::Continuous => inv_hpow[r] * (x1[r] - x0[r]) - gu,
                        TimeKind::Discrete => x1[r] - gu - alpha_hat[r] * x0[r],
                    };
                }
            }
            for v in &mut acc {
                *v /= trials as f64;
            }
            (x0.clone(), acc)
        })
        .collect();

    let (expansion, residual_norm) = match basis {
        None => (None, None),
        Some(spec) => {
            let l = spec.len();
            let mut phi = Matrix::zeros(0, n * l);
            let mut y = Vec::with_capacity(samples.len() * n);
            for (x, f) in &samples {
                phi.append_rows(&build_design_row(spec, x, 1.0))?;
                y.extend_from_slice(f);
            }
            let sol = lstsq_qr(&phi, &y)?;
            (Some(BasisExpansion::new(spec.clone(), sol.coefficients)?), Some(sol.residual_norm))
        }
    };
    Ok(DriftFit {
        samples,
        expansion,
        residual_norm,
    })
}

// ---------------------------------------------------------------------------
// Pipelines

#[derive(Debug, Clone)]
pub struct ControlDiagnostics {
    pub channel: usize,
    pub residual_norm: f64,
    pub condition: f64,
    pub rows: usize,
}

/// Learned `(α̂, f̂, ĝ)`.
#[derive(Debug, Clone)]
pub struct LearnedModel {
    pub time_kind: TimeKind,
    pub h: f64,
    pub domain: DomainBox,
    pub alpha_hat: FractionalOrderVector,
    /// `None` for the integer-order baseline, whose order is fixed.
    pub order: Option<OrderEstimate>,
    pub basis: BasisSpec,
    pub g_hat: Vec<BasisExpansion>,
    pub f_samples: Vec<(State, State)>,
    pub f_hat: Option<BasisExpansion>,
    pub control: Vec<ControlDiagnostics>,
    pub drift_residual: Option<f64>,
}

impl LearnedModel {
    pub fn state_dim(&self) -> usize {
        self.alpha_hat.len()
    }

    pub fn input_dim(&self) -> usize {
        self.g_hat.len()
    }

    pub fn eval_control(&self, x: &[f64]) -> Vec<f64> {
        eval_control(&self.g_hat, x)
    }

    /// The fitted drift expansion, if one was fitted.
    pub fn eval_drift(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.f_hat.as_ref().map(|f| f.eval(x))
    }

    /// The model as a simulatable system. Needs the drift expansion.
    pub fn to_system(&self) -> Result<ControlAffineSystem> {
        let f_hat = self
            .f_hat
            .clone()
            .ok_or_else(|| Error::Usage("learned model has no drift expansion to evaluate".into()))?;
        let fields = LearnedFields {
            f_hat,
            g_hat: self.g_hat.clone(),
        };
        ControlAffineSystem::new(Arc::new(fields), self.domain.clone(), self.alpha_hat.clone(), self.time_kind)
    }
}

/// Expansion-backed vector fields of a learned model.
pub struct LearnedFields {
    pub f_hat: BasisExpansion,
    pub g_hat: Vec<BasisExpansion>,
}

impl ControlAffine for LearnedFields {
    fn state_dim(&self) -> usize {
        self.f_hat.outputs()
    }
    fn input_dim(&self) -> usize {
        self.g_hat.len()
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.f_hat.eval(x));
    }
    fn control(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&eval_control(&self.g_hat, x));
    }
}

fn check_channel_datasets(datasets: &[ExperimentDataset]) -> Result<()> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::Usage("at least one dataset is required".into()))?;
    if datasets.len() != first.input_dim {
        return Err(Error::Usage(alloc::format!(
            "{} datasets supplied for {} input channels",
            datasets.len(),
            first.input_dim
        )));
    }
    for (l, ds) in datasets.iter().enumerate() {
        if ds.active_channel != l {
            return Err(Error::Usage(alloc::format!(
                "dataset {} excites channel {}, expected channel {}",
                l + 1,
                ds.active_channel + 1,
                l + 1
            )));
        }
        if ds.time_kind != first.time_kind || ds.x0 != first.x0 {
            return Err(Error::Usage("channel datasets must share time base and initial conditions".into()));
        }
    }
    Ok(())
}

fn fit_fields(
    datasets: &[ExperimentDataset],
    basis: &BasisSpec,
    alpha_hat: FractionalOrderVector,
    order: Option<OrderEstimate>,
) -> Result<LearnedModel> {
    let mut g_hat = Vec::with_capacity(datasets.len());
    let mut control = Vec::with_capacity(datasets.len());
    for ds in datasets {
        let fit = fit_control_field(ds, basis, &alpha_hat)?;
        control.push(ControlDiagnostics {
            channel: fit.channel,
            residual_norm: fit.residual_norm,
            condition: fit.condition,
            rows: fit.rows,
        });
        g_hat.push(fit.expansion);
    }
    let drift = fit_drift_field(&datasets[0], &g_hat, &alpha_hat, Some(basis))?;
    let first = &datasets[0];
    Ok(LearnedModel {
        time_kind: first.time_kind,
        h: first.h,
        domain: first.domain.clone(),
        alpha_hat,
        order,
        basis: basis.clone(),
        g_hat,
        f_samples: drift.samples,
        f_hat: drift.expansion,
        control,
        drift_residual: drift.residual_norm,
    })
}

/// Order from the first channel's dataset, one control column per channel
/// dataset, drift from the first dataset. `datasets[l]` must excite channel `l`.
pub fn learn_from_datasets(datasets: &[ExperimentDataset], basis: &BasisSpec) -> Result<LearnedModel> {
    check_channel_datasets(datasets)?;
    let order = estimate_order(&datasets[0])?;
    fit_fields(datasets, basis, order.alpha.clone(), Some(order))
}

/// The same regressions with the order pinned to one (no memory).
pub fn integer_order_baseline(datasets: &[ExperimentDataset], basis: &BasisSpec) -> Result<LearnedModel> {
    check_channel_datasets(datasets)?;
    let n = datasets[0].state_dim();
    fit_fields(datasets, basis, FractionalOrderVector::integer(n), None)
}

/// One dataset per input channel, all sharing the plan's initial conditions.
pub fn generate_channel_datasets(system: &ControlAffineSystem, plan: &ExperimentPlan, h: f64) -> Result<Vec<ExperimentDataset>> {
    (0..system.input_dim())
        .map(|l| generate_dataset(system, &plan.for_channel(l), h))
        .collect()
}

/// Generate and learn in one go (noiseless).
pub fn learn(system: &ControlAffineSystem, plan: &ExperimentPlan, h: f64, basis: &BasisSpec) -> Result<LearnedModel> {
    let datasets = generate_channel_datasets(system, plan, h)?;
    learn_from_datasets(&datasets, basis)
}
