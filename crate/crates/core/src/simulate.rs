//! Full-memory forward simulation under zero-order-hold inputs.
//!
//! Continuous-time systems are advanced with the Grünwald–Letnikov scheme
//!
//! ```text
//! x(k+1) = h^α (f(x(k)) + g(x(k)) u(k)) − Σ_{j=1}^{k+1} ψ(α,j) x(k+1−j)
//!          + (I + Σ_{j=1}^{k+1} ψ(α,j)) x(0)
//! ```
//!
//! and discrete-time systems with
//!
//! ```text
//! x(k+1) = f(x(k)) + g(x(k)) u(k) − Σ_{j=1}^{k+1} ψ(α,j) x(k+1−j).
//! ```
//!
//! Every past state is kept; there is no short-memory truncation.

use alloc::vec::Vec;

use crate::frac::MemoryCoefficients;
use crate::systems::{ControlAffineSystem, TimeKind};
use crate::{Error, Result, State};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    /// Step size; ignored by discrete-time systems.
    pub h: f64,
    pub horizon: usize,
}

impl SimulationConfig {
    pub fn new(h: f64, horizon: usize) -> Result<Self> {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::Parameter(alloc::format!("step size must be positive, got {h}")));
        }
        if horizon == 0 {
            return Err(Error::Usage("horizon must be at least 1".into()));
        }
        Ok(Self { h, horizon })
    }
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { h: 0.1, horizon: 200 }
    }
}

/// States `x(0..=K)` and the held inputs `u(0..K)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub states: Vec<State>,
    pub inputs: Vec<State>,
    pub time_kind: TimeKind,
    pub h: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Time stamp of step `k` (`k·h` for continuous systems, `k` otherwise).
    pub fn time(&self, k: usize) -> f64 {
        match self.time_kind {
            TimeKind::Continuous => k as f64 * self.h,
            TimeKind::Discrete => k as f64,
        }
    }
}

fn check_step_args(system: &ControlAffineSystem, coeffs: &MemoryCoefficients, history: &[State], u: &[f64]) -> Result<()> {
    let n = system.state_dim();
    if history.is_empty() {
        return Err(Error::Dimension("history must contain x(0)".into()));
    }
    if coeffs.dim() != n {
        return Err(Error::Dimension("coefficient table does not match state dimension".into()));
    }
    if history.len() > coeffs.k_max() + 1 {
        return Err(Error::HistoryLength {
            history: history.len(),
            table: coeffs.k_max() + 1,
        });
    }
    if u.len() != system.input_dim() {
        return Err(Error::Dimension(alloc::format!(
            "input has length {}, system expects {}",
            u.len(),
            system.input_dim()
        )));
    }
    if history.iter().any(|x| x.len() != n) {
        return Err(Error::Dimension(alloc::format!("states must have length {n}")));
    }
    Ok(())
}

fn finite_or_diverged(x: State, step: usize) -> Result<State> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Diverged { step })
    }
}

/// One step of the continuous-time scheme from the chronological history
/// `x(0), …, x(k)` with input `u(k)`. Returns `x(k+1)`.
///
/// The memory and compensation terms are combined as
/// `x(0) − Σ_{j=1}^{k+1} ψ(α,j) (x(k+1−j) − x(0))`, which is the same
/// expression regrouped so that the `k = 0` step is exactly
/// `x(0) + h^α (f + g u)`.
pub fn step_continuous(
    system: &ControlAffineSystem,
    coeffs: &MemoryCoefficients,
    history: &[State],
    u: &[f64],
    h: f64,
) -> Result<State> {
    if system.time_kind != TimeKind::Continuous {
        return Err(Error::Usage("step_continuous called on a discrete-time system".into()));
    }
    check_step_args(system, coeffs, history, u)?;
    let k = history.len() - 1;
    let x0 = &history[0];
    let rhs = system.rhs(&history[k], u);
    let hpow = coeffs.alpha().step_powers(h);
    let next = (0..system.state_dim())
        .map(|i| {
            let psi = coeffs.component(i);
            let mut memory = 0.0;
            for j in 1..=k + 1 {
                memory += psi[j] * (history[k + 1 - j][i] - x0[i]);
            }
            x0[i] + hpow[i] * rhs[i] - memory
        })
        .collect();
    finite_or_diverged(next, k + 1)
}

/// One step of the discrete-time recursion. Returns `x(k+1)`.
pub fn step_discrete(
    system: &ControlAffineSystem,
    coeffs: &MemoryCoefficients,
    history: &[State],
    u: &[f64],
) -> Result<State> {
    if system.time_kind != TimeKind::Discrete {
        return Err(Error::Usage("step_discrete called on a continuous-time system".into()));
    }
    check_step_args(system, coeffs, history, u)?;
    let k = history.len() - 1;
    let mut next = system.rhs(&history[k], u);
    let memory = coeffs.memory_sum(history)?;
    for (x, m) in next.iter_mut().zip(memory) {
        *x -= m;
    }
    finite_or_diverged(next, k + 1)
}

fn check_inputs(system: &ControlAffineSystem, x0: &[f64], inputs: &[State], horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::Usage("horizon must be at least 1".into()));
    }
    if inputs.len() != horizon {
        return Err(Error::Dimension(alloc::format!(
            "{} inputs supplied for a horizon of {horizon}",
            inputs.len()
        )));
    }
    if x0.len() != system.state_dim() {
        return Err(Error::Dimension(alloc::format!(
            "initial state has length {}, system expects {}",
            x0.len(),
            system.state_dim()
        )));
    }
    Ok(())
}

pub fn simulate_continuous(
    system: &ControlAffineSystem,
    x0: &[f64],
    inputs: &[State],
    config: &SimulationConfig,
) -> Result<Trajectory> {
    check_inputs(system, x0, inputs, config.horizon)?;
    let coeffs = MemoryCoefficients::new(system.alpha.clone(), config.horizon);
    let mut states = Vec::with_capacity(config.horizon + 1);
    states.push(x0.to_vec());
    for u in inputs {
        let next = step_continuous(system, &coeffs, &states, u, config.h)?;
        states.push(next);
    }
    Ok(Trajectory {
        states,
        inputs: inputs.to_vec(),
        time_kind: TimeKind::Continuous,
        h: config.h,
    })
}

pub fn simulate_discrete(system: &ControlAffineSystem, x0: &[f64], inputs: &[State], horizon: usize) -> Result<Trajectory> {
    check_inputs(system, x0, inputs, horizon)?;
    let coeffs = MemoryCoefficients::new(system.alpha.clone(), horizon);
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(x0.to_vec());
    for u in inputs {
        let next = step_discrete(system, &coeffs, &states, u)?;
        states.push(next);
    }
    Ok(Trajectory {
        states,
        inputs: inputs.to_vec(),
        time_kind: TimeKind::Discrete,
        h: 1.0,
    })
}

/// Dispatches on the system's time base. `h` is ignored for discrete systems.
pub fn simulate(system: &ControlAffineSystem, x0: &[f64], inputs: &[State], h: f64) -> Result<Trajectory> {
    match system.time_kind {
        TimeKind::Continuous => simulate_continuous(system, x0, inputs, &SimulationConfig::new(h, inputs.len())?),
        TimeKind::Discrete => simulate_discrete(system, x0, inputs, inputs.len()),
    }
}

/// `x(k)` as a fresh initial condition. Simulating from the returned state
/// starts with an empty memory: everything before step `k` is dropped.
pub fn reinitialize(trajectory: &Trajectory, at_step: usize) -> Result<State> {
    trajectory.states.get(at_step).cloned().ok_or(Error::Index {
        k: at_step,
        len: trajectory.states.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frac::psi_coefficient;
    use crate::systems::{make_logistic_map, make_van_der_pol, DomainBox, FnFields};
    use crate::FractionalOrderVector;
    use alloc::sync::Arc;
    use alloc::vec;

    fn scalar(alpha: f64, kind: TimeKind, f: fn(f64) -> f64, g: fn(f64) -> f64) -> ControlAffineSystem {
        let fields = FnFields::new(1, 1, move |x, o| o[0] = f(x[0]), move |x, o| o[0] = g(x[0]));
        ControlAffineSystem::new(
            Arc::new(fields),
            DomainBox::from_bounds(&[(-10.0, 10.0)]).unwrap(),
            FractionalOrderVector::uniform(alpha, 1).unwrap(),
            kind,
        )
        .unwrap()
    }

    #[test]
    fn continuous_first_step_closed_form() {
        let vdp = make_van_der_pol(0.5, 0.9).unwrap().system;
        let c = MemoryCoefficients::new(vdp.alpha.clone(), 4);
        let x1 = step_continuous(&vdp, &c, &[vec![1.0, 0.0]], &[0.0], 0.1).unwrap();
        let hp = libm::pow(0.1, 0.9);
        assert!((x1[0] - (1.0 + hp / 3.0)).abs() < 1e-15);
        assert!((x1[1] - 2.0 * hp).abs() < 1e-15);
    }

    #[test]
    fn integer_order_first_step_is_euler() {
        let sys = scalar(1.0, TimeKind::Continuous, |_| 0.0, |_| 1.0);
        let c = MemoryCoefficients::new(sys.alpha.clone(), 1);
        let x1 = step_continuous(&sys, &c, &[vec![0.0]], &[2.0], 0.1).unwrap();
        assert!((x1[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn integer_order_continuous_matches_euler() {
        let sys = scalar(1.0, TimeKind::Continuous, |x| -x + libm::sin(x), |x| 1.0 + 0.1 * x);
        let inputs: Vec<State> = (0..50).map(|k| vec![libm::cos(k as f64)]).collect();
        let traj = simulate_continuous(&sys, &[0.7], &inputs, &SimulationConfig::new(0.05, 50).unwrap()).unwrap();
        for k in 0..50 {
            let x = traj.states[k][0];
            let euler = x + 0.05 * sys.rhs(&[x], &inputs[k])[0];
            assert!((traj.states[k + 1][0] - euler).abs() <= 1e-14);
        }
    }

    #[test]
    fn horizon_one_is_a_single_step() {
        let vdp = make_van_der_pol(0.5, 0.9).unwrap().system;
        let traj = simulate_continuous(&vdp, &[0.3, -1.0], &[vec![0.4]], &SimulationConfig::new(0.1, 1).unwrap()).unwrap();
        let c = MemoryCoefficients::new(vdp.alpha.clone(), 1);
        let step = step_continuous(&vdp, &c, &[vec![0.3, -1.0]], &[0.4], 0.1).unwrap();
        assert_eq!(traj.states, vec![vec![0.3, -1.0], step]);
    }

    #[test]
    fn equilibrium_is_held() {
        let vdp = make_van_der_pol(0.5, 0.9).unwrap().system;
        let traj = simulate_continuous(&vdp, &[0.0, 0.0], &vec![vec![0.0]; 30], &SimulationConfig::new(0.1, 30).unwrap()).unwrap();
        assert!(traj.states.iter().all(|x| x == &vec![0.0, 0.0]));
        let log = make_logistic_map(1.0, 0.6).unwrap().system;
        // x = 0 is a fixed point of the drift, and g(0)u = 0 with u = 0
        let traj = simulate_discrete(&log, &[0.0], &vec![vec![0.0]; 30], 30).unwrap();
        assert!(traj.states.iter().all(|x| x[0] == 0.0));
    }

    #[test]
    fn memory_activates_from_second_step() {
        let run = |alpha| {
            let s = scalar(alpha, TimeKind::Continuous, |x| x * (1.0 - x), |x| 1.0 + 0.5 * x);
            let inputs: Vec<State> = [0.3, -0.2, 0.5, 0.1].iter().map(|&u| vec![u]).collect();
            simulate_continuous(&s, &[0.4], &inputs, &SimulationConfig::new(1.0, 4).unwrap()).unwrap()
        };
        let (a, b) = (run(0.9), run(1.0));
        // h = 1 makes h^α identical, so x(1) agrees and the memory term separates x(2)
        assert_eq!(a.states[1], b.states[1]);
        assert!((a.states[2][0] - b.states[2][0]).abs() > 1e-6);
    }

    #[test]
    fn discrete_examples() {
        let log = make_logistic_map(1.0, 0.6).unwrap().system;
        let c = MemoryCoefficients::new(log.alpha.clone(), 3);
        let x1 = step_discrete(&log, &c, &[vec![0.5]], &[0.0]).unwrap();
        assert!((x1[0] - 0.55).abs() < 1e-15);

        // three steps by hand
        let us = [0.1, -0.2, 0.3];
        let traj = simulate_discrete(&log, &[0.5], &us.iter().map(|&u| vec![u]).collect::<Vec<_>>(), 3).unwrap();
        let f = |x: f64| x * (1.0 - x);
        let g = |x: f64| log.control_at(&[x])[0];
        let p = |j| psi_coefficient(0.6, j).unwrap();
        let x0 = 0.5;
        let x1 = f(x0) + g(x0) * us[0] - p(1) * x0;
        let x2 = f(x1) + g(x1) * us[1] - p(1) * x1 - p(2) * x0;
        let x3 = f(x2) + g(x2) * us[2] - p(1) * x2 - p(2) * x1 - p(3) * x0;
        for (k, e) in [x0, x1, x2, x3].iter().enumerate() {
            assert!((traj.states[k][0] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn integer_discrete_has_no_tail() {
        let s = scalar(1.0, TimeKind::Discrete, |x| 0.1 * x * x, libm::cos);
        let us: Vec<State> = (0..6).map(|k| vec![0.1 * k as f64]).collect();
        let traj = simulate_discrete(&s, &[0.2], &us, 6).unwrap();
        for k in 0..6 {
            let x = traj.states[k][0];
            assert!((traj.states[k + 1][0] - (s.rhs(&[x], &us[k])[0] + x)).abs() < 1e-15);
        }
    }

    #[test]
    fn reinitialize_semantics() {
        let vdp = make_van_der_pol(0.5, 0.9).unwrap().system;
        let cfg = SimulationConfig::new(0.1, 2).unwrap();
        let us = vec![vec![0.5], vec![-0.3]];
        let traj = simulate_continuous(&vdp, &[0.4, 1.0], &us, &cfg).unwrap();
        assert_eq!(reinitialize(&traj, 0).unwrap(), vec![0.4, 1.0]);
        let x1 = reinitialize(&traj, 1).unwrap();
        let reset = simulate_continuous(&vdp, &x1, &us[1..], &SimulationConfig::new(0.1, 1).unwrap()).unwrap();
        for i in 0..2 {
            let lhs = traj.states[2][i] - reset.states[1][i];
            let rhs = (1.0 - 0.9) * (traj.states[0][i] - traj.states[1][i]);
            assert!((lhs - rhs).abs() < 1e-14);
        }
        assert!(reinitialize(&traj, 3).is_err());

        let int = vdp.with_alpha(FractionalOrderVector::integer(2)).unwrap();
        let traj = simulate_continuous(&int, &[0.4, 1.0], &us, &cfg).unwrap();
        let reset = simulate_continuous(&int, &traj.states[1], &us[1..], &SimulationConfig::new(0.1, 1).unwrap()).unwrap();
        for i in 0..2 {
            assert!((traj.states[2][i] - reset.states[1][i]).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        let vdp = make_van_der_pol(0.5, 0.9).unwrap().system;
        assert!(matches!(
            simulate_discrete(&vdp, &[0.0, 0.0], &[vec![0.0]], 1),
            Err(Error::Usage(_))
        ));
        assert!(SimulationConfig::new(0.1, 0).is_err());
        assert!(SimulationConfig::new(0.0, 3).is_err());
        let blow = scalar(0.5, TimeKind::Discrete, |x| x * x * x * x, |_| 0.0);
        let err = simulate_discrete(&blow, &[10.0], &vec![vec![0.0]; 20], 20).unwrap_err();
        assert!(matches!(err, Error::Diverged { step } if step > 1));
    }
}
