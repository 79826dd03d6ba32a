//! Control-affine systems `D^α x = f(x) + g(x) u` (continuous time) and
//! `Δ^α x(k+1) = f(x(k)) + g(x(k)) u(k)` (discrete time), plus the four
//! benchmark systems used throughout the test-suite and the CLI.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use libm::{cos, exp, sin};
use rand::Rng;

use crate::{Error, FractionalOrderVector, Result, State};

/// Drift and control vector fields of a control-affine system.
///
/// Implementations must be pure: the same `x` always yields the same
/// output, with no interior state.
pub trait ControlAffine: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Writes `f(x)` into `out` (length `n`).
    fn drift(&self, x: &[f64], out: &mut [f64]);
    /// Writes `g(x)` into `out` in row-major order (`n × m`).
    fn control(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum TimeKind {
    Continuous,
    Discrete,
}

impl fmt::Display for TimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeKind::Continuous => "continuous",
            TimeKind::Discrete => "discrete",
        })
    }
}

/// Axis-aligned box `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Dimension("domain bounds must be nonempty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !a.is_finite() || !b.is_finite() || a >= b) {
            return Err(Error::Parameter("domain requires finite lower < upper per axis".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            bounds.iter().map(|b| b.0).collect(),
            bounds.iter().map(|b| b.1).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }

    /// Euclidean length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        libm::sqrt(self.lower.iter().zip(&self.upper).map(|(a, b)| (b - a) * (b - a)).sum())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&a, &b)| a + (b - a) * rng.random::<f64>())
            .collect()
    }

    /// Tensor grid with `density` points per axis (endpoints included),
    /// enumerated with the last axis varying fastest.
    pub fn grid(&self, density: usize) -> Vec<State> {
        let n = self.dim();
        let density = density.max(1);
        let axis = |i: usize, t: usize| {
            if density == 1 {
                0.5 * (self.lower[i] + self.upper[i])
            } else {
                self.lower[i] + (self.upper[i] - self.lower[i]) * t as f64 / (density - 1) as f64
            }
        };
        let total = density.pow(n as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            out.push((0..n).map(|i| axis(i, idx[i])).collect());
            for i in (0..n).rev() {
                idx[i] += 1;
                if idx[i] < density {
                    break;
                }
                idx[i] = 0;
            }
        }
        out
    }
}

/// A control-affine system together with its order, domain and time base.
#[derive(Clone)]
pub struct ControlAffineSystem {
    pub fields: Arc<dyn ControlAffine>,
    pub domain: DomainBox,
    pub alpha: FractionalOrderVector,
    pub time_kind: TimeKind,
}

impl fmt::Debug for ControlAffineSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlAffineSystem")
            .field("state_dim", &self.state_dim())
            .field("input_dim", &self.input_dim())
            .field("domain", &self.domain)
            .field("alpha", &self.alpha)
            .field("time_kind", &self.time_kind)
            .finish()
    }
}

impl ControlAffineSystem {
    pub fn new(
        fields: Arc<dyn ControlAffine>,
        domain: DomainBox,
        alpha: FractionalOrderVector,
        time_kind: TimeKind,
    ) -> Result<Self> {
        let n = fields.state_dim();
        if domain.dim() != n || alpha.len() != n {
            return Err(Error::Dimension(alloc::format!(
                "state dim {n}, domain dim {}, order dim {}",
                domain.dim(),
                alpha.len()
            )));
        }
        if fields.input_dim() == 0 {
            return Err(Error::Dimension("input dimension must be at least 1".into()));
        }
        Ok(Self {
            fields,
            domain,
            alpha,
            time_kind,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.fields.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.fields.input_dim()
    }

    /// Same fields and domain, different order.
    pub fn with_alpha(&self, alpha: FractionalOrderVector) -> Result<Self> {
        Self::new(self.fields.clone(), self.domain.clone(), alpha, self.time_kind)
    }

    pub fn drift_at(&self, x: &[f64]) -> State {
        let mut out = vec![0.0; self.state_dim()];
        self.fields.drift(x, &mut out);
        out
    }

    /// `g(x)` row-major, `n × m`.
    pub fn control_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim() * self.input_dim()];
        self.fields.control(x, &mut out);
        out
    }

    /// `f(x) + g(x) u`, summed component by component in channel order.
    pub fn rhs(&self, x: &[f64], u: &[f64]) -> State {
        let n = self.state_dim();
        let m = self.input_dim();
        let mut f = self.drift_at(x);
        let g = self.control_at(x);
        for i in 0..n {
            for l in 0..m {
                f[i] += g[i * m + l] * u[l];
            }
        }
        f
    }
}

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Vector fields supplied as closures.
pub struct FnFields {
    n: usize,
    m: usize,
    drift: Box<DriftFn>,
    control: Box<DriftFn>,
}

impl FnFields {
    pub fn new(
        n: usize,
        m: usize,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        control: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            m,
            drift: Box::new(drift),
            control: Box::new(control),
        }
    }
}

impl ControlAffine for FnFields {
    fn state_dim(&self) -> usize {
        self.n
    }
    fn input_dim(&self) -> usize {
        self.m
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }
    fn control(&self, x: &[f64], out: &mut [f64]) {
        (self.control)(x, out)
    }
}

/// `coef · Π x_i^{powers_i}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// A sum of monomials.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct Polynomial(pub Vec<Monomial>);

impl Polynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|m| m.coef * m.powers.iter().zip(x).map(|(&p, &v)| libm::pow(v, p as f64)).product::<f64>())
            .sum()
    }
}

/// Polynomial drift and control fields, the user-system format of the CLI.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolynomialFields {
    /// One polynomial per state component.
    pub drift: Vec<Polynomial>,
    /// `control[i][l]` is `g_{i,l}`.
    pub control: Vec<Vec<Polynomial>>,
}

impl PolynomialFields {
    pub fn validate(&self) -> Result<()> {
        let n = self.drift.len();
        if n == 0 || self.control.len() != n {
            return Err(Error::Dimension("polynomial system needs n drift rows and n control rows".into()));
        }
        let m = self.control[0].len();
        if m == 0 || self.control.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("control rows must share a nonzero input dimension".into()));
        }
        let all = self.drift.iter().chain(self.control.iter().flatten());
        if all.flat_map(|p| p.0.iter()).any(|mono| mono.powers.len() != n) {
            return Err(Error::Dimension(alloc::format!("every monomial needs {n} exponents")));
        }
        Ok(())
    }
}

impl ControlAffine for PolynomialFields {
    fn state_dim(&self) -> usize {
        self.drift.len()
    }
    fn input_dim(&self) -> usize {
        self.control.first().map_or(0, Vec::len)
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.drift) {
            *o = p.eval(x);
        }
    }
    fn control(&self, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(self.control.iter().flatten()) {
            *o = p.eval(x);
        }
    }
}

// ---------------------------------------------------------------------------
// Benchmarks

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    VanDerPol,
    LotkaVolterra,
    Logistic,
    UltraCapacitor,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::VanDerPol,
        Benchmark::LotkaVolterra,
        Benchmark::Logistic,
        Benchmark::UltraCapacitor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::VanDerPol => "vanderpol",
            Benchmark::LotkaVolterra => "lotka",
            Benchmark::Logistic => "logistic",
            Benchmark::UltraCapacitor => "ultracap",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|b| b.name()).collect();
            Error::Usage(alloc::format!("unknown benchmark `{name}`; valid names: {}", names.join(", ")))
        })
    }

    pub fn default_alpha(self) -> f64 {
        match self {
            Benchmark::VanDerPol => 0.9,
            Benchmark::LotkaVolterra => 0.98,
            Benchmark::Logistic => 0.6,
            Benchmark::UltraCapacitor => 0.2,
        }
    }

    /// Truncation length of the basis expansion used in the experiments.
    pub fn default_basis_len(self) -> usize {
        match self {
            Benchmark::Logistic => 7,
            _ => 5,
        }
    }

    /// Half-width of the default uniform input law. The discrete maps get a
    /// small one since they grow quickly over their domains.
    pub fn default_input_amplitude(self) -> f64 {
        match self {
            Benchmark::VanDerPol | Benchmark::LotkaVolterra => 1.0,
            Benchmark::Logistic | Benchmark::UltraCapacitor => 0.1,
        }
    }

    /// Initial condition used for response comparisons.
    pub fn default_comparison_x0(self) -> Vec<f64> {
        match self {
            Benchmark::VanDerPol | Benchmark::LotkaVolterra => vec![1.0, 1.0],
            Benchmark::Logistic => vec![0.5],
            Benchmark::UltraCapacitor => vec![0.5, 0.1],
        }
    }

    /// The benchmark with its default parameters at order `alpha`.
    pub fn build(self, alpha: f64) -> Result<BenchmarkSpec> {
        match self {
            Benchmark::VanDerPol => make_van_der_pol(0.5, alpha),
            Benchmark::LotkaVolterra => make_lotka_volterra(0.5, 0.5, 1.3, 0.6, alpha),
            Benchmark::Logistic => make_logistic_map(1.0, alpha),
            Benchmark::UltraCapacitor => make_ultra_capacitor(alpha),
        }
    }

    pub fn build_default(self) -> BenchmarkSpec {
        self.build(self.default_alpha()).expect("default benchmark parameters are valid")
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub benchmark: Benchmark,
    pub system: ControlAffineSystem,
    pub params: Vec<(String, f64)>,
    pub reference_alpha: FractionalOrderVector,
}

impl BenchmarkSpec {
    pub fn name(&self) -> &'static str {
        self.benchmark.name()
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|p| p.1)
    }
}

fn spec(
    benchmark: Benchmark,
    fields: impl ControlAffine + 'static,
    domain: &[(f64, f64)],
    alpha: f64,
    time_kind: TimeKind,
    params: &[(&str, f64)],
) -> Result<BenchmarkSpec> {
    let n = fields.state_dim();
    let alpha = FractionalOrderVector::uniform(alpha, n)?;
    let system = ControlAffineSystem::new(Arc::new(fields), DomainBox::from_bounds(domain)?, alpha.clone(), time_kind)?;
    Ok(BenchmarkSpec {
        benchmark,
        system,
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        reference_alpha: alpha,
    })
}

pub struct VanDerPolFields {
    pub epsilon: f64,
}

impl ControlAffine for VanDerPolFields {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let e = self.epsilon;
        out[0] = e * (x[0] - x[0] * x[0] * x[0] / 3.0 - x[1]);
        out[1] = x[0] / e;
    }
    fn control(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.2 + sin(x[0]) * sin(x[1]);
        out[1] = exp(sin(x[1] - 0.5 * PI) - 1.0);
    }
}

/// Fractional Van der Pol oscillator on `[−2,2]×[−4,4]`.
pub fn make_van_der_pol(epsilon: f64, alpha: f64) -> Result<BenchmarkSpec> {
    if epsilon == 0.0 || !epsilon.is_finite() {
        return Err(Error::Parameter("Van der Pol epsilon must be finite and nonzero".into()));
    }
    spec(
        Benchmark::VanDerPol,
        VanDerPolFields { epsilon },
        &[(-2.0, 2.0), (-4.0, 4.0)],
        alpha,
        TimeKind::Continuous,
        &[("epsilon", epsilon)],
    )
}

pub struct LotkaVolterraFields {
    pub a: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl ControlAffine for LotkaVolterraFields {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.a * x[0] - self.beta * x[0] * x[1];
        out[1] = self.delta * x[0] * x[1] - self.gamma * x[1];
    }
    fn control(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 4.0 + sin(x[0]) * exp(-1.0 + cos(x[1]));
        out[1] = 1.0 + exp(sin(x[0]) * cos(x[1]));
    }
}

/// Fractional predator–prey model on `[−2,2]×[−4,4]`, reference order 0.98.
pub fn make_lotka_volterra(a: f64, beta: f64, delta: f64, gamma: f64, alpha: f64) -> Result<BenchmarkSpec> {
    spec(
        Benchmark::LotkaVolterra,
        LotkaVolterraFields { a, beta, delta, gamma },
        &[(-2.0, 2.0), (-4.0, 4.0)],
        alpha,
        TimeKind::Continuous,
        &[("a", a), ("beta", beta), ("delta", delta), ("gamma", gamma)],
    )
}

pub struct LogisticFields {
    pub mu: f64,
}

impl ControlAffine for LogisticFields {
    fn state_dim(&self) -> usize {
        1
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.mu * x[0] * (1.0 - x[0]);
    }
    fn control(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0 - cos(x[0]) * exp(3.0 * (sin(x[0] - 0.7 * PI) - 1.0));
    }
}

/// Discrete fractional logistic map on `[0, 8]`.
pub fn make_logistic_map(mu: f64, alpha: f64) -> Result<BenchmarkSpec> {
    spec(
        Benchmark::Logistic,
        LogisticFields { mu },
        &[(0.0, 8.0)],
        alpha,
        TimeKind::Discrete,
        &[("mu", mu)],
    )
}

pub struct UltraCapacitorFields;

impl ControlAffine for UltraCapacitorFields {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[1];
        out[1] = 0.035311 * x[0] + 0.001815 * x[1];
    }
    fn control(&self, x: &[f64], out: &mut [f64]) {
        out[0] = exp(sin(x[0]) * sin(x[1]));
        let s = x[0] + x[1];
        out[1] = 1.0 + s * s;
    }
}

/// Discrete fractional ultra-capacitor model on `[−1,1]×[−0.3,0.3]`.
pub fn make_ultra_capacitor(alpha: f64) -> Result<BenchmarkSpec> {
    spec(
        Benchmark::UltraCapacitor,
        UltraCapacitorFields,
        &[(-1.0, 1.0), (-0.3, 0.3)],
        alpha,
        TimeKind::Discrete,
        &[],
    )
}
