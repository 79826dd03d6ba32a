//! Orthonormal basis functions on an axis-aligned box.
//!
//! The default family is the tensor-product Legendre basis: each axis is
//! mapped affinely onto `[−1, 1]` and the products
//! `Π_i √((2d_i + 1)/(b_i − a_i)) · P_{d_i}(t_i)` are orthonormal on the box
//! under the uniform (Lebesgue) measure. Multi-indices are enumerated by
//! total degree, ties broken in ascending lexicographic order, and the
//! first `L` are kept.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::Matrix;
use crate::rng::seeded;
use crate::systems::DomainBox;
use crate::{Error, Result};

/// User-supplied basis: `len` functions evaluated together.
pub trait BasisFunctions: Send + Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Clone)]
pub enum BasisFamily {
    LegendreTensor,
    Custom(Arc<dyn BasisFunctions>),
}

impl BasisFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BasisFamily::LegendreTensor => "legendre-tensor",
            BasisFamily::Custom(_) => "user-supplied",
        }
    }
}

impl fmt::Debug for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct BasisSpec {
    family: BasisFamily,
    len: usize,
    domain: DomainBox,
    multi_indices: Vec<Vec<u32>>,
}

/// Basis values at a point, plus whether the point lay outside the box
/// (values then come from the polynomial extension).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub extrapolated: bool,
}

impl BasisSpec {
    pub fn legendre(len: usize, domain: DomainBox) -> Result<Self> {
        if len == 0 {
            return Err(Error::Usage("basis length L must be at least 1".into()));
        }
        let multi_indices = graded_multi_indices(domain.dim(), len);
        Ok(Self {
            family: BasisFamily::LegendreTensor,
            len,
            domain,
            multi_indices,
        })
    }

    pub fn custom(functions: Arc<dyn BasisFunctions>, domain: DomainBox) -> Result<Self> {
        let len = functions.len();
        if len == 0 {
            return Err(Error::Usage("basis length L must be at least 1".into()));
        }
        Ok(Self {
            family: BasisFamily::Custom(functions),
            len,
            domain,
            multi_indices: Vec::new(),
        })
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    /// Degree multi-index of each Legendre function (empty for custom families).
    pub fn multi_indices(&self) -> &[Vec<u32>] {
        &self.multi_indices
    }

    pub fn eval(&self, x: &[f64]) -> BasisEval {
        let mut values = vec![0.0; self.len];
        self.eval_into(x, &mut values);
        BasisEval {
            values,
            extrapolated: !self.domain.contains(x),
        }
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        let mut values = vec![0.0; self.len];
        self.eval_into(x, &mut values);
        values
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.family {
            BasisFamily::Custom(f) => f.eval(x, out),
            BasisFamily::LegendreTensor => {
                let dom = &self.domain;
                let max_deg = self.multi_indices.iter().flatten().copied().max().unwrap_or(0) as usize;
                // per-axis normalized Legendre values up to max_deg
                let axes: Vec<Vec<f64>> = (0..dom.dim())
                    .map(|i| {
                        let (a, b) = (dom.lower[i], dom.upper[i]);
                        let t = (2.0 * x[i] - (a + b)) / (b - a);
                        let mut p = legendre_values(max_deg, t);
                        for (d, v) in p.iter_mut().enumerate() {
                            *v *= libm::sqrt((2 * d + 1) as f64 / (b - a));
                        }
                        p
                    })
                    .collect();
                for (o, idx) in out.iter_mut().zip(&self.multi_indices) {
                    *o = idx.iter().enumerate().map(|(i, &d)| axes[i][d as usize]).product();
                }
            }
        }
    }
}

/// `P_0(t), …, P_deg(t)` by the three-term recurrence.
pub fn legendre_values(deg: usize, t: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(deg + 1);
    p.push(1.0);
    if deg >= 1 {
        p.push(t);
    }
    for k in 1..deg {
        let next = ((2 * k + 1) as f64 * t * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
        p.push(next);
    }
    p
}

/// First `count` multi-indices in `dim` variables, graded by total degree
/// with ascending lexicographic order inside each degree.
pub fn graded_multi_indices(dim: usize, count: usize) -> Vec<Vec<u32>> {
    fn of_degree(dim: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if dim == 1 {
            prefix.push(degree);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=degree {
            prefix.push(first);
            of_degree(dim - 1, degree - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(count);
    let mut degree = 0;
    while out.len() < count {
        let mut level = Vec::new();
        of_degree(dim, degree, &mut Vec::with_capacity(dim), &mut level);
        out.extend(level.into_iter().take(count - out.len()));
        degree += 1;
    }
    out
}

/// The `n × (nL)` block `blockdiag(φ(x0)ᵀ, …, φ(x0)ᵀ) · Δu`.
pub fn build_design_row(spec: &BasisSpec, x0: &[f64], du: f64) -> Matrix {
    let n = x0.len();
    let l = spec.len();
    let phi = spec.values(x0);
    let mut block = Matrix::zeros(n, n * l);
    for r in 0..n {
        for (c, v) in phi.iter().enumerate() {
            block.set(r, r * l + c, v * du);
        }
    }
    block
}

/// A vector-valued truncated expansion: component `r` is
/// `Σ_l coefficients[r·L + l] · φ_l(x)`.
#[derive(Debug, Clone)]
pub struct BasisExpansion {
    pub spec: BasisSpec,
    pub coefficients: Vec<f64>,
}

impl BasisExpansion {
    pub fn new(spec: BasisSpec, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || !coefficients.len().is_multiple_of(spec.len()) {
            return Err(Error::Dimension(alloc::format!(
                "{} coefficients is not a multiple of L = {}",
                coefficients.len(),
                spec.len()
            )));
        }
        Ok(Self { spec, coefficients })
    }

    pub fn outputs(&self) -> usize {
        self.coefficients.len() / self.spec.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let phi = self.spec.values(x);
        self.coefficients
            .chunks(self.spec.len())
            .map(|beta| beta.iter().zip(&phi).map(|(b, p)| b * p).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct OrthonormalityReport {
    pub gram: Matrix,
    /// `max |G − I|` over all entries.
    pub max_deviation: f64,
}

/// Monte-Carlo Gram matrix `G_ab ≈ ∫ φ_a φ_b` over the domain, from
/// `samples` uniform draws.
pub fn orthonormality_check(spec: &BasisSpec, samples: usize, seed: u64) -> Result<OrthonormalityReport> {
    let l = spec.len();
    if samples < 10 * l * l {
        return Err(Error::Usage(alloc::format!("need at least {} samples for L = {l}", 10 * l * l)));
    }
    let mut rng = seeded(seed);
    let mut sums = vec![0.0; l * l];
    let mut phi = vec![0.0; l];
    for _ in 0..samples {
        let x = spec.domain.sample(&mut rng);
        spec.eval_into(&x, &mut phi);
        for a in 0..l {
            for b in a..l {
                sums[a * l + b] += phi[a] * phi[b];
            }
        }
    }
    let scale = spec.domain.volume() / samples as f64;
    let mut gram = Matrix::zeros(l, l);
    let mut max_deviation: f64 = 0.0;
    for a in 0..l {
        for b in a..l {
            let g = sums[a * l + b] * scale;
            gram.set(a, b, g);
            gram.set(b, a, g);
            let target = if a == b { 1.0 } else { 0.0 };
            max_deviation = max_deviation.max(libm::fabs(g - target));
        }
    }
    Ok(OrthonormalityReport { gram, max_deviation })
}
