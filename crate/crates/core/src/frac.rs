//! Grünwald–Letnikov memory coefficients and the operators built on them.
//!
//! The coefficient attached to the state `j` steps in the past is
//!
//! ```text
//! ψ(α, j) = Γ(j − α) / (Γ(−α) Γ(j + 1))
//! ```
//!
//! which is evaluated here through the product recursion
//! `ψ(α, j) = ψ(α, j−1) · (j − 1 − α) / j`, `ψ(α, 0) = 1`. The recursion is
//! exact at `α = 1` (every coefficient past `j = 1` is zero) and does not
//! touch `Γ(−α)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, State};

/// Per-component fractional orders, each in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "Vec<f64>", into = "Vec<f64>")
)]
pub struct FractionalOrderVector(Vec<f64>);

impl FractionalOrderVector {
    pub fn new(orders: Vec<f64>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::Dimension("empty fractional order vector".into()));
        }
        for &a in &orders {
            check_order(a)?;
        }
        Ok(Self(orders))
    }

    /// The commensurate vector `(alpha, …, alpha)` of length `n`.
    pub fn uniform(alpha: f64, n: usize) -> Result<Self> {
        Self::new(vec![alpha; n])
    }

    /// All-ones vector: the integer-order (memoryless) case.
    pub fn integer(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_integer(&self) -> bool {
        self.0.iter().all(|&a| a == 1.0)
    }

    /// Diagonal of `h^α`.
    pub fn step_powers(&self, h: f64) -> Vec<f64> {
        self.0.iter().map(|&a| libm::pow(h, a)).collect()
    }
}

impl TryFrom<Vec<f64>> for FractionalOrderVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FractionalOrderVector> for Vec<f64> {
    fn from(v: FractionalOrderVector) -> Self {
        v.0
    }
}

impl core::ops::Index<usize> for FractionalOrderVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::OrderDomain(alpha))
    }
}

/// `ψ(α, j)` for a single order.
pub fn psi_coefficient(alpha: f64, j: usize) -> Result<f64> {
    check_order(alpha)?;
    let mut psi = 1.0;
    for i in 1..=j {
        psi *= (i as f64 - 1.0 - alpha) / i as f64;
    }
    Ok(psi)
}

/// Immutable table of `ψ(α_i, j)` for `j = 0..=k_max` and every component.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryCoefficients {
    alpha: FractionalOrderVector,
    k_max: usize,
    // table[i][j] = ψ(α_i, j)
    table: Vec<Vec<f64>>,
}

impl MemoryCoefficients {
    pub fn new(alpha: FractionalOrderVector, k_max: usize) -> Self {
        let table = alpha
            .as_slice()
            .iter()
            .map(|&a| {
                let mut row = Vec::with_capacity(k_max + 1);
                let mut psi = 1.0;
                row.push(psi);
                for j in 1..=k_max {
                    psi *= (j as f64 - 1.0 - a) / j as f64;
                    row.push(psi);
                }
                row
            })
            .collect();
        Self { alpha, k_max, table }
    }

    pub fn alpha(&self) -> &FractionalOrderVector {
        &self.alpha
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// `ψ(α_i, j)`.
    #[inline]
    pub fn psi(&self, i: usize, j: usize) -> f64 {
        self.table[i][j]
    }

    /// Row of coefficients for component `i`.
    pub fn component(&self, i: usize) -> &[f64] {
        &self.table[i]
    }

    /// Memory term `Σ_{j=1}^{k+1} ψ(α, j) x(k+1−j)` for a chronological
    /// history `x(0), …, x(k)`.
    pub fn memory_sum(&self, history: &[State]) -> Result<State> {
        if history.is_empty() {
            return Err(Error::Dimension("memory sum over empty history".into()));
        }
        if history.len() > self.k_max + 1 {
            return Err(Error::HistoryLength {
                history: history.len(),
                table: self.k_max + 1,
            });
        }
        let n = self.dim();
        let k = history.len() - 1;
        let mut out = vec![0.0; n];
        for (i, acc) in out.iter_mut().enumerate() {
            let psi = &self.table[i];
            for j in 1..=k + 1 {
                *acc += psi[j] * history[k + 1 - j][i];
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`MemoryCoefficients::memory_sum`].
pub fn memory_sum(history: &[State], coeffs: &MemoryCoefficients) -> Result<State> {
    coeffs.memory_sum(history)
}

/// Grünwald–Letnikov difference `Δ^α x(k) = Σ_{j=0}^{k} ψ(α, j) x(k−j)`.
pub fn gl_difference(trajectory: &[State], alpha: &FractionalOrderVector, k: usize) -> Result<State> {
    if k >= trajectory.len() {
        return Err(Error::Index {
            k,
            len: trajectory.len(),
        });
    }
    let coeffs = MemoryCoefficients::new(alpha.clone(), k);
    let n = alpha.len();
    let mut out = vec![0.0; n];
    for (i, acc) in out.iter_mut().enumerate() {
        for j in 0..=k {
            *acc += coeffs.psi(i, j) * trajectory[k - j][i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gamma_ratio(alpha: f64, j: usize) -> f64 {
        use statrs::function::gamma::gamma;
        gamma(j as f64 - alpha) / (gamma(-alpha) * gamma(j as f64 + 1.0))
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi_coefficient(0.5, 0).unwrap(), 1.0);
        assert_eq!(psi_coefficient(0.5, 1).unwrap(), -0.5);
        // (−0.6)(0.4)/2
        assert!((psi_coefficient(0.6, 2).unwrap() + 0.12).abs() < 1e-16);
        assert!((gamma_ratio(0.6, 2) + 0.12).abs() < 1e-14);
        assert_eq!(psi_coefficient(1.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn psi_rejects_out_of_range() {
        assert_eq!(psi_coefficient(0.0, 1), Err(Error::OrderDomain(0.0)));
        assert!(psi_coefficient(1.5, 1).is_err());
        assert!(psi_coefficient(f64::NAN, 1).is_err());
        assert!(FractionalOrderVector::new(vec![0.5, -0.1]).is_err());
    }

    #[test]
    fn recursion_matches_gamma_ratio() {
        for &a in &[0.2, 0.5, 0.9] {
            for j in 0..=20 {
                let r = psi_coefficient(a, j).unwrap();
                assert!((r - gamma_ratio(a, j)).abs() <= 1e-12, "alpha {a} j {j}");
            }
        }
    }

    #[test]
    fn closed_forms() {
        for &a in &[0.1, 0.2, 0.5, 0.6, 0.9, 1.0] {
            let p2 = psi_coefficient(a, 2).unwrap();
            let p3 = psi_coefficient(a, 3).unwrap();
            assert!((-p2 - (a - a * a) / 2.0).abs() <= 1e-14);
            assert!((-p3 - (a * a * a - 3.0 * a * a + 2.0 * a) / 6.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn table_invariants() {
        let c = MemoryCoefficients::new(FractionalOrderVector::new(vec![0.3, 1.0]).unwrap(), 30);
        for i in 0..2 {
            assert_eq!(c.psi(i, 0), 1.0);
        }
        assert_eq!(c.psi(0, 1), -0.3);
        assert_eq!(c.psi(1, 1), -1.0);
        for j in 2..=30 {
            assert_eq!(c.psi(1, j), 0.0);
            let expect = c.psi(0, j - 1) * (j as f64 - 1.0 - 0.3) / j as f64;
            assert!((c.psi(0, j) - expect).abs() <= 1e-14 * expect.abs());
        }
    }

    #[test]
    fn memory_sum_examples() {
        let alpha = FractionalOrderVector::uniform(0.6, 2).unwrap();
        let c = MemoryCoefficients::new(alpha, 5);
        let single = c.memory_sum(&[vec![1.5, -2.0]]).unwrap();
        assert_eq!(single, vec![-0.6 * 1.5, -0.6 * -2.0]);
        let zero = c.memory_sum(&[vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]]).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
        // history x(0) = (2,2), x(1) = (1,1)
        let two = c.memory_sum(&[vec![2.0, 2.0], vec![1.0, 1.0]]).unwrap();
        for v in two {
            assert!((v + 0.84).abs() < 1e-15);
        }
    }

    #[test]
    fn memory_sum_length_error() {
        let c = MemoryCoefficients::new(FractionalOrderVector::uniform(0.6, 1).unwrap(), 1);
        let err = c.memory_sum(&[vec![0.0], vec![0.0], vec![0.0]]).unwrap_err();
        assert_eq!(err, Error::HistoryLength { history: 3, table: 2 });
    }

    #[test]
    fn gl_difference_examples() {
        let a06 = FractionalOrderVector::uniform(0.6, 1).unwrap();
        let d = gl_difference(&[vec![2.0], vec![1.0]], &a06, 1).unwrap();
        assert!((d[0] + 0.2).abs() < 1e-15);
        assert_eq!(gl_difference(&[vec![3.0], vec![1.0]], &a06, 0).unwrap(), vec![3.0]);
        assert_eq!(
            gl_difference(&[vec![3.0]], &a06, 1).unwrap_err(),
            Error::Index { k: 1, len: 1 }
        );
    }

    proptest! {
        #[test]
        fn integer_order_is_backward_difference(xs in proptest::collection::vec(-1e3f64..1e3, 2..40)) {
            let traj: Vec<State> = xs.iter().map(|&x| vec![x]).collect();
            let one = FractionalOrderVector::integer(1);
            for k in 1..traj.len() {
                let d = gl_difference(&traj, &one, k).unwrap();
                prop_assert_eq!(d[0], traj[k][0] - traj[k - 1][0]);
            }
        }

        #[test]
        fn memory_sum_is_linear(
            alpha in 0.05f64..=1.0,
            h1 in proptest::collection::vec(-10f64..10.0, 1..25),
            seed in proptest::collection::vec(-10f64..10.0, 25),
            a in -3f64..3.0,
            b in -3f64..3.0,
        ) {
            let c = MemoryCoefficients::new(FractionalOrderVector::uniform(alpha, 1).unwrap(), 30);
            let hist1: Vec<State> = h1.iter().map(|&x| vec![x]).collect();
            let hist2: Vec<State> = seed[..h1.len()].iter().map(|&x| vec![x]).collect();
            let mixed: Vec<State> = hist1.iter().zip(&hist2).map(|(p, q)| vec![a * p[0] + b * q[0]]).collect();
            let lhs = c.memory_sum(&mixed).unwrap()[0];
            let rhs = a * c.memory_sum(&hist1).unwrap()[0] + b * c.memory_sum(&hist2).unwrap()[0];
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
