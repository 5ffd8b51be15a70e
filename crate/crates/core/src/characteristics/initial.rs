//! Initial generating functions `h(x) = Σ p_k x^k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric tail `p_k = scale · ratio^k` for `k ≥ head.len()`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricTail {
    pub scale: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialKind {
    /// Finitely many nonzero coefficients.
    Polynomial(Vec<f64>),
    /// `h(x) = a Σ (x/ρ)^k = a ρ/(ρ - x)`.
    ScaledGeometric { a: f64, rho: f64 },
    /// Explicit leading coefficients followed by a geometric tail.
    ExplicitCoefficients { head: Vec<f64>, tail: GeometricTail },
}

/// A probability generating function with radius of convergence above one.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    kind: InitialKind,
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn horner_derivative(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
}

/// `Σ c_k - Σ c_k x^k`, factored through `1 - x` so that it keeps full
/// relative precision as `x → 1`.
fn horner_deficit(coeffs: &[f64], x: f64) -> f64 {
    // Σ c_k (1 - x^k) = (1 - x) Σ_j x^j Σ_{k>j} c_k
    let mut tail = 0.0;
    let mut acc = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        tail += c;
        acc = acc * x + tail;
    }
    (1.0 - x) * acc
}

/// `Σ_{j<n} x^j`.
fn partial_geometric(x: f64, n: i32) -> f64 {
    (0..n).fold(0.0, |acc, _| acc * x + 1.0)
}

impl InitialCondition {
    /// Validates `h(1) = 1` to 1e-12, `p_k ∈ [0, 1]`, radius `> 1` and `h'(1) > 0`.
    pub fn new(kind: InitialKind) -> Result<Self> {
        let ic = Self { kind };
        ic.validate()?;
        Ok(ic)
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(InitialKind::Polynomial(coeffs))
    }

    /// `h(x) = x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self {
            kind: InitialKind::Polynomial(c),
        }
    }

    /// Normalized geometric distribution `p_k = (1 - 1/ρ) ρ^{-k}`,
    /// i.e. `h(x) = (ρ - 1)/(ρ - x)`.
    pub fn geometric(rho: f64) -> Result<Self> {
        Self::new(InitialKind::ScaledGeometric {
            a: (rho - 1.0) / rho,
            rho,
        })
    }

    pub fn kind(&self) -> &InitialKind {
        &self.kind
    }

    pub fn radius(&self) -> f64 {
        match &self.kind {
            InitialKind::Polynomial(_) => f64::INFINITY,
            InitialKind::ScaledGeometric { rho, .. } => *rho,
            InitialKind::ExplicitCoefficients { tail, .. } => {
                if tail.scale == 0.0 || tail.ratio == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / tail.ratio
                }
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            InitialKind::Polynomial(c) => horner(c, x),
            InitialKind::ScaledGeometric { a, rho } => a * rho / (rho - x),
            InitialKind::ExplicitCoefficients { head, tail } => {
                let q = tail.ratio * x;
                horner(head, x) + tail.scale * q.powi(head.len() as i32) / (1.0 - q)
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            InitialKind::Polynomial(c) => horner_derivative(c, x),
            InitialKind::ScaledGeometric { a, rho } => a * rho / (rho - x).powi(2),
            InitialKind::ExplicitCoefficients { head, tail } => {
                let n = head.len() as i32;
                let q = tail.ratio * x;
                // d/dq [q^n/(1-q)] = q^{n-1}(n(1-q) + q)/(1-q)^2
                let dq = if n == 0 {
                    1.0 / (1.0 - q).powi(2)
                } else {
                    q.powi(n - 1) * (f64::from(n) * (1.0 - q) + q) / (1.0 - q).powi(2)
                };
                horner_derivative(head, x) + tail.scale * tail.ratio * dq
            }
        }
    }

    /// `1 - h(x)` without cancellation near `x = 1`.
    pub fn deficit(&self, x: f64) -> f64 {
        let gap = 1.0 - x;
        match &self.kind {
            InitialKind::Polynomial(c) => (1.0 - c.iter().sum::<f64>()) + horner_deficit(c, x),
            InitialKind::ScaledGeometric { a, rho } => ((1.0 - a) * rho - 1.0 + gap) / (rho - x),
            InitialKind::ExplicitCoefficients { head, tail } => {
                let n = head.len() as i32;
                let r = tail.ratio;
                let mass = head.iter().sum::<f64>() + tail.scale * r.powi(n) / (1.0 - r);
                // q(1) - q(x) for q(x) = (r x)^n / (1 - r x), with the factor 1 - x pulled out
                let tail_drop = if n == 0 {
                    gap * r / ((1.0 - r) * (1.0 - r * x))
                } else {
                    let num = partial_geometric(x, n) - r * x * partial_geometric(x, n - 1);
                    gap * r.powi(n) * num / ((1.0 - r) * (1.0 - r * x))
                };
                (1.0 - mass) + horner_deficit(head, x) + tail.scale * tail_drop
            }
        }
    }

    /// Coefficient `p_k`.
    pub fn coefficient(&self, k: usize) -> f64 {
        match &self.kind {
            InitialKind::Polynomial(c) => c.get(k).copied().unwrap_or(0.0),
            InitialKind::ScaledGeometric { a, rho } => a * rho.powi(-(k as i32)),
            InitialKind::ExplicitCoefficients { head, tail } => match head.get(k) {
                Some(&p) => p,
                None => tail.scale * tail.ratio.powi(k as i32),
            },
        }
    }

    /// `p_0 ..= p_{k_max}`.
    pub fn coefficients(&self, k_max: usize) -> Vec<f64> {
        (0..=k_max).map(|k| self.coefficient(k)).collect()
    }

    /// `h'(1)`, the initial mean degree.
    pub fn mean_degree(&self) -> f64 {
        self.derivative(1.0)
    }

    fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::Validation(msg));
        match &self.kind {
            InitialKind::Polynomial(c) => {
                if c.is_empty() {
                    return invalid("polynomial initial condition needs coefficients".into());
                }
                check_unit(c)?;
            }
            InitialKind::ScaledGeometric { a, rho } => {
                if !(rho.is_finite() && *rho > 1.0) {
                    return invalid(format!("geometric ratio ρ must exceed 1, got {rho}"));
                }
                if !(*a >= 0.0 && *a <= 1.0) {
                    return invalid(format!("geometric scale must lie in [0, 1], got {a}"));
                }
            }
            InitialKind::ExplicitCoefficients { head, tail } => {
                check_unit(head)?;
                if !(tail.ratio >= 0.0 && tail.ratio < 1.0) {
                    return invalid(format!("tail ratio must lie in [0, 1), got {}", tail.ratio));
                }
                let first = tail.scale * tail.ratio.powi(head.len() as i32);
                if !(tail.scale >= 0.0 && first <= 1.0) {
                    return invalid(format!(
                        "tail coefficients must lie in [0, 1], got scale {}",
                        tail.scale
                    ));
                }
            }
        }
        let r = self.radius();
        if !(r > 1.0) {
            return invalid(format!("radius of convergence must exceed 1, got {r}"));
        }
        let h1 = self.value(1.0);
        if (h1 - 1.0).abs() > 1e-12 {
            return invalid(format!(
                "h(1) must equal 1 (coefficients sum to one), got {h1}"
            ));
        }
        let g0 = self.mean_degree();
        if !(g0 > 0.0) {
            return invalid(format!("h'(1) must be positive, got {g0}"));
        }
        Ok(())
    }
}

fn check_unit(c: &[f64]) -> Result<()> {
    for (k, &p) in c.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Validation(format!(
                "coefficient p_{k} = {p} outside [0, 1]"
            )));
        }
    }
    Ok(())
}
