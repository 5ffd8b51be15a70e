//! Process rates and the quantities derived from them.
//!
//! Everything here is plain arithmetic on value types. Derived quantities
//! (Riccati coefficients, steady constants, the Hamiltonian) are recomputed
//! on every call.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riccati::{self, Equilibrium};

/// Rates of the eight network processes plus the degree `m` of new nodes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessRates {
    /// Random rewiring.
    pub omega_r: f64,
    /// Preferential rewiring.
    pub omega_p: f64,
    /// Deletion of links.
    pub l_d: f64,
    /// Random addition of links.
    pub l_r: f64,
    /// Preferential addition of links.
    pub l_p: f64,
    /// Deletion of nodes.
    pub n_d: f64,
    /// Random addition of nodes.
    pub n_r: f64,
    /// Addition of nodes by preferential attachment.
    pub n_p: f64,
    /// Degree of newly added nodes.
    pub m: u32,
}

impl ProcessRates {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!(
                    "rate {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("omega_r", self.omega_r),
            ("omega_p", self.omega_p),
            ("l_d", self.l_d),
            ("l_r", self.l_r),
            ("l_p", self.l_p),
            ("n_d", self.n_d),
            ("n_r", self.n_r),
            ("n_p", self.n_p),
        ]
    }

    pub fn m_f64(&self) -> f64 {
        f64::from(self.m)
    }

    /// `2 l_p + n_p m`, the numerator of every `1/g` term.
    pub fn preferential_weight(&self) -> f64 {
        2.0 * self.l_p + self.n_p * self.m_f64()
    }

    /// `n_r + n_p`.
    pub fn node_addition(&self) -> f64 {
        self.n_r + self.n_p
    }

    pub fn is_zero(&self) -> bool {
        self.named().iter().all(|&(_, v)| v == 0.0)
    }

    /// Drift factor multiplying `(x - 1) G_x`:
    /// `x (ω_p + (2 l_p + n_p m)/g) - ω_r - ω_p - l_d - n_d g`.
    pub fn drift_factor(&self, x: f64, g: f64) -> f64 {
        x * (self.omega_p + self.preferential_weight() / g)
            - self.omega_r
            - self.omega_p
            - self.l_d
            - self.n_d * g
    }

    /// Coefficient of `G`: `(x - 1)(ω_r g + 2 l_r + n_r m) - n_r - n_p`.
    pub fn reaction_factor(&self, x: f64, g: f64) -> f64 {
        (x - 1.0) * self.growth_factor(g) - self.node_addition()
    }

    /// `ω_r g + 2 l_r + n_r m`.
    pub fn growth_factor(&self, g: f64) -> f64 {
        self.omega_r * g + 2.0 * self.l_r + self.n_r * self.m_f64()
    }

    /// Source term `(n_r + n_p) x^m`.
    pub fn source(&self, x: f64) -> f64 {
        self.node_addition() * powu(x, self.m)
    }

    /// The localized right-hand side `H(a, b, x, t)` with `g(t)` already
    /// evaluated: `a` fills the `G_x` slot and `b` the `G` slot.
    pub fn hamiltonian(&self, a: f64, b: f64, x: f64, g: f64) -> f64 {
        (x - 1.0) * self.drift_factor(x, g) * a + self.reaction_factor(x, g) * b + self.source(x)
    }
}

/// `x^m` with `0^0 = 1`.
pub(crate) fn powu(x: f64, m: u32) -> f64 {
    x.powi(m as i32)
}

/// Coefficients of the moment equation `g' = -n_d g^2 - b g + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiCoefficients {
    pub n_d: f64,
    pub b: f64,
    pub c: f64,
}

impl RiccatiCoefficients {
    pub fn new(n_d: f64, b: f64, c: f64) -> Result<Self> {
        for (name, v) in [("n_d", n_d), ("b", b), ("c", c)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!(
                    "Riccati coefficient {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self { n_d, b, c })
    }

    /// Right-hand side of the moment equation.
    pub fn rhs(&self, g: f64) -> f64 {
        -self.n_d * g * g - self.b * g + self.c
    }
}

pub fn derive_riccati(rates: &ProcessRates) -> RiccatiCoefficients {
    RiccatiCoefficients {
        n_d: rates.n_d,
        b: rates.l_d + rates.n_p + rates.n_r,
        c: 2.0 * (rates.l_p + rates.l_r + rates.m_f64() * (rates.n_p + rates.n_r)),
    }
}

/// A time-dependent positive moment `t ↦ g(t)` feeding the localized PDE.
pub trait Moment: Sync {
    fn value(&self, t: f64) -> f64;
}

/// A moment frozen at a constant value.
#[derive(Debug, Clone, Copy)]
pub struct ConstantMoment(pub f64);

impl Moment for ConstantMoment {
    fn value(&self, _t: f64) -> f64 {
        self.0
    }
}

pub fn evaluate_h<M: Moment + ?Sized>(
    a: f64,
    bb: f64,
    cc: f64,
    d: f64,
    rates: &ProcessRates,
    g: &M,
) -> Result<f64> {
    let gd = g.value(d);
    if !(gd > 0.0) {
        return Err(Error::Domain(format!("g({d}) = {gd} is not positive")));
    }
    Ok(rates.hamiltonian(a, bb, cc, gd))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    Regular,
    /// `g∞ = 0`: the distribution collapses onto degree zero, `G* ≡ 1`.
    UniformSteadyState,
    /// `g∞ = ∞`: no steady state exists.
    NoSteadyState,
}

/// Constants of the steady-state equation
/// `(x-1)(x c1 - c2) G' + ((x-1) c3 - c4) G + c4 x^m = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// Limiting moment; `0` for `UniformSteadyState` and NaN for `NoSteadyState`.
    pub g_inf: f64,
    pub degeneracy: Degeneracy,
}

impl SteadyConstants {
    /// Constants given directly, bypassing the rates.
    pub fn explicit(c1: f64, c2: f64, c3: f64, c4: f64) -> Result<Self> {
        for (name, v) in [("c1", c1), ("c2", c2), ("c3", c3), ("c4", c4)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!(
                    "steady constant {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self {
            c1,
            c2,
            c3,
            c4,
            g_inf: f64::NAN,
            degeneracy: Degeneracy::Regular,
        })
    }

    /// `(c3 + c4 m)/(c4 + c2 - c1)`, the first-order slope of `G*` at `x = 1`.
    pub fn seed_slope(&self, m: u32) -> Option<f64> {
        let den = self.c4 + self.c2 - self.c1;
        if den.abs() < 1e-12 {
            None
        } else {
            Some((self.c3 + self.c4 * f64::from(m)) / den)
        }
    }
}

pub fn steady_constants(rates: &ProcessRates) -> SteadyConstants {
    let coeffs = derive_riccati(rates);
    match riccati::equilibrium(&coeffs) {
        Equilibrium::Infinite => SteadyConstants {
            c1: 0.0,
            c2: 0.0,
            c3: 0.0,
            c4: 0.0,
            g_inf: f64::NAN,
            degeneracy: Degeneracy::NoSteadyState,
        },
        Equilibrium::Finite(0.0) => SteadyConstants {
            c1: 0.0,
            c2: 0.0,
            c3: 0.0,
            c4: 0.0,
            g_inf: 0.0,
            degeneracy: Degeneracy::UniformSteadyState,
        },
        Equilibrium::Finite(g) => SteadyConstants {
            c1: rates.omega_p + rates.preferential_weight() / g,
            c2: rates.omega_r + rates.omega_p + rates.l_d + rates.n_d * g,
            c3: rates.growth_factor(g),
            c4: rates.node_addition(),
            g_inf: g,
            degeneracy: Degeneracy::Regular,
        },
    }
}

/// Rate sets used throughout the tests and examples.
pub mod presets {
    use super::ProcessRates;

    /// `m=3, n_d=1, ω_p=1, l_p=0, n_p=1, ω_r=1, l_d=1, n_r=1, l_r=1`.
    pub fn mixed() -> ProcessRates {
        ProcessRates {
            omega_r: 1.0,
            omega_p: 1.0,
            l_d: 1.0,
            l_r: 1.0,
            l_p: 0.0,
            n_d: 1.0,
            n_r: 1.0,
            n_p: 1.0,
            m: 3,
        }
    }

    /// `m=3, n_d=1, ω_p=1, l_p=1, n_p=0, ω_r=0, l_d=1, n_r=0, l_r=0`.
    /// No node addition, so `c3 = c4 = 0`.
    pub fn no_node_addition() -> ProcessRates {
        ProcessRates {
            omega_r: 0.0,
            omega_p: 1.0,
            l_d: 1.0,
            l_r: 0.0,
            l_p: 1.0,
            n_d: 1.0,
            n_r: 0.0,
            n_p: 0.0,
            m: 3,
        }
    }

    /// `m=3, n_d=1, ω_p=0, l_p=0, n_p=0, ω_r=1, l_d=1, n_r=1, l_r=1`.
    pub fn random_only() -> ProcessRates {
        ProcessRates {
            omega_r: 1.0,
            omega_p: 0.0,
            l_d: 1.0,
            l_r: 1.0,
            l_p: 0.0,
            n_d: 1.0,
            n_r: 1.0,
            n_p: 0.0,
            m: 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;

    #[test]
    fn riccati_coefficients_for_presets() {
        assert_eq!(
            derive_riccati(&mixed()),
            RiccatiCoefficients {
                n_d: 1.0,
                b: 3.0,
                c: 14.0
            }
        );
        assert_eq!(
            derive_riccati(&no_node_addition()),
            RiccatiCoefficients {
                n_d: 1.0,
                b: 1.0,
                c: 2.0
            }
        );
        let zero = derive_riccati(&ProcessRates::default());
        assert_eq!(
            zero,
            RiccatiCoefficients {
                n_d: 0.0,
                b: 0.0,
                c: 0.0
            }
        );
    }

    #[test]
    fn h_vanishes_on_the_fixed_line() {
        let g = ConstantMoment(1.7);
        for a in [-3.0, 0.0, 0.5, 12.0] {
            let v = evaluate_h(a, 1.0, 1.0, 0.3, &mixed(), &g).unwrap();
            assert!(v.abs() < 1e-14, "{v}");
        }
    }

    #[test]
    fn h_zero_rates_and_origin() {
        let g = ConstantMoment(1.0);
        let zero = ProcessRates::default();
        assert_eq!(evaluate_h(2.0, -1.0, 0.3, 0.0, &zero, &g).unwrap(), 0.0);
        assert_eq!(evaluate_h(0.0, 0.0, 0.0, 0.0, &mixed(), &g).unwrap(), 0.0);
    }

    #[test]
    fn h_rejects_nonpositive_moment() {
        let err = evaluate_h(0.0, 1.0, 0.5, 0.0, &mixed(), &ConstantMoment(0.0));
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn steady_constants_random_only() {
        let s = steady_constants(&random_only());
        assert_eq!(s.degeneracy, Degeneracy::Regular);
        assert!((s.g_inf - 2.0).abs() < 1e-14);
        assert!(s.c1.abs() < 1e-14);
        assert!((s.c2 - 4.0).abs() < 1e-14);
        assert!((s.c3 - 7.0).abs() < 1e-14);
        assert!((s.c4 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn steady_constants_degenerate_tags() {
        let growth_only = ProcessRates {
            l_p: 1.0,
            ..Default::default()
        };
        assert_eq!(
            steady_constants(&growth_only).degeneracy,
            Degeneracy::NoSteadyState
        );
        let decay_only = ProcessRates {
            l_d: 1.0,
            ..Default::default()
        };
        let s = steady_constants(&decay_only);
        assert_eq!(s.degeneracy, Degeneracy::UniformSteadyState);
        assert_eq!(s.g_inf, 0.0);
    }

    #[test]
    fn validation_rejects_negative_rates() {
        let bad = ProcessRates {
            l_r: -0.1,
            ..mixed()
        };
        assert!(bad.validate().is_err());
        assert!(mixed().validate().is_ok());
    }
}
