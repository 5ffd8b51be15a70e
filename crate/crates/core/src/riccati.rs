//! The scalar moment equation `g' = -n_d g² - b g + c`, `g(0) = g0`.
//!
//! `g(t)` is the mean degree `G_x(1, t)`. Closed-form solutions cover every
//! nonnegative coefficient triple; the adaptive numeric solve exists as an
//! independent cross-check.

use crate::error::{Error, Result};
use crate::model::{Moment, RiccatiCoefficients};
use crate::ode::{self, DenseSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Equilibrium {
    Finite(f64),
    /// `n_d = b = 0` and `c > 0`: the moment grows linearly forever.
    Infinite,
}

impl Equilibrium {
    pub fn finite(self) -> Option<f64> {
        match self {
            Equilibrium::Finite(g) => Some(g),
            Equilibrium::Infinite => None,
        }
    }
}

/// Unique nonnegative root of `-n_d g² - b g + c`.
pub fn equilibrium(coeffs: &RiccatiCoefficients) -> Equilibrium {
    let RiccatiCoefficients { n_d, b, c } = *coeffs;
    if c == 0.0 {
        return Equilibrium::Finite(0.0);
    }
    if n_d > 0.0 {
        let disc = (b * b + 4.0 * n_d * c).sqrt();
        // 2c/(b + √D) equals (-b + √D)/(2 n_d) without the cancellation.
        Equilibrium::Finite(2.0 * c / (b + disc))
    } else if b > 0.0 {
        Equilibrium::Finite(c / b)
    } else {
        Equilibrium::Infinite
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Constant,
    /// `n_d > 0` with distinct roots `r_minus < 0 ≤ r_plus`:
    /// `g = r+ + (r+ - r-) u/(1 - u)`, `u = u0 e^{-λ t}`.
    TwoRoots {
        r_plus: f64,
        r_minus: f64,
        u0: f64,
        lambda: f64,
    },
    /// `n_d > 0`, `b = c = 0`: `g = g0/(1 + n_d g0 t)`.
    DoubleRoot,
    /// `n_d = 0`, `b > 0`: relaxation to `c/b`.
    Relaxation {
        target: f64,
    },
    /// `n_d = b = 0`: `g = g0 + c t`.
    Linear,
    Numeric(Box<DenseSolution>),
}

/// A solution `t ↦ g(t)` on `t ≥ 0`.
#[derive(Debug, Clone)]
pub struct MomentTrajectory {
    pub g0: f64,
    pub coeffs: RiccatiCoefficients,
    shape: Shape,
}

impl MomentTrajectory {
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let RiccatiCoefficients { n_d, b, c } = self.coeffs;
        match &self.shape {
            Shape::Constant => self.g0,
            Shape::TwoRoots {
                r_plus,
                r_minus,
                u0,
                lambda,
            } => {
                let u = u0 * (-lambda * t).exp();
                r_plus + (r_plus - r_minus) * u / (1.0 - u)
            }
            Shape::DoubleRoot => self.g0 / (1.0 + n_d * self.g0 * t),
            Shape::Relaxation { target } => target + (self.g0 - target) * (-b * t).exp(),
            Shape::Linear => self.g0 + c * t,
            Shape::Numeric(sol) => sol.eval(t)[0],
        }
    }

    /// `g(t) - g∞`, free of cancellation for the closed forms. `None` when
    /// `g` grows without bound.
    pub fn excess(&self, t: f64) -> Option<f64> {
        let t = t.max(0.0);
        let g_inf = equilibrium(&self.coeffs).finite()?;
        Some(match &self.shape {
            Shape::Constant => self.g0 - g_inf,
            Shape::TwoRoots {
                r_plus,
                r_minus,
                u0,
                lambda,
            } => {
                let u = u0 * (-lambda * t).exp();
                (r_plus - g_inf) + (r_plus - r_minus) * u / (1.0 - u)
            }
            Shape::Relaxation { target } => {
                (target - g_inf) + (self.g0 - target) * (-self.coeffs.b * t).exp()
            }
            _ => self.eval(t) - g_inf,
        })
    }

    /// `g'(t)` from the right-hand side of the moment equation.
    pub fn derivative(&self, t: f64) -> f64 {
        self.coeffs.rhs(self.eval(t))
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.shape, Shape::Numeric(_))
    }
}

impl Moment for MomentTrajectory {
    fn value(&self, t: f64) -> f64 {
        self.eval(t)
    }
}

fn check_g0(g0: f64) -> Result<()> {
    if !(g0.is_finite() && g0 > 0.0) {
        return Err(Error::Domain(format!(
            "initial mean degree h'(1) must be positive, got {g0}"
        )));
    }
    Ok(())
}

pub fn solve_closed_form(coeffs: &RiccatiCoefficients, g0: f64) -> Result<MomentTrajectory> {
    check_g0(g0)?;
    let RiccatiCoefficients { n_d, b, c } = *coeffs;
    let shape = if coeffs.rhs(g0) == 0.0 {
        Shape::Constant
    } else if n_d > 0.0 {
        let disc = (b * b + 4.0 * n_d * c).sqrt();
        if disc == 0.0 {
            Shape::DoubleRoot
        } else {
            let r_plus = 2.0 * c / (b + disc);
            let r_minus = -(b + disc) / (2.0 * n_d);
            if (g0 - r_plus).abs() <= 1e-12 {
                Shape::Constant
            } else {
                Shape::TwoRoots {
                    r_plus,
                    r_minus,
                    u0: (g0 - r_plus) / (g0 - r_minus),
                    lambda: disc,
                }
            }
        }
    } else if b > 0.0 {
        Shape::Relaxation { target: c / b }
    } else {
        Shape::Linear
    };
    Ok(MomentTrajectory {
        g0,
        coeffs: *coeffs,
        shape,
    })
}

/// Adaptive Dormand–Prince solve on `[0, t_end]` with dense output.
/// Evaluation beyond `t_end` returns the value at `t_end`.
pub fn solve_numeric(
    coeffs: &RiccatiCoefficients,
    g0: f64,
    t_end: f64,
    tol: f64,
) -> Result<MomentTrajectory> {
    check_g0(g0)?;
    if !(tol > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Validation(format!(
            "need tol > 0 and t_end >= 0, got tol = {tol}, t_end = {t_end}"
        )));
    }
    let k = *coeffs;
    // The dense interpolant is an order lower than the step, so ask for
    // two extra digits.
    let opts = ode::Options::with_tol(tol * 1e-3, tol * 1e-4);
    let sol = ode::solve_dense(|_t, y, dy| dy[0] = k.rhs(y[0]), 0.0, &[g0], t_end, &opts)?;
    Ok(MomentTrajectory {
        g0,
        coeffs: *coeffs,
        shape: Shape::Numeric(Box::new(sol)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rc(n_d: f64, b: f64, c: f64) -> RiccatiCoefficients {
        RiccatiCoefficients::new(n_d, b, c).unwrap()
    }

    #[test]
    fn excess_decays_without_cancellation() {
        let k = rc(1.0, 3.0, 14.0);
        let g_inf = equilibrium(&k).finite().unwrap();
        let traj = solve_closed_form(&k, 2.0).unwrap();
        assert!((traj.excess(0.0).unwrap() - (2.0 - g_inf)).abs() < 1e-14);
        // linearized decay rate is 2 n_d g∞ + b
        let rate = 2.0 * g_inf + 3.0;
        let ratio = traj.excess(40.0).unwrap() / traj.excess(39.0).unwrap();
        assert!((ratio.ln() + rate).abs() < 1e-9);
        assert!(traj.excess(40.0).unwrap().abs() < 1e-100);
        let relax = solve_closed_form(&rc(0.0, 2.0, 3.0), 1.0).unwrap();
        assert!((relax.excess(30.0).unwrap() + 0.5 * (-60f64).exp()).abs() < 1e-40);
        assert_eq!(
            solve_closed_form(&rc(0.0, 0.0, 1.0), 1.0)
                .unwrap()
                .excess(1.0),
            None
        );
    }

    #[test]
    fn equilibria() {
        let g = equilibrium(&rc(1.0, 3.0, 14.0)).finite().unwrap();
        assert!((g - (-3.0 + 65f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((g - 2.531128874149275).abs() < 1e-12);
        assert_eq!(equilibrium(&rc(0.0, 1.0, 2.0)), Equilibrium::Finite(2.0));
        assert_eq!(equilibrium(&rc(0.0, 0.0, 2.0)), Equilibrium::Infinite);
        assert_eq!(equilibrium(&rc(0.0, 0.0, 0.0)), Equilibrium::Finite(0.0));
        assert_eq!(equilibrium(&rc(2.0, 1.0, 0.0)), Equilibrium::Finite(0.0));
    }

    #[test]
    fn fixed_point_is_constant() {
        let k = rc(1.0, 3.0, 14.0);
        let eq = equilibrium(&k).finite().unwrap();
        let traj = solve_closed_form(&k, eq).unwrap();
        for t in [0.0, 0.5, 7.0, 100.0] {
            assert_eq!(traj.eval(t), eq);
        }
    }

    #[test]
    fn linear_relaxation() {
        let traj = solve_closed_form(&rc(0.0, 1.0, 2.0), 1.0).unwrap();
        for t in [0.0, 0.3, 1.0, 4.0] {
            assert!((traj.eval(t) - (2.0 - (-t).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn increasing_to_equilibrium() {
        let k = rc(1.0, 3.0, 14.0);
        let traj = solve_closed_form(&k, 0.5).unwrap();
        let mut prev = traj.eval(0.0);
        assert_eq!(prev, 0.5);
        for i in 1..=200 {
            let g = traj.eval(i as f64 * 0.01);
            assert!(g > prev);
            prev = g;
        }
        assert!((traj.eval(10.0) - 2.531128874149275).abs() < 1e-12);
    }

    #[test]
    fn numeric_matches_closed_form() {
        let k = rc(1.0, 3.0, 14.0);
        let exact = solve_closed_form(&k, 0.5).unwrap();
        let num = solve_numeric(&k, 0.5, 5.0, 1e-9).unwrap();
        for i in 0..=500 {
            let t = i as f64 * 0.01;
            assert!((exact.eval(t) - num.eval(t)).abs() <= 1e-9);
        }
        let lin = solve_numeric(&rc(0.0, 0.0, 2.0), 1.0, 3.0, 1e-9).unwrap();
        assert!((lin.eval(3.0) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn double_root_decay() {
        let traj = solve_closed_form(&rc(2.0, 0.0, 0.0), 1.0).unwrap();
        assert!((traj.eval(1.5) - 1.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_start() {
        assert!(solve_closed_form(&rc(1.0, 1.0, 1.0), 0.0).is_err());
        assert!(solve_numeric(&rc(1.0, 1.0, 1.0), -1.0, 1.0, 1e-6).is_err());
    }
}
