//! Steady states `G*` of the PDE: continuous solutions on `[-1, 1]` of
//!
//! `(x-1)(x c1 - c2) G' + ((x-1) c3 - c4) G + c4 x^m = 0`.
//!
//! With two singular points `s* = c2/c1 ∈ [0, 1)` and `1`, the solution is a
//! variation-of-constants integral whose free constants are fixed by
//! continuity at both points. Writing `γ = c3/c1 + α` and
//! `α = c4/(c1 - c2)`, the continuous solution on either side of `s*` is
//!
//! `G*(x) = c4/(c1 γ) (1-x)^α ∫₀¹ s^m (1-s)^{-α-1} dτ`,
//! `s = s* + (x - s*) τ^{1/γ}`,
//!
//! where the substitution has absorbed the integrable singularity at `s*`.
//! When `x = 1` is the only singular point, `G*` is seeded from its power
//! series at one and integrated backward, which is the stable direction.

use crate::error::{Error, Result};
use crate::model::{powu, Degeneracy, SteadyConstants};
use crate::ode::{self, DenseSolution};

/// Constants at or below this are treated as zero, and `c1`, `c2` closer
/// than this as equal.
pub const TIE_TOL: f64 = 1e-12;

/// Cell of the existence table, decided by the sign pattern of the constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseCell {
    /// Every continuous function solves the equation; `G* ≡ 1` is chosen.
    AllConstantsZero,
    /// `c3 = c4 = 0`: only constants solve it; `G* ≡ 1` is chosen.
    ConstantsOnly,
    /// `c4 = 0`, `c3 > 0`, `c1 ≥ c2`: only `G* ≡ 0`.
    ZeroOnly,
    /// `c4 = 0`, `c3 > 0`, `c2 > c1`: a one-parameter family, normalized by `G*(1) = 1`.
    NormalizedFamily,
    /// `c4 > 0`, `c1 = c2 = 0`: the equation is algebraic.
    Algebraic,
    /// `c4 > 0`, `0 ≤ c2 < c1`: singular points `c2/c1` and `1`.
    TwoSingularities,
    /// `c4 > 0`, `c2 ≥ c1`, not both zero: `1` is the only singular point.
    SeriesSeeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyCase {
    pub cell: CaseCell,
    /// Singular points inside `[-1, 1]`, ascending.
    pub singular_points: Vec<f64>,
}

fn is_zero(v: f64) -> bool {
    v.abs() <= TIE_TOL
}

pub fn classify(c: &SteadyConstants) -> SteadyCase {
    let (c1, c2, c3, c4) = (c.c1, c.c2, c.c3, c.c4);
    let equal = (c1 - c2).abs() <= TIE_TOL;
    let cell = if [c1, c2, c3, c4].iter().all(|&v| is_zero(v)) {
        CaseCell::AllConstantsZero
    } else if is_zero(c3) && is_zero(c4) {
        CaseCell::ConstantsOnly
    } else if is_zero(c4) {
        if !equal && c2 > c1 {
            CaseCell::NormalizedFamily
        } else {
            CaseCell::ZeroOnly
        }
    } else if is_zero(c1) && is_zero(c2) {
        CaseCell::Algebraic
    } else if !equal && c2 < c1 {
        CaseCell::TwoSingularities
    } else {
        CaseCell::SeriesSeeded
    };
    let mut singular_points = Vec::new();
    if c1 > TIE_TOL && c2 / c1 <= 1.0 && !equal {
        singular_points.push(c2 / c1);
    }
    singular_points.push(1.0);
    SteadyCase {
        cell,
        singular_points,
    }
}

/// `x ↦ G*(x)` on `[-1, 1]` with its provenance.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub case: SteadyCase,
    pub constants: SteadyConstants,
    pub m: u32,
    /// `G*'(1)`, when `G*` is differentiable there.
    pub slope_at_one: Option<f64>,
    /// Whether `G*` is guaranteed to be a PDE steady state: needs `G*'(1) ≠ 0`.
    pub certified: bool,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    Constant(f64),
    /// `c4 x^m / (c4 - (x-1) c3)`.
    Algebraic,
    /// `exp(k (x - 1))`.
    Exponential {
        k: f64,
    },
    /// `((c2 - x c1)/(c2 - c1))^{-c3/c1}`.
    Power,
    TwoSingularities(TwoSingularity),
    Series(SeriesSeed),
}

impl SteadyState {
    pub fn eval(&self, x: f64) -> f64 {
        let (c1, c2, c3, c4) = self.c();
        match &self.repr {
            Repr::Constant(v) => *v,
            Repr::Algebraic => c4 * powu(x, self.m) / (c4 - (x - 1.0) * c3),
            Repr::Exponential { k } => (k * (x - 1.0)).exp(),
            Repr::Power => ((c2 - x * c1) / (c2 - c1)).powf(-c3 / c1),
            Repr::TwoSingularities(ts) => ts.eval(x),
            Repr::Series(s) => s.eval(x),
        }
    }

    /// `1 - G*(x)`, keeping full relative precision near `x = 1`.
    /// `None` for the two-singularity construction, which has no local
    /// expansion at one.
    pub fn deficit(&self, x: f64) -> Option<f64> {
        let (c1, c2, c3, c4) = self.c();
        let gap = 1.0 - x;
        let d = match &self.repr {
            Repr::Constant(v) => 1.0 - v,
            Repr::Algebraic => {
                // 1 - x^m = (1 - x) Σ_{j<m} x^j
                let partial = (0..self.m).fold(0.0, |acc, _| acc * x + 1.0);
                gap * (c4 * partial + c3) / (c4 + gap * c3)
            }
            Repr::Exponential { k } => -(k * (x - 1.0)).exp_m1(),
            Repr::Power => -(-c3 / c1 * (c1 * gap / (c2 - c1)).ln_1p()).exp_m1(),
            Repr::TwoSingularities(_) => return None,
            Repr::Series(s) => s.deficit(x),
        };
        Some(d)
    }

    /// `G*'(x)`. Singular points of the two-singularity construction are
    /// excluded: there the steady equation gives `0/0`.
    pub fn derivative(&self, x: f64) -> f64 {
        let (c1, c2, c3, c4) = self.c();
        match &self.repr {
            Repr::Constant(_) => 0.0,
            Repr::Algebraic => {
                let den = c4 - (x - 1.0) * c3;
                let dm = if self.m == 0 {
                    0.0
                } else {
                    f64::from(self.m) * powu(x, self.m - 1)
                };
                c4 * (dm * den + c3 * powu(x, self.m)) / (den * den)
            }
            Repr::Exponential { k } => k * (k * (x - 1.0)).exp(),
            Repr::Power => {
                let q = (c2 - x * c1) / (c2 - c1);
                c3 / (c2 - c1) * q.powf(-c3 / c1 - 1.0)
            }
            Repr::TwoSingularities(_) => self.slope_from_equation(x),
            Repr::Series(s) if x >= 1.0 - s.eps => s.series_derivative(x),
            Repr::Series(_) => self.slope_from_equation(x),
        }
    }

    /// `G*'` solved from `(x-1)(c1 x - c2) G' = (c4 - c3 (x-1)) G - c4 x^m`.
    fn slope_from_equation(&self, x: f64) -> f64 {
        let (c1, c2, c3, c4) = self.c();
        ((c4 - c3 * (x - 1.0)) * self.eval(x) - c4 * powu(x, self.m)) / ((x - 1.0) * (c1 * x - c2))
    }

    fn c(&self) -> (f64, f64, f64, f64) {
        let c = &self.constants;
        (c.c1, c.c2, c.c3, c.c4)
    }

    /// `G*(1)`; equals one whenever `c4 > 0`.
    pub fn value_at_one(&self) -> f64 {
        self.eval(1.0)
    }

    /// `G*(c2/c1)` when that point is interior.
    pub fn value_at_ratio(&self) -> Option<f64> {
        match &self.repr {
            Repr::TwoSingularities(ts) => Some(ts.value_at_ratio()),
            _ => None,
        }
    }

    /// Left and right limits at `c2/c1` and the left limit at one, for the
    /// two-singularity construction.
    pub fn continuity(&self) -> Option<Continuity> {
        match &self.repr {
            Repr::TwoSingularities(ts) => Some(ts.continuity()),
            _ => None,
        }
    }

    /// `G*(x)` by the variation-of-constants formula anchored at `anchor`,
    /// with the anchor value from the improper integral to `c2/c1`.
    /// `anchor` and `x` must lie on the same side of `c2/c1` and below one.
    pub fn anchored(&self, anchor: f64, x: f64) -> Option<f64> {
        match &self.repr {
            Repr::TwoSingularities(ts) => ts.anchored(anchor, x),
            _ => None,
        }
    }

    /// Left end of the series window at one, for the seeded construction.
    pub fn series_window(&self) -> Option<f64> {
        match &self.repr {
            Repr::Series(s) => Some(1.0 - s.eps),
            _ => None,
        }
    }
}

/// Limits of `G*` at its singular points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Continuity {
    pub ratio: f64,
    pub value_at_ratio: f64,
    pub left_at_ratio: f64,
    pub right_at_ratio: f64,
    pub left_at_one: f64,
}

impl Continuity {
    /// Largest deviation of a one-sided limit from its endpoint value.
    pub fn max_gap(&self) -> f64 {
        (self.left_at_ratio - self.value_at_ratio)
            .abs()
            .max((self.right_at_ratio - self.value_at_ratio).abs())
            .max((self.left_at_one - 1.0).abs())
    }
}

/// Residual of the steady equation for an arbitrary candidate `f`;
/// `f'` by central differences with step `1e-5` (one-sided at `±1`).
pub fn residual_of<F: Fn(f64) -> f64>(f: F, c: &SteadyConstants, m: u32, x: f64) -> f64 {
    let h = 1e-5;
    let d = if x - h < -1.0 {
        (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h)
    } else if x + h > 1.0 {
        (3.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h)) / (2.0 * h)
    } else {
        (f(x + h) - f(x - h)) / (2.0 * h)
    };
    (x - 1.0) * (x * c.c1 - c.c2) * d + ((x - 1.0) * c.c3 - c.c4) * f(x) + c.c4 * powu(x, m)
}

pub fn residual(state: &SteadyState, x: f64) -> f64 {
    residual_of(|y| state.eval(y), &state.constants, state.m, x)
}

/// Builds `G*` for any constants, choosing the construction from the case.
pub fn build(c: &SteadyConstants, m: u32) -> Result<SteadyState> {
    match c.degeneracy {
        Degeneracy::NoSteadyState => return Err(Error::NoSteadyState),
        Degeneracy::UniformSteadyState => {
            return Ok(finish(classify(c), *c, m, Repr::Constant(1.0), Some(0.0)))
        }
        Degeneracy::Regular => {}
    }
    let case = classify(c);
    let (c1, c2, c3, c4) = (c.c1, c.c2, c.c3, c.c4);
    match case.cell {
        CaseCell::AllConstantsZero | CaseCell::ConstantsOnly => {
            Ok(finish(case, *c, m, Repr::Constant(1.0), Some(0.0)))
        }
        CaseCell::ZeroOnly => Ok(finish(case, *c, m, Repr::Constant(0.0), Some(0.0))),
        CaseCell::NormalizedFamily => {
            let slope = c3 / (c2 - c1);
            let repr = if is_zero(c1) {
                Repr::Exponential { k: c3 / c2 }
            } else {
                Repr::Power
            };
            Ok(finish(case, *c, m, repr, Some(slope)))
        }
        CaseCell::Algebraic => Ok(finish(
            case,
            *c,
            m,
            Repr::Algebraic,
            Some(f64::from(m) + c3 / c4),
        )),
        CaseCell::TwoSingularities => build_two_singularity(c, m),
        CaseCell::SeriesSeeded => build_series_seeded(c, m),
    }
}

fn finish(
    case: SteadyCase,
    constants: SteadyConstants,
    m: u32,
    repr: Repr,
    slope: Option<f64>,
) -> SteadyState {
    let certified = matches!(slope, Some(s) if s != 0.0);
    SteadyState {
        case,
        constants,
        m,
        slope_at_one: slope,
        certified,
        repr,
    }
}

#[derive(Debug, Clone)]
struct TwoSingularity {
    c1: f64,
    c4: f64,
    c3: f64,
    m: u32,
    ratio: f64,
    alpha: f64,
    gamma: f64,
}

/// Composite double-exponential quadrature. A piece is accepted when its
/// own error estimate or the agreement of its two halves meets `tol`.
fn integrate<F: Fn(f64) -> f64 + Copy>(
    f: F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = quadrature::integrate(f, a, mid, 0.5 * tol);
    let right = quadrature::integrate(f, mid, b, 0.5 * tol);
    let sum = left.integral + right.integral;
    if (sum - whole).abs() <= tol || depth == 0 {
        return sum;
    }
    let l = if left.error_estimate <= 0.5 * tol {
        left.integral
    } else {
        integrate(f, a, mid, left.integral, 0.5 * tol, depth - 1)
    };
    let r = if right.error_estimate <= 0.5 * tol {
        right.integral
    } else {
        integrate(f, mid, b, right.integral, 0.5 * tol, depth - 1)
    };
    l + r
}

fn integrate_relative<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64) -> f64 {
    // scale by ∫|f| so that sign changes do not ask for accuracy below roundoff
    let scale = quadrature::integrate(|s| f(s).abs(), a, b, 1e-6).integral;
    let tol = (1e-14 * scale).max(f64::MIN_POSITIVE);
    let fine = quadrature::integrate(f, a, b, tol);
    if fine.error_estimate <= tol {
        return fine.integral;
    }
    integrate(f, a, b, fine.integral, tol, 12)
}

impl TwoSingularity {
    fn new(c: &SteadyConstants, m: u32) -> Self {
        let ratio = c.c2 / c.c1;
        let alpha = c.c4 / (c.c1 - c.c2);
        Self {
            c1: c.c1,
            c3: c.c3,
            c4: c.c4,
            m,
            ratio,
            alpha,
            gamma: c.c3 / c.c1 + alpha,
        }
    }

    fn beta(&self) -> f64 {
        -self.gamma
    }

    fn value_at_ratio(&self) -> f64 {
        let s = self.ratio;
        -self.c4 * powu(s, self.m) / ((s - 1.0) * self.c3 - self.c4)
    }

    /// `∫₀¹ s^m ((1-a)/(1-s))^{α+1} dτ` along `s = s* + (a - s*) τ^{1/γ}`,
    /// with `1 - s` formed without cancellation.
    fn core_integral(&self, a: f64) -> f64 {
        let (ratio, alpha, gamma, m) = (self.ratio, self.alpha, self.gamma, self.m);
        let gap = 1.0 - a;
        let span = a - ratio;
        if span == 0.0 {
            return powu(ratio, m) * 1.0;
        }
        let f = move |tau: f64| {
            if tau <= 0.0 {
                return powu(ratio, m) * (gap / (1.0 - ratio)).powf(alpha + 1.0);
            }
            // 1 - τ^{1/γ}
            let rest = -(tau.ln() / gamma).exp_m1();
            let s = a - span * rest;
            let one_minus_s = gap + span * rest;
            powu(s, m) * (gap / one_minus_s).powf(alpha + 1.0)
        };
        // near x = 1 the integrand peaks in a layer of width ~ γ(1-x)/|x - s*| at τ = 1
        let layer = 10.0 * gamma * gap / span.abs();
        if layer < 0.25 {
            integrate_relative(f, 0.0, 1.0 - layer) + integrate_relative(f, 1.0 - layer, 1.0)
        } else {
            integrate_relative(f, 0.0, 1.0)
        }
    }

    fn eval(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return 1.0;
        }
        self.c4 / (self.c1 * self.gamma) * self.core_integral(x) / (1.0 - x)
    }

    fn continuity(&self) -> Continuity {
        let d = 1e-10;
        Continuity {
            ratio: self.ratio,
            value_at_ratio: self.value_at_ratio(),
            left_at_ratio: self.eval(self.ratio - d),
            right_at_ratio: self.eval(self.ratio + d),
            left_at_one: self.eval(1.0 - d),
        }
    }

    /// `b(s) = -c4 s^m / ((s-1)(s c1 - c2))`.
    fn forcing(&self, s: f64) -> f64 {
        -self.c4 * powu(s, self.m) / ((s - 1.0) * self.c1 * (s - self.ratio))
    }

    /// `w_a(s) = ((1-s)/(1-a))^α (|s - s*|/|a - s*|)^β`.
    fn weight(&self, a: f64, s: f64) -> f64 {
        ((1.0 - s) / (1.0 - a)).powf(self.alpha)
            * ((s - self.ratio).abs() / (a - self.ratio).abs()).powf(self.beta())
    }

    fn anchored(&self, a: f64, x: f64) -> Option<f64> {
        let side = |v: f64| (v - self.ratio).signum();
        if !(a < 1.0 && x < 1.0 && a >= -1.0 && x >= -1.0) || side(a) != side(x) || a == self.ratio
        {
            return None;
        }
        // G*(a) from the improper integral between s* and a
        // after s = s* + (a - s*) v^{1/γ} this is the same integral as `eval(a)`
        let at_anchor = self.eval(a);
        let (lo, hi, sign) = if x >= a { (a, x, 1.0) } else { (x, a, -1.0) };
        let g = |s: f64| self.forcing(s) / self.weight(a, s);
        let tail = if lo == hi {
            0.0
        } else {
            sign * integrate_relative(g, lo, hi)
        };
        Some((at_anchor + tail) * self.weight(a, x))
    }
}

/// Builds `G*` when `c4 > 0` and `0 ≤ c2 < c1`.
pub fn build_two_singularity(c: &SteadyConstants, m: u32) -> Result<SteadyState> {
    let case = classify(c);
    if case.cell != CaseCell::TwoSingularities {
        return Err(Error::Validation(format!(
            "two-singularity construction needs c4 > 0 and 0 <= c2 < c1, got {:?}",
            case.cell
        )));
    }
    let ts = TwoSingularity::new(c, m);
    let cont = ts.continuity();
    if !(cont.max_gap() <= 1e-6) {
        return Err(Error::Accuracy {
            what: "continuity of the steady state at its singular points".into(),
            achieved: cont.max_gap(),
            tolerance: 1e-6,
        });
    }
    let slope = if ts.alpha > 1.0 {
        c.seed_slope(m)
    } else {
        None
    };
    Ok(finish(case, *c, m, Repr::TwoSingularities(ts), slope))
}

#[derive(Debug, Clone)]
struct SeriesSeed {
    /// Coefficients of `G*` in powers of `x - 1`.
    coeffs: Vec<f64>,
    eps: f64,
    /// Solution on `[-1, 1 - eps]`.
    body: DenseSolution,
}

impl SeriesSeed {
    fn series(&self, x: f64) -> f64 {
        let u = x - 1.0;
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * u + a)
    }

    fn series_derivative(&self, x: f64) -> f64 {
        let u = x - 1.0;
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (n, &a)| acc * u + n as f64 * a)
    }

    fn deficit(&self, x: f64) -> f64 {
        if x >= 1.0 - self.eps {
            // a_0 = 1 cancels exactly
            let u = x - 1.0;
            -u * self
                .coeffs
                .iter()
                .skip(1)
                .rev()
                .fold(0.0, |acc, &a| acc * u + a)
        } else {
            1.0 - self.body.eval(x)[0]
        }
    }

    fn eval(&self, x: f64) -> f64 {
        if x >= 1.0 - self.eps {
            self.series(x)
        } else {
            self.body.eval(x)[0]
        }
    }
}

fn binomial(m: u32, n: usize) -> f64 {
    if n > m as usize {
        return 0.0;
    }
    (0..n).fold(1.0, |acc, i| {
        acc * (f64::from(m) - i as f64) / (i as f64 + 1.0)
    })
}

/// Series coefficients `a_0 = 1, a_1, ...` at `x = 1`; may diverge when
/// `c1 = c2`, in which case it is used asymptotically.
fn series_coefficients(c: &SteadyConstants, m: u32, n_max: usize) -> Vec<f64> {
    let mut a = vec![1.0];
    for n in 1..=n_max {
        let num = (c.c1 * (n as f64 - 1.0) + c.c3) * a[n - 1] + c.c4 * binomial(m, n);
        a.push(num / (c.c4 + (c.c2 - c.c1) * n as f64));
    }
    a
}

/// Chooses the series window and truncation: terms are kept while they
/// shrink; the window halves until the last kept term is below `1e-15`.
fn series_window(c: &SteadyConstants, m: u32) -> (f64, Vec<f64>) {
    let mut eps: f64 = 1e-2;
    if c.c1 > 0.0 && c.c2 / c.c1 > 1.0 {
        eps = eps.min(0.25 * (c.c2 / c.c1 - 1.0));
    }
    let all = series_coefficients(c, m, 40);
    loop {
        let mut kept = vec![all[0]];
        let mut last = f64::INFINITY;
        for (n, &a) in all.iter().enumerate().skip(1) {
            let term = (a * eps.powi(n as i32)).abs();
            if term > last && term > 0.0 {
                break;
            }
            kept.push(a);
            last = term;
            if term < 1e-17 {
                break;
            }
        }
        if last < 1e-15 || eps < 1e-6 {
            return (eps, kept);
        }
        eps *= 0.5;
    }
}

/// Builds `G*` when `c4 > 0` and `x = 1` is the only singular point.
/// Closed-form cells (`c4 = 0`, `c1 = c2 = 0`, `c3 = c4 = 0`) are passed to
/// their closed forms.
pub fn build_series_seeded(c: &SteadyConstants, m: u32) -> Result<SteadyState> {
    let case = classify(c);
    match case.cell {
        CaseCell::SeriesSeeded => {}
        CaseCell::TwoSingularities => {
            return Err(Error::Validation(
                "series seeding needs x = 1 to be the only singular point (c2 >= c1)".into(),
            ))
        }
        _ => return build(c, m),
    }
    let den = c.c4 + c.c2 - c.c1;
    if den.abs() < TIE_TOL {
        return Err(Error::DegenerateSeed(den));
    }
    let (eps, coeffs) = series_window(c, m);
    let (c1, c2, c3, c4) = (c.c1, c.c2, c.c3, c.c4);
    let x_start = 1.0 - eps;
    let seed = coeffs.iter().rev().fold(0.0, |acc, &a| acc * (-eps) + a);
    let opts = ode::Options::with_tol(1e-12, 1e-14);
    let body = ode::solve_dense(
        |x, y, dy| {
            let u = x - 1.0;
            dy[0] = -((u * c3 - c4) * y[0] + c4 * powu(x, m)) / (u * (x * c1 - c2));
        },
        x_start,
        &[seed],
        -1.0,
        &opts,
    )?;
    let slope = coeffs.get(1).copied();
    Ok(finish(
        case,
        *c,
        m,
        Repr::Series(SeriesSeed { coeffs, eps, body }),
        slope,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_singularity_constants() -> SteadyConstants {
        SteadyConstants::explicit(2.0, 1.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn deficit_and_derivative_agree_with_values() {
        let sets = [
            (0.0, 0.0, 1.5, 2.0, 3),
            (0.0, 1.0, 2.0, 0.0, 3),
            (1.0, 2.0, 1.0, 0.0, 3),
            (0.0, 4.0, 7.0, 1.0, 3),
            (1.0, 3.0, 2.0, 1.0, 2),
            (2.0, 2.0, 1.0, 1.0, 3),
        ];
        for (c1, c2, c3, c4, m) in sets {
            let g = build(&SteadyConstants::explicit(c1, c2, c3, c4).unwrap(), m).unwrap();
            for x in [-1.0, -0.4, 0.3, 0.95, 0.995, 0.9999] {
                let d = g.deficit(x).unwrap();
                assert!(
                    (d - (1.0 - g.eval(x))).abs() < 1e-12,
                    "{c1} {c2} {c3} {c4}: {x}"
                );
                let h = 1e-6;
                let fd = if x - h < -1.0 {
                    (g.eval(x + h) - g.eval(x)) / h
                } else {
                    (g.eval(x + h) - g.eval(x - h)) / (2.0 * h)
                };
                let tol = if x - h < -1.0 { 1e-4 } else { 1e-6 };
                assert!(
                    (g.derivative(x) - fd).abs() < tol * g.derivative(x).abs().max(1.0),
                    "{c1} {c2} {c3} {c4}: {x}"
                );
            }
            let x = 1.0 - 1e-13;
            let slope = g.slope_at_one.unwrap();
            assert!(
                (g.deficit(x).unwrap() / (1.0 - x) - slope).abs() < 1e-9 * slope.abs().max(1.0)
            );
        }
        assert!(build(&two_singularity_constants(), 3)
            .unwrap()
            .deficit(0.2)
            .is_none());
    }

    #[test]
    fn classify_two_singularity_constants() {
        let case = classify(&two_singularity_constants());
        assert_eq!(case.cell, CaseCell::TwoSingularities);
        assert_eq!(case.singular_points, vec![0.5, 1.0]);
    }

    #[test]
    fn classify_table_cells() {
        let k = |a, b, c, d| classify(&SteadyConstants::explicit(a, b, c, d).unwrap()).cell;
        assert_eq!(k(0.0, 0.0, 0.0, 0.0), CaseCell::AllConstantsZero);
        assert_eq!(k(3.0, 3.0, 0.0, 0.0), CaseCell::ConstantsOnly);
        assert_eq!(k(0.0, 4.0, 7.0, 1.0), CaseCell::SeriesSeeded);
        assert_eq!(k(2.0, 2.0, 1.0, 1.0), CaseCell::SeriesSeeded);
        assert_eq!(k(0.0, 0.0, 1.0, 0.0), CaseCell::ZeroOnly);
        assert_eq!(k(2.0, 1.0, 1.0, 0.0), CaseCell::ZeroOnly);
        assert_eq!(k(1.0, 1.0, 1.0, 0.0), CaseCell::ZeroOnly);
        assert_eq!(k(0.0, 1.0, 1.0, 0.0), CaseCell::NormalizedFamily);
        assert_eq!(k(1.0, 2.0, 1.0, 0.0), CaseCell::NormalizedFamily);
        assert_eq!(k(0.0, 0.0, 1.0, 1.0), CaseCell::Algebraic);
        assert_eq!(k(2.0, 0.0, 1.0, 1.0), CaseCell::TwoSingularities);
    }

    #[test]
    fn two_singularity_exponents_and_ratio_value() {
        let ts = TwoSingularity::new(&two_singularity_constants(), 3);
        assert_eq!(ts.alpha, 2.0);
        assert_eq!(ts.beta(), -2.5);
        assert!((ts.value_at_ratio() - 0.1).abs() < 1e-15);
        assert!((ts.eval(0.5) - 0.1).abs() < 1e-14);
    }

    #[test]
    fn constants_only_is_one() {
        let c = SteadyConstants::explicit(3.0, 3.0, 0.0, 0.0).unwrap();
        let s = build(&c, 3).unwrap();
        assert_eq!(s.eval(-0.4), 1.0);
        assert_eq!(residual(&s, 0.3), 0.0);
        assert!(!s.certified);
    }

    #[test]
    fn zero_candidate_has_nonzero_residual() {
        let c = SteadyConstants::explicit(2.0, 1.0, 1.0, 2.0).unwrap();
        assert!((residual_of(|_| 0.0, &c, 3, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn algebraic_cell_with_m_zero_is_one() {
        let c = SteadyConstants::explicit(0.0, 0.0, 0.0, 1.5).unwrap();
        let s = build_series_seeded(&c, 0).unwrap();
        for x in [-1.0, 0.0, 0.7] {
            assert_eq!(s.eval(x), 1.0);
        }
    }

    #[test]
    fn zero_only_cell() {
        let c = SteadyConstants::explicit(2.0, 1.0, 1.0, 0.0).unwrap();
        let s = build_series_seeded(&c, 3).unwrap();
        assert_eq!(s.eval(0.2), 0.0);
    }

    #[test]
    fn no_steady_state_is_an_error() {
        let rates = crate::model::ProcessRates {
            l_p: 1.0,
            ..Default::default()
        };
        let c = crate::model::steady_constants(&rates);
        assert!(matches!(build(&c, 0), Err(Error::NoSteadyState)));
    }

    #[test]
    fn series_matches_binomial() {
        assert_eq!(binomial(3, 2), 3.0);
        assert_eq!(binomial(3, 4), 0.0);
        let a = series_coefficients(
            &SteadyConstants::explicit(0.0, 4.0, 7.0, 1.0).unwrap(),
            3,
            3,
        );
        assert!((a[1] - 2.0).abs() < 1e-15);
    }
}
