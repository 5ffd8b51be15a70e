//! Method of characteristics for the localized PDE `G_t = H(G_x, G, x, t)`
//! on the strip `[-1, 1] × [0, T]`.
//!
//! A point `(x̄, t̄)` is solved by following its projected characteristic
//! backward to `t = 0`, where the initial data fix `(p¹, p², z)`, and then
//! integrating the full characteristic system forward to `t̄`.
//!
//! The projected characteristic is carried as `ln(1 - x)`. The line `x = 1`
//! is stationary and nearby curves separate from it exponentially, so the
//! foot of a long backward trace can sit within `1e-10` of one. Keeping the
//! logarithm of that distance preserves its relative precision, which an
//! `x` coordinate rounded near one cannot.

mod difference;
mod initial;

pub use difference::{
    difference_supported, steady_difference_at, steady_difference_grid, DifferenceField,
};
pub use initial::{GeometricTail, InitialCondition, InitialKind};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{self, Moment, ProcessRates};
use crate::ode;
use crate::riccati::{self, MomentTrajectory};

/// A point on a characteristic curve.
///
/// `gap = 1 - x`; use [`CharacteristicState::x`] for the position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicState {
    pub t: f64,
    pub gap: f64,
    /// Carries `G_x`.
    pub p1: f64,
    /// Carries `G_t`.
    pub p2: f64,
    /// Carries `G`.
    pub z: f64,
}

impl CharacteristicState {
    pub fn x(&self) -> f64 {
        1.0 - self.gap
    }

    /// Initial state `q(x₀) = (x₀, h'(x₀), H(h'(x₀), h(x₀), x₀, 0), h(x₀))`.
    pub fn initial<M: Moment + ?Sized>(
        gap0: f64,
        rates: &ProcessRates,
        g: &M,
        h: &InitialCondition,
    ) -> Result<Self> {
        let x0 = 1.0 - gap0;
        let p1 = h.derivative(x0);
        let z = h.value(x0);
        let p2 = model::evaluate_h(p1, z, x0, 0.0, rates, g)?;
        Ok(Self {
            t: 0.0,
            gap: gap0,
            p1,
            p2,
            z,
        })
    }

    /// `p² - H(p¹, z, x, t)`; zero along exact characteristics.
    pub fn pde_residual<M: Moment + ?Sized>(&self, rates: &ProcessRates, g: &M) -> f64 {
        self.p2 - rates.hamiltonian(self.p1, self.z, self.x(), g.value(self.t))
    }
}

/// Time derivatives `(ẋ, ṗ¹, ṗ², ż)` of the characteristic system.
///
/// `g'(t)` comes from the moment equation `-n_d g² - b g + c` evaluated at
/// `g(t)`, so `g` must solve that equation for these rates.
pub fn char_rhs<M: Moment + ?Sized>(
    state: &CharacteristicState,
    rates: &ProcessRates,
    g: &M,
) -> Result<[f64; 4]> {
    let gt = g.value(state.t);
    if !(gt > 0.0) {
        return Err(Error::Domain(format!(
            "g({}) = {gt} is not positive",
            state.t
        )));
    }
    let gp = model::derive_riccati(rates).rhs(gt);
    Ok(rhs_with_moment(
        state.x(),
        -state.gap,
        state.p1,
        state.p2,
        state.z,
        rates,
        gt,
        gp,
    ))
}

/// Right-hand side with `g` and `g'` given; `xm1 = x - 1` passed separately
/// so it keeps full precision near the fixed line.
#[allow(clippy::too_many_arguments)]
fn rhs_with_moment(
    x: f64,
    xm1: f64,
    p1: f64,
    p2: f64,
    z: f64,
    rates: &ProcessRates,
    g: f64,
    gp: f64,
) -> [f64; 4] {
    let pref = rates.preferential_weight();
    let m = rates.m;
    let drift = rates.drift_factor(x, g);
    let reaction = xm1 * rates.growth_factor(g) - rates.node_addition();
    // m x^{m-1}, zero when m = 0
    let source_slope = if m == 0 {
        0.0
    } else {
        f64::from(m) * model::powu(x, m - 1)
    };

    let xdot = -xm1 * drift;
    let p1dot = p1 * drift
        + rates.node_addition() * source_slope
        + p1 * xm1 * (pref / g + rates.omega_p)
        + z * rates.growth_factor(g)
        + reaction * p1;
    let p2dot = -(xm1 * gp / (g * g))
        * (p1 * x * pref + (rates.n_d * p1 - rates.omega_r * z) * g * g)
        + reaction * p2;
    let zdot = -xm1 * drift * p1 + p2;
    [xdot, p1dot, p2dot, zdot]
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Bound on `|x(x₀, t̄) - x̄|` after tracing back and forth.
    pub roundtrip_tol: f64,
    /// Bound on `|G_x(1, t) - g(t)|` enforced by [`solve_grid`].
    pub closure_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            roundtrip_tol: 1e-8,
            closure_tol: 1e-6,
        }
    }
}

/// Result of tracing a characteristic back to `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Foot {
    pub x0: f64,
    /// `1 - x₀` at full relative precision.
    pub gap0: f64,
    /// `|x(x₀, t̄) - x̄|` from re-integrating forward.
    pub roundtrip_error: f64,
    /// The foot as traced, before clamping onto `[-1, 1]`.
    pub traced_x0: f64,
}

fn check_point(x_bar: f64, t_bar: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x_bar) {
        return Err(Error::Validation(format!("x = {x_bar} outside [-1, 1]")));
    }
    if !(t_bar >= 0.0 && t_bar.is_finite()) {
        return Err(Error::Validation(format!(
            "t = {t_bar} must be finite and nonnegative"
        )));
    }
    Ok(())
}

fn log_gap_rhs<M: Moment + ?Sized>(rates: &ProcessRates, g: &M, t: f64, log_gap: f64) -> f64 {
    // d(ln(1-x))/dt = -ẋ/(1-x) = -(drift factor)
    -rates.drift_factor(1.0 - log_gap.exp(), g.value(t))
}

/// Integrates `ln(1 - x)` from `t_from` to `t_to`.
fn transport_log_gap<M: Moment + ?Sized>(
    log_gap: f64,
    t_from: f64,
    t_to: f64,
    rates: &ProcessRates,
    g: &M,
    opts: &ode::Options,
) -> Result<f64> {
    let (y, _) = ode::solve(
        |t, y, dy| dy[0] = log_gap_rhs(rates, g, t, y[0]),
        t_from,
        &[log_gap],
        t_to,
        opts,
    )?;
    Ok(y[0])
}

fn trace_options(tol: f64) -> ode::Options {
    // the log-gap is O(1..30); absolute accuracy there is relative accuracy in 1 - x
    let a = (tol * 1e-3).max(1e-14);
    ode::Options::with_tol(a, a)
}

/// The position shares the error control of the full system, so it must
/// be as tight as the backward trace to meet the roundtrip bound.
fn forward_rtol(opts: &SolveOptions) -> f64 {
    opts.rtol.min(opts.roundtrip_tol * 1e-3).max(1e-14)
}

/// Clamps a traced foot onto `[-1, 1]`; more than 1e-6 outside is an error.
fn clamp_foot(log_gap0: f64) -> Result<(f64, f64, f64)> {
    let gap0 = log_gap0.exp();
    if gap0 > 2.0 + 1e-6 {
        return Err(Error::Accuracy {
            what: format!(
                "backward characteristic left the trapping region (x0 = {})",
                1.0 - gap0
            ),
            achieved: gap0 - 2.0,
            tolerance: 1e-6,
        });
    }
    let traced = 1.0 - gap0;
    let gap0 = gap0.min(2.0);
    Ok((1.0 - gap0, gap0, traced))
}

/// Finds `x₀` with `x(x₀, t̄) = x̄` by integrating the projected
/// characteristic backward, then checks the forward roundtrip.
pub fn trace_back<M: Moment + ?Sized>(
    x_bar: f64,
    t_bar: f64,
    rates: &ProcessRates,
    g: &M,
    tol: f64,
) -> Result<Foot> {
    check_point(x_bar, t_bar)?;
    let gap_bar = 1.0 - x_bar;
    if gap_bar == 0.0 || t_bar == 0.0 {
        return Ok(Foot {
            x0: x_bar,
            gap0: gap_bar,
            roundtrip_error: 0.0,
            traced_x0: x_bar,
        });
    }
    let opts = trace_options(tol);
    let log_gap0 = transport_log_gap(gap_bar.ln(), t_bar, 0.0, rates, g, &opts)?;
    let (x0, gap0, traced_x0) = clamp_foot(log_gap0)?;
    let back = transport_log_gap(gap0.ln(), 0.0, t_bar, rates, g, &opts)?;
    let roundtrip_error = (back.exp() - gap_bar).abs();
    if roundtrip_error > tol {
        return Err(Error::Accuracy {
            what: format!("characteristic roundtrip at (x = {x_bar}, t = {t_bar}), x0 = {x0}"),
            achieved: roundtrip_error,
            tolerance: tol,
        });
    }
    Ok(Foot {
        x0,
        gap0,
        roundtrip_error,
        traced_x0,
    })
}

/// Forward position `x(x₀, t)` of the projected characteristic.
pub fn forward_position<M: Moment + ?Sized>(
    x0: f64,
    t: f64,
    rates: &ProcessRates,
    g: &M,
    tol: f64,
) -> Result<f64> {
    let gap0 = 1.0 - x0;
    if gap0 == 0.0 || t == 0.0 {
        return Ok(x0);
    }
    if gap0 < 0.0 {
        return Err(Error::Validation(format!(
            "x0 = {x0} beyond the fixed line x = 1"
        )));
    }
    let lg = transport_log_gap(gap0.ln(), 0.0, t, rates, g, &trace_options(tol))?;
    Ok(1.0 - lg.exp())
}

/// Solution of the PDE at one point, with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSolution {
    pub x: f64,
    pub t: f64,
    /// `G(x, t)`.
    pub value: f64,
    /// `G_x(x, t)`.
    pub slope: f64,
    pub foot: Foot,
    /// `|p² - H(p¹, z, x, t)|` at the end of the characteristic.
    pub pde_residual: f64,
}

/// Integrates the full characteristic system from `q(x₀)` over `[0, t]`.
/// The position component is `ln(1 - x)`, or absent when `x₀ = 1`.
pub fn integrate_characteristic<M: Moment + ?Sized>(
    gap0: f64,
    t: f64,
    rates: &ProcessRates,
    g: &M,
    h: &InitialCondition,
    opts: &SolveOptions,
) -> Result<CharacteristicState> {
    let start = CharacteristicState::initial(gap0, rates, g, h)?;
    if t == 0.0 {
        return Ok(start);
    }
    let coeffs = model::derive_riccati(rates);
    let rtol = forward_rtol(opts);
    let ode_opts = ode::Options::with_tol(rtol, opts.atol.min(rtol));
    if gap0 == 0.0 {
        let (y, _) = ode::solve(
            |t, y, dy| {
                let gt = g.value(t);
                let d = rhs_with_moment(1.0, 0.0, y[0], y[1], y[2], rates, gt, coeffs.rhs(gt));
                dy.copy_from_slice(&d[1..]);
            },
            0.0,
            &[start.p1, start.p2, start.z],
            t,
            &ode_opts,
        )?;
        return Ok(CharacteristicState {
            t,
            gap: 0.0,
            p1: y[0],
            p2: y[1],
            z: y[2],
        });
    }
    let (y, _) = ode::solve(
        |t, y, dy| {
            let gt = g.value(t);
            let gap = y[0].exp();
            let d = rhs_with_moment(1.0 - gap, -gap, y[1], y[2], y[3], rates, gt, coeffs.rhs(gt));
            dy[0] = -rates.drift_factor(1.0 - gap, gt);
            dy[1] = d[1];
            dy[2] = d[2];
            dy[3] = d[3];
        },
        0.0,
        &[gap0.ln(), start.p1, start.p2, start.z],
        t,
        &ode_opts,
    )?;
    Ok(CharacteristicState {
        t,
        gap: y[0].exp(),
        p1: y[1],
        p2: y[2],
        z: y[3],
    })
}

/// `(G, G_x)` at `(x̄, t̄)`.
pub fn solve_at<M: Moment + ?Sized>(
    x_bar: f64,
    t_bar: f64,
    rates: &ProcessRates,
    g: &M,
    h: &InitialCondition,
    opts: &SolveOptions,
) -> Result<PointSolution> {
    check_point(x_bar, t_bar)?;
    let gap_bar = 1.0 - x_bar;
    let foot = if gap_bar == 0.0 || t_bar == 0.0 {
        Foot {
            x0: x_bar,
            gap0: gap_bar,
            roundtrip_error: 0.0,
            traced_x0: x_bar,
        }
    } else {
        let trace = trace_options(opts.roundtrip_tol);
        let lg0 = transport_log_gap(gap_bar.ln(), t_bar, 0.0, rates, g, &trace)?;
        let (x0, gap0, traced_x0) = clamp_foot(lg0)?;
        Foot {
            x0,
            gap0,
            roundtrip_error: f64::NAN,
            traced_x0,
        }
    };
    let end = integrate_characteristic(foot.gap0, t_bar, rates, g, h, opts)?;
    let roundtrip_error = (end.gap - gap_bar).abs();
    if roundtrip_error > opts.roundtrip_tol {
        return Err(Error::Accuracy {
            what: format!("characteristic roundtrip at (x = {x_bar}, t = {t_bar})"),
            achieved: roundtrip_error,
            tolerance: opts.roundtrip_tol,
        });
    }
    Ok(PointSolution {
        x: x_bar,
        t: t_bar,
        value: end.z,
        slope: end.p1,
        foot: Foot {
            roundtrip_error,
            ..foot
        },
        pde_residual: end.pde_residual(rates, g).abs(),
    })
}

/// `G` and `G_x` sampled on a tensor grid; rows are times, columns positions.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub slopes: Vec<Vec<f64>>,
    /// `g(t)` on the time grid.
    pub moment: Vec<f64>,
    pub max_pde_residual: f64,
    pub max_roundtrip_error: f64,
    /// `max_t |G_x(1, t) - g(t)|`, when `x = 1` is on the grid.
    pub closure_error: Option<f64>,
    /// `max_t |G(1, t) - 1|`, when `x = 1` is on the grid.
    pub boundary_error: Option<f64>,
}

impl SolutionField {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }
}

fn check_sorted(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Validation(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Validation(format!(
            "{name} grid must be strictly increasing"
        )));
    }
    Ok(())
}

/// The moment trajectory `g` implied by `rates` and `h`.
pub fn moment_for(rates: &ProcessRates, h: &InitialCondition) -> Result<MomentTrajectory> {
    riccati::solve_closed_form(&model::derive_riccati(rates), h.mean_degree())
}

/// Solves every grid point independently (in parallel).
pub fn solve_grid(
    x_grid: &[f64],
    t_grid: &[f64],
    rates: &ProcessRates,
    h: &InitialCondition,
    opts: &SolveOptions,
) -> Result<SolutionField> {
    rates.validate()?;
    check_sorted("x", x_grid)?;
    check_sorted("t", t_grid)?;
    if x_grid[0] < -1.0 || x_grid[x_grid.len() - 1] > 1.0 {
        return Err(Error::Validation("x grid must lie inside [-1, 1]".into()));
    }
    if t_grid[0] < 0.0 {
        return Err(Error::Validation("t grid must be nonnegative".into()));
    }
    let g = moment_for(rates, h)?;
    let nx = x_grid.len();
    let points: Vec<PointSolution> = (0..t_grid.len() * nx)
        .into_par_iter()
        .map(|idx| {
            let (x, t) = (x_grid[idx % nx], t_grid[idx / nx]);
            solve_at(x, t, rates, &g, h, opts).map_err(|e| Error::AtPoint {
                x,
                t,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut values = Vec::with_capacity(t_grid.len());
    let mut slopes = Vec::with_capacity(t_grid.len());
    let mut max_pde_residual: f64 = 0.0;
    let mut max_roundtrip_error: f64 = 0.0;
    for row in points.chunks(nx) {
        values.push(row.iter().map(|p| p.value).collect::<Vec<_>>());
        slopes.push(row.iter().map(|p| p.slope).collect::<Vec<_>>());
        for p in row {
            max_pde_residual = max_pde_residual.max(p.pde_residual);
            max_roundtrip_error = max_roundtrip_error.max(p.foot.roundtrip_error);
        }
    }
    let moment: Vec<f64> = t_grid.iter().map(|&t| g.eval(t)).collect();
    let (closure_error, boundary_error) = match x_grid.iter().position(|&x| x == 1.0) {
        Some(j) => {
            let closure = slopes
                .iter()
                .zip(&moment)
                .map(|(row, gt)| (row[j] - gt).abs())
                .fold(0.0, f64::max);
            let boundary = values
                .iter()
                .map(|row| (row[j] - 1.0).abs())
                .fold(0.0, f64::max);
            (Some(closure), Some(boundary))
        }
        None => (None, None),
    };
    if let Some(c) = closure_error {
        if c > opts.closure_tol {
            return Err(Error::Accuracy {
                what: "nonlocal closure G_x(1, t) = g(t)".into(),
                achieved: c,
                tolerance: opts.closure_tol,
            });
        }
    }
    Ok(SolutionField {
        x_grid: x_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        values,
        slopes,
        moment,
        max_pde_residual,
        max_roundtrip_error,
        closure_error,
        boundary_error,
    })
}

/// `n` evenly spaced points covering `[a, b]` with both ends included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
