//! `D = G - G*` transported directly along characteristics.
//!
//! Subtracting two O(1) values floors the difference near machine epsilon,
//! while the decay toward a steady state continues far below it. Along a
//! characteristic `D` obeys the linear equation
//!
//! `D' = b(x, g) D + (g - g∞)(x - 1)[ω_r G* - (x P/(g g∞) + n_d) G*']`,
//!
//! where `P = 2 l_p + n_p m`. With `D(0) = (1 - G*(x₀)) - (1 - h(x₀))` and
//! `g - g∞` formed without cancellation, `D` keeps its relative accuracy.

use rayon::prelude::*;

use super::{
    check_point, check_sorted, clamp_foot, forward_rtol, moment_for, trace_options,
    transport_log_gap, InitialCondition, SolveOptions,
};
use crate::error::{Error, Result};
use crate::model::ProcessRates;
use crate::ode;
use crate::riccati::{self, MomentTrajectory};
use crate::steady::SteadyState;

/// Signed `G - G*` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceField {
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `values[i][j] = G(x_j, t_i) - G*(x_j)`.
    pub values: Vec<Vec<f64>>,
}

/// Whether [`steady_difference_at`] supports this steady state.
pub fn difference_supported(steady: &SteadyState) -> bool {
    steady.deficit(1.0).is_some()
}

/// `G(x̄, t̄) - G*(x̄)` with relative accuracy.
pub fn steady_difference_at(
    x_bar: f64,
    t_bar: f64,
    rates: &ProcessRates,
    g: &MomentTrajectory,
    h: &InitialCondition,
    steady: &SteadyState,
    opts: &SolveOptions,
) -> Result<f64> {
    check_point(x_bar, t_bar)?;
    let g_inf = riccati::equilibrium(&g.coeffs)
        .finite()
        .ok_or_else(|| Error::Validation("the mean degree grows without bound".into()))?;
    let deficit = |x: f64| {
        steady
            .deficit(x)
            .ok_or_else(|| Error::Validation("steady state has no expansion at x = 1".into()))
    };
    let gap_bar = 1.0 - x_bar;
    let gap0 = if gap_bar == 0.0 || t_bar == 0.0 {
        gap_bar
    } else {
        let lg0 = transport_log_gap(
            gap_bar.ln(),
            t_bar,
            0.0,
            rates,
            g,
            &trace_options(opts.roundtrip_tol),
        )?;
        clamp_foot(lg0)?.1
    };
    let x0 = 1.0 - gap0;
    let d0 = deficit(x0)? - h.deficit(x0);
    if t_bar == 0.0 {
        return Ok(d0);
    }
    let p = rates.preferential_weight();
    let forcing = |x: f64, t: f64| -> f64 {
        let gt = g.eval(t);
        let excess = g.excess(t).unwrap_or(0.0);
        let bracket = rates.omega_r * steady.eval(x)
            - (x * p / (gt * g_inf) + rates.n_d) * steady.derivative(x);
        excess * (x - 1.0) * bracket
    };
    let rtol = forward_rtol(opts);
    // D may sit far below any fixed absolute scale
    let ode_opts = ode::Options::with_tol(rtol, 1e-300);
    if gap0 == 0.0 {
        let (y, _) = ode::solve(
            |t, y, dy| dy[0] = rates.reaction_factor(1.0, g.eval(t)) * y[0],
            0.0,
            &[d0],
            t_bar,
            &ode_opts,
        )?;
        return Ok(y[0]);
    }
    // the position is carried as 1 - ln(1 - x) ≥ 1 - ln 2, away from zero
    let (y, _) = ode::solve(
        |t, y, dy| {
            let gap = (1.0 - y[0]).exp();
            let x = 1.0 - gap;
            let gt = g.eval(t);
            dy[0] = rates.drift_factor(x, gt);
            dy[1] = rates.reaction_factor(x, gt) * y[1] + forcing(x, t);
        },
        0.0,
        &[1.0 - gap0.ln(), d0],
        t_bar,
        &ode_opts,
    )?;
    let roundtrip_error = ((1.0 - y[0]).exp() - gap_bar).abs();
    if roundtrip_error > opts.roundtrip_tol {
        return Err(Error::Accuracy {
            what: format!("characteristic roundtrip at (x = {x_bar}, t = {t_bar})"),
            achieved: roundtrip_error,
            tolerance: opts.roundtrip_tol,
        });
    }
    Ok(y[1])
}

/// [`steady_difference_at`] at every grid point, in parallel.
pub fn steady_difference_grid(
    x_grid: &[f64],
    t_grid: &[f64],
    rates: &ProcessRates,
    h: &InitialCondition,
    steady: &SteadyState,
    opts: &SolveOptions,
) -> Result<DifferenceField> {
    rates.validate()?;
    check_sorted("x", x_grid)?;
    check_sorted("t", t_grid)?;
    if !difference_supported(steady) {
        return Err(Error::Validation(
            "steady state has no expansion at x = 1".into(),
        ));
    }
    let g = moment_for(rates, h)?;
    let nx = x_grid.len();
    let flat: Vec<f64> = (0..t_grid.len() * nx)
        .into_par_iter()
        .map(|idx| {
            let (x, t) = (x_grid[idx % nx], t_grid[idx / nx]);
            steady_difference_at(x, t, rates, &g, h, steady, opts).map_err(|e| Error::AtPoint {
                x,
                t,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(DifferenceField {
        x_grid: x_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        values: flat.chunks(nx).map(<[f64]>::to_vec).collect(),
    })
}
