//! Distance of `G(·, t)` to a steady state over time, and the shape of that
//! decay.

use serde::Serialize;

use crate::characteristics::{self, InitialCondition, SolutionField, SolveOptions};
use crate::error::{Error, Result};
use crate::model::ProcessRates;
use crate::steady::SteadyState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceMethod {
    /// `G - G*` transported along characteristics; accurate far below
    /// machine epsilon.
    Transported,
    /// `G` and `G*` evaluated separately; floored near `1e-10`.
    Subtracted,
}

/// Norms of `G(·, t) - G*` on the solver grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSeries {
    pub method: DifferenceMethod,
    pub times: Vec<f64>,
    pub sup_norm: Vec<f64>,
    pub l2_norm: Vec<f64>,
    /// Where the sup norm is attained (first maximizer on ties).
    pub argmax_x: Vec<f64>,
    /// Largest x-grid spacing; bounds the accuracy of both norms.
    pub grid_spacing: f64,
}

impl ConvergenceSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Norms of each row of `values` against `reference`, both sampled on `x_grid`.
pub fn diff_norms_on_grid(
    x_grid: &[f64],
    times: &[f64],
    values: &[Vec<f64>],
    reference: &[f64],
) -> ConvergenceSeries {
    let mut sup_norm = Vec::with_capacity(times.len());
    let mut l2_norm = Vec::with_capacity(times.len());
    let mut argmax_x = Vec::with_capacity(times.len());
    for row in values {
        let diff: Vec<f64> = row
            .iter()
            .zip(reference)
            .map(|(g, s)| (g - s).abs())
            .collect();
        let (j, sup) = diff
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (j, &d)| {
                if d > best.1 {
                    (j, d)
                } else {
                    best
                }
            });
        let sq: f64 = x_grid
            .windows(2)
            .zip(diff.windows(2))
            .map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] * d[0] + d[1] * d[1]))
            .sum();
        sup_norm.push(sup.max(0.0));
        l2_norm.push(sq.sqrt());
        argmax_x.push(x_grid[j]);
    }
    let grid_spacing = x_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    ConvergenceSeries {
        method: DifferenceMethod::Subtracted,
        times: times.to_vec(),
        sup_norm,
        l2_norm,
        argmax_x,
        grid_spacing,
    }
}

/// Sup norm, trapezoidal `L²` norm and sup location of `G(·, t) - G*`.
pub fn diff_norms(field: &SolutionField, steady: &SteadyState) -> ConvergenceSeries {
    let reference: Vec<f64> = field.x_grid.iter().map(|&x| steady.eval(x)).collect();
    diff_norms_on_grid(&field.x_grid, &field.t_grid, &field.values, &reference)
}

/// Norms of `G - G*` over the grid, transported along characteristics
/// when the steady state allows it and subtracted otherwise.
pub fn convergence_series(
    x_grid: &[f64],
    t_grid: &[f64],
    rates: &ProcessRates,
    h: &InitialCondition,
    steady: &SteadyState,
    opts: &SolveOptions,
) -> Result<ConvergenceSeries> {
    if characteristics::difference_supported(steady) {
        let d = characteristics::steady_difference_grid(x_grid, t_grid, rates, h, steady, opts)?;
        let zero = vec![0.0; x_grid.len()];
        let mut series = diff_norms_on_grid(x_grid, t_grid, &d.values, &zero);
        series.method = DifferenceMethod::Transported;
        Ok(series)
    } else {
        let field = characteristics::solve_grid(x_grid, t_grid, rates, h, opts)?;
        Ok(diff_norms(&field, steady))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `‖·‖ ≈ C e^{rate · t}`.
    Exponential,
    /// `‖·‖ ≈ C t^{rate}`.
    Algebraic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub model: DecayModel,
    /// Slope of the preferred fit: exponent rate or algebraic order.
    pub rate: f64,
    /// `R²` of the preferred fit.
    pub goodness: f64,
    pub exponential_rate: f64,
    pub exponential_r2: f64,
    pub algebraic_order: f64,
    pub algebraic_r2: f64,
    pub points: usize,
}

/// Exponential is preferred only when its `R²` leads by at least this.
pub const EXPONENTIAL_MARGIN: f64 = 0.01;

/// Least-squares line through `(x, y)`: `(slope, r²)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    (slope, r2)
}

/// Fits `ln‖·‖` against `t` and against `ln t` over `window = (t_lo, t_hi)`.
pub fn fit_rate(times: &[f64], norms: &[f64], window: (f64, f64)) -> Result<RateFit> {
    let (lo, hi) = window;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(&t, _)| t >= lo && t <= hi)
        .map(|(&t, &v)| (t, v))
        .collect();
    if pts.len() < 5 {
        return Err(Error::Validation(format!(
            "rate fit needs at least 5 points in [{lo}, {hi}], got {}",
            pts.len()
        )));
    }
    if let Some(&(t, v)) = pts.iter().find(|(t, v)| !(*v > 0.0) || !(*t > 0.0)) {
        return Err(Error::Domain(format!(
            "rate fit needs positive times and norms, got {v} at t = {t}"
        )));
    }
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let log_t: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let log_n: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (exponential_rate, exponential_r2) = line_fit(&t, &log_n);
    let (algebraic_order, algebraic_r2) = line_fit(&log_t, &log_n);
    let (model, rate, goodness) = if exponential_r2 >= algebraic_r2 + EXPONENTIAL_MARGIN {
        (DecayModel::Exponential, exponential_rate, exponential_r2)
    } else {
        (DecayModel::Algebraic, algebraic_order, algebraic_r2)
    };
    Ok(RateFit {
        model,
        rate,
        goodness,
        exponential_rate,
        exponential_r2,
        algebraic_order,
        algebraic_r2,
        points: pts.len(),
    })
}

/// First time at which the sup location leaves `x = -1` for the open
/// interval `(-1, 1)`.
pub fn detect_bend(series: &ConvergenceSeries) -> Option<f64> {
    if series.len() < 3 {
        return None;
    }
    let at_left = |x: f64| x <= -1.0 + 1e-12;
    let interior = |x: f64| x > -1.0 + 1e-12 && x < 1.0 - 1e-12;
    series
        .argmax_x
        .windows(2)
        .position(|w| at_left(w[0]) && interior(w[1]))
        .map(|i| series.times[i + 1])
}
