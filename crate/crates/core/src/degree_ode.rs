//! Truncated master equation for the degree distribution `p_0 ..= p_K`.
//!
//! This is the brute-force oracle: the infinite system is cut at `K` with
//! `p_{K+1} = 0`, so mass flowing past `K` is lost rather than reflected.
//! The loss is monitored and reported as leakage.

use crate::characteristics::InitialCondition;
use crate::error::{Error, Result};
use crate::model::ProcessRates;
use crate::ode::{self, DenseSolution};

/// Probabilities `p_0 ..= p_{k_max}` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDistribution {
    pub p: Vec<f64>,
    pub t: f64,
}

impl TruncatedDistribution {
    pub fn new(p: Vec<f64>, t: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Validation("distribution needs at least p_0".into()));
        }
        if let Some((k, &v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!("p_{k} = {v} is not finite")));
        }
        Ok(Self { p, t })
    }

    /// Coefficients of `h` up to `k_max`, at `t = 0`.
    pub fn from_initial(h: &InitialCondition, k_max: usize) -> Self {
        Self {
            p: h.coefficients(k_max),
            t: 0.0,
        }
    }

    /// All mass on degree `k`.
    pub fn delta(k: usize, k_max: usize) -> Self {
        let mut p = vec![0.0; k_max.max(k) + 1];
        p[k] = 1.0;
        Self { p, t: 0.0 }
    }

    pub fn k_max(&self) -> usize {
        self.p.len() - 1
    }

    pub fn mass(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn first_moment(&self) -> f64 {
        first_moment(&self.p)
    }

    /// `Σ p_k x^k`.
    pub fn gf_eval(&self, x: f64) -> f64 {
        gf_eval(&self.p, x)
    }
}

/// Horner evaluation of `Σ p_k x^k`.
pub fn gf_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `Σ k p_k`.
pub fn first_moment(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(k, &v)| k as f64 * v).sum()
}

/// `½ Σ |p_k - q_k|`, shorter vector padded with zeros.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|k| (at(p, k) - at(q, k)).abs()).sum::<f64>()
}

/// Writes `dp/dt` for the eight processes into `dp`.
///
/// Needs a positive first moment whenever `l_p` or `n_p` is active.
pub fn master_rhs(p: &[f64], rates: &ProcessRates, dp: &mut [f64]) -> Result<()> {
    let len = p.len();
    assert_eq!(dp.len(), len, "output length must match the distribution");
    let s = first_moment(p);
    let pref = 2.0 * rates.l_p + rates.n_p * rates.m_f64();
    let inv_s = if pref > 0.0 {
        if !(s > 0.0) {
            return Err(Error::Domain(format!(
                "first moment {s} must be positive when preferential processes are active"
            )));
        }
        1.0 / s
    } else {
        0.0
    };
    let m = rates.m as usize;
    // coefficients of the three stencils shared by several processes
    let down = rates.omega_r + rates.omega_p + rates.l_d + rates.n_d * s;
    let up_uniform = rates.omega_r * s + 2.0 * rates.l_r + rates.n_r * rates.m_f64();
    let up_degree = rates.omega_p + pref * inv_s;
    let removal = rates.n_r + rates.n_p;

    let at = |k: isize| -> f64 {
        if k < 0 || k as usize >= len {
            0.0
        } else {
            p[k as usize]
        }
    };
    for (k, out) in dp.iter_mut().enumerate() {
        let ki = k as isize;
        let kf = k as f64;
        let pk = p[k];
        let shift_down = (kf + 1.0) * at(ki + 1) - kf * pk;
        let shift_up_uniform = at(ki - 1) - pk;
        let shift_up_degree = (kf - 1.0) * at(ki - 1) - kf * pk;
        let inject = if k == m { removal } else { 0.0 };
        *out = down * shift_down + up_uniform * shift_up_uniform + up_degree * shift_up_degree
            - removal * pk
            + inject;
    }
    Ok(())
}

/// Integration settings for the oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Bound on `|Σ p_k(t) - Σ p_k(0)|`.
    pub mass_tol: f64,
    /// Most negative probability tolerated.
    pub negative_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-13,
            mass_tol: 1e-6,
            negative_tol: 1e-10,
        }
    }
}

/// Oracle solution on `[0, t_end]`, queryable at any time in that range.
#[derive(Debug, Clone)]
pub struct OracleTrajectory {
    dense: Option<DenseSolution>,
    initial: TruncatedDistribution,
    pub t_end: f64,
    /// Largest `|Σ p_k(t) - Σ p_k(0)|` over the accepted steps.
    pub max_leakage: f64,
    /// Most negative entry seen over the accepted steps (0 if none).
    pub min_probability: f64,
}

impl OracleTrajectory {
    pub fn k_max(&self) -> usize {
        self.initial.k_max()
    }

    /// Distribution at `t`, clamped into `[0, t_end]`.
    pub fn at(&self, t: f64) -> TruncatedDistribution {
        let t = t.clamp(0.0, self.t_end);
        match &self.dense {
            Some(sol) => TruncatedDistribution { p: sol.eval(t), t },
            None => TruncatedDistribution {
                p: self.initial.p.clone(),
                t,
            },
        }
    }

    /// Accepted step times.
    pub fn mesh(&self) -> Vec<f64> {
        match &self.dense {
            Some(sol) => sol.mesh().collect(),
            None => vec![0.0, self.t_end],
        }
    }
}

/// Integrates the truncated master equation from `p0` to `t_end`.
pub fn integrate(
    p0: &TruncatedDistribution,
    rates: &ProcessRates,
    t_end: f64,
    opts: &OracleOptions,
) -> Result<OracleTrajectory> {
    rates.validate()?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Validation(format!(
            "t_end = {t_end} must be finite and nonnegative"
        )));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::Validation(
            "oracle tolerances must be positive".into(),
        ));
    }
    let needed = rates.m as usize + 2;
    if p0.k_max() < needed {
        return Err(Error::Validation(format!(
            "k_max = {} too small; need at least m + 2 = {needed}",
            p0.k_max()
        )));
    }
    if let Some((k, &v)) = p0.p.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeProbability {
            k,
            value: v,
            t: 0.0,
        });
    }
    let initial = TruncatedDistribution {
        p: p0.p.clone(),
        t: 0.0,
    };
    if t_end == 0.0 || rates.is_zero() {
        return Ok(OracleTrajectory {
            dense: None,
            initial,
            t_end,
            max_leakage: 0.0,
            min_probability: 0.0,
        });
    }
    // domain errors surface before the integrator swallows them
    let mut scratch = vec![0.0; p0.p.len()];
    master_rhs(&p0.p, rates, &mut scratch)?;

    let ode_opts = ode::Options::with_tol(opts.rtol, opts.atol);
    let sol = ode::solve_dense(
        |_t, y, dy| {
            if master_rhs(y, rates, dy).is_err() {
                dy.iter_mut().for_each(|v| *v = f64::NAN);
            }
        },
        0.0,
        &p0.p,
        t_end,
        &ode_opts,
    )?;

    let mass0 = p0.mass();
    let mut max_leakage: f64 = 0.0;
    let mut min_probability: f64 = 0.0;
    let mut buf = vec![0.0; p0.p.len()];
    for t in sol.mesh() {
        sol.eval_into(t, &mut buf);
        let leak = (buf.iter().sum::<f64>() - mass0).abs();
        max_leakage = max_leakage.max(leak);
        if leak > opts.mass_tol {
            return Err(Error::Truncation {
                leakage: leak,
                tolerance: opts.mass_tol,
                t,
                k_max: p0.k_max(),
            });
        }
        for (k, &v) in buf.iter().enumerate() {
            min_probability = min_probability.min(v);
            if v < -opts.negative_tol {
                return Err(Error::NegativeProbability { k, value: v, t });
            }
        }
    }
    Ok(OracleTrajectory {
        dense: Some(sol),
        initial,
        t_end,
        max_leakage,
        min_probability,
    })
}
