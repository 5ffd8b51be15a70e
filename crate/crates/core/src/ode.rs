//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! Integrates `y' = f(t, y)` forward or backward in time. The embedded
//! fourth-order solution drives step-size control; the fourth-order
//! continuous extension of Hairer, Nørsett & Wanner (`contd5`) provides
//! values between accepted steps.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Largest step magnitude; `None` means the whole interval.
    pub h_max: Option<f64>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 1_000_000,
            h_max: None,
        }
    }
}

impl Options {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
struct DenseStep {
    t_old: f64,
    h: f64,
    // Five coefficient vectors laid out back to back.
    rcont: Vec<f64>,
}

/// Piecewise-polynomial solution over `[t0, t1]` (or `[t1, t0]` backward).
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    t0: f64,
    t1: f64,
    y0: Vec<f64>,
    y1: Vec<f64>,
    steps: Vec<DenseStep>,
    pub stats: Stats,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t1
    }

    pub fn final_state(&self) -> &[f64] {
        &self.y1
    }

    /// Accepted step endpoints, including the start.
    pub fn mesh(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.t0).chain(self.steps.iter().map(|s| s.t_old + s.h))
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    /// Evaluates the continuous extension; `t` is clamped to the interval.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let forward = self.t1 >= self.t0;
        let (lo, hi) = if forward {
            (self.t0, self.t1)
        } else {
            (self.t1, self.t0)
        };
        let t = t.clamp(lo, hi);
        if t == self.t0 || self.steps.is_empty() {
            out.copy_from_slice(&self.y0);
            return;
        }
        if t == self.t1 {
            out.copy_from_slice(&self.y1);
            return;
        }
        // First step whose far end reaches t.
        let idx = self.steps.partition_point(|s| {
            let end = s.t_old + s.h;
            if forward {
                end < t
            } else {
                end > t
            }
        });
        let step = &self.steps[idx.min(self.steps.len() - 1)];
        let theta = (t - step.t_old) / step.h;
        let theta1 = 1.0 - theta;
        let n = self.dim;
        let r = &step.rcont;
        for i in 0..n {
            out[i] = r[i]
                + theta
                    * (r[n + i]
                        + theta1 * (r[2 * n + i] + theta * (r[3 * n + i] + theta1 * r[4 * n + i])));
        }
    }
}

/// Integrates from `t0` to `t1` keeping only the final state.
pub fn solve<F>(
    f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &Options,
) -> Result<(Vec<f64>, Stats), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut y = y0.to_vec();
    let stats = drive(f, t0, &mut y, t1, opts, None)?;
    Ok((y, stats))
}

/// Integrates from `t0` to `t1` recording the continuous extension.
pub fn solve_dense<F>(
    f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &Options,
) -> Result<DenseSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut y = y0.to_vec();
    let mut steps = Vec::new();
    let stats = drive(f, t0, &mut y, t1, opts, Some(&mut steps))?;
    Ok(DenseSolution {
        dim: y0.len(),
        t0,
        t1,
        y0: y0.to_vec(),
        y1: y,
        steps,
        stats,
    })
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], opts: &Options) -> f64 {
    let n = y.len().max(1) as f64;
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sk = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<F>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    k1: &[f64],
    dir: f64,
    span: f64,
    opts: &Options,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len().max(1) as f64;
    let sk = |v: f64| opts.atol + opts.rtol * v.abs();
    let dnf = (y0
        .iter()
        .zip(k1)
        .map(|(y, k)| (k / sk(*y)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let dny = (y0.iter().map(|y| (y / sk(*y)).powi(2)).sum::<f64>() / n).sqrt();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * dny / dnf
    };
    h = h.min(span);
    let y1: Vec<f64> = y0.iter().zip(k1).map(|(y, k)| y + dir * h * k).collect();
    let mut k2 = vec![0.0; y0.len()];
    f(t0 + dir * h, &y1, &mut k2);
    let der2 = (k1
        .iter()
        .zip(&k2)
        .zip(y0)
        .map(|((a, b), y)| ((b - a) / sk(*y)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h;
    let der12 = der2.max(dnf);
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(span)
}

fn drive<F>(
    mut f: F,
    t0: f64,
    y: &mut [f64],
    t1: f64,
    opts: &Options,
    mut dense: Option<&mut Vec<DenseStep>>,
) -> Result<Stats, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut stats = Stats::default();
    if t1 == t0 || n == 0 {
        return Ok(stats);
    }
    let dir = if t1 > t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let h_max = opts.h_max.unwrap_or(span).min(span);

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];

    f(t0, y, &mut k1);
    stats.evaluations += 1;
    let mut h = initial_step(&mut f, t0, y, &k1, dir, span, opts).min(h_max);
    stats.evaluations += 1;

    let mut t = t0;
    let mut last_rejected = false;
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        let remaining = (t1 - t).abs();
        let mut last = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            last = true;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepSizeUnderflow { t, h });
        }
        let hs = dir * h;

        for i in 0..n {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        f(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] =
                y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + hs };
        f(t_new, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] =
                y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t_new, &ynew, &mut k7);
        stats.evaluations += 6;
        for i in 0..n {
            err[i] =
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(y, &ynew, &err, opts);
        if !en.is_finite() {
            stats.rejected += 1;
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        if en <= 1.0 {
            if ynew.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite(t_new));
            }
            if let Some(steps) = dense.as_deref_mut() {
                let mut rcont = vec![0.0; 5 * n];
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = hs * k1[i] - ydiff;
                    rcont[i] = y[i];
                    rcont[n + i] = ydiff;
                    rcont[2 * n + i] = bspl;
                    rcont[3 * n + i] = ydiff - hs * k7[i] - bspl;
                    rcont[4 * n + i] = hs
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                steps.push(DenseStep {
                    t_old: t,
                    h: hs,
                    rcont,
                });
            }
            stats.accepted += 1;
            y.copy_from_slice(&ynew);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            if last {
                return Ok(stats);
            }
            let mut fac = 0.9 * en.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(h_max);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (0.9 * en.powf(-0.2)).max(0.1);
            h *= fac;
            last_rejected = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_forward_and_backward() {
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -2.0 * y[0];
        let opts = Options::with_tol(1e-12, 1e-14);
        let (y, _) = solve(f, 0.0, &[1.0], 3.0, &opts).unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-12);
        let (y, _) = solve(f, 3.0, &[(-6.0f64).exp()], 0.0, &opts).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dense_output_matches_exact_solution() {
        let f = |t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0] + 0.0 * t;
        };
        let opts = Options::with_tol(1e-11, 1e-13);
        let sol = solve_dense(f, 0.0, &[0.0, 1.0], 10.0, &opts).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=1000 {
            let t = 10.0 * i as f64 / 1000.0;
            let y = sol.eval(t);
            worst = worst
                .max((y[0] - t.sin()).abs())
                .max((y[1] - t.cos()).abs());
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn backward_dense_output() {
        let f = |t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = t.cos();
        let sol = solve_dense(
            f,
            2.0,
            &[2f64.sin()],
            -1.0,
            &Options::with_tol(1e-11, 1e-13),
        )
        .unwrap();
        for t in [-1.0, -0.3, 0.0, 0.77, 1.9, 2.0] {
            assert!((sol.eval(t)[0] - t.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn blow_up_reports_failure() {
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0];
        let r = solve(f, 0.0, &[1.0], 2.0, &Options::default());
        assert!(r.is_err());
    }
}
