//! The five experiment commands. Each reads a validated configuration and
//! writes its files into the output directory.

use std::path::PathBuf;

use serde::Serialize;

use degree_pde::analysis::{self, ConvergenceSeries, DifferenceMethod, RateFit};
use degree_pde::characteristics::{self, InitialCondition};
use degree_pde::degree_ode::{self, OracleTrajectory, TruncatedDistribution};
use degree_pde::graphsim::{self, SimConfig};
use degree_pde::steady;

use crate::config::ExperimentConfig;
use crate::output::{num, write_json, Csv};
use crate::CliError;

/// What a command produced, for the one-line summary on stdout.
pub struct Report {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

fn oracle_for(
    config: &ExperimentConfig,
    p0: &TruncatedDistribution,
    t_end: f64,
) -> Result<OracleTrajectory, CliError> {
    Ok(degree_ode::integrate(
        p0,
        &config.rates,
        t_end,
        &config.oracle.options(),
    )?)
}

fn first_initial(config: &ExperimentConfig) -> Result<InitialCondition, CliError> {
    Ok(config.initials()?.remove(0).1)
}

/// `field.csv` with `(t, x, G, G_x)` and `gmoment.csv` with `(t, g)`.
pub fn solve(config: &ExperimentConfig, digest: &str) -> Result<Report, CliError> {
    let h = first_initial(config)?;
    let (xs, ts) = (config.grid.x()?, config.grid.t()?);
    let field = characteristics::solve_grid(&xs, &ts, &config.rates, &h, &config.solver.options())?;
    let dir = &config.output.dir;
    let meta = [
        ("max-pde-residual", num(field.max_pde_residual)),
        ("max-roundtrip-error", num(field.max_roundtrip_error)),
    ];
    let mut out = Csv::create(dir, "field.csv", digest, &meta, &["t", "x", "G", "G_x"])?;
    for (i, &t) in ts.iter().enumerate() {
        for (j, &x) in xs.iter().enumerate() {
            out.row(&[
                num(t),
                num(x),
                num(field.values[i][j]),
                num(field.slopes[i][j]),
            ])?;
        }
    }
    let field_path = out.finish()?;
    let mut out = Csv::create(dir, "gmoment.csv", digest, &[], &["t", "g"])?;
    for (&t, &g) in ts.iter().zip(&field.moment) {
        out.row(&[num(t), num(g)])?;
    }
    let mut notes = vec![format!("{} x {} grid", ts.len(), xs.len())];
    if let Some(c) = field.closure_error {
        notes.push(format!("closure error {c:.2e}"));
    }
    Ok(Report {
        files: vec![field_path, out.finish()?],
        notes,
    })
}

/// `steady.csv` with `(x, G*, residual)`.
pub fn steady(config: &ExperimentConfig, digest: &str) -> Result<Report, CliError> {
    let (constants, m) = config.steady_inputs()?;
    let state = steady::build(&constants, m)?;
    let xs = config.grid.x()?;
    let meta = [
        ("case", format!("{:?}", state.case.cell)),
        (
            "constants",
            format!(
                "c1={} c2={} c3={} c4={} m={m}",
                constants.c1, constants.c2, constants.c3, constants.c4
            ),
        ),
        (
            "slope-at-one",
            state.slope_at_one.map_or_else(|| "none".to_string(), num),
        ),
        ("certified", state.certified.to_string()),
    ];
    let mut out = Csv::create(
        &config.output.dir,
        "steady.csv",
        digest,
        &meta,
        &["x", "G", "residual"],
    )?;
    let mut worst: f64 = 0.0;
    for &x in &xs {
        let r = steady::residual(&state, x);
        worst = worst.max(r.abs());
        out.row(&[num(x), num(state.eval(x)), num(r)])?;
    }
    Ok(Report {
        files: vec![out.finish()?],
        notes: vec![
            format!("{:?}", state.case.cell),
            format!("max |residual| {worst:.2e}"),
        ],
    })
}

/// `ode.csv` with `(t, k, p_k)` and `moments.csv` with the mass, first
/// moment and closed-form moment.
pub fn ode(config: &ExperimentConfig, digest: &str) -> Result<Report, CliError> {
    let h = first_initial(config)?;
    let ts = config.grid.t()?;
    let k_max = config.oracle.k_max;
    let traj = oracle_for(
        config,
        &TruncatedDistribution::from_initial(&h, k_max),
        ts[ts.len() - 1],
    )?;
    let g = characteristics::moment_for(&config.rates, &h)?;
    let dir = &config.output.dir;
    let meta = [
        ("k-max", k_max.to_string()),
        ("max-leakage", num(traj.max_leakage)),
    ];
    let mut dist = Csv::create(dir, "ode.csv", digest, &meta, &["t", "k", "p"])?;
    let mut moments = Csv::create(
        dir,
        "moments.csv",
        digest,
        &[],
        &["t", "mass", "first_moment", "g"],
    )?;
    for &t in &ts {
        let p = traj.at(t);
        for (k, &pk) in p.p.iter().enumerate() {
            dist.row(&[num(t), k.to_string(), num(pk)])?;
        }
        moments.row(&[num(t), num(p.mass()), num(p.first_moment()), num(g.eval(t))])?;
    }
    Ok(Report {
        files: vec![dist.finish()?, moments.finish()?],
        notes: vec![format!("k_max {k_max}, leakage {:.2e}", traj.max_leakage)],
    })
}

/// `mc.csv`: ensemble mean and standard error per degree, the master
/// equation started from the ensemble's own initial distribution, and the
/// total-variation distance between the two.
pub fn mc(config: &ExperimentConfig, digest: &str) -> Result<Report, CliError> {
    let mut times = match &config.mc.sample_times {
        Some(t) => t.clone(),
        None => config.grid.t()?,
    };
    if times.first() != Some(&0.0) {
        times.insert(0, 0.0);
    }
    let degree_law = match config.mc.graph {
        graphsim::InitialGraph::Configuration => Some(first_initial(config)?),
        _ => None,
    };
    let sim = SimConfig {
        rates: config.rates,
        nodes: config.mc.nodes,
        replicas: config.mc.replicas,
        seed: config.mc.seed,
        sample_times: times.clone(),
        k_max: config.oracle.k_max,
        initial: config.mc.graph.clone(),
        degree_law,
    };
    let ensemble = graphsim::run(&sim)?;
    let mut p0 = ensemble.mean[0].clone();
    p0.resize(p0.len().max(config.oracle.k_max + 1), 0.0);
    let start = TruncatedDistribution::new(p0, 0.0)?;
    let traj = oracle_for(config, &start, times[times.len() - 1])?;
    let meta = [
        ("nodes", config.mc.nodes.to_string()),
        ("replicas", ensemble.replicas.to_string()),
        ("seed", config.mc.seed.to_string()),
        ("events", ensemble.events.to_string()),
        ("skipped-events", ensemble.skipped.to_string()),
        ("absorbed-replicas", ensemble.absorbed.to_string()),
    ];
    let header = [
        "t",
        "k",
        "mean",
        "stderr",
        "ode",
        "tv",
        "first_moment",
        "ode_first_moment",
    ];
    let mut out = Csv::create(&config.output.dir, "mc.csv", digest, &meta, &header)?;
    let mut worst_tv: f64 = 0.0;
    for (i, &t) in ensemble.times.iter().enumerate() {
        let reference = traj.at(t).p;
        let mean = &ensemble.mean[i];
        let tv = degree_ode::tv_distance(mean, &reference);
        worst_tv = worst_tv.max(tv);
        let (m1, o1) = (
            degree_ode::first_moment(mean),
            degree_ode::first_moment(&reference),
        );
        for k in 0..=config.mc.k_max {
            let at = |v: &[f64]| v.get(k).copied().unwrap_or(0.0);
            out.row(&[
                num(t),
                k.to_string(),
                num(at(mean)),
                num(at(&ensemble.stderr[i])),
                num(at(&reference)),
                num(tv),
                num(m1),
                num(o1),
            ])?;
        }
    }
    let mut notes = vec![format!("max TV {worst_tv:.2e}")];
    if ensemble.absorbed > 0 {
        notes.push(format!(
            "{} replicas reached an absorbing state",
            ensemble.absorbed
        ));
    }
    Ok(Report {
        files: vec![out.finish()?],
        notes,
    })
}

#[derive(Serialize)]
struct SteadySummary {
    case: String,
    certified: bool,
    slope_at_one: Option<f64>,
}

#[derive(Serialize)]
struct CompareRun {
    initial: String,
    method: DifferenceMethod,
    grid_spacing: f64,
    sup_fit: Option<RateFit>,
    l2_fit: Option<RateFit>,
    fit_error: Option<String>,
    bend_time: Option<f64>,
    /// Largest `|G - Σ p_k x^k|` against the master equation on the grid.
    oracle_max_deviation: f64,
}

#[derive(Serialize)]
struct CompareReport {
    config_sha256: String,
    fit_window: [f64; 2],
    steady: SteadySummary,
    runs: Vec<CompareRun>,
}

/// `norms.csv` with the distance to the steady state over time for every
/// initial condition, and `fit.json` with the decay verdicts.
pub fn compare(config: &ExperimentConfig, digest: &str) -> Result<Report, CliError> {
    let initials = config.initials()?;
    let (constants, m) = (
        degree_pde::model::steady_constants(&config.rates),
        config.rates.m,
    );
    let state = steady::build(&constants, m)?;
    let (xs, ts) = (config.grid.x()?, config.grid.t()?);
    let opts = config.solver.options();
    let [lo, hi] = config.compare.fit_window;
    let header = ["initial", "t", "sup", "l2", "argmax_x"];
    let mut out = Csv::create(&config.output.dir, "norms.csv", digest, &[], &header)?;
    let mut runs = Vec::new();
    let mut notes = Vec::new();
    for (index, (label, h)) in initials.iter().enumerate() {
        let series: ConvergenceSeries =
            analysis::convergence_series(&xs, &ts, &config.rates, h, &state, &opts)?;
        for i in 0..series.len() {
            out.row(&[
                index.to_string(),
                num(series.times[i]),
                num(series.sup_norm[i]),
                num(series.l2_norm[i]),
                num(series.argmax_x[i]),
            ])?;
        }
        let field = characteristics::solve_grid(&xs, &ts, &config.rates, h, &opts)?;
        let p0 = TruncatedDistribution::from_initial(h, config.oracle.k_max);
        let traj = oracle_for(config, &p0, ts[ts.len() - 1])?;
        let mut deviation: f64 = 0.0;
        for (row, &t) in field.values.iter().zip(&ts) {
            let p = traj.at(t);
            for (&v, &x) in row.iter().zip(&xs) {
                deviation = deviation.max((v - p.gf_eval(x)).abs());
            }
        }
        let sup = analysis::fit_rate(&series.times, &series.sup_norm, (lo, hi));
        let l2 = analysis::fit_rate(&series.times, &series.l2_norm, (lo, hi));
        let fit_error = sup
            .as_ref()
            .err()
            .or(l2.as_ref().err())
            .map(ToString::to_string);
        match &sup {
            Ok(f) => notes.push(format!(
                "{label}: {:?} (rate {:.4}, R2 {:.6})",
                f.model, f.rate, f.goodness
            )),
            Err(e) => notes.push(format!("{label}: no fit, {e}")),
        }
        runs.push(CompareRun {
            initial: label.clone(),
            method: series.method,
            grid_spacing: series.grid_spacing,
            sup_fit: sup.ok(),
            l2_fit: l2.ok(),
            fit_error,
            bend_time: analysis::detect_bend(&series),
            oracle_max_deviation: deviation,
        });
    }
    let norms = out.finish()?;
    let report = CompareReport {
        config_sha256: digest.to_string(),
        fit_window: config.compare.fit_window,
        steady: SteadySummary {
            case: format!("{:?}", state.case.cell),
            certified: state.certified,
            slope_at_one: state.slope_at_one,
        },
        runs,
    };
    let fit = write_json(&config.output.dir, "fit.json", &report)?;
    Ok(Report {
        files: vec![norms, fit],
        notes,
    })
}
