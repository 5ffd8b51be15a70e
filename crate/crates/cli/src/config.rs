//! Experiment configuration read from a TOML file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use degree_pde::characteristics::{
    linspace, GeometricTail, InitialCondition, InitialKind, SolveOptions,
};
use degree_pde::degree_ode::OracleOptions;
use degree_pde::graphsim::InitialGraph;
use degree_pde::model::{steady_constants, ProcessRates, SteadyConstants};

use crate::CliError;

/// Initial degree distribution, by generating function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `h(x) = x^degree`.
    Monomial { degree: usize },
    /// `h(x) = (ρ - 1)/(ρ - x)`.
    Geometric { rho: f64 },
    /// `h(x) = Σ coefficients[k] x^k`.
    Polynomial { coefficients: Vec<f64> },
    /// Leading coefficients, then `p_k = tail_scale · tail_ratio^k`.
    Explicit {
        head: Vec<f64>,
        tail_scale: f64,
        tail_ratio: f64,
    },
}

impl InitialSpec {
    pub fn build(&self) -> Result<InitialCondition, CliError> {
        let ic = match self {
            InitialSpec::Monomial { degree } => {
                let mut c = vec![0.0; degree + 1];
                c[*degree] = 1.0;
                InitialCondition::polynomial(c)
            }
            InitialSpec::Geometric { rho } => InitialCondition::geometric(*rho),
            InitialSpec::Polynomial { coefficients } => {
                InitialCondition::polynomial(coefficients.clone())
            }
            InitialSpec::Explicit {
                head,
                tail_scale,
                tail_ratio,
            } => InitialCondition::new(InitialKind::ExplicitCoefficients {
                head: head.clone(),
                tail: GeometricTail {
                    scale: *tail_scale,
                    ratio: *tail_ratio,
                },
            }),
        };
        Ok(ic?)
    }

    pub fn label(&self) -> String {
        match self {
            InitialSpec::Monomial { degree } => format!("x^{degree}"),
            InitialSpec::Geometric { rho } => format!("({} - 1)/({} - x)", rho, rho),
            InitialSpec::Polynomial { coefficients } => format!(
                "polynomial of degree {}",
                coefficients.len().saturating_sub(1)
            ),
            InitialSpec::Explicit { head, .. } => {
                format!("{} coefficients + geometric tail", head.len())
            }
        }
    }
}

/// `[initial]` holds one condition, `[[initial]]` several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpecs {
    One(InitialSpec),
    Many(Vec<InitialSpec>),
}

impl InitialSpecs {
    pub fn as_slice(&self) -> &[InitialSpec] {
        match self {
            InitialSpecs::One(s) => std::slice::from_ref(s),
            InitialSpecs::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub x_step: f64,
    pub t_max: f64,
    pub t_step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_min: -1.0,
            x_max: 1.0,
            x_step: 0.05,
            t_max: 1.0,
            t_step: 0.1,
        }
    }
}

/// Evenly spaced points from `lo` to `hi`; the step must divide the span.
fn stepped(name: &str, lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if hi == lo {
        return Ok(vec![lo]);
    }
    if !(step > 0.0 && hi > lo) {
        return Err(CliError::Config(format!(
            "{name} grid needs max > min and step > 0, got [{lo}, {hi}] step {step}"
        )));
    }
    let intervals = (hi - lo) / step;
    let n = intervals.round();
    if (intervals - n).abs() > 1e-9 * intervals.max(1.0) {
        return Err(CliError::Config(format!(
            "{name} step {step} does not divide [{lo}, {hi}]"
        )));
    }
    Ok(linspace(lo, hi, n as usize + 1))
}

impl GridSpec {
    pub fn x(&self) -> Result<Vec<f64>, CliError> {
        if self.x_min < -1.0 || self.x_max > 1.0 {
            return Err(CliError::Config(format!(
                "x grid [{}, {}] must lie within [-1, 1]",
                self.x_min, self.x_max
            )));
        }
        stepped("x", self.x_min, self.x_max, self.x_step)
    }

    pub fn t(&self) -> Result<Vec<f64>, CliError> {
        if !(self.t_max >= 0.0) {
            return Err(CliError::Config(format!(
                "t_max must be nonnegative, got {}",
                self.t_max
            )));
        }
        stepped("t", 0.0, self.t_max, self.t_step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub rtol: f64,
    pub atol: f64,
    pub roundtrip_tol: f64,
    pub closure_tol: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            rtol: d.rtol,
            atol: d.atol,
            roundtrip_tol: d.roundtrip_tol,
            closure_tol: d.closure_tol,
        }
    }
}

impl SolverSpec {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            rtol: self.rtol,
            atol: self.atol,
            roundtrip_tol: self.roundtrip_tol,
            closure_tol: self.closure_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    pub k_max: usize,
    pub rtol: f64,
    pub atol: f64,
    pub mass_tol: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        let d = OracleOptions::default();
        Self {
            k_max: 200,
            rtol: d.rtol,
            atol: d.atol,
            mass_tol: d.mass_tol,
        }
    }
}

impl OracleSpec {
    pub fn options(&self) -> OracleOptions {
        OracleOptions {
            rtol: self.rtol,
            atol: self.atol,
            mass_tol: self.mass_tol,
            ..OracleOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSpec {
    pub nodes: usize,
    pub replicas: usize,
    pub seed: u64,
    /// Defaults to the t grid.
    pub sample_times: Option<Vec<f64>>,
    /// Largest degree written to the output.
    pub k_max: usize,
    pub graph: InitialGraph,
}

impl Default for McSpec {
    fn default() -> Self {
        Self {
            nodes: 2000,
            replicas: 20,
            seed: 1,
            sample_times: None,
            k_max: 50,
            graph: InitialGraph::Configuration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct SteadySpec {
    /// `[c1, c2, c3, c4]`, bypassing the rates.
    pub constants: Option<[f64; 4]>,
    /// Degree of new nodes for explicit constants; defaults to `rates.m`.
    pub m: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSpec {
    /// Time window `[t_lo, t_hi]` of the decay fit.
    pub fit_window: [f64; 2],
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            fit_window: [1.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub rates: ProcessRates,
    pub initial: Option<InitialSpecs>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub steady: SteadySpec,
    #[serde(default)]
    pub compare: CompareSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Hex SHA-256 of the effective configuration, after command-line
    /// overrides. The output directory does not enter, so a rerun elsewhere
    /// writes identical files.
    pub fn digest(&self) -> String {
        let mut experiment = self.clone();
        experiment.output = OutputSpec::default();
        let canonical = serde_json::to_string(&experiment).expect("configuration serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks everything that does not need the initial condition.
    pub fn validate(&self) -> Result<(), CliError> {
        self.rates.validate()?;
        self.grid.x()?;
        self.grid.t()?;
        let s = &self.solver;
        for (name, v) in [
            ("solver.rtol", s.rtol),
            ("solver.atol", s.atol),
            ("solver.roundtrip_tol", s.roundtrip_tol),
            ("solver.closure_tol", s.closure_tol),
            ("oracle.rtol", self.oracle.rtol),
            ("oracle.atol", self.oracle.atol),
            ("oracle.mass_tol", self.oracle.mass_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let [lo, hi] = self.compare.fit_window;
        if !(lo >= 0.0 && hi > lo) {
            return Err(CliError::Config(format!(
                "fit window [{lo}, {hi}] is empty"
            )));
        }
        Ok(())
    }

    /// Every configured initial condition, validated; at least one.
    pub fn initials(&self) -> Result<Vec<(String, InitialCondition)>, CliError> {
        let specs = self
            .initial
            .as_ref()
            .map(InitialSpecs::as_slice)
            .unwrap_or_default();
        if specs.is_empty() {
            return Err(CliError::Config(
                "an [initial] condition is required".into(),
            ));
        }
        specs.iter().map(|s| Ok((s.label(), s.build()?))).collect()
    }

    /// Steady constants and `m`, from the explicit override or the rates.
    pub fn steady_inputs(&self) -> Result<(SteadyConstants, u32), CliError> {
        match self.steady.constants {
            Some([c1, c2, c3, c4]) => {
                let m = self.steady.m.unwrap_or(self.rates.m);
                Ok((SteadyConstants::explicit(c1, c2, c3, c4)?, m))
            }
            None => Ok((steady_constants(&self.rates), self.rates.m)),
        }
    }
}
