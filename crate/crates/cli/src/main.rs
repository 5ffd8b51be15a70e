//! `degree-pde`: runs the solver, the steady-state builder, the master
//! equation, the network simulation and the convergence comparison from a
//! TOML configuration.

// `!(v > 0.0)` is how inputs reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] degree_pde::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for bad input, 3 when no steady state exists, 2 for numerical or
    /// I/O failures.
    pub fn exit_code(&self) -> u8 {
        fn core(e: &degree_pde::Error) -> u8 {
            use degree_pde::Error as E;
            match e {
                E::Validation(_) | E::Domain(_) => 1,
                E::NoSteadyState => 3,
                E::AtPoint { source, .. } => core(source),
                _ => 2,
            }
        }
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) => core(e),
            CliError::Io { .. } => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "degree-pde",
    version,
    about = "Degree distributions of evolving networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the generating-function PDE on the configured grid.
    Solve(Common),
    /// Build the steady state and its residual.
    Steady(Common),
    /// Integrate the truncated master equation.
    Ode(Common),
    /// Simulate the network and compare with the master equation.
    Mc(Common),
    /// Measure and classify the convergence to the steady state.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Truncation degree of the master equation.
    #[arg(long)]
    kmax: Option<usize>,
    /// Relative tolerance of the characteristic solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Explicit steady constants `c1,c2,c3,c4,m`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    constants: Option<Vec<f64>>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                ExperimentConfig::from_toml(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(dir) = &self.out {
            config.output.dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            config.mc.seed = seed;
        }
        if let Some(k) = self.kmax {
            config.oracle.k_max = k;
        }
        if let Some(tol) = self.tol {
            config.solver.rtol = tol;
        }
        if let Some(c) = &self.constants {
            if c.len() != 5 {
                return Err(CliError::Config(format!(
                    "--constants takes c1,c2,c3,c4,m, got {} values",
                    c.len()
                )));
            }
            let m = c[4];
            if !(m >= 0.0 && m.fract() == 0.0 && m <= f64::from(u32::MAX)) {
                return Err(CliError::Config(format!(
                    "m must be a nonnegative integer, got {m}"
                )));
            }
            config.steady.constants = Some([c[0], c[1], c[2], c[3]]);
            config.steady.m = Some(m as u32);
        }
        config.validate()?;
        Ok(config)
    }
}

fn run(cli: &Cli) -> Result<commands::Report, CliError> {
    let (common, command): (&Common, fn(&ExperimentConfig, &str) -> _) = match &cli.command {
        Command::Solve(c) => (c, commands::solve),
        Command::Steady(c) => (c, commands::steady),
        Command::Ode(c) => (c, commands::ode),
        Command::Mc(c) => (c, commands::mc),
        Command::Compare(c) => (c, commands::compare),
    };
    let config = common.load()?;
    command(&config, &config.digest())
}

fn main() -> ExitCode {
    // usage errors are bad input, like a bad configuration file
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(report) => {
            for note in &report.notes {
                println!("{note}");
            }
            for file in &report.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
