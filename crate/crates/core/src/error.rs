use thiserror::Error;

use crate::ode::OdeError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected before any computation.
    #[error("invalid input: {0}")]
    Validation(String),

    /// Argument outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Integration(#[from] OdeError),

    /// A self-consistency check exceeded its tolerance.
    #[error("accuracy check failed: {what} (achieved {achieved:.3e}, tolerance {tolerance:.3e})")]
    Accuracy {
        what: String,
        achieved: f64,
        tolerance: f64,
    },

    /// Probability mass escaped through the truncation boundary.
    #[error("truncation leakage {leakage:.3e} exceeds {tolerance:.3e} at t = {t}; increase k_max (currently {k_max})")]
    Truncation {
        leakage: f64,
        tolerance: f64,
        t: f64,
        k_max: usize,
    },

    #[error("negative probability p[{k}] = {value:.3e} at t = {t}")]
    NegativeProbability { k: usize, value: f64, t: f64 },

    #[error("degenerate series seed: c4 + c2 - c1 = {0:.3e}")]
    DegenerateSeed(f64),

    #[error("no steady state: the mean degree grows without bound")]
    NoSteadyState,

    #[error("point (x = {x}, t = {t}): {source}")]
    AtPoint {
        x: f64,
        t: f64,
        #[source]
        source: Box<Error>,
    },
}
