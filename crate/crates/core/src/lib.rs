//! Degree distributions of evolving networks through their generating
//! function `G(x, t) = Σ p_k(t) x^k`.
//!
//! The crate solves the nonlocal first-order PDE for `G` by localizing the
//! mean degree `G_x(1, t)` (a scalar Riccati equation) and following
//! characteristics. It also builds steady states, integrates the truncated
//! master equation as an oracle, and simulates the network processes on
//! explicit graphs.

// `!(v > 0.0)` is how inputs reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod characteristics;
pub mod degree_ode;
pub mod error;
pub mod graphsim;
pub mod model;
pub mod ode;
pub mod riccati;
pub mod steady;

pub use error::{Error, Result};
