//! Budget-constrained resilience planning for multi-region electricity systems.
//!
//! The planner chooses proactive hardening actions `x` that minimize the worst-case
//! outage cost over a conformal-prediction uncertainty set, with budgeted reactive
//! recourse `y` chosen after nature reveals the outage vector `u`:
//!
//! ```text
//! min_{x in B(B)}  max_{u in Omega(w)}  min_{y in C(C)}  sum_i h_i u_i (1 - x_i)(1 - y_i)
//! ```
//!
//! Module map:
//!
//! - [`model`]: instance data, budget feasibility, the outage-cost evaluator.
//! - [`conformal`]: split-conformal construction of `Omega(w)`.
//! - [`simulator`]: SIR outage dynamics driven by synthetic weather fields.
//! - [`lp`]: dense bounded-variable simplex and binary branch and bound.
//! - [`solver`]: recourse relaxation, the dualized worst-case subproblem, Benders
//!   decomposition and the brute-force oracles used to verify it.
//! - [`bench`]: deterministic benchmark planners, forecasts, experiment driver, sweeps.

pub mod bench;
pub mod conformal;
pub mod error;
pub(crate) mod linalg;
pub mod lp;
pub mod model;
pub mod par;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
