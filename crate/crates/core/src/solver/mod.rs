//! Tri-level solver: recourse, worst-case subproblem, Benders loop and oracles.
//!
//! For fixed protection `x` the worst case is
//! `Phi(x) = max_{u in Omega} min_{y} sum_i h_i u_i (1 - x_i)(1 - y_i)`.
//! Replacing the inner binary program by its LP relaxation and dualizing it turns
//! `Phi(x)` into a single LP over `(u, lambda, mu)` ([`subproblem`]). The relaxation
//! is exact when reactive costs are all one and the reactive budget is an integer;
//! otherwise the dualized value is a lower bound on the binary-recourse worst case
//! computed by [`worst_case_value`].

mod benders;
mod oracle;
mod recourse;
mod subproblem;

pub use benders::{benders_solve, BendersOptions, CutMode, PlanResult, PlanStatus, TraceEntry};
pub use oracle::{enumerate_solve, maximal_recourse_sets, worst_case_value, MAX_RECOURSE_SETS};
pub use recourse::{recourse_binary, recourse_lp, RecourseSolution};
pub use subproblem::{lagrangian_cut, subgradient, subproblem, SubproblemSolution};

use crate::error::{check_len, Error, Result};

/// Rejects non-binary entries.
pub(crate) fn check_binary(x: &[f64], n: usize, what: &'static str) -> Result<()> {
    check_len(what, n, x.len())?;
    if let Some(v) = x.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(format!(
            "{what} entry {v} is not 0 or 1"
        )));
    }
    Ok(())
}

/// `x` as 0/1 bytes, used as an exact key.
pub(crate) fn binary_key(x: &[f64]) -> Vec<u8> {
    x.iter().map(|&v| (v > 0.5) as u8).collect()
}
