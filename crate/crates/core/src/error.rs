use thiserror::Error;

use crate::lp::LpError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid uncertainty set: {0}")]
    InvalidUncertaintySet(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(
        "coverage infeasible: alpha = {alpha} needs rank {rank} but only {m} calibration scores exist"
    )]
    CoverageInfeasible { alpha: f64, m: usize, rank: usize },

    #[error(
        "SIR integration did not converge after {steps} steps (max disrupted = {max_disrupted})"
    )]
    NonConvergence { steps: usize, max_disrupted: f64 },

    #[error("uncertainty set is empty")]
    EmptyUncertaintySet,

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension {
            context,
            expected,
            found,
        });
    }
    Ok(())
}
