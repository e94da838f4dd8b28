//! Dense linear-programming kernel.
//!
//! [`solve_lp`] is a bounded-variable primal simplex on a dense tableau with a
//! two-phase start, Dantzig pricing and Bland's rule whenever progress stalls on
//! degenerate pivots. The final basis is refactorized so primal values and duals
//! come from a fresh LU solve rather than the accumulated tableau.
//!
//! [`solve_milp`] wraps it in best-first branch and bound for mixed-binary programs.
//!
//! Dual sign convention: for the program as stated (either sense),
//! `objective = sum_i rhs_i * row_duals_i + sum_j reduced_costs_j * x_j` and
//! `reduced_costs_j = objective_j - sum_i a_ij * row_duals_i`.

mod milp;
mod mps;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use milp::solve_milp;
pub use simplex::solve_lp;

/// Absolute/relative feasibility and optimality tolerance.
pub const TOL: f64 = 1e-9;
/// Distance from {0, 1} under which a binary variable counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const MAX_PIVOTS: usize = 100_000;
pub const MAX_NODES: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("LP dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid bounds for variable {index}: [{lower}, {upper}]")]
    InvalidBounds {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("variable {0} is marked integral but its bounds are not within [0, 1]")]
    NotBinary(usize),
    #[error("simplex stalled after {pivots} pivots")]
    Stall { pivots: usize },
    #[error(
        "branch and bound hit the node limit ({nodes}); incumbent = {incumbent:?}, bound = {bound}"
    )]
    NodeLimit {
        nodes: usize,
        incumbent: Option<f64>,
        bound: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `sense objective^T x` subject to rows and variable bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub bounds: Vec<(f64, f64)>,
    pub integer: Vec<bool>,
}

impl LinearProgram {
    /// New program with every variable in `[0, +inf)`.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            rows: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
            integer: vec![false; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.bounds[var] = (lower, upper);
        self
    }

    /// Marks `var` binary and clamps its bounds to `[0, 1]`.
    pub fn set_binary(&mut self, var: usize) -> &mut Self {
        self.integer[var] = true;
        let (l, u) = self.bounds[var];
        self.bounds[var] = (l.max(0.0), u.min(1.0));
        self
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n || self.integer.len() != n {
            return Err(LpError::Dimension(format!(
                "{} objective coefficients, {} bounds, {} integrality flags",
                n,
                self.bounds.len(),
                self.integer.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Dimension(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if row.coeffs.iter().any(|c| !c.is_finite()) || !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("row {i}")));
            }
        }
        for (j, &(l, u)) in self.bounds.iter().enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::InvalidBounds {
                    index: j,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(())
    }

    /// Writes the program in fixed-column MPS format.
    pub fn to_mps(&self, name: &str) -> String {
        mps::write(self, name)
    }

    fn sign(&self) -> f64 {
        match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Position of a column in the final basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    /// Structural columns followed by one slack per row.
    pub basis: Vec<VarStatus>,
    /// Improving direction over the structural variables when unbounded.
    pub ray: Option<Vec<f64>>,
    pub pivots: usize,
    /// Branch-and-bound nodes solved (1 for a plain LP).
    pub nodes: usize,
}

impl LpSolution {
    pub(crate) fn empty(status: LpStatus, n: usize, m: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n],
            objective: f64::NAN,
            row_duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            basis: Vec::new(),
            ray: None,
            pivots: 0,
            nodes: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Largest violation of a row or a variable bound.
    pub fn primal_infeasibility(&self, lp: &LinearProgram) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &lp.rows {
            let act = dot(&row.coeffs, &self.x);
            let v = match row.relation {
                Relation::Le => act - row.rhs,
                Relation::Ge => row.rhs - act,
                Relation::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (&x, &(l, u)) in self.x.iter().zip(&lp.bounds) {
            worst = worst.max(l - x).max(x - u);
        }
        worst
    }

    /// Largest sign violation of the duals (reduced costs pointing at an infinite
    /// bound, or row duals of the wrong sign).
    pub fn dual_infeasibility(&self, lp: &LinearProgram) -> f64 {
        let s = lp.sign();
        let mut worst: f64 = 0.0;
        for (j, &(l, u)) in lp.bounds.iter().enumerate() {
            let d = s * self.reduced_costs[j];
            if l == f64::NEG_INFINITY {
                worst = worst.max(d);
            }
            if u == f64::INFINITY {
                worst = worst.max(-d);
            }
        }
        for (row, &y) in lp.rows.iter().zip(&self.row_duals) {
            let y = s * y;
            match row.relation {
                Relation::Le => worst = worst.max(y),
                Relation::Ge => worst = worst.max(-y),
                Relation::Eq => {}
            }
        }
        // Reduced costs must match their definition.
        for j in 0..lp.num_vars() {
            let col: f64 = lp
                .rows
                .iter()
                .zip(&self.row_duals)
                .map(|(r, y)| r.coeffs[j] * y)
                .sum();
            worst = worst.max((lp.objective[j] - col - self.reduced_costs[j]).abs());
        }
        worst
    }

    /// Objective of the dual program evaluated at the reported duals.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let s = lp.sign();
        let mut obj: f64 = lp
            .rows
            .iter()
            .zip(&self.row_duals)
            .map(|(r, y)| r.rhs * y)
            .sum::<f64>()
            * s;
        for (j, &(l, u)) in lp.bounds.iter().enumerate() {
            let d = s * self.reduced_costs[j];
            let bound = if d > 0.0 { l } else { u };
            if bound.is_finite() {
                obj += d * bound;
            }
        }
        s * obj
    }

    /// `|primal objective - dual objective|`.
    pub fn duality_gap(&self, lp: &LinearProgram) -> f64 {
        (self.objective - self.dual_objective(lp)).abs()
    }

    /// Largest complementary-slackness product over rows and columns.
    pub fn complementary_slackness(&self, lp: &LinearProgram) -> f64 {
        let s = lp.sign();
        let mut worst: f64 = 0.0;
        for (row, &y) in lp.rows.iter().zip(&self.row_duals) {
            let slack = row.rhs - dot(&row.coeffs, &self.x);
            worst = worst.max((y * slack).abs());
        }
        for (j, &(l, u)) in lp.bounds.iter().enumerate() {
            let d = s * self.reduced_costs[j];
            let x = self.x[j];
            let gap = if d > 0.0 {
                if l.is_finite() {
                    x - l
                } else {
                    x.abs().max(1.0)
                }
            } else if u.is_finite() {
                u - x
            } else {
                x.abs().max(1.0)
            };
            worst = worst.max((d * gap).abs());
        }
        worst
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
