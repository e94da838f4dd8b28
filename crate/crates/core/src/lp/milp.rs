use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{solve_lp, LinearProgram, LpError, LpSolution, LpStatus, INTEGRALITY_TOL, MAX_NODES};

struct Node {
    /// LP bound in minimization form.
    key: f64,
    id: usize,
    bounds: Vec<(f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: smallest key first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Most fractional binary variable, lowest index on ties.
fn branching_var(lp: &LinearProgram, x: &[f64]) -> Option<usize> {
    let mut best = None;
    let mut best_dist = INTEGRALITY_TOL;
    for (j, &int) in lp.integer.iter().enumerate() {
        if !int {
            continue;
        }
        let dist = (x[j] - x[j].round()).abs();
        if dist > best_dist + 1e-12 {
            best_dist = dist;
            best = Some(j);
        }
    }
    best
}

/// Solves a mixed-binary program by best-first branch and bound on the LP
/// relaxation. Duals in the result belong to the final LP with all binaries fixed.
pub fn solve_milp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    for (j, &int) in lp.integer.iter().enumerate() {
        let (l, u) = lp.bounds[j];
        if int && (l < 0.0 || u > 1.0) {
            return Err(LpError::NotBinary(j));
        }
    }
    let sign = lp.sign();
    let mut work = lp.clone();

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        key: f64::NEG_INFINITY,
        id: 0,
        bounds: lp.bounds.clone(),
    });
    let mut next_id = 1;
    let mut nodes = 0usize;
    let mut pivots = 0usize;
    let mut incumbent: Option<(f64, LpSolution)> = None;
    let mut unbounded: Option<LpSolution> = None;

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.key >= best - 1e-9 * (1.0 + best.abs()) {
                continue;
            }
        }
        if nodes >= MAX_NODES {
            return Err(LpError::NodeLimit {
                nodes,
                incumbent: incumbent.as_ref().map(|(v, _)| sign * v),
                bound: sign * node.key,
            });
        }
        nodes += 1;
        work.bounds.clone_from(&node.bounds);
        let relax = solve_lp(&work)?;
        pivots += relax.pivots;
        match relax.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                unbounded.get_or_insert(relax);
                continue;
            }
            LpStatus::Optimal => {}
        }
        let key = sign * relax.objective;
        if let Some((best, _)) = &incumbent {
            if key >= best - 1e-9 * (1.0 + best.abs()) {
                continue;
            }
        }
        match branching_var(lp, &relax.x) {
            Some(j) => {
                for v in [0.0, 1.0] {
                    let mut b = node.bounds.clone();
                    b[j] = (v, v);
                    heap.push(Node {
                        key,
                        id: next_id,
                        bounds: b,
                    });
                    next_id += 1;
                }
            }
            None => {
                // Snap binaries and re-solve the continuous part exactly.
                let mut fixed = node.bounds.clone();
                let mut exact = true;
                for (j, &int) in lp.integer.iter().enumerate() {
                    if int {
                        let v = relax.x[j].round();
                        exact &= relax.x[j] == v;
                        fixed[j] = (v, v);
                    }
                }
                let sol = if exact {
                    relax
                } else {
                    work.bounds = fixed;
                    let s = solve_lp(&work)?;
                    pivots += s.pivots;
                    if !s.is_optimal() {
                        continue;
                    }
                    s
                };
                let value = sign * sol.objective;
                if incumbent.as_ref().is_none_or(|(best, _)| value < *best) {
                    incumbent = Some((value, sol));
                }
            }
        }
    }

    match incumbent {
        Some((_, mut sol)) => {
            sol.nodes = nodes;
            sol.pivots = pivots;
            Ok(sol)
        }
        None => {
            let mut sol = unbounded.unwrap_or_else(|| {
                LpSolution::empty(LpStatus::Infeasible, lp.num_vars(), lp.num_rows())
            });
            sol.nodes = nodes;
            sol.pivots = pivots;
            Ok(sol)
        }
    }
}
