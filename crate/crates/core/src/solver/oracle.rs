use super::benders::{PlanResult, PlanStatus, TraceEntry};
use super::check_binary;
use crate::error::{check_len, Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::model::{feasible_proactive, Instance, OmegaVariant, UncertaintySet};
use crate::par;

/// Refuse epigraph evaluations with more recourse sets than this.
pub const MAX_RECOURSE_SETS: usize = 100_000;
/// Refuse exhaustive planning beyond this many regions.
pub const MAX_ENUMERATION_REGIONS: usize = 20;

/// Budget-feasible reactive sets drawn from `candidates` that cannot be extended
/// by another candidate. Every other feasible set is dominated by one of these.
pub fn maximal_recourse_sets(
    candidates: &[usize],
    costs: &[f64],
    budget: f64,
) -> Result<Vec<Vec<usize>>> {
    fn rec(
        k: usize,
        cand: &[usize],
        costs: &[f64],
        left: f64,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> bool {
        if k == cand.len() {
            // Maximal iff no skipped candidate still fits.
            let maximal = cand.iter().all(|j| chosen.contains(j) || costs[*j] > left);
            if maximal {
                if out.len() == MAX_RECOURSE_SETS {
                    return false;
                }
                out.push(chosen.clone());
            }
            return true;
        }
        let j = cand[k];
        if costs[j] <= left {
            chosen.push(j);
            let ok = rec(k + 1, cand, costs, left - costs[j], chosen, out);
            chosen.pop();
            if !ok {
                return false;
            }
        }
        rec(k + 1, cand, costs, left, chosen, out)
    }
    let mut out = Vec::new();
    if !rec(0, candidates, costs, budget, &mut Vec::new(), &mut out) {
        return Err(Error::SizeGuard(format!(
            "more than {MAX_RECOURSE_SETS} maximal reactive sets; use the dualized subproblem"
        )));
    }
    Ok(out)
}

/// Exact `max_{u in variant(Omega)} min_{binary y, c.y <= C} sum_i h_i u_i (1-x_i)(1-y_i)`
/// through the epigraph LP over `(u, t)` with one row per maximal reactive set.
pub fn worst_case_value(
    x_bar: &[f64],
    omega: &UncertaintySet,
    variant: OmegaVariant,
    inst: &Instance,
) -> Result<f64> {
    let n = inst.n();
    check_binary(x_bar, n, "proactive plan")?;
    check_len("uncertainty set regions", n, omega.n())?;
    let omega = omega.variant(variant);
    let exposed: Vec<usize> = (0..n).filter(|&i| x_bar[i] == 0.0).collect();
    if exposed.is_empty() {
        return Ok(0.0);
    }
    let sets = maximal_recourse_sets(&exposed, inst.reactive_cost(), inst.reactive_budget())?;
    let h = inst.outage_cost();

    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut lp = LinearProgram::new(Sense::Maximize, obj);
    for i in 0..n {
        lp.set_bounds(i, omega.local_lower()[i], omega.local_upper()[i]);
    }
    lp.set_bounds(n, f64::NEG_INFINITY, f64::INFINITY);
    for set in &sets {
        let mut row = vec![0.0; n + 1];
        for &i in &exposed {
            if !set.contains(&i) {
                row[i] = -h[i];
            }
        }
        row[n] = 1.0;
        lp.add_row(row, Relation::Le, 0.0);
    }
    let mut total = vec![1.0; n + 1];
    total[n] = 0.0;
    let (lo, hi) = omega.local_sum_range();
    if omega.global_lower() > lo {
        lp.add_row(total.clone(), Relation::Ge, omega.global_lower());
    }
    if omega.global_upper() < hi {
        lp.add_row(total, Relation::Le, omega.global_upper());
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective.max(0.0)),
        LpStatus::Infeasible => Err(Error::EmptyUncertaintySet),
        LpStatus::Unbounded => Err(Error::InvalidUncertaintySet(
            "worst case is unbounded (infinite interval bounds)".into(),
        )),
    }
}

/// All budget-feasible plans in lexicographic order.
fn feasible_plans(inst: &Instance) -> Result<Vec<Vec<f64>>> {
    let n = inst.n();
    if n > MAX_ENUMERATION_REGIONS {
        return Err(Error::SizeGuard(format!(
            "exhaustive planning is limited to {MAX_ENUMERATION_REGIONS} regions, got {n}"
        )));
    }
    let mut plans = Vec::new();
    for mask in 0u32..(1u32 << n) {
        // Region 0 is the most significant bit, so masks ascend lexicographically.
        let x: Vec<f64> = (0..n).map(|i| (mask >> (n - 1 - i) & 1) as f64).collect();
        if feasible_proactive(&x, inst)? {
            plans.push(x);
        }
    }
    Ok(plans)
}

/// Scores every feasible plan with [`worst_case_value`] on the full set and returns
/// the best; ties go to the lexicographically smallest plan.
pub fn enumerate_solve(inst: &Instance, omega: &UncertaintySet) -> Result<PlanResult> {
    let plans = feasible_plans(inst)?;
    let values = par::map_slice(&plans, |x| {
        worst_case_value(x, omega, OmegaVariant::Full, inst)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + best.abs());
    let k = values.iter().position(|&v| v <= best + tol).unwrap_or(0);
    Ok(PlanResult {
        x: plans[k].clone(),
        value: values[k],
        status: PlanStatus::Converged,
        iterations: plans.len(),
        trace: vec![TraceEntry {
            iter: 1,
            phi_plus: values[k],
            phi_minus: values[k],
            x: plans[k].clone(),
        }],
        elapsed: Vec::new(),
    })
}
