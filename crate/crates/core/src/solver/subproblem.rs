use serde::{Deserialize, Serialize};

use super::check_binary;
use crate::error::{check_len, Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::model::{Instance, UncertaintySet};

/// Worst case for a fixed protection plan, with the recourse duals that certify it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSolution {
    pub u: Vec<f64>,
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub phi: f64,
}

/// Solves the dualized worst-case LP
///
/// ```text
/// max  sum_i [h_i (1 - x_i) u_i + mu_i] + C lambda
/// s.t. c_i lambda + mu_i + h_i (1 - x_i) u_i <= 0      for all i
///      L_i <= u_i <= T_i,   L_0 <= sum_i u_i <= T_0,   lambda, mu <= 0
/// ```
///
/// Variables are ordered `u, lambda, mu`.
pub fn subproblem(
    x_bar: &[f64],
    omega: &UncertaintySet,
    inst: &Instance,
) -> Result<SubproblemSolution> {
    let n = inst.n();
    check_binary(x_bar, n, "proactive plan")?;
    check_len("uncertainty set regions", n, omega.n())?;
    let h = inst.outage_cost();
    let c = inst.reactive_cost();
    let exposure: Vec<f64> = (0..n).map(|i| h[i] * (1.0 - x_bar[i])).collect();

    let nv = 2 * n + 1;
    let mut obj = vec![0.0; nv];
    obj[..n].copy_from_slice(&exposure);
    obj[n] = inst.reactive_budget();
    obj[n + 1..].fill(1.0);
    let mut lp = LinearProgram::new(Sense::Maximize, obj);
    for i in 0..n {
        lp.set_bounds(i, omega.local_lower()[i], omega.local_upper()[i]);
    }
    for j in n..nv {
        lp.set_bounds(j, f64::NEG_INFINITY, 0.0);
    }
    for i in 0..n {
        let mut row = vec![0.0; nv];
        row[i] = exposure[i];
        row[n] = c[i];
        row[n + 1 + i] = 1.0;
        lp.add_row(row, Relation::Le, 0.0);
    }
    let mut total = vec![0.0; nv];
    total[..n].fill(1.0);
    let (lo, hi) = omega.local_sum_range();
    if omega.global_lower() > lo {
        lp.add_row(total.clone(), Relation::Ge, omega.global_lower());
    }
    if omega.global_upper() < hi {
        lp.add_row(total, Relation::Le, omega.global_upper());
    }

    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::EmptyUncertaintySet),
        LpStatus::Unbounded => {
            return Err(Error::InvalidUncertaintySet(
                "worst case is unbounded (infinite interval bounds)".into(),
            ))
        }
    }
    let u: Vec<f64> = sol.x[..n]
        .iter()
        .zip(omega.local_lower().iter().zip(omega.local_upper()))
        .map(|(&v, (&l, &t))| v.clamp(l, t))
        .collect();
    Ok(SubproblemSolution {
        lambda: sol.x[n],
        mu: sol.x[n + 1..].to_vec(),
        phi: sol.objective.max(0.0),
        u,
    })
}

/// Slope of the Lagrangian cut at `x_bar`: `phi_i = -min(h_i u_i, c_i |lambda|)`.
///
/// For any binary `x`, `Phi(x) >= C lambda + sum_i (1 - x_i) min(h_i u_i, c_i |lambda|)`
/// because `u` stays feasible and `lambda` stays dual feasible for the relaxed
/// recourse at `x`; the bound is tight at `x_bar`.
pub fn subgradient(sub: &SubproblemSolution, x_bar: &[f64], inst: &Instance) -> Result<Vec<f64>> {
    let n = inst.n();
    check_binary(x_bar, n, "proactive plan")?;
    check_len("subproblem outages", n, sub.u.len())?;
    let h = inst.outage_cost();
    let c = inst.reactive_cost();
    Ok((0..n)
        .map(|i| -(h[i] * sub.u[i]).min(c[i] * sub.lambda.abs()))
        .collect())
}

/// The cut `theta >= constant + sum_i slope_i x_i` with
/// `constant = C lambda + sum_i min(h_i u_i, c_i |lambda|)` and `slope = subgradient`.
pub fn lagrangian_cut(
    sub: &SubproblemSolution,
    x_bar: &[f64],
    inst: &Instance,
) -> Result<(f64, Vec<f64>)> {
    let slope = subgradient(sub, x_bar, inst)?;
    let constant = inst.reactive_budget() * sub.lambda - slope.iter().sum::<f64>();
    Ok((constant, slope))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> (Instance, UncertaintySet) {
        let inst = Instance::new(vec![1.0; 2], vec![1.0; 2], vec![1.0; 2], 1.0, 1.0).unwrap();
        let omega = UncertaintySet::new(0.1, vec![0.0; 2], vec![5.0; 2], 0.0, 6.0).unwrap();
        (inst, omega)
    }

    #[test]
    fn two_region_example() {
        let (inst, omega) = two();
        let s = subproblem(&[0.0, 0.0], &omega, &inst).unwrap();
        assert!((s.phi - 3.0).abs() < 1e-9, "{s:?}");
        assert!((s.u[0] - 3.0).abs() < 1e-9 && (s.u[1] - 3.0).abs() < 1e-9);
        for i in 0..2 {
            assert!(inst.reactive_cost()[i] * s.lambda + s.mu[i] <= -s.u[i] + 1e-9);
        }
    }

    #[test]
    fn spec_slope_is_not_a_valid_cut_but_lagrangian_is() {
        let (inst, omega) = two();
        let s = subproblem(&[0.0, 0.0], &omega, &inst).unwrap();
        // Slope -h_i u_i (1 - y_i) with y = (1, 0) predicts Phi(1, 0) >= 3.
        let protected = subproblem(&[1.0, 0.0], &omega, &inst).unwrap();
        assert!(protected.phi.abs() < 1e-9);
        let (k, slope) = lagrangian_cut(&s, &[0.0, 0.0], &inst).unwrap();
        for x in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let phi = subproblem(&x, &omega, &inst).unwrap().phi;
            let cut = k + slope[0] * x[0] + slope[1] * x[1];
            assert!(cut <= phi + 1e-9, "x = {x:?}: cut {cut} > {phi}");
        }
        assert!((k - s.phi).abs() < 1e-9);
    }

    #[test]
    fn fully_protected_or_fully_reactive_is_free() {
        let (inst, omega) = two();
        let s = subproblem(&[1.0, 1.0], &omega, &inst).unwrap();
        assert_eq!(s.phi, 0.0);
        assert!(subgradient(&s, &[1.0, 1.0], &inst)
            .unwrap()
            .iter()
            .all(|&g| g <= 0.0));
        let rich = inst.with_reactive_budget(2.0).unwrap();
        assert!(subproblem(&[0.0, 0.0], &omega, &rich).unwrap().phi.abs() < 1e-9);
    }

    #[test]
    fn unbounded_set_is_reported() {
        let (inst, _) = two();
        let omega = UncertaintySet::new(
            0.1,
            vec![0.0; 2],
            vec![f64::INFINITY; 2],
            0.0,
            f64::INFINITY,
        )
        .unwrap();
        assert!(subproblem(&[0.0, 0.0], &omega, &inst).is_err());
    }
}
