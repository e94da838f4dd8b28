use serde::{Deserialize, Serialize};

use super::forecast::Forecast;
use crate::error::{check_len, Error, Result};
use crate::lp::{solve_milp, LinearProgram, Relation, Sense};
use crate::model::{outage_cost, Instance};
use crate::solver::{recourse_binary, subproblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Planner {
    ProactiveOnly,
    CoOptimized,
    TriLevel,
}

impl Planner {
    pub fn label(self) -> &'static str {
        match self {
            Self::ProactiveOnly => "proactive_only",
            Self::CoOptimized => "co_optimized",
            Self::TriLevel => "tri_level",
        }
    }
}

/// How the tri-level plan's reactive action is fixed when scoring a realized
/// outage vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecourseMode {
    /// Best budget-feasible response to the realized outages.
    #[default]
    Reoptimize,
    /// The response to the worst case the plan was certified against.
    Fixed,
}

fn exposure(inst: &Instance, forecast: &Forecast) -> Result<Vec<f64>> {
    check_len("forecast", inst.n(), forecast.u_hat.len())?;
    if forecast.u_hat.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput(
            "forecast must be finite and nonnegative".into(),
        ));
    }
    Ok(inst
        .outage_cost()
        .iter()
        .zip(&forecast.u_hat)
        .map(|(h, u)| h * u)
        .collect())
}

/// `min sum_i h_i u_hat_i (1 - x_i)` over the proactive budget: a knapsack.
pub fn plan_proactive_only(inst: &Instance, forecast: &Forecast) -> Result<Vec<f64>> {
    let value = exposure(inst, forecast)?;
    let mut lp = LinearProgram::new(Sense::Maximize, value);
    lp.add_row(
        inst.proactive_cost().to_vec(),
        Relation::Le,
        inst.proactive_budget(),
    );
    for j in 0..inst.n() {
        lp.set_binary(j);
    }
    let sol = solve_milp(&lp)?;
    Ok(sol.x)
}

/// `min sum_i h_i u_hat_i (1 - x_i)(1 - y_i)` over both budgets, with the product
/// replaced by `z_i` in `[0, 1]`, `z_i <= 1 - x_i`, `z_i <= 1 - y_i`,
/// `z_i >= 1 - x_i - y_i`. Variables are ordered `x, y, z`. Returns `(x, y)`.
pub fn plan_cooptimized(inst: &Instance, forecast: &Forecast) -> Result<(Vec<f64>, Vec<f64>)> {
    let value = exposure(inst, forecast)?;
    let n = inst.n();
    let mut obj = vec![0.0; 3 * n];
    obj[2 * n..].copy_from_slice(&value);
    let mut lp = LinearProgram::new(Sense::Minimize, obj);
    let mut row = vec![0.0; 3 * n];
    row[..n].copy_from_slice(inst.proactive_cost());
    lp.add_row(row, Relation::Le, inst.proactive_budget());
    let mut row = vec![0.0; 3 * n];
    row[n..2 * n].copy_from_slice(inst.reactive_cost());
    lp.add_row(row, Relation::Le, inst.reactive_budget());
    for i in 0..n {
        let (x, y, z) = (i, n + i, 2 * n + i);
        let mut r = vec![0.0; 3 * n];
        r[z] = 1.0;
        r[x] = 1.0;
        lp.add_row(r.clone(), Relation::Le, 1.0);
        r[x] = 0.0;
        r[y] = 1.0;
        lp.add_row(r.clone(), Relation::Le, 1.0);
        r[x] = 1.0;
        lp.add_row(r, Relation::Ge, 1.0);
        lp.set_binary(x).set_binary(y);
        lp.set_bounds(z, 0.0, 1.0);
    }
    let sol = solve_milp(&lp)?;
    Ok((sol.x[..n].to_vec(), sol.x[n..2 * n].to_vec()))
}

/// `sum_i h_i u_i (1 - x_i)(1 - y_i)` at fixed decisions.
pub fn evaluate_recourse(inst: &Instance, x: &[f64], y: &[f64], u: &[f64]) -> Result<f64> {
    outage_cost(inst, x, u, y)
}

/// Optimal binary reaction to outages `u` given protection `x`.
pub fn best_response(inst: &Instance, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    check_len("proactive plan", inst.n(), x.len())?;
    check_len("outage vector", inst.n(), u.len())?;
    let zeta: Vec<f64> = (0..inst.n())
        .map(|i| inst.outage_cost()[i] * u[i] * (1.0 - x[i]))
        .collect();
    Ok(recourse_binary(&zeta, inst.reactive_cost(), inst.reactive_budget())?.0)
}

/// The reactive action a tri-level plan commits to under `mode`.
pub fn tri_level_response(
    inst: &Instance,
    x: &[f64],
    omega: &crate::model::UncertaintySet,
    u_bar: &[f64],
    mode: RecourseMode,
) -> Result<Vec<f64>> {
    match mode {
        RecourseMode::Reoptimize => best_response(inst, x, u_bar),
        RecourseMode::Fixed => {
            let worst = subproblem(x, omega, inst)?;
            best_response(inst, x, &worst.u)
        }
    }
}
