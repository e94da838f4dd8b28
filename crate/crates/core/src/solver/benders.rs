use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{binary_key, lagrangian_cut, subproblem};
use crate::error::{check_len, Error, Result};
use crate::lp::{solve_milp, LinearProgram, Relation, Sense};
use crate::model::{Instance, UncertaintySet};

/// Which optimality cuts the master accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CutMode {
    /// Lagrangian cuts `theta >= Phi(x^t) + phi^T (x - x^t)`.
    Subgradient,
    /// `theta >= Phi(x^t) (1 - sum_{i: x^t_i = 0} x_i)`.
    Nogood,
    #[default]
    Both,
}

impl CutMode {
    pub fn label(self) -> &'static str {
        match self {
            Self::Subgradient => "subgradient",
            Self::Nogood => "nogood",
            Self::Both => "both",
        }
    }
}

impl std::str::FromStr for CutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subgradient" => Ok(Self::Subgradient),
            "nogood" => Ok(Self::Nogood),
            "both" => Ok(Self::Both),
            _ => Err(Error::InvalidInput(format!(
                "unknown cut mode {s:?} (expected subgradient, nogood or both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BendersOptions {
    /// Absolute gap tolerance.
    pub epsilon: f64,
    /// Relative gap tolerance, applied to the upper bound.
    pub relative_gap: f64,
    pub max_iter: usize,
    pub cut_mode: CutMode,
}

impl Default for BendersOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            relative_gap: 0.0,
            max_iter: 200,
            cut_mode: CutMode::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Converged,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    /// Best certified worst-case cost so far (upper bound).
    pub phi_plus: f64,
    /// Master value (lower bound).
    pub phi_minus: f64,
    /// Plan proposed by the master at this iteration.
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub x: Vec<f64>,
    /// Certified worst-case cost of `x`.
    pub value: f64,
    pub status: PlanStatus,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    /// Wall-clock seconds since the start at each trace entry. Not serialized, so
    /// plan files stay reproducible.
    #[serde(skip)]
    pub elapsed: Vec<f64>,
}

impl PlanResult {
    /// Final `phi_plus - phi_minus`.
    pub fn gap(&self) -> f64 {
        self.trace
            .last()
            .map_or(f64::INFINITY, |t| t.phi_plus - t.phi_minus)
    }

    pub fn is_converged(&self) -> bool {
        self.status == PlanStatus::Converged
    }

    /// Convergence trace as CSV: `iter,phi_plus,phi_minus,gap`, plus `elapsed_s`
    /// when `with_time` is set.
    pub fn write_trace_csv<W: Write>(&self, writer: W, with_time: bool) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["iter", "phi_plus", "phi_minus", "gap"];
        if with_time {
            header.push("elapsed_s");
        }
        wtr.write_record(&header)?;
        for (k, t) in self.trace.iter().enumerate() {
            let mut row = vec![
                t.iter.to_string(),
                t.phi_plus.to_string(),
                t.phi_minus.to_string(),
                (t.phi_plus - t.phi_minus).to_string(),
            ];
            if with_time {
                row.push(format!(
                    "{:.6}",
                    self.elapsed.get(k).copied().unwrap_or(f64::NAN)
                ));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Benders decomposition over binary plans.
///
/// The master minimizes `theta >= 0` over the proactive budget and the cuts
/// collected so far; each proposed plan is priced by [`subproblem`]. The loop stops
/// when the gap closes or the master proposes a plan it has already seen (its
/// cuts then force `theta >= Phi`, so the bounds have met).
pub fn benders_solve(
    inst: &Instance,
    omega: &UncertaintySet,
    opts: &BendersOptions,
) -> Result<PlanResult> {
    let n = inst.n();
    check_len("uncertainty set regions", n, omega.n())?;
    if !(opts.epsilon >= 0.0 && opts.relative_gap >= 0.0) {
        return Err(Error::InvalidInput(
            "gap tolerances must be nonnegative".into(),
        ));
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be at least 1".into()));
    }
    let start = Instant::now();

    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut master = LinearProgram::new(Sense::Minimize, obj);
    master.add_row(
        inst.proactive_cost().iter().cloned().chain([0.0]).collect(),
        Relation::Le,
        inst.proactive_budget(),
    );
    for j in 0..n {
        master.set_binary(j);
    }

    let mut seen = BTreeSet::new();
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut elapsed: Vec<f64> = Vec::new();
    let mut phi_plus = f64::INFINITY;
    let mut phi_minus: f64 = 0.0;
    let mut incumbent: Option<Vec<f64>> = None;
    let mut status = PlanStatus::IterationLimit;

    for iter in 1..=opts.max_iter + 1 {
        let sol = solve_milp(&master)?;
        if !sol.is_optimal() {
            return Err(Error::InvalidInstance(format!(
                "master problem is {:?}",
                sol.status
            )));
        }
        let x: Vec<f64> = sol.x[..n].iter().map(|v| v.round()).collect();
        phi_minus = phi_minus.max(sol.objective);

        if !seen.insert(binary_key(&x)) {
            // theta^t >= Phi(x^t) >= phi_plus: the bounds have met. This closing
            // master solve certifies the previous iteration rather than starting
            // a new one.
            if let (Some(last), Some(t)) = (trace.last_mut(), elapsed.last_mut()) {
                last.phi_minus = phi_minus.min(phi_plus);
                *t = start.elapsed().as_secs_f64();
            }
            status = PlanStatus::Converged;
            break;
        }

        if iter > opts.max_iter {
            break;
        }
        let sub = subproblem(&x, omega, inst)?;
        if sub.phi < phi_plus {
            phi_plus = sub.phi;
            incumbent = Some(x.clone());
        }
        log::debug!(
            "benders iter {iter}: phi = {}, bounds [{phi_minus}, {phi_plus}]",
            sub.phi
        );
        trace.push(TraceEntry {
            iter,
            phi_plus,
            phi_minus: phi_minus.min(phi_plus),
            x: x.clone(),
        });
        elapsed.push(start.elapsed().as_secs_f64());
        if phi_plus - phi_minus <= opts.epsilon.max(opts.relative_gap * phi_plus) {
            status = PlanStatus::Converged;
            break;
        }

        if matches!(opts.cut_mode, CutMode::Subgradient | CutMode::Both) {
            // theta - slope^T x >= Phi(x^t) - slope^T x^t keeps the cut exactly
            // tight at x^t.
            let (_, slope) = lagrangian_cut(&sub, &x, inst)?;
            let rhs = sub.phi - slope.iter().zip(&x).map(|(s, v)| s * v).sum::<f64>();
            let row = slope.iter().map(|s| -s).chain([1.0]).collect();
            master.add_row(row, Relation::Ge, rhs);
        }
        if matches!(opts.cut_mode, CutMode::Nogood | CutMode::Both) && sub.phi > 0.0 {
            let row = x
                .iter()
                .map(|&v| if v == 0.0 { sub.phi } else { 0.0 })
                .chain([1.0])
                .collect();
            master.add_row(row, Relation::Ge, sub.phi);
        }
    }

    let x = incumbent.unwrap_or_else(|| vec![0.0; n]);
    Ok(PlanResult {
        x,
        value: phi_plus,
        status,
        iterations: trace.len(),
        trace,
        elapsed,
    })
}
