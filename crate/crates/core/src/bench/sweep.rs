use std::io::Write;

use serde::{Deserialize, Serialize};

use super::experiment::{
    run_experiment, status_label, BenchReport, Experiment, ExperimentConfig, PlanKey,
};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Chi,
    N,
    ProactiveBudget,
    ReactiveBudget,
}

impl SweepParameter {
    pub fn label(self) -> &'static str {
        match self {
            Self::Chi => "chi",
            Self::N => "n",
            Self::ProactiveBudget => "proactive_budget",
            Self::ReactiveBudget => "reactive_budget",
        }
    }

    /// `config` with this parameter set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!(
                "{} grid value {value} is not finite",
                self.label()
            )));
        }
        let mut cfg = config.clone();
        match self {
            Self::Chi => cfg.chi = value,
            Self::N => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "region count {value} is not a positive integer"
                    )));
                }
                cfg.n = value as usize;
            }
            Self::ProactiveBudget => cfg.proactive_budget = value,
            Self::ReactiveBudget => cfg.reactive_budget = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chi" => Ok(Self::Chi),
            "n" => Ok(Self::N),
            "B" | "proactive_budget" => Ok(Self::ProactiveBudget),
            "C" | "reactive_budget" => Ok(Self::ReactiveBudget),
            _ => Err(Error::InvalidInput(format!(
                "unknown sweep parameter {s:?} (expected chi, n, B or C)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: BenchReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub points: Vec<SweepPoint>,
}

/// Reruns the benchmark at every grid value. Grid points run concurrently and
/// come back in grid order. Budget sweeps share one simulated dataset, so the
/// points differ only in the budget.
pub fn sensitivity_sweep(
    parameter: SweepParameter,
    grid: &[f64],
    config: &ExperimentConfig,
) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty sweep grid".into()));
    }
    let configs = grid
        .iter()
        .map(|&v| parameter.apply(config, v))
        .collect::<Result<Vec<_>>>()?;
    let shared = match parameter {
        SweepParameter::ProactiveBudget | SweepParameter::ReactiveBudget => {
            Some(Experiment::setup(config)?)
        }
        _ => None,
    };
    let reports = par::try_map_range(configs.len(), |k| match &shared {
        Some(base) => {
            let mut exp = base.clone();
            exp.instance = exp
                .instance
                .with_proactive_budget(configs[k].proactive_budget)?
                .with_reactive_budget(configs[k].reactive_budget)?;
            exp.config = configs[k].clone();
            run_experiment(&exp)
        }
        None => run_experiment(&Experiment::setup(&configs[k])?),
    })?;
    Ok(SweepReport {
        parameter,
        points: grid
            .iter()
            .zip(reports)
            .map(|(&value, report)| SweepPoint { value, report })
            .collect(),
    })
}

impl SweepReport {
    fn header(&self, rest: &[&'static str]) -> Vec<&'static str> {
        let mut h = vec!["parameter", "value"];
        h.extend_from_slice(rest);
        h
    }

    /// `parameter,value,planner,forecast,variant,sample_id,difference`: each
    /// benchmark plan's value minus the Tri-Level value on the same sample and
    /// criterion.
    pub fn write_differences_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.header(&[
            "planner",
            "forecast",
            "variant",
            "sample_id",
            "difference",
        ]))?;
        for p in &self.points {
            for v in &p.report.values {
                if v.key == PlanKey::TRI_LEVEL {
                    continue;
                }
                let tri = p.report.values.iter().find(|t| {
                    t.key == PlanKey::TRI_LEVEL
                        && t.criterion == v.criterion
                        && t.sample_id == v.sample_id
                });
                let Some(tri) = tri else { continue };
                wtr.write_record([
                    self.parameter.label(),
                    &p.value.to_string(),
                    v.key.planner.label(),
                    v.key.forecast_label(),
                    v.criterion.label(),
                    &v.sample_id.to_string(),
                    &(v.value - tri.value).to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// All per-sample values, keyed by grid point.
    pub fn write_values_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.header(&["planner", "forecast", "variant", "sample_id", "value"]))?;
        for p in &self.points {
            for v in &p.report.values {
                wtr.write_record([
                    self.parameter.label(),
                    &p.value.to_string(),
                    v.key.planner.label(),
                    v.key.forecast_label(),
                    v.criterion.label(),
                    &v.sample_id.to_string(),
                    &v.value.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.header(&["planner", "forecast", "variant", "mean", "count"]))?;
        for p in &self.points {
            for r in &p.report.rows {
                wtr.write_record([
                    self.parameter.label(),
                    &p.value.to_string(),
                    r.key.planner.label(),
                    r.key.forecast_label(),
                    r.criterion.label(),
                    &r.mean.to_string(),
                    &r.count.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Benders iterations, status and final gap per sample.
    pub fn write_benders_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.header(&["sample_id", "iterations", "status", "value", "gap"]))?;
        for p in &self.points {
            for b in &p.report.benders {
                wtr.write_record([
                    self.parameter.label(),
                    &p.value.to_string(),
                    &b.sample_id.to_string(),
                    &b.iterations.to_string(),
                    status_label(b.status),
                    &b.value.to_string(),
                    &b.gap.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Benders wall-clock per sample.
    pub fn write_timing_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.header(&["sample_id", "elapsed_s"]))?;
        for p in &self.points {
            for b in &p.report.benders {
                wtr.write_record([
                    self.parameter.label(),
                    &p.value.to_string(),
                    &b.sample_id.to_string(),
                    &format!("{:.6}", b.elapsed),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}
