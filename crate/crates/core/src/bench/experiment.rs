use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forecast::{make_forecast, mean_and_sd, ForecastMethod};
use super::planners::{
    evaluate_recourse, plan_cooptimized, plan_proactive_only, tri_level_response, Planner,
    RecourseMode,
};
use crate::conformal::{
    build_uncertainty_set, fit_regressor, nonconformity_scores, split_observations,
    CalibrationScores, Observation, ObservationSet, Regressor,
};
use crate::error::{check_len, Error, Result};
use crate::model::{Instance, OmegaVariant, UncertaintySet};
use crate::par;
use crate::simulator::{generate_dataset, SirConfig};
use crate::solver::{benders_solve, worst_case_value, BendersOptions, PlanStatus};

/// Stream for the proactive cost draws, apart from the sample streams.
const COST_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Total simulated samples; the last `n_eval` are held out for evaluation.
    pub n_samples: usize,
    pub n_eval: usize,
    /// Share of the history used to fit the regressor; the rest calibrates.
    pub train_fraction: f64,
    pub alpha: f64,
    pub proactive_budget: f64,
    pub reactive_budget: f64,
    /// Proactive costs are drawn uniformly from this range.
    pub proactive_cost_range: (f64, f64),
    pub reactive_cost: f64,
    /// Per-unit outage cost per customer: `h_i = outage_cost_scale * nu_i`.
    pub outage_cost_scale: f64,
    pub chi: f64,
    pub seed: u64,
    pub benders: BendersOptions,
    pub recourse_mode: RecourseMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 10,
            n_samples: 200,
            n_eval: 40,
            train_fraction: 0.5,
            alpha: 0.1,
            proactive_budget: 1000.0,
            reactive_budget: 1.0,
            proactive_cost_range: (100.0, 1000.0),
            reactive_cost: 1.0,
            outage_cost_scale: 1e-3,
            chi: 0.1,
            seed: 1,
            benders: BendersOptions::default(),
            recourse_mode: RecourseMode::Reoptimize,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n == 0 {
            return bad("region count must be positive".into());
        }
        if self.n_eval == 0 || self.n_eval >= self.n_samples {
            return bad(format!(
                "evaluation samples ({}) must be positive and fewer than all samples ({})",
                self.n_eval, self.n_samples
            ));
        }
        let (lo, hi) = self.proactive_cost_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return bad(format!("bad proactive cost range [{lo}, {hi}]"));
        }
        if !(self.reactive_cost.is_finite() && self.reactive_cost >= 0.0) {
            return bad(format!("bad reactive cost {}", self.reactive_cost));
        }
        if !(self.outage_cost_scale.is_finite() && self.outage_cost_scale > 0.0) {
            return bad(format!("bad outage cost scale {}", self.outage_cost_scale));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} must lie in (0, 1)", self.alpha));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The simulator settings implied by `config`.
pub fn sir_config(config: &ExperimentConfig) -> Result<SirConfig> {
    config.validate()?;
    let mut sir = SirConfig::default_for(config.n, config.seed)?;
    sir.chi = config.chi;
    sir.validate()?;
    Ok(sir)
}

/// Proactive costs drawn from `config.proactive_cost_range`, constant reactive
/// costs and `h = outage_cost_scale * nu`.
pub fn draw_instance(config: &ExperimentConfig, sir: &SirConfig) -> Result<Instance> {
    config.validate()?;
    check_len("simulator regions", config.n, sir.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(COST_STREAM);
    let (lo, hi) = config.proactive_cost_range;
    let b = (0..config.n).map(|_| rng.random_range(lo..=hi)).collect();
    Instance::new(
        b,
        vec![config.reactive_cost; config.n],
        sir.outage_costs()
            .iter()
            .map(|v| v * config.outage_cost_scale)
            .collect(),
        config.proactive_budget,
        config.reactive_budget,
    )
}

/// Everything fixed before the evaluation samples are scored.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub sir: SirConfig,
    pub instance: Instance,
    pub history: ObservationSet,
    pub train: ObservationSet,
    pub calibration: ObservationSet,
    pub eval: ObservationSet,
    pub model: Regressor,
    pub scores: CalibrationScores,
}

impl Experiment {
    /// Simulates the dataset and builds everything from `config`.
    pub fn setup(config: &ExperimentConfig) -> Result<Self> {
        let sir = sir_config(config)?;
        let data = generate_dataset(&sir, config.n_samples)?;
        let instance = draw_instance(config, &sir)?;
        Self::from_parts(config, sir, instance, data)
    }

    /// Uses an existing dataset and instance. The last `n_eval` records are held
    /// out; the rest are split into training and calibration parts.
    pub fn from_parts(
        config: &ExperimentConfig,
        sir: SirConfig,
        instance: Instance,
        data: ObservationSet,
    ) -> Result<Self> {
        config.validate()?;
        check_len("dataset regions", instance.n(), data.n())?;
        if config.n_eval >= data.len() {
            return Err(Error::Data(format!(
                "{} records leave no history after holding out {}",
                data.len(),
                config.n_eval
            )));
        }
        let n_hist = data.len() - config.n_eval;
        let idx: Vec<usize> = (0..data.len()).collect();
        let history = data.subset(&idx[..n_hist]);
        let eval = data.subset(&idx[n_hist..]);
        let (train, calibration) =
            split_observations(&history, config.train_fraction, config.seed)?;
        let model = fit_regressor(&train)?;
        let scores = nonconformity_scores(&model, &calibration)?;
        Ok(Self {
            config: config.clone(),
            sir,
            instance,
            history,
            train,
            calibration,
            eval,
            model,
            scores,
        })
    }

    pub fn omega(&self, w: &[f64]) -> Result<UncertaintySet> {
        build_uncertainty_set(&self.model, &self.scores, self.config.alpha, w)
    }
}

/// A scoring rule: a worst case over a form of the uncertainty set, or the cost
/// at a fixed outage level built from the history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    LocalOnly,
    GlobalOnly,
    Full,
    Eta,
    EtaPlusSigma,
    EtaPlusTwoSigma,
}

impl Criterion {
    pub const WORST_CASE: [Criterion; 3] = [Self::LocalOnly, Self::GlobalOnly, Self::Full];
    pub const REALIZED: [Criterion; 3] = [Self::Eta, Self::EtaPlusSigma, Self::EtaPlusTwoSigma];

    pub fn label(self) -> &'static str {
        match self {
            Self::LocalOnly => "local_only",
            Self::GlobalOnly => "global_only",
            Self::Full => "full",
            Self::Eta => "eta",
            Self::EtaPlusSigma => "eta_plus_sigma",
            Self::EtaPlusTwoSigma => "eta_plus_2sigma",
        }
    }

    pub fn omega_variant(self) -> Option<OmegaVariant> {
        match self {
            Self::LocalOnly => Some(OmegaVariant::LocalOnly),
            Self::GlobalOnly => Some(OmegaVariant::GlobalOnly),
            Self::Full => Some(OmegaVariant::Full),
            _ => None,
        }
    }

    fn sigmas(self) -> Option<f64> {
        match self {
            Self::Eta => Some(0.0),
            Self::EtaPlusSigma => Some(1.0),
            Self::EtaPlusTwoSigma => Some(2.0),
            _ => None,
        }
    }
}

/// A planner paired with the forecast it was fed. Tri-Level takes no forecast, and
/// Proactive-Only has none when its four plans coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlanKey {
    pub planner: Planner,
    pub forecast: Option<ForecastMethod>,
}

impl PlanKey {
    pub fn forecast_label(&self) -> &'static str {
        match (self.planner, self.forecast) {
            (_, Some(f)) => f.label(),
            (Planner::TriLevel, None) => "uncertainty_set",
            (_, None) => "any",
        }
    }

    pub const TRI_LEVEL: PlanKey = PlanKey {
        planner: Planner::TriLevel,
        forecast: None,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchValue {
    pub key: PlanKey,
    pub criterion: Criterion,
    pub sample_id: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub key: PlanKey,
    pub criterion: Criterion,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendersRun {
    pub sample_id: u64,
    pub iterations: usize,
    pub status: PlanStatus,
    pub value: f64,
    pub gap: f64,
    /// Wall-clock seconds; kept out of the deterministic reports.
    #[serde(skip)]
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<SummaryRow>,
    pub values: Vec<BenchValue>,
    pub benders: Vec<BendersRun>,
    /// Whether the four Proactive-Only plans agreed on every sample and were
    /// reported once.
    pub proactive_collapsed: bool,
}

struct SampleOutcome {
    proactive: Vec<Vec<f64>>,
    proactive_values: Vec<[f64; 3]>,
    values: Vec<(PlanKey, Criterion, f64)>,
    benders: BendersRun,
}

fn score_sample(
    exp: &Experiment,
    rec: &Observation,
    levels: &[Vec<f64>; 3],
) -> Result<SampleOutcome> {
    let inst = &exp.instance;
    let omega = exp.omega(&rec.w)?;
    let worst = |x: &[f64]| -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (k, c) in Criterion::WORST_CASE.iter().enumerate() {
            out[k] = worst_case_value(x, &omega, c.omega_variant().unwrap(), inst)?;
        }
        Ok(out)
    };
    let mut values = Vec::new();
    let mut proactive = Vec::new();
    let mut proactive_values = Vec::new();
    for method in ForecastMethod::ALL {
        let data = match method {
            ForecastMethod::ConformalAverage => &exp.train,
            _ => &exp.history,
        };
        let forecast = make_forecast(method, data, Some(&exp.model), Some(&omega))?;
        let x = plan_proactive_only(inst, &forecast)?;
        proactive_values.push(worst(&x)?);
        proactive.push(x);

        let key = PlanKey {
            planner: Planner::CoOptimized,
            forecast: Some(method),
        };
        let (x, y) = plan_cooptimized(inst, &forecast)?;
        for (c, v) in Criterion::WORST_CASE.iter().zip(worst(&x)?) {
            values.push((key, *c, v));
        }
        for (c, u) in Criterion::REALIZED.iter().zip(levels) {
            values.push((key, *c, evaluate_recourse(inst, &x, &y, u)?));
        }
    }

    let plan = benders_solve(inst, &omega, &exp.config.benders)?;
    let key = PlanKey::TRI_LEVEL;
    for (c, v) in Criterion::WORST_CASE.iter().zip(worst(&plan.x)?) {
        values.push((key, *c, v));
    }
    for (c, u) in Criterion::REALIZED.iter().zip(levels) {
        let y = tri_level_response(inst, &plan.x, &omega, u, exp.config.recourse_mode)?;
        values.push((key, *c, evaluate_recourse(inst, &plan.x, &y, u)?));
    }
    let benders = BendersRun {
        sample_id: rec.sample_id,
        iterations: plan.iterations,
        status: plan.status,
        value: plan.value,
        gap: plan.gap(),
        elapsed: plan.elapsed.last().copied().unwrap_or(0.0),
    };
    Ok(SampleOutcome {
        proactive,
        proactive_values,
        values,
        benders,
    })
}

/// Order of plan rows in every report.
fn plan_order(key: &PlanKey) -> (Planner, Option<ForecastMethod>) {
    (key.planner, key.forecast)
}

/// Scores every planner on every held-out sample.
///
/// Worst-case criteria use each sample's own uncertainty set. Realized criteria
/// fix the outages at `eta + k sigma` from the history; Proactive-Only has no
/// reactive plan and is scored on the worst-case criteria only.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchReport> {
    let exp = Experiment::setup(config)?;
    run_experiment(&exp)
}

pub fn run_experiment(exp: &Experiment) -> Result<BenchReport> {
    let (eta, sd) = mean_and_sd(&exp.history)?;
    let levels = Criterion::REALIZED.map(|c| {
        let k = c.sigmas().unwrap_or(0.0);
        eta.iter()
            .zip(&sd)
            .map(|(m, s)| m + k * s)
            .collect::<Vec<f64>>()
    });
    let records = exp.eval.records();
    let outcomes = par::try_map_range(records.len(), |k| score_sample(exp, &records[k], &levels))?;

    let collapsed = outcomes
        .iter()
        .all(|o| o.proactive.iter().all(|x| *x == o.proactive[0]));
    let mut values = Vec::new();
    for (o, rec) in outcomes.iter().zip(records) {
        let methods: Vec<Option<ForecastMethod>> = if collapsed {
            vec![None]
        } else {
            ForecastMethod::ALL.iter().map(|&m| Some(m)).collect()
        };
        for (k, forecast) in methods.into_iter().enumerate() {
            let key = PlanKey {
                planner: Planner::ProactiveOnly,
                forecast,
            };
            for (c, v) in Criterion::WORST_CASE.iter().zip(o.proactive_values[k]) {
                values.push(BenchValue {
                    key,
                    criterion: *c,
                    sample_id: rec.sample_id,
                    value: v,
                });
            }
        }
        for &(key, criterion, value) in &o.values {
            values.push(BenchValue {
                key,
                criterion,
                sample_id: rec.sample_id,
                value,
            });
        }
    }
    // Stable sort keeps sample order within each cell.
    values.sort_by_key(|v| (plan_order(&v.key), v.criterion));

    let mut rows: Vec<SummaryRow> = Vec::new();
    for v in &values {
        match rows.last_mut() {
            Some(r) if r.key == v.key && r.criterion == v.criterion => {
                r.mean += v.value;
                r.count += 1;
            }
            _ => rows.push(SummaryRow {
                key: v.key,
                criterion: v.criterion,
                mean: v.value,
                count: 1,
            }),
        }
    }
    for r in &mut rows {
        r.mean /= r.count as f64;
    }
    Ok(BenchReport {
        rows,
        values,
        benders: outcomes.into_iter().map(|o| o.benders).collect(),
        proactive_collapsed: collapsed,
    })
}

impl BenchReport {
    pub fn mean(&self, key: PlanKey, criterion: Criterion) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.key == key && r.criterion == criterion)
            .map(|r| r.mean)
    }

    /// Distinct plan keys in report order.
    pub fn plans(&self) -> Vec<PlanKey> {
        let mut keys: Vec<PlanKey> = self.rows.iter().map(|r| r.key).collect();
        keys.dedup();
        keys
    }

    /// Per-sample values of one cell, in sample order.
    pub fn cell(&self, key: PlanKey, criterion: Criterion) -> Vec<(u64, f64)> {
        self.values
            .iter()
            .filter(|v| v.key == key && v.criterion == criterion)
            .map(|v| (v.sample_id, v.value))
            .collect()
    }

    /// `planner,forecast,variant,sample_id,value`.
    pub fn write_values_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["planner", "forecast", "variant", "sample_id", "value"])?;
        for v in &self.values {
            wtr.write_record([
                v.key.planner.label(),
                v.key.forecast_label(),
                v.criterion.label(),
                &v.sample_id.to_string(),
                &v.value.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// `planner,forecast,variant,mean,count`.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["planner", "forecast", "variant", "mean", "count"])?;
        for r in &self.rows {
            wtr.write_record([
                r.key.planner.label(),
                r.key.forecast_label(),
                r.criterion.label(),
                &r.mean.to_string(),
                &r.count.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Wide table of means, one row per plan and one column per criterion. Plans
    /// without any of the criteria are left out.
    pub fn write_table_csv<W: Write>(&self, writer: W, criteria: &[Criterion]) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["planner", "forecast"];
        header.extend(criteria.iter().map(|c| c.label()));
        wtr.write_record(&header)?;
        for key in self.plans() {
            let means: Vec<Option<f64>> = criteria.iter().map(|&c| self.mean(key, c)).collect();
            if means.iter().all(Option::is_none) {
                continue;
            }
            let mut row = vec![
                key.planner.label().to_string(),
                key.forecast_label().to_string(),
            ];
            row.extend(
                means
                    .iter()
                    .map(|m| m.map_or(String::new(), |v| format!("{v:.1}"))),
            );
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// `sample_id,iterations,status,value,gap`.
    pub fn write_benders_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["sample_id", "iterations", "status", "value", "gap"])?;
        for b in &self.benders {
            wtr.write_record([
                b.sample_id.to_string(),
                b.iterations.to_string(),
                status_label(b.status).to_string(),
                b.value.to_string(),
                b.gap.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// `sample_id,elapsed_s`; the only nondeterministic output.
    pub fn write_timing_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["sample_id", "elapsed_s"])?;
        for b in &self.benders {
            wtr.write_record([b.sample_id.to_string(), format!("{:.6}", b.elapsed)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn status_label(s: PlanStatus) -> &'static str {
    match s {
        PlanStatus::Converged => "converged",
        PlanStatus::IterationLimit => "iteration_limit",
    }
}
