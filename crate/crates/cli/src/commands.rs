use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use resplan::bench::{best_response, evaluate_recourse};
use resplan::bench::{
    draw_instance, run_experiment, sensitivity_sweep, sir_config, Criterion, Experiment,
    SweepParameter,
};
use resplan::conformal::{empirical_coverage, ObservationSet};
use resplan::model::{Instance, OmegaVariant, UncertaintySet};
use resplan::simulator::{generate_dataset, SirConfig};
use resplan::solver::{benders_solve, enumerate_solve, worst_case_value, PlanResult};

use crate::config::{Overrides, RunConfig};

/// Process outcome beyond plain success.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    IterationLimit,
    OracleMismatch,
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| anyhow!("{} is not a file path", path.display()))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| -> Result<()> {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write(&mut w)?;
        w.flush()?;
        w.get_ref().sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_dataset(path: &Path) -> Result<ObservationSet> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    ObservationSet::read_csv(file).with_context(|| format!("parsing {}", path.display()))
}

pub fn generate(cfg: &RunConfig, sir_path: Option<&Path>) -> Result<Outcome> {
    let e = &cfg.experiment;
    let sir = match sir_path.or(cfg.sir.as_deref()) {
        Some(path) => {
            let sir = SirConfig::from_json(&read_text(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            if sir.n != e.n {
                log::info!("using n = {} from {}", sir.n, path.display());
            }
            sir
        }
        None => sir_config(e)?,
    };
    let data = generate_dataset(&sir, e.n_samples)?;
    let mut e = e.clone();
    e.n = sir.n;
    let instance = draw_instance(&e, &sir)?;

    let out = cfg.out_dir();
    write_atomic(&out.join("dataset.csv"), |w| Ok(data.write_csv(w)?))?;
    write_text(&out.join("instance.json"), &instance.to_json()?)?;
    write_text(&out.join("sir_config.json"), &sir.to_json()?)?;

    let totals: Vec<f64> = data.records().iter().map(|r| r.u.iter().sum()).collect();
    let mean = totals.iter().sum::<f64>() / totals.len() as f64;
    let min = totals.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("samples: {}", data.len());
    println!("regions: {}", data.n());
    println!("total outages per sample: mean {mean:.4}, min {min:.4}, max {max:.4}");
    println!("wrote {}", out.display());
    Ok(Outcome::Success)
}

/// The experiment behind `calibrate`, `plan` and `evaluate`: the dataset and
/// instance from files when present, otherwise simulated from the config.
fn load_experiment(
    cfg: &RunConfig,
    flags: &Overrides,
    dataset: Option<&Path>,
    instance: Option<&Path>,
) -> Result<Experiment> {
    let mut e = cfg.experiment.clone();
    let data = match cfg.input(dataset, cfg.dataset.as_deref(), "dataset.csv") {
        Some(path) => {
            let data = read_dataset(&path)?;
            e.n = data.n();
            Some(data)
        }
        None => None,
    };
    let sir = sir_config(&e)?;
    let instance = match cfg.input(instance, cfg.instance.as_deref(), "instance.json") {
        Some(path) => {
            let mut inst = Instance::from_json(&read_text(&path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            if let Some(b) = flags.budget_proactive {
                inst = inst.with_proactive_budget(b)?;
            }
            if let Some(c) = flags.budget_reactive {
                inst = inst.with_reactive_budget(c)?;
            }
            e.proactive_budget = inst.proactive_budget();
            e.reactive_budget = inst.reactive_budget();
            inst
        }
        None => draw_instance(&e, &sir)?,
    };
    let data = match data {
        Some(d) => d,
        None => generate_dataset(&sir, e.n_samples)?,
    };
    Ok(Experiment::from_parts(&e, sir, instance, data)?)
}

/// Features of `sample` (default: the first held-out record) and its outages.
fn pick_sample(exp: &Experiment, sample: Option<u64>) -> Result<(u64, Vec<f64>, Vec<f64>)> {
    let rec = match sample {
        Some(id) => exp
            .history
            .records()
            .iter()
            .chain(exp.eval.records())
            .find(|r| r.sample_id == id)
            .ok_or_else(|| anyhow!("sample {id} is not in the dataset"))?,
        None => &exp.eval.records()[0],
    };
    Ok((rec.sample_id, rec.w.clone(), rec.u.clone()))
}

fn load_omega(
    cfg: &RunConfig,
    exp: &Experiment,
    path: Option<&Path>,
    sample: Option<u64>,
) -> Result<UncertaintySet> {
    match path.or(cfg.omega.as_deref()) {
        Some(p) => Ok(UncertaintySet::from_json(&read_text(p)?)
            .with_context(|| format!("parsing {}", p.display()))?),
        None => {
            let (_, w, _) = pick_sample(exp, sample)?;
            Ok(exp.omega(&w)?)
        }
    }
}

pub struct InputArgs<'a> {
    pub dataset: Option<&'a Path>,
    pub instance: Option<&'a Path>,
    pub omega: Option<&'a Path>,
    pub sample: Option<u64>,
}

pub fn calibrate(cfg: &RunConfig, flags: &Overrides, args: &InputArgs) -> Result<Outcome> {
    let exp = load_experiment(cfg, flags, args.dataset, args.instance)?;
    let (id, w, _) = pick_sample(&exp, args.sample)?;
    let omega = exp.omega(&w)?;
    let coverage = empirical_coverage(&exp.model, &exp.scores, exp.config.alpha, &exp.eval)?;
    let out = cfg.out_dir();
    write_text(
        &out.join("model.json"),
        &serde_json::to_string_pretty(&exp.model)?,
    )?;
    write_text(&out.join("omega.json"), &omega.to_json()?)?;
    write_text(
        &out.join("coverage.json"),
        &serde_json::to_string_pretty(&coverage)?,
    )?;
    println!(
        "train {} / calibration {} / held out {}",
        exp.train.len(),
        exp.calibration.len(),
        exp.eval.len()
    );
    println!("uncertainty set built at sample {id}");
    println!(
        "held-out coverage: joint {:.4}, global {:.4}",
        coverage.joint_rate, coverage.global_rate
    );
    Ok(Outcome::Success)
}

fn values_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()))
}

pub fn plan(cfg: &RunConfig, flags: &Overrides, args: &InputArgs, oracle: bool) -> Result<Outcome> {
    let exp = load_experiment(cfg, flags, args.dataset, args.instance)?;
    let omega = load_omega(cfg, &exp, args.omega, args.sample)?;
    let result = benders_solve(&exp.instance, &omega, &exp.config.benders)?;
    write_plan(cfg.out_dir(), &result)?;
    println!(
        "{:?} after {} iterations: value {}, gap {}",
        result.status,
        result.iterations,
        result.value,
        result.gap()
    );
    println!("x = {:?}", result.x);
    if oracle {
        let check = enumerate_solve(&exp.instance, &omega)?;
        println!("oracle value {}", check.value);
        if !values_match(result.value, check.value) {
            eprintln!(
                "error: Benders value {} differs from the oracle's {}",
                result.value, check.value
            );
            return Ok(Outcome::OracleMismatch);
        }
    }
    Ok(if result.is_converged() {
        Outcome::Success
    } else {
        Outcome::IterationLimit
    })
}

fn write_plan(out: &Path, result: &PlanResult) -> Result<()> {
    write_text(&out.join("plan.json"), &result.to_json()?)?;
    write_atomic(&out.join("trace.csv"), |w| {
        Ok(result.write_trace_csv(w, false)?)
    })?;
    write_atomic(&out.join("trace_timing.csv"), |w| {
        Ok(result.write_trace_csv(w, true)?)
    })
}

pub fn evaluate(
    cfg: &RunConfig,
    flags: &Overrides,
    args: &InputArgs,
    plan_path: Option<&Path>,
) -> Result<Outcome> {
    let exp = load_experiment(cfg, flags, args.dataset, args.instance)?;
    let omega = load_omega(cfg, &exp, args.omega, args.sample)?;
    let plan_path: PathBuf = plan_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out_dir().join("plan.json"));
    let plan: PlanResult = serde_json::from_str(&read_text(&plan_path)?)
        .with_context(|| format!("parsing {}", plan_path.display()))?;
    let inst = &exp.instance;
    let (id, _, u) = pick_sample(&exp, args.sample)?;
    let y = best_response(inst, &plan.x, &u)?;
    let realized = evaluate_recourse(inst, &plan.x, &y, &u)?;

    let mut rows = Vec::new();
    for v in OmegaVariant::ALL {
        rows.push((
            v.label().to_string(),
            worst_case_value(&plan.x, &omega, v, inst)?,
        ));
    }
    rows.push((format!("realized_sample_{id}"), realized));
    write_atomic(&cfg.out_dir().join("evaluation.csv"), |w| {
        writeln!(w, "criterion,value")?;
        for (k, v) in &rows {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    })?;
    for (k, v) in &rows {
        println!("{k}: {v}");
    }
    Ok(Outcome::Success)
}

pub fn bench(cfg: &RunConfig) -> Result<Outcome> {
    let exp = Experiment::setup(&cfg.experiment)?;
    let report = run_experiment(&exp)?;
    let out = cfg.out_dir();
    write_text(&out.join("bench_config.json"), &cfg.experiment.to_json()?)?;
    write_atomic(&out.join("bench_values.csv"), |w| {
        Ok(report.write_values_csv(w)?)
    })?;
    write_atomic(&out.join("bench_summary.csv"), |w| {
        Ok(report.write_summary_csv(w)?)
    })?;
    write_atomic(&out.join("bench_table_worst_case.csv"), |w| {
        Ok(report.write_table_csv(w, &Criterion::WORST_CASE)?)
    })?;
    write_atomic(&out.join("bench_table_realized.csv"), |w| {
        Ok(report.write_table_csv(w, &Criterion::REALIZED)?)
    })?;
    write_atomic(&out.join("bench_benders.csv"), |w| {
        Ok(report.write_benders_csv(w)?)
    })?;
    write_atomic(&out.join("bench_timing.csv"), |w| {
        Ok(report.write_timing_csv(w)?)
    })?;

    let mut table = Vec::new();
    report.write_table_csv(&mut table, &Criterion::WORST_CASE)?;
    print!("{}", String::from_utf8_lossy(&table));
    println!("wrote {}", out.display());
    let all_converged = report
        .benders
        .iter()
        .all(|b| b.status == resplan::solver::PlanStatus::Converged);
    Ok(if all_converged {
        Outcome::Success
    } else {
        Outcome::IterationLimit
    })
}

/// Default grids follow the paper's sweeps; `sum` stands for the total
/// proactive cost and `n` for the region count.
fn default_grid(p: SweepParameter) -> &'static str {
    match p {
        SweepParameter::Chi => "0.05,0.1,0.2,0.4",
        SweepParameter::N => "5,10,15,20",
        SweepParameter::ProactiveBudget => "0,500,1000,2000,sum",
        SweepParameter::ReactiveBudget => "0,1,2,n",
    }
}

pub fn parse_grid(text: &str, cfg: &RunConfig) -> Result<Vec<f64>> {
    let mut grid = Vec::new();
    for tok in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let v = match tok {
            "sum" => {
                let e = &cfg.experiment;
                draw_instance(e, &sir_config(e)?)?
                    .proactive_cost()
                    .iter()
                    .sum()
            }
            "n" => cfg.experiment.n as f64,
            _ => tok
                .parse::<f64>()
                .map_err(|_| anyhow!("bad grid value {tok:?}"))?,
        };
        grid.push(v);
    }
    if grid.is_empty() {
        bail!("empty sweep grid");
    }
    Ok(grid)
}

pub fn sweep(cfg: &RunConfig, parameter: SweepParameter, grid: Option<&str>) -> Result<Outcome> {
    let text = grid
        .or(cfg.sweep_grid.as_deref())
        .unwrap_or_else(|| default_grid(parameter));
    let grid = parse_grid(text, cfg)?;
    let report = sensitivity_sweep(parameter, &grid, &cfg.experiment)?;
    let out = cfg.out_dir();
    let stem = format!("sweep_{}", parameter.label());
    let path = |kind: &str| out.join(format!("{stem}_{kind}.csv"));
    write_atomic(&path("differences"), |w| {
        Ok(report.write_differences_csv(w)?)
    })?;
    write_atomic(&path("values"), |w| Ok(report.write_values_csv(w)?))?;
    write_atomic(&path("summary"), |w| Ok(report.write_summary_csv(w)?))?;
    write_atomic(&path("benders"), |w| Ok(report.write_benders_csv(w)?))?;
    write_atomic(&path("timing"), |w| Ok(report.write_timing_csv(w)?))?;
    println!(
        "{} points over {}: {:?}",
        grid.len(),
        parameter.label(),
        grid
    );
    println!("wrote {}", out.display());
    let all_converged = report
        .points
        .iter()
        .flat_map(|p| &p.report.benders)
        .all(|b| b.status == resplan::solver::PlanStatus::Converged);
    Ok(if all_converged {
        Outcome::Success
    } else {
        Outcome::IterationLimit
    })
}
