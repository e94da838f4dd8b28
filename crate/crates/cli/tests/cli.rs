use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn resplan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resplan"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SMALL: &[&str] = &[
    "--n",
    "4",
    "--n-samples",
    "40",
    "--n-eval",
    "8",
    "--seed",
    "7",
];

fn with(base: &[&str], more: &[&str]) -> Vec<String> {
    more.iter().chain(base).map(|s| s.to_string()).collect()
}

fn run(dir: &Path, args: Vec<String>) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    resplan(dir, &refs)
}

#[test]
fn generate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let o = run(d, with(SMALL, &["generate"]));
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let da = fs::read(a.path().join("dataset.csv")).unwrap();
    assert_eq!(da, fs::read(b.path().join("dataset.csv")).unwrap());
    assert_eq!(String::from_utf8(da).unwrap().lines().count(), 40 * 4 + 1);
    assert!(a.path().join("instance.json").exists());
    assert!(a.path().join("sir_config.json").exists());
}

#[test]
fn zero_regions_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let o = resplan(d.path(), &["generate", "--n", "0"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn usage_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&resplan(d.path(), &["plan", "--no-such-flag"])), 1);
    assert_eq!(
        code(&resplan(d.path(), &["plan", "--cut-mode", "sideways"])),
        1
    );
    assert_eq!(code(&resplan(d.path(), &["frobnicate"])), 1);
    assert_eq!(code(&resplan(d.path(), &["--help"])), 0);
}

#[test]
fn plan_then_evaluate() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), with(SMALL, &["generate"]))), 0);
    let o = run(d.path(), with(SMALL, &["plan", "--oracle"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let plan: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["status"], "converged");
    let trace = fs::read_to_string(d.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,phi_plus,phi_minus,gap\n"));
    let timed = fs::read_to_string(d.path().join("trace_timing.csv")).unwrap();
    assert!(timed.starts_with("iter,phi_plus,phi_minus,gap,elapsed_s\n"));

    let o = run(d.path(), with(SMALL, &["evaluate"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let eval = fs::read_to_string(d.path().join("evaluation.csv")).unwrap();
    let full: f64 = eval
        .lines()
        .find(|l| l.starts_with("full,"))
        .and_then(|l| l.split(',').nth(1))
        .unwrap()
        .parse()
        .unwrap();
    let value = plan["value"].as_f64().unwrap();
    assert!((full - value).abs() <= 1e-6 * (1.0 + value));
}

#[test]
fn zero_budget_protects_nothing() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        with(
            SMALL,
            &["plan", "--budget-proactive", "0", "--epsilon", "0"],
        ),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let plan: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("plan.json")).unwrap()).unwrap();
    assert!(plan["x"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v.as_f64() == Some(0.0)));
}

#[test]
fn iteration_limit_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), with(SMALL, &["plan", "--max-iter", "1"]));
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.path().join("plan.json").exists());
}

#[test]
fn invalid_uncertainty_set_exits_three() {
    let d = tempfile::tempdir().unwrap();
    let omega = d.path().join("bad_omega.json");
    fs::write(
        &omega,
        r#"{"alpha":0.1,"local_lower":[0,0,0,0],"local_upper":[1,1,1,1],"global_lower":9,"global_upper":10}"#,
    )
    .unwrap();
    let o = run(
        d.path(),
        with(SMALL, &["plan", "--omega", omega.to_str().unwrap()]),
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let short = d.path().join("short.json");
    fs::write(
        &short,
        r#"{"alpha":0.1,"local_lower":[0],"local_upper":[1],"global_lower":0,"global_upper":1}"#,
    )
    .unwrap();
    let o = run(
        d.path(),
        with(SMALL, &["plan", "--omega", short.to_str().unwrap()]),
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_and_flags() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"experiment": {"n": 3, "n_samples": 30, "n_eval": 6, "seed": 2}}"#,
    )
    .unwrap();
    let o = resplan(
        d.path(),
        &["generate", "--config", cfg.to_str().unwrap(), "--n", "5"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.path().join("dataset.csv")).unwrap();
    assert_eq!(text.lines().count(), 30 * 5 + 1);
    fs::write(&cfg, r#"{"experiment": {"regions": 3}}"#).unwrap();
    let o = resplan(d.path(), &["generate", "--config", cfg.to_str().unwrap()]);
    assert_ne!(code(&o), 0);
}

#[test]
fn bench_reports_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let o = run(d, with(SMALL, &["bench"]));
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "bench_values.csv",
        "bench_summary.csv",
        "bench_table_worst_case.csv",
        "bench_benders.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let table = fs::read_to_string(a.path().join("bench_table_worst_case.csv")).unwrap();
    assert!(table.starts_with("planner,forecast,local_only,global_only,full\n"));
    assert!(table.lines().last().unwrap().starts_with("tri_level,"));
    let realized = fs::read_to_string(a.path().join("bench_table_realized.csv")).unwrap();
    assert!(realized.starts_with("planner,forecast,eta,eta_plus_sigma,eta_plus_2sigma\n"));
    assert!(!realized.contains("proactive_only"));
}

#[test]
fn budget_sweep_cells_and_dominance() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        with(
            SMALL,
            &["sweep", "--parameter", "B", "--grid", "500,1000,2000"],
        ),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let diffs =
        fs::read_to_string(d.path().join("sweep_proactive_budget_differences.csv")).unwrap();
    let mut points = std::collections::BTreeSet::new();
    for line in diffs.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        points.insert(cols[1].to_string());
        if cols[4] == "full" {
            let diff: f64 = cols[6].parse().unwrap();
            assert!(diff >= -1e-6, "{line}");
        }
    }
    assert_eq!(points.len(), 3);
    assert!(d.path().join("sweep_proactive_budget_timing.csv").exists());
}
