use std::fs::File;

use resplan::bench::{Experiment, ExperimentConfig};
use resplan::conformal::ObservationSet;
use resplan::model::{Instance, UncertaintySet};
use resplan::solver::{benders_solve, enumerate_solve, BendersOptions, PlanResult};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        n: 6,
        n_samples: 60,
        n_eval: 10,
        seed: 21,
        ..Default::default()
    }
}

#[test]
fn files_round_trip_through_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::setup(&small()).unwrap();

    let path = dir.path().join("history.csv");
    exp.history.write_csv(File::create(&path).unwrap()).unwrap();
    let back = ObservationSet::read_csv(File::open(&path).unwrap()).unwrap();
    assert_eq!(back.records(), exp.history.records());

    let omega = exp.omega(&exp.eval.records()[0].w).unwrap();
    let omega_back = UncertaintySet::from_json(&omega.to_json().unwrap()).unwrap();
    assert_eq!(omega_back, omega);
    let inst_back = Instance::from_json(&exp.instance.to_json().unwrap()).unwrap();
    assert_eq!(inst_back, exp.instance);

    let plan = benders_solve(&inst_back, &omega_back, &BendersOptions::default()).unwrap();
    let plan_back: PlanResult = serde_json::from_str(&plan.to_json().unwrap()).unwrap();
    assert_eq!(plan_back.x, plan.x);
    assert_eq!(plan_back.value, plan.value);
    let oracle = enumerate_solve(&exp.instance, &omega).unwrap();
    assert!((oracle.value - plan.value).abs() <= 1e-6 * (1.0 + oracle.value));
}
