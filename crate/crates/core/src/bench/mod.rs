//! Deterministic benchmark planners, point forecasts, the experiment driver and
//! parameter sweeps.

mod experiment;
mod forecast;
mod planners;
mod sweep;

pub use experiment::{
    draw_instance, run_benchmark, run_experiment, sir_config, BenchReport, BenchValue, BendersRun,
    Criterion, Experiment, ExperimentConfig, PlanKey, SummaryRow,
};
pub use forecast::{make_forecast, mean_and_sd, Forecast, ForecastMethod};
pub use planners::{
    best_response, evaluate_recourse, plan_cooptimized, plan_proactive_only, tri_level_response,
    Planner, RecourseMode,
};
pub use sweep::{sensitivity_sweep, SweepParameter, SweepPoint, SweepReport};
