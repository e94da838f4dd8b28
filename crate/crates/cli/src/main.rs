//! `resplan`: simulate outage data, build uncertainty sets, plan and benchmark.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 iteration limit reached,
//! 3 infeasible or invalid input, 4 oracle mismatch (`plan --oracle`).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use resplan::bench::SweepParameter;

use commands::{InputArgs, Outcome};
use config::Overrides;

#[derive(Debug, Parser)]
#[command(
    name = "resplan",
    version,
    about = "Budget-constrained resilience planning under conformal uncertainty sets"
)]
struct Cli {
    #[command(flatten)]
    flags: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Inputs {
    /// Observation CSV [default: <out>/dataset.csv if present, else simulated].
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Instance JSON [default: <out>/instance.json if present, else drawn].
    #[arg(long, value_name = "FILE")]
    instance: Option<PathBuf>,
    /// Sample whose features define the uncertainty set [default: first held-out].
    #[arg(long)]
    sample: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate observations; writes dataset.csv, instance.json and sir_config.json.
    Generate {
        /// Simulator settings JSON; overrides the defaults derived from --n and --seed.
        #[arg(long, value_name = "FILE")]
        sir_config: Option<PathBuf>,
    },
    /// Fit and calibrate; writes model.json, omega.json and coverage.json.
    Calibrate {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Solve the tri-level problem; writes plan.json, trace.csv and trace_timing.csv.
    Plan {
        #[command(flatten)]
        inputs: Inputs,
        /// Uncertainty set JSON, instead of calibrating.
        #[arg(long, value_name = "FILE")]
        omega: Option<PathBuf>,
        /// Cross-check the value against exhaustive enumeration.
        #[arg(long)]
        oracle: bool,
    },
    /// Score a plan on each form of the uncertainty set and on the sample's outages.
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_name = "FILE")]
        omega: Option<PathBuf>,
        /// Plan JSON [default: <out>/plan.json].
        #[arg(long, value_name = "FILE")]
        plan: Option<PathBuf>,
    },
    /// Run the planner comparison on held-out samples; writes bench_*.csv.
    Bench,
    /// Rerun the comparison along a parameter grid; writes sweep_<parameter>_*.csv.
    Sweep {
        /// chi, n, B or C.
        #[arg(long)]
        parameter: SweepParameter,
        /// Comma-separated values; `sum` is the total proactive cost, `n` the region count.
        #[arg(long)]
        grid: Option<String>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use resplan::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(
            E::EmptyUncertaintySet
            | E::InvalidUncertaintySet(_)
            | E::CoverageInfeasible { .. }
            | E::InvalidInstance(_)
            | E::InvalidInput(_)
            | E::Dimension { .. }
            | E::Data(_)
            | E::Calibration(_),
        ) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let cfg = cli.flags.resolve()?;
    let flags = &cli.flags;
    match &cli.command {
        Command::Generate { sir_config } => commands::generate(&cfg, sir_config.as_deref()),
        Command::Calibrate { inputs } => {
            commands::calibrate(&cfg, flags, &input_args(inputs, None))
        }
        Command::Plan {
            inputs,
            omega,
            oracle,
        } => commands::plan(&cfg, flags, &input_args(inputs, omega.as_deref()), *oracle),
        Command::Evaluate {
            inputs,
            omega,
            plan,
        } => commands::evaluate(
            &cfg,
            flags,
            &input_args(inputs, omega.as_deref()),
            plan.as_deref(),
        ),
        Command::Bench => commands::bench(&cfg),
        Command::Sweep { parameter, grid } => commands::sweep(&cfg, *parameter, grid.as_deref()),
    }
}

fn input_args<'a>(inputs: &'a Inputs, omega: Option<&'a std::path::Path>) -> InputArgs<'a> {
    InputArgs {
        dataset: inputs.dataset.as_deref(),
        instance: inputs.instance.as_deref(),
        omega,
        sample: inputs.sample,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::IterationLimit) => {
            eprintln!("warning: iteration limit reached before the gap closed");
            ExitCode::from(2)
        }
        Ok(Outcome::OracleMismatch) => ExitCode::from(4),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
