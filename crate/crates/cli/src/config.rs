use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use resplan::bench::{ExperimentConfig, RecourseMode};
use resplan::solver::CutMode;
use serde::{Deserialize, Serialize};

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// Output directory; `out` when unset.
    pub out: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub instance: Option<PathBuf>,
    pub omega: Option<PathBuf>,
    /// Simulator settings for `generate`.
    pub sir: Option<PathBuf>,
    /// Comma-separated sweep grid, as accepted by `sweep --grid`.
    pub sweep_grid: Option<String>,
}

/// Flags shared by every command. Flags win over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Miscoverage level of the uncertainty set, in (0, 1).
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Absolute Benders gap tolerance.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Relative Benders gap tolerance, applied to the upper bound.
    #[arg(long, global = true)]
    pub relative_gap: Option<f64>,
    /// Benders iteration limit.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Benders cuts: subgradient, nogood or both.
    #[arg(long, global = true)]
    pub cut_mode: Option<CutMode>,
    /// Seed for simulation, splitting and cost draws.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of regions.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Proactive budget B.
    #[arg(long, global = true)]
    pub budget_proactive: Option<f64>,
    /// Reactive budget C.
    #[arg(long, global = true)]
    pub budget_reactive: Option<f64>,
    /// Outage noise level.
    #[arg(long, global = true)]
    pub chi: Option<f64>,
    /// Number of simulated samples.
    #[arg(long, global = true)]
    pub n_samples: Option<usize>,
    /// Number of held-out evaluation samples.
    #[arg(long, global = true)]
    pub n_eval: Option<usize>,
    /// Tri-Level recourse under fixed outages: reoptimize or fixed.
    #[arg(long, global = true, value_parser = parse_recourse_mode)]
    pub recourse_mode: Option<RecourseMode>,
}

fn parse_recourse_mode(s: &str) -> Result<RecourseMode, String> {
    match s {
        "reoptimize" => Ok(RecourseMode::Reoptimize),
        "fixed" => Ok(RecourseMode::Fixed),
        _ => Err(format!(
            "unknown recourse mode {s:?} (expected reoptimize or fixed)"
        )),
    }
}

impl Overrides {
    /// Reads `--config` (if any) and applies the flags on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        let e = &mut cfg.experiment;
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag {
                    e.$($field).+ = v;
                }
            };
        }
        set!(alpha => alpha);
        set!(epsilon => benders.epsilon);
        set!(relative_gap => benders.relative_gap);
        set!(max_iter => benders.max_iter);
        set!(cut_mode => benders.cut_mode);
        set!(seed => seed);
        set!(n => n);
        set!(budget_proactive => proactive_budget);
        set!(budget_reactive => reactive_budget);
        set!(chi => chi);
        set!(n_samples => n_samples);
        set!(n_eval => n_eval);
        set!(recourse_mode => recourse_mode);
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if e.benders.epsilon.is_nan() || e.benders.epsilon < 0.0 {
            bail!("epsilon must be nonnegative");
        }
        if e.benders.max_iter == 0 {
            bail!("max_iter must be at least 1");
        }
        e.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new("out"))
    }

    /// `explicit`, else the configured path, else `name` in the output directory
    /// when that file exists.
    pub fn input(
        &self,
        explicit: Option<&Path>,
        configured: Option<&Path>,
        name: &str,
    ) -> Option<PathBuf> {
        explicit
            .or(configured)
            .map(Path::to_path_buf)
            .or_else(|| Some(self.out_dir().join(name)).filter(|p| p.exists()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"experiment": {"n": 4, "alpha": 0.2, "seed": 3}, "out": "a"}"#,
        )
        .unwrap();
        let o = Overrides {
            config: Some(path),
            alpha: Some(0.05),
            out: Some("b".into()),
            ..Default::default()
        };
        let cfg = o.resolve().unwrap();
        assert_eq!(cfg.experiment.n, 4);
        assert_eq!(cfg.experiment.seed, 3);
        assert_eq!(cfg.experiment.alpha, 0.05);
        assert_eq!(cfg.out_dir(), Path::new("b"));
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(Overrides {
            alpha: Some(1.5),
            ..Default::default()
        }
        .resolve()
        .is_err());
        assert!(Overrides {
            epsilon: Some(-1.0),
            ..Default::default()
        }
        .resolve()
        .is_err());
        assert!(Overrides {
            max_iter: Some(0),
            ..Default::default()
        }
        .resolve()
        .is_err());
        assert!(parse_recourse_mode("sometimes").is_err());
    }
}
