//! Declarative experiment runner for `gravanom`: reads a TOML config, runs
//! the selected checks and writes a deterministic JSON report.

pub mod build;
pub mod checks;
pub mod config;
pub mod explain;
pub mod report;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde_json::json;

pub use checks::Suite;
pub use config::{ConfigError, ExperimentConfig};
pub use report::{CheckRecord, Report};

/// Environment variable that redirects relative output paths.
pub const OUT_DIR_VAR: &str = "GRAVANOM_OUT_DIR";

/// The shipped default config.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

pub struct RunOptions {
    pub seed: Option<u64>,
    pub tolerance_scale: f64,
}

/// Runs `suites` and assembles the report. Checks run on the current rayon
/// pool; the record order depends only on check ids.
pub fn run(cfg: &ExperimentConfig, subcommand: &str, suites: &[Suite], opts: &RunOptions) -> Result<Report, ConfigError> {
    if !(opts.tolerance_scale > 0.0 && opts.tolerance_scale.is_finite()) {
        return Err(ConfigError(format!("--tolerance-scale must be positive, got {}", opts.tolerance_scale)));
    }
    let seed = opts.seed.or(cfg.seed).unwrap_or(0);
    let plan = checks::Plan::new(cfg, seed, opts.tolerance_scale);
    let tasks = plan.tasks(suites).map_err(ConfigError)?;
    let grid_sizes: BTreeSet<usize> = tasks.iter().flat_map(|t| t.nodes.iter().copied()).collect();
    let records: Vec<CheckRecord> = tasks.par_iter().flat_map_iter(|t| t.execute()).collect();
    let mut stripped = cfg.clone();
    stripped.output = None;
    let environment = report::Environment {
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: subcommand.to_string(),
        seed,
        grid_sizes: grid_sizes.into_iter().collect(),
        tolerance_scale: opts.tolerance_scale,
        config_digest: report::digest(&json!(stripped)),
    };
    let report = Report::new(environment, records);
    let mut seen = BTreeSet::new();
    if let Some(dup) = report.checks.iter().find(|c| !seen.insert(c.id.as_str())) {
        return Err(ConfigError(format!("two checks share the id {:?}; rename a config entry", dup.id)));
    }
    Ok(report)
}
