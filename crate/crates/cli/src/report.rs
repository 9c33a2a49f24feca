//! Check records and the JSON report.
//!
//! Reports carry no timings, so the same config and seed always give the
//! same bytes.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub id: String,
    pub inputs_digest: String,
    pub values: BTreeMap<String, Value>,
    /// Absent when the computation itself failed.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Environment {
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub grid_sizes: Vec<usize>,
    pub tolerance_scale: f64,
    pub config_digest: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub environment: Environment,
    pub summary: Summary,
    pub checks: Vec<CheckRecord>,
}

impl Report {
    /// Sorts the records by id so that the order never depends on which
    /// check finished first.
    pub fn new(environment: Environment, mut checks: Vec<CheckRecord>) -> Self {
        checks.sort_by(|a, b| a.id.cmp(&b.id));
        let passed = checks.iter().filter(|c| c.pass).count();
        Report {
            environment,
            summary: Summary { total: checks.len(), passed, failed: checks.len() - passed },
            checks,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn digest(value: &Value) -> String {
    let bytes = serde_json::to_vec(value).expect("json serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
