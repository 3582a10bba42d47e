//! Run manifests: the resolved configuration stored next to every result.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use ustat::infer::TestConfig;
use ustat::sim::{BenchSpec, BudgetRule, ExperimentSpec, PpSettings};
use ustat::{RankKernel, SamplingScheme};

/// Version of the JSON document layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Fully resolved configuration of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Estimate {
        kernel: RankKernel,
        scheme: SamplingScheme,
        budget_rule: BudgetRule,
    },
    Test {
        kernel: RankKernel,
        scheme: SamplingScheme,
        budget_rule: BudgetRule,
        test: TestConfig,
    },
    Oracle {
        kernel: RankKernel,
        jackknife: bool,
    },
    Size {
        spec: ExperimentSpec,
    },
    Pp {
        spec: ExperimentSpec,
        settings: PpSettings,
    },
    Copula {
        correlation: f64,
        n: usize,
        budget_rule: BudgetRule,
        budget: u64,
        reps: usize,
    },
    Bench {
        spec: BenchSpec,
    },
}

impl RunConfig {
    pub fn needs_data(&self) -> bool {
        matches!(
            self,
            RunConfig::Estimate { .. } | RunConfig::Test { .. } | RunConfig::Oracle { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Estimate { .. } => "estimate",
            RunConfig::Test { .. } => "test",
            RunConfig::Oracle { .. } => "oracle",
            RunConfig::Size { .. } => "size",
            RunConfig::Pp { .. } => "pp",
            RunConfig::Copula { .. } => "copula",
            RunConfig::Bench { .. } => "bench",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub n: usize,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub library_version: String,
    pub seed: u64,
    /// Worker threads used; results do not depend on it.
    pub threads: usize,
    pub config: RunConfig,
    pub input: Option<InputRecord>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

/// The JSON document written by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub schema_version: u32,
    pub manifest: RunManifest,
    pub result: Value,
}

/// Path of the first difference between two JSON values, if any.
pub fn first_difference(a: &Value, b: &Value) -> Option<String> {
    fn walk(a: &Value, b: &Value, path: &mut String) -> bool {
        match (a, b) {
            (Value::Object(x), Value::Object(y)) => {
                let keys: std::collections::BTreeSet<&String> = x.keys().chain(y.keys()).collect();
                for k in keys {
                    let len = path.len();
                    path.push('.');
                    path.push_str(k);
                    match (x.get(k), y.get(k)) {
                        (Some(u), Some(v)) if !walk(u, v, path) => return false,
                        (Some(_), Some(_)) => {}
                        _ => return false,
                    }
                    path.truncate(len);
                }
                true
            }
            (Value::Array(x), Value::Array(y)) => {
                if x.len() != y.len() {
                    return false;
                }
                for (i, (u, v)) in x.iter().zip(y).enumerate() {
                    let len = path.len();
                    path.push_str(&format!("[{i}]"));
                    if !walk(u, v, path) {
                        return false;
                    }
                    path.truncate(len);
                }
                true
            }
            _ => a == b,
        }
    }
    let mut path = String::from("$");
    if walk(a, b, &mut path) {
        None
    } else {
        Some(path)
    }
}
