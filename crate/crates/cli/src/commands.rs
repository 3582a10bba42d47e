//! Resolution of flags into run configurations, execution, and replay.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use serde::Serialize;
use serde_json::Value;
use ustat::hajek::{self, HajekConfig};
use ustat::infer::{self, default_procedure, TestConfig};
use ustat::kernels::PairIndexMap;
use ustat::sim::{
    self, default_alpha_grid, BenchSpec, CopulaRow, ExperimentSpec, Generator, PpSettings, SizeRow,
    TimingPoint,
};
use ustat::ustat as est;
use ustat::{Dataset, PairwiseKernel, RankKernel, RngStream, SamplingScheme, SamplingVariant};

use crate::args::{BenchArgs, Command, Experiment, GeneratorKind, GlobalArgs, SimulateArgs};
use crate::error::CliError;
use crate::io::{load_csv, write_csv, write_json, LoadedData};
use crate::manifest::{
    first_difference, Document, InputRecord, RunConfig, RunManifest, SCHEMA_VERSION,
};

/// Result of executing a configuration.
pub struct Outcome {
    pub result: Value,
    pub timings: BTreeMap<String, f64>,
    pub table: Option<Table>,
}

/// Row data written as CSV next to simulation summaries.
pub enum Table {
    Size(Vec<SizeRow>),
    Pp(Vec<PpRow>),
    Copula(Vec<CopulaRow>),
    Timing(Vec<TimingPoint>),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PpRow {
    pub emp: f64,
    #[serde(rename = "ref")]
    pub reference: f64,
}

impl Table {
    fn file_name(&self) -> &'static str {
        match self {
            Table::Size(_) => "size_report.csv",
            Table::Pp(_) => "pp_data.csv",
            Table::Copula(_) => "copula.csv",
            Table::Timing(_) => "timing.csv",
        }
    }

    fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(self.file_name());
        match self {
            Table::Size(rows) => write_csv(&path, rows)?,
            Table::Pp(rows) => write_csv(&path, rows)?,
            Table::Copula(rows) => write_csv(&path, rows)?,
            Table::Timing(rows) => write_csv(&path, rows)?,
        }
        Ok(path)
    }
}

/// Output of `estimate`.
#[derive(Debug, Serialize)]
struct EstimateOutput {
    kernel: RankKernel,
    n: usize,
    p: usize,
    d: usize,
    /// 1-based variable pairs in coordinate order.
    pairs: Vec<(usize, usize)>,
    scheme: SamplingScheme,
    n_hat: usize,
    theta_hat: Vec<f64>,
    sample_mean: Vec<f64>,
}

/// Output of `oracle`.
#[derive(Debug, Serialize)]
struct OracleOutput {
    kernel: RankKernel,
    n: usize,
    p: usize,
    d: usize,
    pairs: Vec<(usize, usize)>,
    theta_hat: Vec<f64>,
    jackknife: Option<hajek::HajekEstimate>,
}

fn pairs(p: usize) -> Result<Vec<(usize, usize)>, CliError> {
    Ok(PairIndexMap::new(p)?
        .pairs()
        .map(|(j, k)| (j + 1, k + 1))
        .collect())
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    Ok(serde_json::to_value(v)?)
}

fn usage_on_domain(e: ustat::Error) -> CliError {
    match e {
        ustat::Error::Domain(m) => CliError::Usage(m),
        other => other.into(),
    }
}

fn hajek_config(g: &GlobalArgs, procedure: ustat::bootstrap::Procedure) -> Option<HajekConfig> {
    let any_flag = g.hajek.is_some()
        || g.dc_k.is_some()
        || g.dc_l.is_some()
        || g.rs_m.is_some()
        || g.rs_norm.is_some()
        || g.s1_size.is_some();
    let Some(method) = g.hajek.or_else(|| procedure.default_hajek()) else {
        if any_flag {
            warn!("projection flags are ignored by {procedure}");
        }
        return None;
    };
    let mut cfg = HajekConfig::new(method);
    cfg.block_count = g.dc_k;
    cfg.block_size = g.dc_l;
    cfg.rs_budget = g.rs_m;
    if let Some(norm) = g.rs_norm {
        cfg.rs_norm = norm;
    }
    Some(match g.s1_size {
        Some(n1) => cfg.with_s1_size(n1),
        None => cfg,
    })
}

fn test_config(g: &GlobalArgs, default_alphas: Vec<f64>) -> TestConfig {
    let procedure = g.bootstrap.unwrap_or_else(|| default_procedure(g.kernel));
    let mut cfg = TestConfig::default()
        .with_procedure(procedure)
        .with_replicates(g.replicates)
        .with_statistic(g.statistic)
        .with_alphas(g.alphas.clone().unwrap_or(default_alphas));
    cfg.hajek = hajek_config(g, procedure);
    cfg.store_replicates = g.store_replicates;
    cfg
}

fn experiment_spec(g: &GlobalArgs, s: &SimulateArgs) -> Result<ExperimentSpec, CliError> {
    if let Some(path) = &s.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let spec: ExperimentSpec = serde_json::from_str(&text).map_err(|e| {
            CliError::Usage(format!("invalid experiment file {}: {e}", path.display()))
        })?;
        return Ok(ExperimentSpec {
            seed: g.seed,
            ..spec
        });
    }
    let mut spec = ExperimentSpec::new(g.kernel, s.n, s.p, g.budget, s.reps, g.seed);
    spec.generator = match s.generator {
        GeneratorKind::NoncentralT => Generator::NoncentralT {
            df: s.df,
            ncp: s.ncp,
        },
        GeneratorKind::Uniform => Generator::IidUniform,
        GeneratorKind::GaussianPair => Generator::GaussianPair {
            correlation: s.correlation,
        },
    };
    spec.sampling = g.sampling;
    spec.test = test_config(g, default_alpha_grid());
    Ok(spec)
}

/// Builds the configuration for a subcommand. Data commands also get the
/// loaded data file.
pub fn resolve(
    g: &GlobalArgs,
    command: &Command,
) -> Result<(RunConfig, Option<(PathBuf, LoadedData)>), CliError> {
    let load = |path: &PathBuf| -> Result<(PathBuf, LoadedData), CliError> {
        Ok((path.clone(), load_csv(path)?))
    };
    Ok(match command {
        Command::Estimate { data } => {
            let loaded = load(data)?;
            let budget = g.budget.eval(loaded.1.dataset.n())?;
            let cfg = RunConfig::Estimate {
                kernel: g.kernel,
                scheme: SamplingScheme::new(g.sampling, budget),
                budget_rule: g.budget,
            };
            (cfg, Some(loaded))
        }
        Command::Test { data } => {
            let loaded = load(data)?;
            let budget = g.budget.eval(loaded.1.dataset.n())?;
            let cfg = RunConfig::Test {
                kernel: g.kernel,
                scheme: SamplingScheme::new(g.sampling, budget),
                budget_rule: g.budget,
                test: test_config(g, TestConfig::default().alphas),
            };
            (cfg, Some(loaded))
        }
        Command::Oracle { data, jackknife } => (
            RunConfig::Oracle {
                kernel: g.kernel,
                jackknife: *jackknife,
            },
            Some(load(data)?),
        ),
        Command::Simulate(s) => {
            let cfg = match s.experiment {
                Experiment::Size => RunConfig::Size {
                    spec: experiment_spec(g, s)?,
                },
                Experiment::Pp => RunConfig::Pp {
                    spec: experiment_spec(g, s)?,
                    settings: PpSettings {
                        reference_reps: s.pp_reference_reps,
                        aux_size: s.pp_aux_size,
                        ..PpSettings::default()
                    },
                },
                Experiment::Copula => {
                    if g.sampling != SamplingVariant::BernoulliRandomNorm {
                        warn!("the copula experiment always uses Bernoulli sampling with both normalizations");
                    }
                    RunConfig::Copula {
                        correlation: s.correlation,
                        n: s.n,
                        budget_rule: g.budget,
                        budget: g.budget.eval(s.n)?,
                        reps: s.reps,
                    }
                }
            };
            (cfg, None)
        }
        Command::Bench(b) => (
            RunConfig::Bench {
                spec: bench_spec(g, b),
            },
            None,
        ),
        Command::Replay { .. } => unreachable!("replay is dispatched separately"),
    })
}

fn bench_spec(g: &GlobalArgs, b: &BenchArgs) -> BenchSpec {
    BenchSpec {
        ns: b.ns.clone(),
        p: b.p,
        kernel: g.kernel,
        sampling: g.sampling,
        budget: g.budget,
        test: test_config(g, TestConfig::default().alphas),
        runs: b.runs,
        seed: g.seed,
        parallel: b.bench_parallel,
    }
}

fn need(data: Option<&Dataset>) -> Result<&Dataset, CliError> {
    data.ok_or_else(|| CliError::Usage("this command needs a data file".into()))
}

fn seconds_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs a configuration. Numeric results depend only on the configuration,
/// the seed and the data.
pub fn execute(cfg: &RunConfig, seed: u64, data: Option<&Dataset>) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let mut timings = BTreeMap::new();
    let root = RngStream::new(seed);
    let (result, table) = match cfg {
        RunConfig::Estimate { kernel, scheme, .. } => {
            let data = need(data)?;
            let k = PairwiseKernel::new(*kernel, data.p())?;
            let u = est::estimate(data, &k, scheme, &mut root.substream("design", 0), false)?;
            let out = EstimateOutput {
                kernel: *kernel,
                n: data.n(),
                p: data.p(),
                d: u.dim(),
                pairs: pairs(data.p())?,
                scheme: *scheme,
                n_hat: u.n_hat(),
                theta_hat: u.theta_hat,
                sample_mean: u.sample_mean,
            };
            (to_value(&out)?, None)
        }
        RunConfig::Test {
            kernel,
            scheme,
            test,
            ..
        } => {
            let data = need(data)?;
            let (res, t) =
                infer::pairwise_independence_test_timed(data, *kernel, scheme, test, &root)?;
            timings.insert("estimate_secs".into(), t.estimate_secs);
            timings.insert("hajek_secs".into(), t.hajek_secs);
            timings.insert("bootstrap_secs".into(), t.bootstrap_secs);
            (to_value(&res)?, None)
        }
        RunConfig::Oracle { kernel, jackknife } => {
            let data = need(data)?;
            let k = PairwiseKernel::new(*kernel, data.p())?;
            let theta_hat = est::complete_ustat(data, &k)?;
            let jack = if *jackknife {
                Some(hajek::jackknife_oracle(data, &k, None)?)
            } else {
                None
            };
            let out = OracleOutput {
                kernel: *kernel,
                n: data.n(),
                p: data.p(),
                d: theta_hat.len(),
                pairs: pairs(data.p())?,
                theta_hat,
                jackknife: jack,
            };
            (to_value(&out)?, None)
        }
        RunConfig::Size { spec } => {
            let mut spec = spec.clone();
            spec.seed = seed;
            let report = sim::run_size_experiment(&spec).map_err(usage_on_domain)?;
            timings.insert("mean_seconds_per_rep".into(), report.mean_seconds_per_rep);
            let mut value = to_value(&report)?;
            if let Value::Object(m) = &mut value {
                m.remove("mean_seconds_per_rep");
            }
            (value, Some(Table::Size(report.rows)))
        }
        RunConfig::Pp { spec, settings } => {
            let mut spec = spec.clone();
            spec.seed = seed;
            let pp = sim::pp_plot_data(&spec, settings).map_err(usage_on_domain)?;
            let rows = pp
                .points
                .iter()
                .map(|q| PpRow {
                    emp: q.emp,
                    reference: q.reference,
                })
                .collect();
            (to_value(&pp)?, Some(Table::Pp(rows)))
        }
        RunConfig::Copula {
            correlation,
            n,
            budget,
            reps,
            ..
        } => {
            let s = sim::copula_experiment(*correlation, *n, *budget, *reps, seed)
                .map_err(usage_on_domain)?;
            let rows = s.rows.clone();
            (to_value(&s)?, Some(Table::Copula(rows)))
        }
        RunConfig::Bench { spec } => {
            let mut spec = spec.clone();
            spec.seed = seed;
            let report = sim::timing_bench(&spec).map_err(usage_on_domain)?;
            let points = report.points.clone();
            (to_value(&report)?, Some(Table::Timing(points)))
        }
    };
    timings.insert("total_secs".into(), seconds_since(start));
    Ok(Outcome {
        result,
        timings,
        table,
    })
}

fn manifest(
    cfg: RunConfig,
    seed: u64,
    input: Option<InputRecord>,
    timings: BTreeMap<String, f64>,
) -> RunManifest {
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        library_version: ustat::VERSION.into(),
        seed,
        threads: rayon::current_num_threads(),
        config: cfg,
        input,
        timings,
    }
}

/// Writes a document to stdout or `--out`; simulation tables need `--out`
/// as a directory and are written next to `summary.json`.
fn emit(doc: &Document, table: Option<&Table>, out: Option<&Path>) -> Result<(), CliError> {
    match (table, out) {
        (Some(table), Some(dir)) => {
            fs::create_dir_all(dir)?;
            let csv = table.write(dir)?;
            let json = dir.join(if matches!(table, Table::Timing(_)) {
                "timing.json"
            } else {
                "summary.json"
            });
            write_json(Some(&json), doc)?;
            eprintln!("wrote {} and {}", json.display(), csv.display());
            Ok(())
        }
        _ => write_json(out, doc),
    }
}

pub fn run(g: &GlobalArgs, command: &Command) -> Result<(), CliError> {
    if let Command::Replay { result, data } = command {
        return replay(g, result, data.as_deref());
    }
    let (cfg, loaded) = resolve(g, command)?;
    let outcome = execute(&cfg, g.seed, loaded.as_ref().map(|(_, l)| &l.dataset))?;
    let input = loaded.map(|(path, l)| InputRecord {
        path,
        sha256: l.sha256,
        n: l.dataset.n(),
        p: l.dataset.p(),
    });
    let doc = Document {
        schema_version: SCHEMA_VERSION,
        manifest: manifest(cfg, g.seed, input, outcome.timings),
        result: outcome.result,
    };
    emit(&doc, outcome.table.as_ref(), g.out.as_deref())
}

#[derive(Debug, Serialize)]
struct ReplayReport {
    schema_version: u32,
    command: &'static str,
    reproduced: bool,
    first_difference: Option<String>,
    timings: BTreeMap<String, f64>,
}

/// Re-runs the configuration recorded in a result document and checks that
/// every numeric output is reproduced exactly.
fn replay(g: &GlobalArgs, path: &Path, data: Option<&Path>) -> Result<(), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let doc: Document = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!("{} is not a result document: {e}", path.display()))
    })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(CliError::Usage(format!(
            "unsupported schema version {}",
            doc.schema_version
        )));
    }
    let m = &doc.manifest;
    if matches!(m.config, RunConfig::Bench { .. }) {
        return Err(CliError::Usage("timing results cannot be replayed".into()));
    }
    let loaded = if m.config.needs_data() {
        let input = m
            .input
            .as_ref()
            .ok_or_else(|| CliError::Usage("manifest has no input record".into()))?;
        let file = data.unwrap_or(&input.path);
        let l = load_csv(file)?;
        if l.sha256 != input.sha256 {
            return Err(CliError::Data(format!(
                "{} does not match the recorded input digest {}",
                file.display(),
                input.sha256
            )));
        }
        Some(l)
    } else {
        None
    };
    let outcome = execute(&m.config, m.seed, loaded.as_ref().map(|l| &l.dataset))?;
    let fresh: Value = serde_json::from_str(&serde_json::to_string(&outcome.result)?)?;
    let diff = first_difference(&doc.result, &fresh);
    let report = ReplayReport {
        schema_version: SCHEMA_VERSION,
        command: m.config.name(),
        reproduced: diff.is_none(),
        first_difference: diff.clone(),
        timings: outcome.timings,
    };
    write_json(g.out.as_deref(), &report)?;
    match diff {
        None => Ok(()),
        Some(at) => Err(CliError::Runtime(format!(
            "replayed result differs at {at}"
        ))),
    }
}
