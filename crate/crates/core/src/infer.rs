//! Max-type tests of pairwise independence calibrated by the bootstrap.
//!
//! The observed statistic `max_j |U'_j|` and the replicate statistics are both
//! kept on the scale of `U'`; `scaled_statistic` reports the observed value
//! multiplied by `sqrt(n)` (or `sqrt(N)` for MB-DG) for reference only.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    self, BootstrapConfig, BootstrapResult, Ingredients, Procedure, QuantileEntry, Statistic,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hajek::{self, HajekConfig};
use crate::kernels::{Kernel, PairwiseKernel, RankKernel};
use crate::rng::RngStream;
use crate::ustat::{self, SamplingScheme};

/// Procedure used when none is requested: MB-DG for the degenerate kernels,
/// MB-NDG-DC otherwise.
pub fn default_procedure(kind: RankKernel) -> Procedure {
    if kind.degeneracy_order() > 0 {
        Procedure::MbDg
    } else {
        Procedure::MbNdgDc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub procedure: Option<Procedure>,
    pub replicates: usize,
    pub statistic: Statistic,
    pub hajek: Option<HajekConfig>,
    pub alphas: Vec<f64>,
    pub store_replicates: bool,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            procedure: None,
            replicates: 200,
            statistic: Statistic::MaxAbs,
            hajek: None,
            alphas: vec![0.01, 0.05, 0.1],
            store_replicates: false,
        }
    }
}

impl TestConfig {
    pub fn with_procedure(mut self, procedure: Procedure) -> Self {
        self.procedure = Some(procedure);
        self
    }

    pub fn with_replicates(mut self, b: usize) -> Self {
        self.replicates = b;
        self
    }

    pub fn with_alphas(mut self, alphas: Vec<f64>) -> Self {
        self.alphas = alphas;
        self
    }

    pub fn with_statistic(mut self, statistic: Statistic) -> Self {
        self.statistic = statistic;
        self
    }

    pub fn with_hajek(mut self, hajek: HajekConfig) -> Self {
        self.hajek = Some(hajek);
        self
    }

    pub fn bootstrap_config(&self, procedure: Procedure) -> BootstrapConfig {
        BootstrapConfig {
            procedure,
            replicates: self.replicates,
            statistic: self.statistic,
            hajek: self.hajek.clone(),
            alpha_n: None,
            store_replicates: self.store_replicates,
            alphas: self.alphas.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub alpha: f64,
    pub critical_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMetadata {
    pub kernel: String,
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub scheme: SamplingScheme,
    pub n_hat: usize,
    pub procedure: Procedure,
    pub replicates: usize,
    pub alpha_n: f64,
    pub scale: f64,
    pub hajek: Option<HajekConfig>,
    pub hajek_m_hat: Option<u64>,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Max statistic of `U'` (unscaled).
    pub statistic: f64,
    pub scaled_statistic: f64,
    pub decisions: Vec<Decision>,
    pub p_value: f64,
    pub theta_hat: Vec<f64>,
    pub metadata: TestMetadata,
    pub bootstrap: BootstrapResult,
}

impl TestResult {
    pub fn critical_values(&self) -> Vec<QuantileEntry> {
        self.decisions
            .iter()
            .map(|d| QuantileEntry {
                alpha: d.alpha,
                critical_value: d.critical_value,
            })
            .collect()
    }

    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.statistic > self.bootstrap.quantile(alpha)
    }
}

/// Wall-clock time of each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub estimate_secs: f64,
    pub hajek_secs: f64,
    pub bootstrap_secs: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.estimate_secs + self.hajek_secs + self.bootstrap_secs
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Test with a built-in pairwise kernel.
pub fn pairwise_independence_test(
    data: &Dataset,
    kind: RankKernel,
    scheme: &SamplingScheme,
    config: &TestConfig,
    rng: &RngStream,
) -> Result<TestResult> {
    Ok(pairwise_independence_test_timed(data, kind, scheme, config, rng)?.0)
}

pub fn pairwise_independence_test_timed(
    data: &Dataset,
    kind: RankKernel,
    scheme: &SamplingScheme,
    config: &TestConfig,
    rng: &RngStream,
) -> Result<(TestResult, Timings)> {
    if data.p() < 2 {
        return Err(Error::Domain(format!(
            "pairwise tests need p >= 2, got {}",
            data.p()
        )));
    }
    let kernel = PairwiseKernel::new(kind, data.p())?;
    let procedure = config.procedure.unwrap_or_else(|| default_procedure(kind));
    independence_test_timed(data, &kernel, procedure, scheme, config, rng)
}

/// Test with an arbitrary kernel whose null value is zero in every coordinate.
///
/// Streams: design `("design", 0)`, projection `("hajek", method)`,
/// replicates `("boot", b)`.
pub fn independence_test_timed(
    data: &Dataset,
    kernel: &dyn Kernel,
    procedure: Procedure,
    scheme: &SamplingScheme,
    config: &TestConfig,
    rng: &RngStream,
) -> Result<(TestResult, Timings)> {
    let boot_cfg = config.bootstrap_config(procedure);
    let mut timings = Timings::default();

    let t = Instant::now();
    let mut design_rng = rng.substream("design", 0);
    let u = ustat::estimate(data, kernel, scheme, &mut design_rng, procedure.uses_ub())?;
    timings.estimate_secs = secs(t.elapsed());

    let t = Instant::now();
    let hajek_cfg = boot_cfg.hajek_config();
    let h = match &hajek_cfg {
        Some(c) => Some(hajek::estimate(data, kernel, c, rng)?),
        None => None,
    };
    timings.hajek_secs = secs(t.elapsed());

    let t = Instant::now();
    let ingredients = Ingredients { ustat: u, hajek: h };
    let boot = bootstrap::bootstrap_from(&ingredients, kernel.order(), &boot_cfg, rng)?;
    timings.bootstrap_secs = secs(t.elapsed());

    let Ingredients { ustat: u, hajek: h } = ingredients;
    let statistic = config.statistic.apply(&u.theta_hat);
    let decisions = boot
        .quantile_table
        .iter()
        .map(|q| Decision {
            alpha: q.alpha,
            critical_value: q.critical_value,
            reject: statistic > q.critical_value,
        })
        .collect();
    let metadata = TestMetadata {
        kernel: kernel.spec().name.clone(),
        n: data.n(),
        p: data.p(),
        d: u.dim(),
        scheme: *u.realization.scheme(),
        n_hat: u.n_hat(),
        procedure,
        replicates: boot.replicates(),
        alpha_n: boot.alpha_n,
        scale: boot.scale,
        hajek: h.as_ref().map(|e| e.config.clone()),
        hajek_m_hat: h.as_ref().and_then(|e| e.m_hat),
        master_seed: rng.master_seed(),
    };
    let result = TestResult {
        statistic,
        scaled_statistic: statistic * boot.scale,
        decisions,
        p_value: boot.p_value(statistic),
        theta_hat: u.theta_hat,
        metadata,
        bootstrap: boot,
    };
    Ok((result, timings))
}
