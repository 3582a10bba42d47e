//! Gaussian multiplier bootstrap for incomplete U-statistics.
//!
//! Replicates are `U_A# + sqrt(alpha_n) U_B#` (non-degenerate procedures),
//! `U_B#` alone (degenerate) or `U_A#` alone (partial). Every replicate `b`
//! draws from the substream `("boot", b)` with independent children `"ua"`
//! and `"ub"`, so results do not depend on scheduling.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hajek::{self, HajekConfig, HajekEstimate, HajekMethod};
use crate::kernels::Kernel;
use crate::rng::{RngStream, SeedRecord};
use crate::ustat::{self, IncompleteUStat, SamplingScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Procedure {
    /// Degenerate kernels: `U_B#` only, scaled by `sqrt(N)`.
    MbDg,
    /// `U_A# + sqrt(alpha_n) U_B#` with divide-and-conquer projections.
    MbNdgDc,
    /// `U_A# + sqrt(alpha_n) U_B#` with random-sampling projections.
    MbNdgRs,
    /// `U_A#` only, for budgets with `n / N -> 0`.
    MbNdgPartialA,
}

impl Procedure {
    pub const ALL: [Procedure; 4] = [
        Procedure::MbDg,
        Procedure::MbNdgDc,
        Procedure::MbNdgRs,
        Procedure::MbNdgPartialA,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            Procedure::MbDg => "mb-dg",
            Procedure::MbNdgDc => "mb-ndg-dc",
            Procedure::MbNdgRs => "mb-ndg-rs",
            Procedure::MbNdgPartialA => "mb-ndg-partial-a",
        }
    }

    pub fn is_degenerate(self) -> bool {
        self == Procedure::MbDg
    }

    pub fn uses_ua(self) -> bool {
        self != Procedure::MbDg
    }

    pub fn uses_ub(self) -> bool {
        self != Procedure::MbNdgPartialA
    }

    /// Projection estimator implied by the procedure; the partial variant
    /// defaults to divide-and-conquer.
    pub fn default_hajek(self) -> Option<HajekMethod> {
        match self {
            Procedure::MbDg => None,
            Procedure::MbNdgDc | Procedure::MbNdgPartialA => Some(HajekMethod::DivideConquer),
            Procedure::MbNdgRs => Some(HajekMethod::RandomSampling),
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Procedure::ALL
            .into_iter()
            .find(|p| p.cli_name() == s)
            .ok_or_else(|| {
                Error::Domain(format!(
                "unknown bootstrap '{s}' (expected mb-dg, mb-ndg-dc, mb-ndg-rs or mb-ndg-partial-a)"
            ))
            })
    }
}

/// The max-type functional applied to a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    #[default]
    MaxAbs,
    Max,
}

impl Statistic {
    pub fn apply(self, v: &[f64]) -> f64 {
        match self {
            Statistic::MaxAbs => v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(x.abs())),
            Statistic::Max => v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)),
        }
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            Statistic::MaxAbs => "max-abs",
            Statistic::Max => "max",
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-abs" => Ok(Statistic::MaxAbs),
            "max" => Ok(Statistic::Max),
            other => Err(Error::Domain(format!(
                "unknown statistic '{other}' (expected max-abs or max)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub procedure: Procedure,
    /// Number of replicates `B`.
    pub replicates: usize,
    pub statistic: Statistic,
    /// Projection settings; the method is taken from here when given.
    pub hajek: Option<HajekConfig>,
    /// Overrides `alpha_n = n / N`.
    pub alpha_n: Option<f64>,
    pub store_replicates: bool,
    /// Levels for the quantile table.
    pub alphas: Vec<f64>,
}

impl BootstrapConfig {
    pub fn new(procedure: Procedure, replicates: usize) -> Self {
        BootstrapConfig {
            procedure,
            replicates,
            statistic: Statistic::MaxAbs,
            hajek: None,
            alpha_n: None,
            store_replicates: false,
            alphas: vec![0.01, 0.05, 0.1],
        }
    }

    pub fn with_hajek(mut self, hajek: HajekConfig) -> Self {
        self.hajek = Some(hajek);
        self
    }

    pub fn with_statistic(mut self, statistic: Statistic) -> Self {
        self.statistic = statistic;
        self
    }

    pub fn with_alphas(mut self, alphas: Vec<f64>) -> Self {
        self.alphas = alphas;
        self
    }

    pub fn with_alpha_n(mut self, alpha_n: f64) -> Self {
        self.alpha_n = Some(alpha_n);
        self
    }

    pub fn storing_replicates(mut self) -> Self {
        self.store_replicates = true;
        self
    }

    /// The projection configuration actually used, if any.
    pub fn hajek_config(&self) -> Option<HajekConfig> {
        let method = self.procedure.default_hajek()?;
        Some(
            self.hajek
                .clone()
                .unwrap_or_else(|| HajekConfig::new(method)),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("bootstrap needs B >= 1".into()));
        }
        if let Some(a) = self.alpha_n {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Config(format!(
                    "alpha_n = {a} must be finite and >= 0"
                )));
            }
        }
        if let Some(&a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::Config(format!("level {a} outside (0, 1)")));
        }
        Ok(())
    }
}

/// Replicates drawn together in one pass over the centred rows.
const REPLICATE_BLOCK: usize = 16;

/// Index of the critical value among ascending replicates (0-based):
/// the `ceil((1 - alpha) B)`-th order statistic.
pub fn quantile_rank(alpha: f64, b: usize) -> usize {
    // The small offset keeps e.g. (1 - 0.985) * 200 from rounding up to 4.
    let k = ((1.0 - alpha) * b as f64 - 1e-9).ceil() as usize;
    k.clamp(1, b) - 1
}

/// `(1 + #{replicate >= observed}) / (B + 1)`.
pub fn p_value(replicates: &[f64], observed: f64) -> f64 {
    let exceed = replicates.iter().filter(|&&t| t >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEntry {
    pub alpha: f64,
    pub critical_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub procedure: Procedure,
    pub statistic: Statistic,
    /// Replicate statistics on the scale of `U'` (already divided by `scale`),
    /// in replicate order.
    pub replicate_stats: Vec<f64>,
    /// Row-major `B x d` replicate vectors on the `sqrt`-scaled level.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub replicate_vectors: Option<Vec<f64>>,
    pub quantile_table: Vec<QuantileEntry>,
    pub sigma_b_sq: Option<Vec<f64>>,
    pub sigma_a_sq: Option<Vec<f64>>,
    pub alpha_n: f64,
    /// `sqrt(n)` for the non-degenerate procedures, `sqrt(N)` for MB-DG.
    pub scale: f64,
    pub seed_record: SeedRecord,
    #[serde(skip)]
    sorted: Vec<f64>,
}

impl BootstrapResult {
    pub fn replicates(&self) -> usize {
        self.replicate_stats.len()
    }

    /// Critical value at level `alpha` on the scale of `U'`.
    pub fn quantile(&self, alpha: f64) -> f64 {
        let sorted = if self.sorted.is_empty() {
            sorted_copy(&self.replicate_stats)
        } else {
            self.sorted.clone()
        };
        sorted[quantile_rank(alpha, sorted.len())]
    }

    pub fn p_value(&self, observed: f64) -> f64 {
        p_value(&self.replicate_stats, observed)
    }
}

fn sorted_copy(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Centered rows with a common factor; `draw` returns
/// `factor * sum_i xi_i * rows_i` for i.i.d. standard normal `xi`.
#[derive(Debug, Clone)]
pub struct MultiplierSource {
    centered: Vec<f64>,
    d: usize,
    /// `factor^2 = num / den`, kept separately so variances divide exactly.
    num: f64,
    den: f64,
    factor: f64,
}

impl MultiplierSource {
    /// `U_B#` ingredients: `h(X_iota) - U'` over realized tuples,
    /// divided by the square root of `N^` (Bernoulli) or `N` (with replacement).
    pub fn ub(ustat: &IncompleteUStat) -> Result<Self> {
        let evals = ustat.kernel_evals.as_ref().ok_or_else(|| {
            Error::State("U_B# needs the kernel evaluations retained on the estimate".into())
        })?;
        let centre = &ustat.sample_mean;
        let d = centre.len();
        let centered = evals
            .chunks_exact(d)
            .flat_map(|row| row.iter().zip(centre).map(|(h, u)| h - u))
            .collect();
        Ok(Self::with_ratio(
            centered,
            d,
            1.0,
            ustat.realization.bootstrap_divisor(),
        ))
    }

    /// `U_A#` ingredients: `g^ - g_bar` with factor `r / sqrt(n1)`.
    pub fn ua(hajek: &HajekEstimate, r: usize) -> Self {
        let d = hajek.d;
        let centered = hajek
            .rows()
            .flat_map(|row| row.iter().zip(&hajek.g_bar).map(|(g, m)| g - m))
            .collect();
        Self::with_ratio(centered, d, (r * r) as f64, hajek.n1 as f64)
    }

    /// Centres `rows` (row-major, width `d`) at their column means; the draw
    /// covariance is `(num / den) sum_i c_i c_i^T`.
    pub fn centered(rows: &[f64], d: usize, num: f64, den: f64) -> Self {
        let count = rows.len() / d;
        let mean: Vec<f64> = crate::reduce::column_sums(rows, d)
            .into_iter()
            .map(|s| s / count as f64)
            .collect();
        let centered = rows
            .chunks_exact(d)
            .flat_map(|r| r.iter().zip(&mean).map(|(x, m)| x - m))
            .collect();
        Self::with_ratio(centered, d, num, den)
    }

    fn with_ratio(centered: Vec<f64>, d: usize, num: f64, den: f64) -> Self {
        let factor = num.sqrt() / den.sqrt();
        MultiplierSource {
            centered,
            d,
            num,
            den,
            factor,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.centered.chunks_exact(self.d)
    }

    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        out.fill(0.0);
        for row in self.centered.chunks_exact(self.d) {
            let xi: f64 = rng.sample(StandardNormal);
            for (o, c) in out.iter_mut().zip(row) {
                *o += xi * c;
            }
        }
        out.iter_mut().for_each(|o| *o *= self.factor);
    }

    /// Draws for several replicates in one pass over the rows; replicate `k`
    /// uses `rngs[k]` and gets exactly what `draw_into` would give it.
    pub fn draw_block<R: Rng>(&self, rngs: &mut [R], out: &mut [f64]) {
        let d = self.d;
        out.fill(0.0);
        let mut xi = vec![0.0; rngs.len()];
        for row in self.centered.chunks_exact(d) {
            for (x, rng) in xi.iter_mut().zip(rngs.iter_mut()) {
                *x = rng.sample(StandardNormal);
            }
            for (acc, &x) in out.chunks_exact_mut(d).zip(&xi) {
                for (o, c) in acc.iter_mut().zip(row) {
                    *o += x * c;
                }
            }
        }
        out.iter_mut().for_each(|o| *o *= self.factor);
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.draw_into(rng, &mut out);
        out
    }

    /// Diagonal of the conditional covariance of `draw`.
    pub fn variance_diag(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        for row in self.rows() {
            for (a, c) in v.iter_mut().zip(row) {
                *a += c * c;
            }
        }
        v.iter_mut().for_each(|a| *a = self.num * *a / self.den);
        v
    }

    /// Full conditional covariance of `draw` (row-major `d x d`).
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.d;
        let mut cov = vec![0.0; d * d];
        for row in self.rows() {
            for j in 0..d {
                for k in 0..d {
                    cov[j * d + k] += row[j] * row[k];
                }
            }
        }
        cov.iter_mut().for_each(|c| *c = self.num * *c / self.den);
        cov
    }
}

/// One draw of `U_B#`.
pub fn draw_ub_sharp(ustat: &IncompleteUStat, rng: &mut RngStream) -> Result<Vec<f64>> {
    Ok(MultiplierSource::ub(ustat)?.draw(rng))
}

/// One draw of `U_A#`.
pub fn draw_ua_sharp(hajek: &HajekEstimate, r: usize, rng: &mut RngStream) -> Vec<f64> {
    MultiplierSource::ua(hajek, r).draw(rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimates {
    pub sigma_a_sq: Option<Vec<f64>>,
    pub sigma_b_sq: Option<Vec<f64>>,
    pub alpha_n: f64,
}

impl VarianceEstimates {
    /// `sigma_A^2 + alpha_n sigma_B^2` with absent parts treated as zero.
    pub fn combined(&self) -> Vec<f64> {
        let d = self
            .sigma_a_sq
            .as_ref()
            .or(self.sigma_b_sq.as_ref())
            .map_or(0, Vec::len);
        (0..d)
            .map(|j| {
                self.sigma_a_sq.as_ref().map_or(0.0, |a| a[j])
                    + self
                        .sigma_b_sq
                        .as_ref()
                        .map_or(0.0, |b| self.alpha_n * b[j])
            })
            .collect()
    }
}

/// `sigma_B^2` from the retained kernel values and, when `hajek` is given,
/// `sigma_A^2 = (r^2 / n1) sum (g^ - g_bar)^2`.
pub fn variance_estimators(
    ustat: &IncompleteUStat,
    hajek: Option<&HajekEstimate>,
    r: usize,
    alpha_n: f64,
) -> Result<VarianceEstimates> {
    let sigma_b_sq = Some(MultiplierSource::ub(ustat)?.variance_diag());
    let sigma_a_sq = hajek.map(|h| MultiplierSource::ua(h, r).variance_diag());
    Ok(VarianceEstimates {
        sigma_a_sq,
        sigma_b_sq,
        alpha_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// `sqrt(n) U' / sigma`, with the combined variance.
    Ndg,
    /// `sqrt(N) U' / sigma_B`.
    Dg,
}

/// Coordinatewise studentized statistic under `theta = 0`.
pub fn normalized_statistic(
    ustat: &IncompleteUStat,
    sigmas: &VarianceEstimates,
    mode: Normalization,
) -> Result<Vec<f64>> {
    let (scale, var) = match mode {
        Normalization::Ndg => ((ustat.realization.n() as f64).sqrt(), sigmas.combined()),
        Normalization::Dg => (
            (ustat.realization.scheme().budget as f64).sqrt(),
            sigmas
                .sigma_b_sq
                .clone()
                .ok_or_else(|| Error::State("DG normalization needs sigma_B".into()))?,
        ),
    };
    if var.len() != ustat.dim() {
        return Err(Error::State("variance vector has the wrong length".into()));
    }
    ustat
        .theta_hat
        .iter()
        .zip(&var)
        .enumerate()
        .map(|(j, (t, v))| {
            if *v > 0.0 {
                Ok(scale * t / v.sqrt())
            } else {
                Err(Error::DegenerateVariance { coord: j })
            }
        })
        .collect()
}

/// The conditional ingredients of a bootstrap run, fixed before the loop.
#[derive(Debug, Clone)]
pub struct Ingredients {
    pub ustat: IncompleteUStat,
    pub hajek: Option<HajekEstimate>,
}

/// Full run: estimate (with design stream `("design", 0)`), projection
/// (`("hajek", method)`), then `B` replicates (`("boot", b)`).
pub fn run_bootstrap(
    data: &Dataset,
    kernel: &dyn Kernel,
    scheme: &SamplingScheme,
    config: &BootstrapConfig,
    rng: &RngStream,
) -> Result<(Ingredients, BootstrapResult)> {
    config.validate()?;
    let mut design_rng = rng.substream("design", 0);
    let ustat = ustat::estimate(
        data,
        kernel,
        scheme,
        &mut design_rng,
        config.procedure.uses_ub(),
    )?;
    let hajek = match config.hajek_config() {
        Some(h) => Some(hajek::estimate(data, kernel, &h, rng)?),
        None => None,
    };
    let ingredients = Ingredients { ustat, hajek };
    let result = bootstrap_from(&ingredients, kernel.order(), config, rng)?;
    Ok((ingredients, result))
}

/// Runs the replicate loop on fixed ingredients.
pub fn bootstrap_from(
    ingredients: &Ingredients,
    r: usize,
    config: &BootstrapConfig,
    rng: &RngStream,
) -> Result<BootstrapResult> {
    config.validate()?;
    let proc_ = config.procedure;
    let u = &ingredients.ustat;
    let n = u.realization.n() as f64;
    let budget = u.realization.scheme().budget as f64;
    let alpha_n = config.alpha_n.unwrap_or(n / budget);
    let ub = if proc_.uses_ub() {
        Some(MultiplierSource::ub(u)?)
    } else {
        None
    };
    let ua = if proc_.uses_ua() {
        let h = ingredients
            .hajek
            .as_ref()
            .ok_or_else(|| Error::State(format!("{proc_} needs a Hajek projection estimate")))?;
        if h.d != u.dim() {
            return Err(Error::State(
                "projection and estimate dimensions differ".into(),
            ));
        }
        Some(MultiplierSource::ua(h, r))
    } else {
        None
    };
    let scale = if proc_.is_degenerate() {
        budget.sqrt()
    } else {
        n.sqrt()
    };
    let weight_b = if proc_.is_degenerate() {
        1.0
    } else {
        alpha_n.sqrt()
    };
    let d = u.dim();
    let b_count = config.replicates;

    let blocks: Vec<u64> = (0..b_count as u64).step_by(REPLICATE_BLOCK).collect();
    let draws: Vec<(f64, Option<Vec<f64>>)> = blocks
        .into_par_iter()
        .flat_map_iter(|start| {
            let ids: Vec<u64> =
                (start..(start + REPLICATE_BLOCK as u64).min(b_count as u64)).collect();
            let streams: Vec<RngStream> = ids.iter().map(|&b| rng.substream("boot", b)).collect();
            let g = ids.len();
            let mut v = vec![0.0; g * d];
            if let Some(src) = &ua {
                let mut rngs: Vec<RngStream> =
                    streams.iter().map(|s| s.substream("ua", 0)).collect();
                src.draw_block(&mut rngs, &mut v);
            }
            if let Some(src) = &ub {
                let mut rngs: Vec<RngStream> =
                    streams.iter().map(|s| s.substream("ub", 0)).collect();
                let mut tmp = vec![0.0; g * d];
                src.draw_block(&mut rngs, &mut tmp);
                for (x, y) in v.iter_mut().zip(&tmp) {
                    *x += weight_b * y;
                }
            }
            let store = config.store_replicates;
            let statistic = config.statistic;
            v.chunks_exact(d)
                .map(|row| (statistic.apply(row) / scale, store.then(|| row.to_vec())))
                .collect::<Vec<_>>()
        })
        .collect();

    let replicate_stats: Vec<f64> = draws.iter().map(|(s, _)| *s).collect();
    let replicate_vectors = config
        .store_replicates
        .then(|| draws.into_iter().flat_map(|(_, v)| v.unwrap()).collect());
    let sorted = sorted_copy(&replicate_stats);
    let quantile_table = config
        .alphas
        .iter()
        .map(|&alpha| QuantileEntry {
            alpha,
            critical_value: sorted[quantile_rank(alpha, b_count)],
        })
        .collect();
    Ok(BootstrapResult {
        procedure: proc_,
        statistic: config.statistic,
        replicate_stats,
        replicate_vectors,
        quantile_table,
        sigma_b_sq: ub.as_ref().map(MultiplierSource::variance_diag),
        sigma_a_sq: ua.as_ref().map(MultiplierSource::variance_diag),
        alpha_n,
        scale,
        seed_record: rng.record(),
        sorted,
    })
}
