//! Monte Carlo harness: data generators, empirical size, P-P diagnostics,
//! the copula-correlation experiment and timing fits.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{MultiplierSource, Procedure};
use crate::combinat::IndexSpace;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::infer::{self, default_procedure, TestConfig};
use crate::kernels::{Kernel, PairwiseKernel, RankKernel, MAX_ORDER};
use crate::rng::RngStream;
use crate::ustat::{self, eval_at, SamplingScheme, SamplingVariant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Generator {
    /// Every entry i.i.d. noncentral t.
    NoncentralT { df: f64, ncp: f64 },
    /// Two jointly normal columns with unit variances.
    GaussianPair { correlation: f64 },
    /// Every entry i.i.d. uniform on (0, 1).
    IidUniform,
}

impl Generator {
    /// True when all coordinates are independent, so every rank kernel has mean zero.
    pub fn is_null(&self) -> bool {
        match *self {
            Generator::GaussianPair { correlation } => correlation == 0.0,
            _ => true,
        }
    }
}

/// Draws an `n x p` dataset.
pub fn generate(gen: &Generator, n: usize, p: usize, rng: &mut RngStream) -> Result<Dataset> {
    if n == 0 || p == 0 {
        return Err(Error::Domain("generator needs n >= 1 and p >= 1".into()));
    }
    let values: Vec<f64> = match *gen {
        Generator::NoncentralT { df, ncp } => {
            if !(df > 0.0 && df.is_finite() && ncp.is_finite()) {
                return Err(Error::Domain(format!(
                    "invalid noncentral t parameters df = {df}, ncp = {ncp}"
                )));
            }
            let chi = ChiSquared::new(df).map_err(|e| Error::Domain(e.to_string()))?;
            (0..n * p)
                .map(|_| {
                    let z: f64 = rng.sample::<f64, _>(StandardNormal) + ncp;
                    z / (chi.sample(rng) / df).sqrt()
                })
                .collect()
        }
        Generator::GaussianPair { correlation: a } => {
            if p != 2 {
                return Err(Error::Domain(format!(
                    "GaussianPair produces p = 2 columns, got p = {p}"
                )));
            }
            if a.abs() >= 1.0 || a.is_nan() {
                return Err(Error::Domain(format!("correlation {a} outside (-1, 1)")));
            }
            let c = (1.0 - a * a).sqrt();
            (0..n)
                .flat_map(|_| {
                    let z1: f64 = rng.sample(StandardNormal);
                    let z2: f64 = rng.sample(StandardNormal);
                    [z1, a * z1 + c * z2]
                })
                .collect()
        }
        Generator::IidUniform => (0..n * p).map(|_| rng.random::<f64>()).collect(),
    };
    Dataset::new(n, p, values)
}

/// Budget as a function of `n`: `coef * n^exp`, floored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetRule {
    pub coef: f64,
    pub exp: f64,
}

impl BudgetRule {
    pub fn literal(n: u64) -> Self {
        BudgetRule {
            coef: n as f64,
            exp: 0.0,
        }
    }

    pub fn linear(coef: f64) -> Self {
        BudgetRule { coef, exp: 1.0 }
    }

    pub fn power(coef: f64, exp: f64) -> Self {
        BudgetRule { coef, exp }
    }

    pub fn eval(&self, n: usize) -> Result<u64> {
        let x = self.coef * (n as f64).powf(self.exp);
        // Guard against 3999.9999... for exact values.
        let v = (x * (1.0 + 1e-12)).floor();
        if !(v >= 1.0 && v < u64::MAX as f64) {
            return Err(Error::Config(format!(
                "budget rule gives N = {x} at n = {n}"
            )));
        }
        Ok(v as u64)
    }
}

impl fmt::Display for BudgetRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0.0 {
            write!(f, "{}", self.coef)
        } else if self.exp == 1.0 {
            write!(f, "{}n", self.coef)
        } else {
            write!(f, "{}n^{}", self.coef, self.exp)
        }
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => s.trim().parse().ok(),
    }
    .filter(|v: &f64| v.is_finite())
}

impl FromStr for BudgetRule {
    type Err = Error;

    /// Accepts `600`, `2n`, `n`, `n^4/3`, `4n^3/2`, `2.5*n^1.5`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "cannot parse budget '{s}' (try 600, 2n, n^4/3 or 4n^3/2)"
            ))
        };
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let Some(pos) = t.find('n') else {
            let v: u64 = t.parse().map_err(|_| bad())?;
            return Ok(BudgetRule::literal(v));
        };
        let coef = match t[..pos].trim_end_matches('*') {
            "" => 1.0,
            c => parse_number(c).ok_or_else(bad)?,
        };
        let exp = match &t[pos + 1..] {
            "" => 1.0,
            rest => parse_number(rest.strip_prefix('^').ok_or_else(bad)?).ok_or_else(bad)?,
        };
        if coef <= 0.0 {
            return Err(bad());
        }
        Ok(BudgetRule { coef, exp })
    }
}

/// Default level grid: 0.01 to 0.10 by 0.005, then 0.15 to 0.95 by 0.05.
pub fn default_alpha_grid() -> Vec<f64> {
    (2..=20)
        .map(|k| k as f64 / 200.0)
        .chain((3..=19).map(|k| k as f64 / 20.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub generator: Generator,
    pub n: usize,
    pub p: usize,
    pub kernel: RankKernel,
    pub sampling: SamplingVariant,
    pub budget: BudgetRule,
    pub test: TestConfig,
    pub reps: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Noncentral t(3, 2) data with the test's default level grid.
    pub fn new(
        kernel: RankKernel,
        n: usize,
        p: usize,
        budget: BudgetRule,
        reps: usize,
        seed: u64,
    ) -> Self {
        ExperimentSpec {
            generator: Generator::NoncentralT { df: 3.0, ncp: 2.0 },
            n,
            p,
            kernel,
            sampling: SamplingVariant::BernoulliRandomNorm,
            budget,
            test: TestConfig::default().with_alphas(default_alpha_grid()),
            reps,
            seed,
        }
    }

    pub fn scheme(&self) -> Result<SamplingScheme> {
        Ok(SamplingScheme::new(
            self.sampling,
            self.budget.eval(self.n)?,
        ))
    }

    pub fn procedure(&self) -> Procedure {
        self.test
            .procedure
            .unwrap_or_else(|| default_procedure(self.kernel))
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if self.test.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::Config("alpha grid must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn rep_stream(&self, i: usize) -> RngStream {
        RngStream::new(self.seed).substream("rep", i as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub alpha: f64,
    pub rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub rows: Vec<SizeRow>,
    pub rejections: Vec<u64>,
    /// `max |R(alpha) - alpha|` over grid levels in `[0.01, 0.10]`.
    pub uniform_error: f64,
    pub reps: usize,
    pub mean_seconds_per_rep: f64,
}

impl SizeReport {
    pub fn rate(&self, alpha: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| (r.alpha - alpha).abs() < 1e-12)
            .map(|r| r.rejection_rate)
    }
}

/// `sup |R(alpha) - alpha|` over `alpha` in `[lo, hi]` on the grid.
pub fn uniform_error(rows: &[SizeRow], lo: f64, hi: f64) -> f64 {
    rows.iter()
        .filter(|r| r.alpha >= lo - 1e-12 && r.alpha <= hi + 1e-12)
        .map(|r| (r.rejection_rate - r.alpha).abs())
        .fold(0.0, f64::max)
}

/// Empirical rejection rates over `spec.reps` independent replications.
pub fn run_size_experiment(spec: &ExperimentSpec) -> Result<SizeReport> {
    spec.validate()?;
    let scheme = spec.scheme()?;
    let start = Instant::now();
    let per_rep: Vec<Vec<bool>> = (0..spec.reps)
        .into_par_iter()
        .map(|i| {
            let stream = spec.rep_stream(i);
            let data = generate(
                &spec.generator,
                spec.n,
                spec.p,
                &mut stream.substream("data", 0),
            )?;
            let res = infer::pairwise_independence_test(
                &data,
                spec.kernel,
                &scheme,
                &spec.test,
                &stream.substream("test", 0),
            )?;
            Ok(res.decisions.iter().map(|d| d.reject).collect())
        })
        .collect::<Result<_>>()?;
    let elapsed = start.elapsed().as_secs_f64();
    let levels = spec.test.alphas.len();
    let rejections: Vec<u64> = (0..levels)
        .map(|k| per_rep.iter().filter(|r| r[k]).count() as u64)
        .collect();
    let rows: Vec<SizeRow> = spec
        .test
        .alphas
        .iter()
        .zip(&rejections)
        .map(|(&alpha, &c)| SizeRow {
            alpha,
            rejection_rate: c as f64 / spec.reps as f64,
        })
        .collect();
    let report = SizeReport {
        uniform_error: uniform_error(&rows, 0.01, 0.10),
        rows,
        rejections,
        reps: spec.reps,
        mean_seconds_per_rep: elapsed / spec.reps as f64,
    };
    info!(
        "size experiment {} n={} p={}: uniform error {:.4} over {} reps",
        spec.kernel, spec.n, spec.p, report.uniform_error, spec.reps
    );
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpPoint {
    pub emp: f64,
    pub reference: f64,
}

/// P-P pairs `(F_emp(x_k), F_ref(x_k))` at the reference quantiles
/// `x_k = F_ref^{-1}(k / (grid + 1))`, `k = 1..=grid`.
pub fn pp_pairs(emp: &[f64], reference: &[f64], grid: usize) -> Vec<PpPoint> {
    let mut e = emp.to_vec();
    let mut r = reference.to_vec();
    e.sort_by(f64::total_cmp);
    r.sort_by(f64::total_cmp);
    let ecdf = |s: &[f64], x: f64| s.partition_point(|&v| v <= x) as f64 / s.len() as f64;
    (1..=grid)
        .map(|k| {
            let u = k as f64 / (grid + 1) as f64;
            let idx = ((u * r.len() as f64).ceil() as usize).clamp(1, r.len()) - 1;
            let x = r[idx];
            PpPoint {
                emp: ecdf(&e, x),
                reference: ecdf(&r, x),
            }
        })
        .collect()
}

pub fn max_pp_deviation(points: &[PpPoint]) -> f64 {
    points
        .iter()
        .map(|p| (p.emp - p.reference).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpSettings {
    pub reference_reps: usize,
    pub grid: usize,
    /// Size of the auxiliary sample for the covariance plug-ins.
    pub aux_size: usize,
    /// Random tuples used for the kernel covariance.
    pub aux_tuples: usize,
    /// Partner tuples per point for the projection covariance.
    pub aux_partners: usize,
}

impl Default for PpSettings {
    fn default() -> Self {
        PpSettings {
            reference_reps: 2000,
            grid: 99,
            aux_size: 2000,
            aux_tuples: 20_000,
            aux_partners: 1000,
        }
    }
}

/// Upper bound on kernel evaluations spent on the reference covariance.
pub const PP_EVAL_GUARD: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpData {
    pub points: Vec<PpPoint>,
    pub max_deviation: f64,
    /// Scaled max statistics from the replications.
    pub empirical: Vec<f64>,
}

/// P-P comparison of the scaled max statistic against its Gaussian limit.
///
/// The limit has covariance `r^2 Gamma_g + alpha_n Gamma_h` (`Gamma_h` for
/// MB-DG, `r^2 Gamma_g` for the partial procedure), with both matrices
/// estimated on an independent auxiliary sample: `Gamma_h` from random tuples
/// and `Gamma_g` from Monte Carlo conditional means with fresh partners.
pub fn pp_plot_data(spec: &ExperimentSpec, settings: &PpSettings) -> Result<PpData> {
    spec.validate()?;
    if !spec.generator.is_null() {
        return Err(Error::Config(
            "P-P data needs a generator with independent coordinates".into(),
        ));
    }
    let kernel = PairwiseKernel::new(spec.kernel, spec.p)?;
    let r = kernel.order();
    let scheme = spec.scheme()?;
    let procedure = spec.procedure();
    let n = spec.n as f64;
    let budget = scheme.budget as f64;
    let alpha_n = n / budget;
    let scale = if procedure.is_degenerate() {
        budget.sqrt()
    } else {
        n.sqrt()
    };
    let statistic = spec.test.statistic;

    let evals = settings.aux_tuples as u64
        + if procedure.uses_ua() {
            (settings.aux_size * settings.aux_partners) as u64
        } else {
            0
        };
    if evals > PP_EVAL_GUARD {
        return Err(Error::Budget(format!(
            "reference covariance needs {evals} kernel evaluations, limit {PP_EVAL_GUARD}"
        )));
    }
    if settings.aux_size <= r
        || settings.aux_tuples < 2
        || settings.reference_reps == 0
        || settings.grid == 0
    {
        return Err(Error::Config("P-P settings too small".into()));
    }

    let empirical: Vec<f64> = (0..spec.reps)
        .into_par_iter()
        .map(|i| {
            let stream = spec.rep_stream(i);
            let data = generate(
                &spec.generator,
                spec.n,
                spec.p,
                &mut stream.substream("data", 0),
            )?;
            let u = ustat::estimate(
                &data,
                &kernel,
                &scheme,
                &mut stream.substream("design", 0),
                false,
            )?;
            Ok(statistic.apply(&u.theta_hat) * scale)
        })
        .collect::<Result<_>>()?;

    let root = RngStream::new(spec.seed).substream("pp", 0);
    let aux = generate(
        &spec.generator,
        settings.aux_size,
        spec.p,
        &mut root.substream("aux", 0),
    )?;
    let d = kernel.output_dim();
    let space = IndexSpace::new(settings.aux_size, r)?;

    let h_src = if procedure.uses_ub() {
        let mut rng = root.substream("gamma-h", 0);
        let ranks: Vec<u128> = (0..settings.aux_tuples)
            .map(|_| rng.random_range(0..space.cardinality()))
            .collect();
        let mut rows = vec![0.0; settings.aux_tuples * d];
        rows.par_chunks_mut(d)
            .zip(ranks.par_iter())
            .try_for_each(|(out, &rank)| {
                let mut idx = [0u32; MAX_ORDER];
                space.unrank_into(rank, &mut idx[..r])?;
                eval_at(&aux, &kernel, &idx[..r], out);
                Ok::<_, Error>(())
            })?;
        let weight = if procedure.is_degenerate() {
            1.0
        } else {
            alpha_n
        };
        Some(MultiplierSource::centered(
            &rows,
            d,
            weight,
            settings.aux_tuples as f64,
        ))
    } else {
        None
    };

    let g_src = if procedure.uses_ua() {
        let partners = IndexSpace::new(settings.aux_size - 1, r - 1)?;
        let g_root = root.substream("gamma-g", 0);
        let mut rows = vec![0.0; settings.aux_size * d];
        rows.par_chunks_mut(d)
            .enumerate()
            .try_for_each(|(i, out)| {
                let mut rng = g_root.substream("point", i as u64);
                let mut buf = vec![0.0; d];
                let mut local = [0u32; MAX_ORDER];
                let mut idx = [0u32; MAX_ORDER];
                for _ in 0..settings.aux_partners {
                    partners.unrank_into(
                        rng.random_range(0..partners.cardinality()),
                        &mut local[..r - 1],
                    )?;
                    idx[0] = i as u32;
                    for (slot, &l) in idx[1..r].iter_mut().zip(&local[..r - 1]) {
                        *slot = if (l as usize) < i { l } else { l + 1 };
                    }
                    eval_at(&aux, &kernel, &idx[..r], &mut buf);
                    for (o, v) in out.iter_mut().zip(&buf) {
                        *o += v;
                    }
                }
                out.iter_mut()
                    .for_each(|o| *o /= settings.aux_partners as f64);
                Ok::<_, Error>(())
            })?;
        Some(MultiplierSource::centered(
            &rows,
            d,
            (r * r) as f64,
            settings.aux_size as f64,
        ))
    } else {
        None
    };

    let reference: Vec<f64> = (0..settings.reference_reps as u64)
        .into_par_iter()
        .map(|b| {
            let s = root.substream("ref", b);
            let mut v = vec![0.0; d];
            let mut tmp = vec![0.0; d];
            if let Some(src) = &g_src {
                src.draw_into(&mut s.substream("g", 0), &mut v);
            }
            if let Some(src) = &h_src {
                src.draw_into(&mut s.substream("h", 0), &mut tmp);
                v.iter_mut().zip(&tmp).for_each(|(x, y)| *x += y);
            }
            statistic.apply(&v)
        })
        .collect();

    let points = pp_pairs(&empirical, &reference, settings.grid);
    Ok(PpData {
        max_deviation: max_pp_deviation(&points),
        points,
        empirical,
    })
}

/// `(6 / pi) asin(a / 2)`, Spearman's rho of a Gaussian copula.
pub fn gaussian_spearman_rho(a: f64) -> f64 {
    6.0 / std::f64::consts::PI * (a / 2.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaRow {
    pub rep: usize,
    pub n_hat: usize,
    pub theta_random: f64,
    pub theta_deterministic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let variance = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Moments {
            mean,
            variance,
            std_error: (variance / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Equal-width histogram over `[lo, hi]`; values outside are clamped to the end bins.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<HistBin> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistBin {
            lower: lo + k as f64 * width,
            upper: lo + (k + 1) as f64 * width,
            count,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaSummary {
    pub correlation: f64,
    pub theta0: f64,
    pub n: usize,
    pub budget: u64,
    pub random: Moments,
    pub deterministic: Moments,
    /// Histograms of `sqrt(n) (theta - theta0)` on a shared range.
    pub hist_random: Vec<HistBin>,
    pub hist_deterministic: Vec<HistBin>,
    pub rows: Vec<CopulaRow>,
}

/// Spearman estimates on bivariate normal data, with both normalizations
/// evaluated on the same Bernoulli design in each replication.
pub fn copula_experiment(
    a: f64,
    n: usize,
    budget: u64,
    reps: usize,
    seed: u64,
) -> Result<CopulaSummary> {
    if a.abs() >= 1.0 || a.is_nan() {
        return Err(Error::Domain(format!("correlation {a} outside (-1, 1)")));
    }
    if reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    let kernel = PairwiseKernel::new(RankKernel::Spearman, 2)?;
    let scheme = SamplingScheme::new(SamplingVariant::BernoulliRandomNorm, budget);
    let gen = Generator::GaussianPair { correlation: a };
    let root = RngStream::new(seed);
    let rows: Vec<CopulaRow> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let s = root.substream("rep", i as u64);
            let data = generate(&gen, n, 2, &mut s.substream("data", 0))?;
            let u = ustat::estimate(
                &data,
                &kernel,
                &scheme,
                &mut s.substream("design", 0),
                false,
            )?;
            let n_hat = u.n_hat();
            Ok(CopulaRow {
                rep: i,
                n_hat,
                theta_random: u.sample_mean[0],
                theta_deterministic: u.sample_mean[0] * n_hat as f64 / budget as f64,
            })
        })
        .collect::<Result<_>>()?;
    let theta0 = gaussian_spearman_rho(a);
    let rand: Vec<f64> = rows.iter().map(|r| r.theta_random).collect();
    let det: Vec<f64> = rows.iter().map(|r| r.theta_deterministic).collect();
    let sn = (n as f64).sqrt();
    let z_rand: Vec<f64> = rand.iter().map(|t| sn * (t - theta0)).collect();
    let z_det: Vec<f64> = det.iter().map(|t| sn * (t - theta0)).collect();
    let lo = z_rand
        .iter()
        .chain(&z_det)
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = z_rand
        .iter()
        .chain(&z_det)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    };
    Ok(CopulaSummary {
        correlation: a,
        theta0,
        n,
        budget,
        random: Moments::of(&rand),
        deterministic: Moments::of(&det),
        hist_random: histogram(&z_rand, lo, hi, 30),
        hist_deterministic: histogram(&z_det, lo, hi, 30),
        rows,
    })
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingPoint {
    pub n: usize,
    pub p: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub points: Vec<TimingPoint>,
    /// Slope of `log(seconds)` on `log(n)`.
    pub slope: f64,
    pub intercept: f64,
    pub parallel: bool,
}

/// Fits the log-log slope of `timer(n)` (median of `runs` calls per point).
pub fn fit_timings<F>(ns: &[usize], p: usize, runs: usize, mut timer: F) -> Result<TimingReport>
where
    F: FnMut(usize) -> Result<f64>,
{
    if ns.len() < 3 {
        return Err(Error::Config(
            "timing fit needs at least 3 sample sizes".into(),
        ));
    }
    let runs = runs.max(1);
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut t: Vec<f64> = (0..runs).map(|_| timer(n)).collect::<Result<_>>()?;
        t.sort_by(f64::total_cmp);
        points.push(TimingPoint {
            n,
            p,
            seconds: t[runs / 2],
        });
    }
    let xs: Vec<f64> = points.iter().map(|q| (q.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|q| q.seconds.ln()).collect();
    let (slope, intercept) = ols(&xs, &ys);
    Ok(TimingReport {
        points,
        slope,
        intercept,
        parallel: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub ns: Vec<usize>,
    pub p: usize,
    pub kernel: RankKernel,
    pub sampling: SamplingVariant,
    pub budget: BudgetRule,
    pub test: TestConfig,
    pub runs: usize,
    pub seed: u64,
    /// Time with the ambient thread pool instead of a single thread.
    pub parallel: bool,
}

/// Wall time of the full test (estimate, projection, bootstrap) per `n`.
pub fn timing_bench(spec: &BenchSpec) -> Result<TimingReport> {
    let pool = if spec.parallel {
        None
    } else {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?,
        )
    };
    let gen = Generator::NoncentralT { df: 3.0, ncp: 2.0 };
    let mut run = |n: usize| -> Result<f64> {
        let root = RngStream::new(spec.seed).substream("bench", n as u64);
        let data = generate(&gen, n, spec.p, &mut root.substream("data", 0))?;
        let scheme = SamplingScheme::new(spec.sampling, spec.budget.eval(n)?);
        let body = || {
            let t = Instant::now();
            infer::pairwise_independence_test(&data, spec.kernel, &scheme, &spec.test, &root)?;
            Ok(t.elapsed().as_secs_f64())
        };
        match &pool {
            Some(p) => p.install(body),
            None => body(),
        }
    };
    let mut report = fit_timings(&spec.ns, spec.p, spec.runs, &mut run)?;
    report.parallel = spec.parallel;
    info!(
        "timing slope {:.3} for {} over n = {:?}",
        report.slope, spec.kernel, spec.ns
    );
    Ok(report)
}

/// Mean of noncentral t(df, ncp), for `df > 1`.
pub fn noncentral_t_mean(df: f64, ncp: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ncp * (df / 2.0).sqrt() * (ln_gamma((df - 1.0) / 2.0) - ln_gamma(df / 2.0)).exp()
}
