//! Estimates of the Hajek projection `g(x) = E h(x, X_2, ..., X_r)` at the
//! sample points.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinat::{binomial, draw_binomial, sample_ranks_without_replacement, IndexSpace};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{check_input_dim, Kernel, MAX_ORDER};
use crate::reduce::column_sums;
use crate::rng::{RngStream, SeedRecord};

/// Largest leave-one-out index set the jackknife oracle enumerates.
pub const JACKKNIFE_GUARD: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HajekMethod {
    DivideConquer,
    RandomSampling,
    Jackknife,
}

impl HajekMethod {
    pub fn cli_name(self) -> &'static str {
        match self {
            HajekMethod::DivideConquer => "dc",
            HajekMethod::RandomSampling => "rs",
            HajekMethod::Jackknife => "jackknife",
        }
    }

    /// Substream index under the `"hajek"` label.
    pub fn stream_index(self) -> u64 {
        match self {
            HajekMethod::DivideConquer => 0,
            HajekMethod::RandomSampling => 1,
            HajekMethod::Jackknife => 2,
        }
    }
}

impl fmt::Display for HajekMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for HajekMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dc" => Ok(HajekMethod::DivideConquer),
            "rs" => Ok(HajekMethod::RandomSampling),
            "jackknife" => Ok(HajekMethod::Jackknife),
            other => Err(Error::Domain(format!(
                "unknown Hajek method '{other}' (expected dc, rs or jackknife)"
            ))),
        }
    }
}

/// Normalization of the random-sampling estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RsNorm {
    #[default]
    ByM,
    ByMHat,
}

impl FromStr for RsNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(RsNorm::ByM),
            "mhat" => Ok(RsNorm::ByMHat),
            other => Err(Error::Domain(format!(
                "unknown RS normalization '{other}' (expected m or mhat)"
            ))),
        }
    }
}

/// Configuration of a Hajek projection estimate. Unset sizes take the
/// suggested defaults: `L = r - 1`, `K = floor((n - 1) / L)`, `M = 2 (n - 1)` capped at
/// `C(n - 1, r - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HajekConfig {
    pub method: HajekMethod,
    /// 0-based observation indices; `None` means all of them.
    pub s1: Option<Vec<usize>>,
    pub block_count: Option<usize>,
    pub block_size: Option<usize>,
    pub rs_budget: Option<u64>,
    pub rs_norm: RsNorm,
}

impl HajekConfig {
    pub fn new(method: HajekMethod) -> Self {
        HajekConfig {
            method,
            s1: None,
            block_count: None,
            block_size: None,
            rs_budget: None,
            rs_norm: RsNorm::ByM,
        }
    }

    pub fn dc() -> Self {
        Self::new(HajekMethod::DivideConquer)
    }

    pub fn rs() -> Self {
        Self::new(HajekMethod::RandomSampling)
    }

    pub fn jackknife() -> Self {
        Self::new(HajekMethod::Jackknife)
    }

    pub fn with_blocks(mut self, count: usize, size: usize) -> Self {
        self.block_count = Some(count);
        self.block_size = Some(size);
        self
    }

    pub fn with_rs_budget(mut self, m: u64) -> Self {
        self.rs_budget = Some(m);
        self
    }

    pub fn with_rs_norm(mut self, norm: RsNorm) -> Self {
        self.rs_norm = norm;
        self
    }

    pub fn with_s1(mut self, s1: Vec<usize>) -> Self {
        self.s1 = Some(s1);
        self
    }

    /// Uses the first `n1` observations as `S_1`.
    pub fn with_s1_size(self, n1: usize) -> Self {
        self.with_s1((0..n1).collect())
    }

    /// Fills in defaults for a sample of size `n` and kernel order `r`.
    pub fn resolve(&self, n: usize, r: usize) -> Result<HajekConfig> {
        if r < 2 {
            return Err(Error::Domain(
                "Hajek projection needs kernel order >= 2".into(),
            ));
        }
        if n < r {
            return Err(Error::Domain(format!(
                "n = {n} is smaller than the kernel order {r}"
            )));
        }
        let s1 = match &self.s1 {
            Some(s) => {
                if s.is_empty() {
                    return Err(Error::Config("S1 must not be empty".into()));
                }
                if let Some(&bad) = s.iter().find(|&&i| i >= n) {
                    return Err(Error::Config(format!(
                        "S1 index {} out of range 1..={n}",
                        bad + 1
                    )));
                }
                let mut sorted = s.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::Config("S1 contains duplicates".into()));
                }
                s.clone()
            }
            None => (0..n).collect(),
        };
        let mut out = HajekConfig {
            s1: Some(s1),
            ..self.clone()
        };
        match self.method {
            HajekMethod::DivideConquer => {
                let l = self.block_size.unwrap_or(r - 1);
                if l < r - 1 || l == 0 {
                    return Err(Error::Config(format!(
                        "block size L = {l} is below r - 1 = {}",
                        r - 1
                    )));
                }
                let k = self.block_count.unwrap_or((n - 1) / l);
                if k == 0 || k * l > n - 1 {
                    return Err(Error::Config(format!(
                        "K = {k} blocks of size L = {l} do not fit in the n - 1 = {} other observations",
                        n - 1
                    )));
                }
                out.block_count = Some(k);
                out.block_size = Some(l);
            }
            HajekMethod::RandomSampling => {
                let card = binomial(n as u64 - 1, r as u64 - 1)?;
                let m = self
                    .rs_budget
                    .unwrap_or_else(|| (2 * (n as u128 - 1)).min(card) as u64);
                if m == 0 || m as u128 > card {
                    return Err(Error::Config(format!(
                        "RS budget M = {m} must be in 1..={card}"
                    )));
                }
                out.rs_budget = Some(m);
            }
            HajekMethod::Jackknife => {}
        }
        Ok(out)
    }

    fn s1_resolved(&self) -> &[usize] {
        self.s1.as_deref().expect("resolved config")
    }
}

/// Estimated projection values `g^(i1)(X_i1)` for `i1` in `S_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HajekEstimate {
    /// Row-major `n1 x d`; row order follows `config.s1`.
    pub g_hat: Vec<f64>,
    pub g_bar: Vec<f64>,
    pub n1: usize,
    pub d: usize,
    /// Resolved configuration.
    pub config: HajekConfig,
    /// Realized RS design size `M^`.
    pub m_hat: Option<u64>,
    pub seed_record: Option<SeedRecord>,
}

impl HajekEstimate {
    fn from_rows(g_hat: Vec<f64>, d: usize, config: HajekConfig) -> Self {
        let n1 = g_hat.len() / d;
        let g_bar = column_sums(&g_hat, d)
            .into_iter()
            .map(|s| s / n1 as f64)
            .collect();
        HajekEstimate {
            g_hat,
            g_bar,
            n1,
            d,
            config,
            m_hat: None,
            seed_record: None,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.g_hat[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.g_hat.chunks_exact(self.d)
    }
}

/// The order-preserving bijection `{1..n-1} -> {1..n} \ {i1}` (1-based).
pub fn sigma_skip(i1: usize, ell: usize, n: usize) -> Result<usize> {
    if i1 == 0 || i1 > n || ell == 0 || ell >= n {
        return Err(Error::Domain(format!(
            "sigma_skip({i1}, {ell}) out of range for n = {n}"
        )));
    }
    Ok(skip(i1, ell))
}

#[inline]
fn skip(i1: usize, ell: usize) -> usize {
    if ell < i1 {
        ell
    } else {
        ell + 1
    }
}

fn check(data: &Dataset, kernel: &dyn Kernel) -> Result<()> {
    let r = kernel.order();
    if r > MAX_ORDER {
        return Err(Error::Domain(format!("kernel order {r} unsupported")));
    }
    check_input_dim(kernel, data.p())
}

/// `h(X_i1, X_rest)` with `rest` given as 0-based row indices.
#[inline]
fn eval_with(data: &Dataset, kernel: &dyn Kernel, i1: usize, rest: &[u32], out: &mut [f64]) {
    let mut args: [&[f64]; MAX_ORDER] = [&[]; MAX_ORDER];
    args[0] = data.row(i1);
    for (slot, &i) in args[1..].iter_mut().zip(rest) {
        *slot = data.row(i as usize);
    }
    kernel.eval(&args[..rest.len() + 1], out);
}

fn fill_rows<F>(s1: &[usize], d: usize, row: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let mut g = vec![0.0; s1.len() * d];
    g.par_chunks_mut(d)
        .zip(s1.par_iter())
        .for_each(|(out, &i1)| row(i1, out));
    g
}

/// Divide-and-conquer estimate: the other indices in increasing order are cut
/// into `K` consecutive blocks of size `L`, each block contributes the
/// order-`(r-1)` U-statistic of its members, and the blocks are averaged.
pub fn estimate_dc(
    data: &Dataset,
    kernel: &dyn Kernel,
    config: &HajekConfig,
) -> Result<HajekEstimate> {
    check(data, kernel)?;
    let config = HajekConfig {
        method: HajekMethod::DivideConquer,
        ..config.clone()
    };
    let cfg = config.resolve(data.n(), kernel.order())?;
    let (k, l) = (cfg.block_count.unwrap(), cfg.block_size.unwrap());
    let r1 = kernel.order() - 1;
    let block = IndexSpace::new(l, r1)?;
    let per_block = block.cardinality() as f64;
    let d = kernel.output_dim();
    let g = fill_rows(cfg.s1_resolved(), d, |i1, out| {
        let mut buf = vec![0.0; d];
        let mut block_sum = vec![0.0; d];
        let mut idx = [0u32; MAX_ORDER];
        out.fill(0.0);
        for b in 0..k {
            block_sum.fill(0.0);
            block.iter_from(0).visit(usize::MAX, |local| {
                for (slot, &t) in idx.iter_mut().zip(local) {
                    // Block b holds the (b*L + 1)-th .. ((b+1)*L)-th other indices.
                    *slot = (skip(i1 + 1, b * l + t as usize + 1) - 1) as u32;
                }
                eval_with(data, kernel, i1, &idx[..r1], &mut buf);
                for (s, v) in block_sum.iter_mut().zip(&buf) {
                    *s += v;
                }
            });
            for (o, s) in out.iter_mut().zip(&block_sum) {
                *o += s / per_block;
            }
        }
        out.iter_mut().for_each(|o| *o /= k as f64);
    });
    Ok(HajekEstimate::from_rows(g, d, cfg))
}

/// Random-sampling estimate. One Bernoulli design over `I_{n-1,r-1}` is drawn
/// from `rng` and shared by every `i1` through [`sigma_skip`].
pub fn estimate_rs(
    data: &Dataset,
    kernel: &dyn Kernel,
    config: &HajekConfig,
    rng: &mut RngStream,
) -> Result<HajekEstimate> {
    check(data, kernel)?;
    let config = HajekConfig {
        method: HajekMethod::RandomSampling,
        ..config.clone()
    };
    let cfg = config.resolve(data.n(), kernel.order())?;
    let m = cfg.rs_budget.unwrap();
    let r1 = kernel.order() - 1;
    let space = IndexSpace::new(data.n() - 1, r1)?;
    let record = rng.record();
    let card = space.cardinality();
    let m_hat = draw_binomial(card, m as f64 / card as f64, rng)?;
    let ranks = sample_ranks_without_replacement(card, m_hat, rng)?;
    if m_hat == 0 && cfg.rs_norm == RsNorm::ByMHat {
        return Err(Error::EmptyDesign);
    }
    let mut design = vec![0u32; ranks.len() * r1];
    for (slot, &rank) in design.chunks_exact_mut(r1).zip(&ranks) {
        space.unrank_into(rank, slot)?;
    }
    let divisor = match cfg.rs_norm {
        RsNorm::ByM => m as f64,
        RsNorm::ByMHat => m_hat as f64,
    };
    let d = kernel.output_dim();
    let g = fill_rows(cfg.s1_resolved(), d, |i1, out| {
        let mut buf = vec![0.0; d];
        let mut idx = [0u32; MAX_ORDER];
        out.fill(0.0);
        for t in design.chunks_exact(r1) {
            for (slot, &ell) in idx.iter_mut().zip(t) {
                *slot = (skip(i1 + 1, ell as usize + 1) - 1) as u32;
            }
            eval_with(data, kernel, i1, &idx[..r1], &mut buf);
            for (o, v) in out.iter_mut().zip(&buf) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= divisor);
    });
    let mut est = HajekEstimate::from_rows(g, d, cfg);
    est.m_hat = Some(m_hat as u64);
    est.seed_record = Some(record);
    Ok(est)
}

/// Exact leave-one-out average of `h(X_i1, .)` over all `(r-1)`-subsets of
/// the remaining observations, for each `i1` in `s1` (all when `None`).
pub fn jackknife_oracle(
    data: &Dataset,
    kernel: &dyn Kernel,
    s1: Option<&[usize]>,
) -> Result<HajekEstimate> {
    check(data, kernel)?;
    let mut config = HajekConfig::jackknife();
    config.s1 = s1.map(<[usize]>::to_vec);
    let cfg = config.resolve(data.n(), kernel.order())?;
    let r1 = kernel.order() - 1;
    let space = IndexSpace::new(data.n() - 1, r1)?;
    let card = space.cardinality();
    if card > JACKKNIFE_GUARD {
        return Err(Error::Budget(format!(
            "jackknife over {card} leave-one-out tuples exceeds the limit {JACKKNIFE_GUARD}"
        )));
    }
    let d = kernel.output_dim();
    let g = fill_rows(cfg.s1_resolved(), d, |i1, out| {
        let mut buf = vec![0.0; d];
        let mut idx = [0u32; MAX_ORDER];
        out.fill(0.0);
        space.iter_from(0).visit(usize::MAX, |t| {
            for (slot, &ell) in idx.iter_mut().zip(t) {
                *slot = (skip(i1 + 1, ell as usize + 1) - 1) as u32;
            }
            eval_with(data, kernel, i1, &idx[..r1], &mut buf);
            for (o, v) in out.iter_mut().zip(&buf) {
                *o += v;
            }
        });
        out.iter_mut().for_each(|o| *o /= card as f64);
    });
    Ok(HajekEstimate::from_rows(g, d, cfg))
}

/// Dispatches on `config.method`. The RS design uses the substream
/// `("hajek", 1)` of `rng`.
pub fn estimate(
    data: &Dataset,
    kernel: &dyn Kernel,
    config: &HajekConfig,
    rng: &RngStream,
) -> Result<HajekEstimate> {
    match config.method {
        HajekMethod::DivideConquer => estimate_dc(data, kernel, config),
        HajekMethod::RandomSampling => {
            let mut sub = rng.substream("hajek", config.method.stream_index());
            estimate_rs(data, kernel, config, &mut sub)
        }
        HajekMethod::Jackknife => jackknife_oracle(data, kernel, config.s1.as_deref()),
    }
}
