//! Complete and randomized incomplete U-statistics.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinat::{draw_binomial, sample_ranks_without_replacement, IndexSpace};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{check_input_dim, Kernel, MAX_ORDER};
use crate::reduce::{column_sums, tree_sum, CHUNK};
use crate::rng::{RngStream, SeedRecord};

/// Largest index set `complete_ustat` will enumerate.
pub const COMPLETE_GUARD: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingVariant {
    /// Bernoulli sampling, divided by the realized count.
    BernoulliRandomNorm,
    /// Bernoulli sampling, divided by the budget.
    BernoulliDeterministicNorm,
    /// `N` i.i.d. uniform tuples.
    WithReplacement,
}

impl SamplingVariant {
    pub fn is_bernoulli(self) -> bool {
        !matches!(self, SamplingVariant::WithReplacement)
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            SamplingVariant::BernoulliRandomNorm => "bernoulli",
            SamplingVariant::BernoulliDeterministicNorm => "bernoulli-det",
            SamplingVariant::WithReplacement => "replacement",
        }
    }
}

impl fmt::Display for SamplingVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for SamplingVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(SamplingVariant::BernoulliRandomNorm),
            "bernoulli-det" => Ok(SamplingVariant::BernoulliDeterministicNorm),
            "replacement" => Ok(SamplingVariant::WithReplacement),
            other => Err(Error::Domain(format!(
                "unknown sampling scheme '{other}' (expected bernoulli, bernoulli-det or replacement)"
            ))),
        }
    }
}

/// A sampling scheme with its computational budget `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingScheme {
    pub variant: SamplingVariant,
    pub budget: u64,
}

impl SamplingScheme {
    pub fn new(variant: SamplingVariant, budget: u64) -> Self {
        SamplingScheme { variant, budget }
    }

    pub fn bernoulli(budget: u64) -> Self {
        Self::new(SamplingVariant::BernoulliRandomNorm, budget)
    }

    /// Checks the budget against `space` and returns the inclusion probability
    /// for Bernoulli variants.
    pub fn validate(&self, space: &IndexSpace) -> Result<Option<f64>> {
        if self.budget == 0 {
            return Err(Error::Config("budget N must be positive".into()));
        }
        if !self.variant.is_bernoulli() {
            return Ok(None);
        }
        let card = space.cardinality();
        if self.budget as u128 > card {
            return Err(Error::Config(format!(
                "budget N = {} exceeds the {} available tuples",
                self.budget, card
            )));
        }
        let p = self.budget as f64 / card as f64;
        if p > 0.5 {
            warn!("Bernoulli inclusion probability {p:.3} exceeds 1/2");
        }
        Ok(Some(p))
    }
}

/// The realized random design: which tuples were drawn and how to normalize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRealization {
    n: usize,
    r: usize,
    /// Row-major `len x r`, 0-based.
    tuples: Vec<u32>,
    scheme: SamplingScheme,
    seed_record: Option<SeedRecord>,
}

impl SamplingRealization {
    /// Builds a realization from explicit tuples (0-based, each increasing).
    pub fn from_tuples(n: usize, scheme: SamplingScheme, tuples: &[Vec<usize>]) -> Result<Self> {
        let r = tuples.first().map_or(0, Vec::len);
        let space = IndexSpace::new(n, r.max(1))?;
        let mut flat = Vec::with_capacity(tuples.len() * r);
        for t in tuples {
            space.rank(t)?;
            flat.extend(t.iter().map(|&v| v as u32));
        }
        if scheme.variant.is_bernoulli() {
            let mut sorted = tuples.to_vec();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Domain(
                    "Bernoulli designs cannot repeat a tuple".into(),
                ));
            }
        } else if tuples.len() as u64 != scheme.budget {
            return Err(Error::Domain(format!(
                "with-replacement design needs exactly N = {} tuples",
                scheme.budget
            )));
        }
        Ok(SamplingRealization {
            n,
            r: space.r(),
            tuples: flat,
            scheme,
            seed_record: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn scheme(&self) -> &SamplingScheme {
        &self.scheme
    }

    pub fn seed_record(&self) -> Option<&SeedRecord> {
        self.seed_record.as_ref()
    }

    /// Number of realized tuples, `N^` (equal to `N` with replacement).
    pub fn n_hat(&self) -> usize {
        self.tuples.len() / self.r
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    #[inline]
    pub fn tuple(&self, i: usize) -> &[u32] {
        &self.tuples[i * self.r..(i + 1) * self.r]
    }

    pub fn tuples(&self) -> impl Iterator<Item = &[u32]> {
        self.tuples.chunks_exact(self.r)
    }

    /// Divisor of the estimator: `N^` under random normalization, else `N`.
    pub fn divisor(&self) -> f64 {
        match self.scheme.variant {
            SamplingVariant::BernoulliRandomNorm => self.n_hat() as f64,
            _ => self.scheme.budget as f64,
        }
    }

    /// Divisor of the bootstrap's centered sum: `N^` for Bernoulli, `N` with replacement.
    pub fn bootstrap_divisor(&self) -> f64 {
        if self.scheme.variant.is_bernoulli() {
            self.n_hat() as f64
        } else {
            self.scheme.budget as f64
        }
    }
}

/// An incomplete U-statistic with the design that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompleteUStat {
    /// The estimate, divided per the scheme's normalization.
    pub theta_hat: Vec<f64>,
    /// Plain average of the realized kernel values (sum / `N^`); equals
    /// `theta_hat` except under deterministic normalization.
    pub sample_mean: Vec<f64>,
    pub realization: SamplingRealization,
    /// Row-major `N^ x d` kernel values, kept only on request.
    #[serde(skip)]
    pub kernel_evals: Option<Vec<f64>>,
}

impl IncompleteUStat {
    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn n_hat(&self) -> usize {
        self.realization.n_hat()
    }
}

#[inline]
pub(crate) fn eval_at(data: &Dataset, kernel: &dyn Kernel, idx: &[u32], out: &mut [f64]) {
    let mut args: [&[f64]; MAX_ORDER] = [&[]; MAX_ORDER];
    for (slot, &i) in args.iter_mut().zip(idx) {
        *slot = data.row(i as usize);
    }
    kernel.eval(&args[..idx.len()], out);
}

fn check_kernel(data: &Dataset, kernel: &dyn Kernel) -> Result<()> {
    let r = kernel.order();
    if r == 0 || r > MAX_ORDER {
        return Err(Error::Domain(format!("kernel order {r} unsupported")));
    }
    if data.n() < r {
        return Err(Error::Domain(format!(
            "n = {} is smaller than the kernel order {r}",
            data.n()
        )));
    }
    check_input_dim(kernel, data.p())
}

/// The complete U-statistic, averaging over every increasing `r`-tuple.
pub fn complete_ustat(data: &Dataset, kernel: &dyn Kernel) -> Result<Vec<f64>> {
    check_kernel(data, kernel)?;
    let space = IndexSpace::new(data.n(), kernel.order())?;
    let card = space.cardinality();
    if card > COMPLETE_GUARD {
        return Err(Error::Budget(format!(
            "complete U-statistic over {card} tuples exceeds the limit {COMPLETE_GUARD}"
        )));
    }
    let d = kernel.output_dim();
    let mut sums = tree_sum(card as usize, d, |range, acc| {
        let mut buf = vec![0.0; d];
        space
            .iter_from(range.start as u128)
            .visit(range.len(), |t| {
                eval_at(data, kernel, t, &mut buf);
                for (a, v) in acc.iter_mut().zip(&buf) {
                    *a += v;
                }
            });
    });
    let divisor = card as f64;
    sums.iter_mut().for_each(|s| *s /= divisor);
    Ok(sums)
}

/// Draws a design from `space` under `scheme`.
///
/// Bernoulli designs draw `N^ ~ Bin(|I|, N/|I|)` and then `N^` distinct tuples,
/// stored in lexicographic order. With replacement, each of the `N` tuples is
/// the unranking of an independent uniform rank.
pub fn sample_design(
    space: &IndexSpace,
    scheme: &SamplingScheme,
    rng: &mut RngStream,
) -> Result<SamplingRealization> {
    let inclusion = scheme.validate(space)?;
    let record = rng.record();
    let r = space.r();
    let ranks: Vec<u128> = match inclusion {
        Some(p) => {
            let n_hat = draw_binomial(space.cardinality(), p, rng)?;
            if n_hat == 0 {
                return Err(Error::EmptyDesign);
            }
            sample_ranks_without_replacement(space.cardinality(), n_hat, rng)?
        }
        None => {
            let card = space.cardinality();
            (0..scheme.budget)
                .map(|_| rng.random_range(0..card))
                .collect()
        }
    };
    let mut tuples = vec![0u32; ranks.len() * r];
    tuples
        .par_chunks_mut(r * CHUNK)
        .zip(ranks.par_chunks(CHUNK))
        .try_for_each(|(out, ranks)| {
            for (slot, &rank) in out.chunks_exact_mut(r).zip(ranks) {
                space.unrank_into(rank, slot)?;
            }
            Ok::<_, Error>(())
        })?;
    Ok(SamplingRealization {
        n: space.n(),
        r,
        tuples,
        scheme: *scheme,
        seed_record: Some(record),
    })
}

/// Evaluates the kernel on every realized tuple (row-major `N^ x d`).
pub fn kernel_evaluations(
    data: &Dataset,
    kernel: &dyn Kernel,
    realization: &SamplingRealization,
) -> Result<Vec<f64>> {
    check_realization(data, kernel, realization)?;
    let d = kernel.output_dim();
    let r = realization.r();
    let mut evals = vec![0.0; realization.n_hat() * d];
    evals
        .par_chunks_mut(d * CHUNK)
        .zip(realization.tuples.par_chunks(r * CHUNK))
        .for_each(|(out, idx)| {
            for (row, t) in out.chunks_exact_mut(d).zip(idx.chunks_exact(r)) {
                eval_at(data, kernel, t, row);
            }
        });
    Ok(evals)
}

fn check_realization(
    data: &Dataset,
    kernel: &dyn Kernel,
    realization: &SamplingRealization,
) -> Result<()> {
    check_kernel(data, kernel)?;
    if realization.n() != data.n() || realization.r() != kernel.order() {
        return Err(Error::Domain(format!(
            "design built for (n={}, r={}) but data/kernel give (n={}, r={})",
            realization.n(),
            realization.r(),
            data.n(),
            kernel.order()
        )));
    }
    Ok(())
}

/// The incomplete U-statistic on a realized design.
pub fn incomplete_ustat(
    data: &Dataset,
    kernel: &dyn Kernel,
    realization: &SamplingRealization,
    retain_evals: bool,
) -> Result<IncompleteUStat> {
    check_realization(data, kernel, realization)?;
    if realization.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let d = kernel.output_dim();
    let (sums, kernel_evals) = if retain_evals {
        let evals = kernel_evaluations(data, kernel, realization)?;
        (column_sums(&evals, d), Some(evals))
    } else {
        let r = realization.r();
        let sums = tree_sum(realization.n_hat(), d, |range, acc| {
            let mut buf = vec![0.0; d];
            for i in range {
                eval_at(
                    data,
                    kernel,
                    &realization.tuples[i * r..(i + 1) * r],
                    &mut buf,
                );
                for (a, v) in acc.iter_mut().zip(&buf) {
                    *a += v;
                }
            }
        });
        (sums, None)
    };
    let n_hat = realization.n_hat() as f64;
    let sample_mean: Vec<f64> = sums.iter().map(|s| s / n_hat).collect();
    let theta_hat = match realization.scheme().variant {
        SamplingVariant::BernoulliDeterministicNorm => {
            let n = realization.scheme().budget as f64;
            sums.iter().map(|s| s / n).collect()
        }
        _ => sample_mean.clone(),
    };
    Ok(IncompleteUStat {
        theta_hat,
        sample_mean,
        realization: realization.clone(),
        kernel_evals,
    })
}

/// Samples a design and evaluates the incomplete U-statistic on it.
pub fn estimate(
    data: &Dataset,
    kernel: &dyn Kernel,
    scheme: &SamplingScheme,
    rng: &mut RngStream,
    retain_evals: bool,
) -> Result<IncompleteUStat> {
    check_kernel(data, kernel)?;
    let space = IndexSpace::new(data.n(), kernel.order())?;
    let realization = sample_design(&space, scheme, rng)?;
    incomplete_ustat(data, kernel, &realization, retain_evals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{FnKernel, PairwiseKernel, RankKernel};

    fn product2() -> impl Kernel {
        FnKernel::new("product", 2, 1, |x: &[&[f64]], out: &mut [f64]| {
            out[0] = x[0][0] * x[1][0]
        })
        .unwrap()
    }

    fn constant(r: usize, c: f64) -> impl Kernel {
        FnKernel::new("const", r, 2, move |_: &[&[f64]], out: &mut [f64]| {
            out.fill(c)
        })
        .unwrap()
    }

    #[test]
    fn complete_product_kernel() {
        let data = Dataset::from_column(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let u = complete_ustat(&data, &product2()).unwrap();
        assert!((u[0] - 35.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn complete_constant_and_full_tuple() {
        let data = Dataset::from_column(&[0.5, -1.0, 2.0]).unwrap();
        assert_eq!(
            complete_ustat(&data, &constant(2, 3.25)).unwrap(),
            vec![3.25, 3.25]
        );
        let sum3 = FnKernel::new("sum", 3, 1, |x: &[&[f64]], o: &mut [f64]| {
            o[0] = x[0][0] + x[1][0] + x[2][0]
        })
        .unwrap();
        assert_eq!(complete_ustat(&data, &sum3).unwrap(), vec![1.5]);
    }

    #[test]
    fn complete_errors() {
        let data = Dataset::from_column(&[1.0]).unwrap();
        assert!(matches!(
            complete_ustat(&data, &product2()),
            Err(Error::Domain(_))
        ));
        let big = Dataset::from_column(&vec![1.0; 400]).unwrap();
        let k = FnKernel::new("c", 4, 1, |_: &[&[f64]], o: &mut [f64]| o[0] = 0.0).unwrap();
        assert!(matches!(complete_ustat(&big, &k), Err(Error::Budget(_))));
    }

    #[test]
    fn full_bernoulli_design_is_complete_bitwise() {
        let mut rng = RngStream::new(4);
        let rows: Vec<Vec<f64>> = (0..9)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let kernel = PairwiseKernel::new(RankKernel::Spearman, 3).unwrap();
        let space = IndexSpace::new(9, 3).unwrap();
        let scheme = SamplingScheme::bernoulli(space.cardinality() as u64);
        let design = sample_design(&space, &scheme, &mut rng).unwrap();
        assert_eq!(design.n_hat() as u128, space.cardinality());
        let inc = incomplete_ustat(&data, &kernel, &design, true).unwrap();
        let full = complete_ustat(&data, &kernel).unwrap();
        assert_eq!(inc.theta_hat, full);
    }

    #[test]
    fn constant_kernel_normalizations() {
        let data = Dataset::from_column(&(0..30).map(f64::from).collect::<Vec<_>>()).unwrap();
        let k = constant(2, 2.0);
        let space = IndexSpace::new(30, 2).unwrap();
        for seed in 0..5 {
            let mut rng = RngStream::new(seed);
            let rand = sample_design(&space, &SamplingScheme::bernoulli(40), &mut rng).unwrap();
            let u = incomplete_ustat(&data, &k, &rand, false).unwrap();
            assert_eq!(u.theta_hat, vec![2.0, 2.0]);

            let mut rng = RngStream::new(seed);
            let det_scheme = SamplingScheme::new(SamplingVariant::BernoulliDeterministicNorm, 40);
            let det = sample_design(&space, &det_scheme, &mut rng).unwrap();
            let u = incomplete_ustat(&data, &k, &det, false).unwrap();
            let expect = 2.0 * det.n_hat() as f64 / 40.0;
            assert!((u.theta_hat[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn single_tuple_design() {
        let data = Dataset::from_column(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let design = SamplingRealization::from_tuples(
            4,
            SamplingScheme::new(SamplingVariant::WithReplacement, 1),
            &[vec![1, 3]],
        )
        .unwrap();
        let u = incomplete_ustat(&data, &product2(), &design, true).unwrap();
        assert_eq!(u.theta_hat, vec![8.0]);
    }

    #[test]
    fn empty_design_rejected() {
        let space = IndexSpace::new(5, 2).unwrap();
        // Inclusion probability 0.1: N^ = 0 happens quickly.
        let scheme = SamplingScheme::bernoulli(1);
        let mut saw_empty = false;
        for i in 0..200 {
            let mut rng = RngStream::new(1).substream("e", i);
            if matches!(
                sample_design(&space, &scheme, &mut rng),
                Err(Error::EmptyDesign)
            ) {
                saw_empty = true;
                break;
            }
        }
        assert!(saw_empty);
    }

    #[test]
    fn scheme_validation() {
        let space = IndexSpace::new(5, 2).unwrap();
        assert!(SamplingScheme::bernoulli(11).validate(&space).is_err());
        assert!(SamplingScheme::bernoulli(0).validate(&space).is_err());
        let wr = SamplingScheme::new(SamplingVariant::WithReplacement, 1000);
        assert_eq!(wr.validate(&space).unwrap(), None);
        assert_eq!(
            SamplingScheme::bernoulli(5).validate(&space).unwrap(),
            Some(0.5)
        );
    }

    #[test]
    fn with_replacement_has_budget_size() {
        let space = IndexSpace::new(6, 3).unwrap();
        let scheme = SamplingScheme::new(SamplingVariant::WithReplacement, 50);
        let d = sample_design(&space, &scheme, &mut RngStream::new(2)).unwrap();
        assert_eq!(d.n_hat(), 50);
        assert!(d.tuples().all(|t| t.windows(2).all(|w| w[0] < w[1])));
    }

    #[test]
    fn bernoulli_count_has_mean_budget() {
        let space = IndexSpace::new(20, 2).unwrap();
        let scheme = SamplingScheme::bernoulli(50);
        let root = RngStream::new(77);
        let reps = 10_000;
        let mean = (0..reps)
            .map(|i| {
                sample_design(&space, &scheme, &mut root.substream("rep", i))
                    .unwrap()
                    .n_hat()
            })
            .sum::<usize>() as f64
            / reps as f64;
        assert!((mean - 50.0).abs() < 1.0, "mean N^ = {mean}");
    }

    #[test]
    fn bernoulli_count_concentrates() {
        let space = IndexSpace::new(20, 2).unwrap();
        let scheme = SamplingScheme::bernoulli(50);
        let root = RngStream::new(78);
        let (t, n) = (3.0_f64, 50.0_f64);
        let envelope = (2.0 * t / n).sqrt() + 2.0 * t / (3.0 * n);
        let reps = 10_000;
        let exceed = (0..reps)
            .filter(|&i| {
                let d = sample_design(&space, &scheme, &mut root.substream("rep", i)).unwrap();
                (d.n_hat() as f64 / n - 1.0).abs() > envelope
            })
            .count();
        assert!(exceed as f64 / reps as f64 <= 0.12);
    }

    #[test]
    fn deterministic_normalization_identity() {
        let mut rng = RngStream::new(8);
        let data = Dataset::from_column(&(0..25).map(|_| rng.random::<f64>()).collect::<Vec<_>>())
            .unwrap();
        let space = IndexSpace::new(25, 2).unwrap();
        let scheme = SamplingScheme::new(SamplingVariant::BernoulliDeterministicNorm, 60);
        let design = sample_design(&space, &scheme, &mut rng).unwrap();
        let det = incomplete_ustat(&data, &product2(), &design, false).unwrap();
        let ratio = design.n_hat() as f64 / 60.0;
        let rel = (det.theta_hat[0] - det.sample_mean[0] * ratio).abs() / det.theta_hat[0].abs();
        assert!(rel < 1e-14);
    }

    #[test]
    fn row_permutation_invariance() {
        let mut rng = RngStream::new(9);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let kernel = PairwiseKernel::new(RankKernel::Kendall, 3).unwrap();
        let space = IndexSpace::new(12, 2).unwrap();
        let design = sample_design(&space, &SamplingScheme::bernoulli(30), &mut rng).unwrap();
        let base = incomplete_ustat(&data, &kernel, &design, false).unwrap();

        let perm: Vec<usize> = (0..12).map(|i| (i * 5 + 3) % 12).collect();
        let shuffled = data.permute_rows(&perm).unwrap();
        let mut inverse = [0; 12];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let tuples: Vec<Vec<usize>> = design
            .tuples()
            .map(|t| {
                let mut v: Vec<usize> = t.iter().map(|&i| inverse[i as usize]).collect();
                v.sort();
                v
            })
            .collect();
        let moved = SamplingRealization::from_tuples(12, *design.scheme(), &tuples).unwrap();
        let other = incomplete_ustat(&shuffled, &kernel, &moved, false).unwrap();
        // Kendall values are integers, so the sums are exact in any order.
        assert_eq!(base.theta_hat, other.theta_hat);
    }

    #[test]
    fn with_replacement_is_conditionally_unbiased() {
        let mut rng = RngStream::new(10);
        let data = Dataset::from_column(
            &(0..8)
                .map(|_| rng.random::<f64>() * 4.0)
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let k = product2();
        let full = complete_ustat(&data, &k).unwrap()[0];
        let space = IndexSpace::new(8, 2).unwrap();
        let scheme = SamplingScheme::new(SamplingVariant::WithReplacement, 5);
        let reps = 20_000;
        let draws: Vec<f64> = (0..reps)
            .map(|i| {
                let d = sample_design(&space, &scheme, &mut rng.substream("wr", i)).unwrap();
                incomplete_ustat(&data, &k, &d, false).unwrap().theta_hat[0]
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / reps as f64;
        let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - full).abs() < 3.0 * sd / (reps as f64).sqrt());
    }

    #[test]
    fn deterministic_normalization_has_larger_variance() {
        let mut rng = RngStream::new(12);
        let data = Dataset::from_column(&(0..30).map(|_| rng.random::<f64>()).collect::<Vec<_>>())
            .unwrap();
        let shifted = FnKernel::new("shifted", 2, 1, |x: &[&[f64]], o: &mut [f64]| {
            o[0] = x[0][0] * x[1][0] + 5.0
        })
        .unwrap();
        let space = IndexSpace::new(30, 2).unwrap();
        let var = |variant| {
            let scheme = SamplingScheme::new(variant, 40);
            let xs: Vec<f64> = (0..4000)
                .map(|i| {
                    let d = sample_design(&space, &scheme, &mut rng.substream("v", i)).unwrap();
                    incomplete_ustat(&data, &shifted, &d, false)
                        .unwrap()
                        .theta_hat[0]
                })
                .collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
        };
        let random = var(SamplingVariant::BernoulliRandomNorm);
        let det = var(SamplingVariant::BernoulliDeterministicNorm);
        assert!(det > 2.0 * random, "det {det} vs random {random}");
    }

    #[test]
    fn mismatched_design_rejected() {
        let data = Dataset::from_column(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let space = IndexSpace::new(4, 2).unwrap();
        let d = sample_design(
            &space,
            &SamplingScheme::bernoulli(3),
            &mut RngStream::new(1),
        )
        .unwrap();
        assert!(matches!(
            incomplete_ustat(&data, &product2(), &d, false),
            Err(Error::Domain(_))
        ));
    }
}
