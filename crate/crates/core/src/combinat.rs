//! Exact combinatorics over the index set of increasing `r`-tuples drawn from
//! `{0, .., n-1}`: counting, lexicographic ranking, uniform sampling without
//! replacement and binomial variates for Bernoulli designs.
//!
//! Indices are 0-based throughout this module.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Below this cardinality, distinct ranks are drawn by a partial shuffle of
/// the full rank list instead of Floyd's algorithm.
pub const SHUFFLE_CARDINALITY_LIMIT: u128 = 1_000_000;

/// Largest expected count the geometric-skip binomial sampler will simulate.
const SKIP_MEAN_LIMIT: f64 = 1e10;

/// An increasing tuple of observation indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexTuple(pub Vec<usize>);

impl IndexTuple {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 1-based copy for user-facing output.
    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }
}

/// `C(n, k)` in exact 128-bit arithmetic.
///
/// Intermediate products never exceed the final value times `k`; when that
/// does not fit, the factor is reduced by a gcd first so only a genuinely
/// unrepresentable result fails.
pub fn binomial(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        acc = match acc.checked_mul(num) {
            Some(v) => v / den,
            None => {
                let g = gcd(acc, den);
                let (a, d) = (acc / g, den / g);
                // `d` is coprime with `a`, so it divides `num`.
                a.checked_mul(num / d).ok_or_else(|| {
                    Error::Overflow(format!("C({n}, {}) does not fit in 128 bits", k))
                })?
            }
        };
    }
    Ok(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `|I_{n,r}|` with the usual domain checks.
pub fn count(n: u64, r: u64) -> Result<u128> {
    if r == 0 {
        return Err(Error::Domain("tuple size r must be at least 1".into()));
    }
    if r > n {
        return Err(Error::Domain(format!("tuple size r = {r} exceeds n = {n}")));
    }
    binomial(n, r)
}

/// The set of increasing `r`-tuples over `n` indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexSpace {
    n: usize,
    r: usize,
    cardinality: u128,
}

impl IndexSpace {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        let cardinality = count(n as u64, r as u64)?;
        if n > u32::MAX as usize {
            return Err(Error::Domain(format!(
                "n = {n} exceeds the supported index range"
            )));
        }
        Ok(IndexSpace { n, r, cardinality })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn cardinality(&self) -> u128 {
        self.cardinality
    }

    /// The `rank`-th tuple in lexicographic order.
    pub fn unrank(&self, rank: u128) -> Result<IndexTuple> {
        let mut buf = vec![0u32; self.r];
        self.unrank_into(rank, &mut buf)?;
        Ok(IndexTuple(buf.into_iter().map(|v| v as usize).collect()))
    }

    /// Writes the `rank`-th tuple into `out` (length `r`).
    pub fn unrank_into(&self, rank: u128, out: &mut [u32]) -> Result<()> {
        if rank >= self.cardinality {
            return Err(Error::Domain(format!(
                "rank {rank} out of range for {} tuples",
                self.cardinality
            )));
        }
        debug_assert_eq!(out.len(), self.r);
        let n = self.n as u64;
        let mut rank = rank;
        let mut start = 0u64;
        for (pos, slot) in out.iter_mut().enumerate() {
            let k = (self.r - pos) as u64;
            // Tuples of the remaining suffix whose first element is >= c
            // number C(n - c, k); those with first element < c are the rest.
            let total = binomial_unchecked(n - start, k);
            let before = |c: u64| total - binomial_unchecked(n - c, k);
            let (mut lo, mut hi) = (start, n - k);
            while lo < hi {
                let mid = lo + (hi - lo).div_ceil(2);
                if before(mid) <= rank {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            rank -= before(lo);
            *slot = lo as u32;
            start = lo + 1;
        }
        Ok(())
    }

    /// Lexicographic position of `tuple`; inverse of [`IndexSpace::unrank`].
    pub fn rank(&self, tuple: &[usize]) -> Result<u128> {
        if tuple.len() != self.r {
            return Err(Error::Domain(format!(
                "tuple has {} entries, expected {}",
                tuple.len(),
                self.r
            )));
        }
        if tuple.windows(2).any(|w| w[0] >= w[1]) || tuple.iter().any(|&v| v >= self.n) {
            return Err(Error::Domain(format!(
                "{tuple:?} is not an increasing tuple below {}",
                self.n
            )));
        }
        let n = self.n as u64;
        let mut rank = 0u128;
        let mut start = 0u64;
        for (pos, &c) in tuple.iter().enumerate() {
            let k = (self.r - pos) as u64;
            let c = c as u64;
            rank += binomial_unchecked(n - start, k) - binomial_unchecked(n - c, k);
            start = c + 1;
        }
        Ok(rank)
    }

    /// Iterates tuples in lexicographic order starting at `rank`.
    pub fn iter_from(&self, rank: u128) -> LexTuples {
        let mut current = vec![0u32; self.r];
        let done = self.unrank_into(rank, &mut current).is_err();
        LexTuples {
            n: self.n as u32,
            current,
            done,
        }
    }
}

/// Binomial for arguments already known to be representable.
#[inline]
fn binomial_unchecked(n: u64, k: u64) -> u128 {
    binomial(n, k).expect("binomial within a validated index space")
}

/// Lexicographic successor iteration over increasing tuples.
pub struct LexTuples {
    n: u32,
    current: Vec<u32>,
    done: bool,
}

impl LexTuples {
    fn step(&mut self) {
        let r = self.current.len();
        let mut i = r;
        loop {
            if i == 0 {
                self.done = true;
                return;
            }
            i -= 1;
            let limit = self.n - (r - i) as u32;
            if self.current[i] < limit {
                self.current[i] += 1;
                for j in i + 1..r {
                    self.current[j] = self.current[j - 1] + 1;
                }
                return;
            }
        }
    }

    /// Calls `f` on up to `limit` tuples without allocating per tuple.
    pub fn visit(mut self, limit: usize, mut f: impl FnMut(&[u32])) {
        for _ in 0..limit {
            if self.done {
                return;
            }
            f(&self.current);
            self.step();
        }
    }
}

impl Iterator for LexTuples {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        self.step();
        Some(out)
    }
}

/// `m` distinct ranks drawn uniformly from `[0, cardinality)`, returned sorted.
pub fn sample_ranks_without_replacement<R: Rng + ?Sized>(
    cardinality: u128,
    m: u128,
    rng: &mut R,
) -> Result<Vec<u128>> {
    if m > cardinality {
        return Err(Error::Domain(format!(
            "cannot draw {m} distinct tuples from {cardinality}"
        )));
    }
    let m_usize = usize::try_from(m)
        .map_err(|_| Error::Budget(format!("{m} tuples cannot be held in memory")))?;
    let mut ranks = if cardinality <= SHUFFLE_CARDINALITY_LIMIT {
        let mut all: Vec<u128> = (0..cardinality).collect();
        for i in 0..m_usize {
            let j = rng.random_range(i..all.len());
            all.swap(i, j);
        }
        all.truncate(m_usize);
        all
    } else {
        // Floyd: for j over the last m slots, insert a uniform draw from
        // [0, j] or j itself when the draw is already taken.
        let mut chosen: HashSet<u128> = HashSet::with_capacity(m_usize);
        for j in (cardinality - m)..cardinality {
            let t = rng.random_range(0..=j);
            if !chosen.insert(t) {
                chosen.insert(j);
            }
        }
        chosen.into_iter().collect()
    };
    ranks.sort_unstable();
    Ok(ranks)
}

/// `m` distinct tuples drawn uniformly from `space`, in lexicographic order.
pub fn sample_without_replacement<R: Rng + ?Sized>(
    space: &IndexSpace,
    m: u128,
    rng: &mut R,
) -> Result<Vec<IndexTuple>> {
    sample_ranks_without_replacement(space.cardinality(), m, rng)?
        .into_iter()
        .map(|rank| space.unrank(rank))
        .collect()
}

/// An exact `Bin(trials, p)` variate.
///
/// Counts up to `u64::MAX` trials use the BTPE rejection sampler. Larger
/// counts are simulated by summing geometric gaps between successes, which
/// costs time proportional to the smaller of the success and failure counts.
pub fn draw_binomial<R: Rng + ?Sized>(trials: u128, p: f64, rng: &mut R) -> Result<u128> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    if p == 0.0 || trials == 0 {
        return Ok(0);
    }
    if p == 1.0 {
        return Ok(trials);
    }
    if let Ok(t) = u64::try_from(trials) {
        let dist = Binomial::new(t, p).map_err(|e| Error::Domain(e.to_string()))?;
        return Ok(dist.sample(rng) as u128);
    }
    let t = trials as f64;
    if p <= 0.5 {
        if t * p > SKIP_MEAN_LIMIT {
            return Err(Error::Budget(format!(
                "binomial draw with mean {:.3e} over {trials} trials",
                t * p
            )));
        }
        Ok(geometric_skip(trials, p, rng))
    } else {
        if t * (1.0 - p) > SKIP_MEAN_LIMIT {
            return Err(Error::Budget(format!(
                "binomial draw with mean {:.3e} over {trials} trials",
                t * (1.0 - p)
            )));
        }
        Ok(trials - geometric_skip(trials, 1.0 - p, rng))
    }
}

fn geometric_skip<R: Rng + ?Sized>(trials: u128, p: f64, rng: &mut R) -> u128 {
    let log_q = (-p).ln_1p();
    let mut position: u128 = 0;
    let mut successes: u128 = 0;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let gap = (u.ln() / log_q).floor() + 1.0;
        // `as` saturates, and a saturated gap always overshoots `trials`.
        position = position.saturating_add(gap as u128);
        if position > trials {
            return successes;
        }
        successes += 1;
    }
}
