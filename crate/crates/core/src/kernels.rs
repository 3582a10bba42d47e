//! Symmetric kernels and the built-in rank-dependence kernels.
//!
//! The built-in kernels map `r` observations in `R^p` to a vector indexed by
//! the coordinate pairs `(j, k)`, `j < k`, in row-major upper-triangle order:
//! `(0,1), (0,2), .., (0,p-1), (1,2), ..`.
//!
//! Each kernel has a reference evaluator (`eval_*`) that literally enumerates
//! every argument permutation for every coordinate pair, and a production path
//! in [`PairwiseKernel`] that precomputes per-coordinate sign or indicator
//! vectors first. All summands are small dyadic rationals, so both paths
//! produce bit-identical results.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest kernel order supported by the evaluation buffers.
pub const MAX_ORDER: usize = 8;

/// Metadata describing a kernel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub name: String,
    /// Number of arguments `r`.
    pub order: usize,
    /// Output dimension `d`.
    pub output_dim: usize,
    /// 0 for non-degenerate kernels, `k - 1` for kernels degenerate of order `k - 1`.
    pub degeneracy_order: usize,
}

/// A symmetric function of `order` observations with values in `R^d`.
pub trait Kernel: Send + Sync {
    fn spec(&self) -> &KernelSpec;

    /// Required observation length, if the kernel constrains it.
    fn input_dim(&self) -> Option<usize> {
        None
    }

    /// Evaluates the kernel at `obs` (length `order`) into `out` (length `d`).
    fn eval(&self, obs: &[&[f64]], out: &mut [f64]);

    fn order(&self) -> usize {
        self.spec().order
    }

    fn output_dim(&self) -> usize {
        self.spec().output_dim
    }
}

/// Checks that a dataset with `p` columns can be fed to `kernel`.
pub fn check_input_dim(kernel: &dyn Kernel, p: usize) -> Result<()> {
    match kernel.input_dim() {
        Some(q) if q != p => Err(Error::Domain(format!(
            "kernel {} expects observations of length {q}, data has {p} columns",
            kernel.spec().name
        ))),
        _ => Ok(()),
    }
}

/// A user-supplied kernel built from a closure.
pub struct FnKernel<F> {
    spec: KernelSpec,
    input_dim: Option<usize>,
    f: F,
}

impl<F> FnKernel<F>
where
    F: Fn(&[&[f64]], &mut [f64]) + Send + Sync,
{
    pub fn new(name: &str, order: usize, output_dim: usize, f: F) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::Domain(format!(
                "kernel order must be in 1..={MAX_ORDER}"
            )));
        }
        if output_dim == 0 {
            return Err(Error::Domain(
                "kernel output dimension must be positive".into(),
            ));
        }
        Ok(FnKernel {
            spec: KernelSpec {
                name: name.to_owned(),
                order,
                output_dim,
                degeneracy_order: 0,
            },
            input_dim: None,
            f,
        })
    }

    pub fn with_degeneracy(mut self, degeneracy_order: usize) -> Self {
        self.spec.degeneracy_order = degeneracy_order;
        self
    }

    pub fn with_input_dim(mut self, p: usize) -> Self {
        self.input_dim = Some(p);
        self
    }
}

impl<F> Kernel for FnKernel<F>
where
    F: Fn(&[&[f64]], &mut [f64]) + Send + Sync,
{
    fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    fn input_dim(&self) -> Option<usize> {
        self.input_dim
    }

    fn eval(&self, obs: &[&[f64]], out: &mut [f64]) {
        (self.f)(obs, out)
    }
}

/// Row-major addressing of the upper triangle of a `p x p` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairIndexMap {
    p: usize,
}

impl PairIndexMap {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::Domain(format!(
                "pairwise kernels need p >= 2, got {p}"
            )));
        }
        Ok(PairIndexMap { p })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `d = p (p - 1) / 2`.
    pub fn dim(&self) -> usize {
        self.p * (self.p - 1) / 2
    }

    /// Flat index of the 0-based pair `j < k`.
    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        debug_assert!(j < k && k < self.p);
        j * (2 * self.p - j - 1) / 2 + (k - j - 1)
    }

    /// Inverse of [`PairIndexMap::index`].
    pub fn pair(&self, idx: usize) -> (usize, usize) {
        let mut j = 0;
        let mut base = 0;
        loop {
            let row = self.p - j - 1;
            if idx < base + row {
                return (j, j + 1 + idx - base);
            }
            base += row;
            j += 1;
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.p).flat_map(move |j| (j + 1..self.p).map(move |k| (j, k)))
    }
}

/// The built-in rank-dependence kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankKernel {
    Kendall,
    Spearman,
    BergsmaDassios,
    HoeffdingD,
}

impl RankKernel {
    pub const ALL: [RankKernel; 4] = [
        RankKernel::Kendall,
        RankKernel::Spearman,
        RankKernel::BergsmaDassios,
        RankKernel::HoeffdingD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RankKernel::Kendall => "kendall",
            RankKernel::Spearman => "spearman",
            RankKernel::BergsmaDassios => "bergsma-dassios",
            RankKernel::HoeffdingD => "hoeffding-d",
        }
    }

    pub fn order(self) -> usize {
        match self {
            RankKernel::Kendall => 2,
            RankKernel::Spearman => 3,
            RankKernel::BergsmaDassios => 4,
            RankKernel::HoeffdingD => 5,
        }
    }

    /// Degeneracy under pairwise independence.
    pub fn degeneracy_order(self) -> usize {
        match self {
            RankKernel::Kendall | RankKernel::Spearman => 0,
            RankKernel::BergsmaDassios | RankKernel::HoeffdingD => 1,
        }
    }

    /// Largest absolute value any coordinate can take.
    pub fn bound(self) -> f64 {
        match self {
            RankKernel::Kendall => 1.0,
            RankKernel::Spearman => 3.0,
            RankKernel::BergsmaDassios => 4.0,
            RankKernel::HoeffdingD => 0.25,
        }
    }
}

impl fmt::Display for RankKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RankKernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "unknown kernel '{s}' (expected kendall, spearman, bergsma-dassios or hoeffding-d)"
                ))
            })
    }
}

#[inline]
fn sign_cmp(a: f64, b: f64) -> f64 {
    // sign(a - b); a - b of distinct finite floats is never 0.
    match a.partial_cmp(&b) {
        Some(Ordering::Greater) => 1.0,
        Some(Ordering::Less) => -1.0,
        _ => 0.0,
    }
}

#[inline]
fn ind(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

/// Bergsma-Dassios four-point indicator combination for one coordinate.
pub fn bd_phi(x1: f64, x2: f64, x3: f64, x4: f64) -> f64 {
    ind(x1.max(x3) < x2.min(x4)) + ind(x1.min(x3) > x2.max(x4))
        - ind(x1.max(x2) < x3.min(x4))
        - ind(x1.min(x2) > x3.max(x4))
}

/// Hoeffding-D five-point indicator product for one coordinate.
pub fn hoeffding_phi(x1: f64, x2: f64, x3: f64, x4: f64, x5: f64) -> f64 {
    (ind(x1 >= x2) - ind(x1 >= x3)) * (ind(x1 >= x4) - ind(x1 >= x5)) / 4.0
}

/// All permutations of `0..r` in lexicographic order.
pub fn permutations(r: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..r).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..r).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..r).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

fn perm_table(r: usize) -> &'static [Vec<usize>] {
    static TABLES: [OnceLock<Vec<Vec<usize>>>; 6] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    TABLES[r].get_or_init(|| permutations(r))
}

fn check_lengths(obs: &[&[f64]]) -> Result<usize> {
    let p = obs[0].len();
    if obs.iter().any(|x| x.len() != p) {
        return Err(Error::Domain("observations have different lengths".into()));
    }
    if p < 2 {
        return Err(Error::Domain(format!(
            "pairwise kernels need p >= 2, got {p}"
        )));
    }
    Ok(p)
}

/// Reference Kendall kernel: `sign((x1_j - x2_j)(x1_k - x2_k))`.
pub fn eval_kendall(x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
    let p = check_lengths(&[x1, x2])?;
    let map = PairIndexMap::new(p)?;
    Ok(map
        .pairs()
        // `+ 0.0` maps a signed zero from `-1 * 0` to `+0`.
        .map(|(j, k)| sign_cmp(x1[j], x2[j]) * sign_cmp(x1[k], x2[k]) + 0.0)
        .collect())
}

/// Reference Spearman kernel of order 3.
pub fn eval_spearman(x1: &[f64], x2: &[f64], x3: &[f64]) -> Result<Vec<f64>> {
    let xs = [x1, x2, x3];
    let p = check_lengths(&xs)?;
    let map = PairIndexMap::new(p)?;
    let perms = perm_table(3);
    Ok(map
        .pairs()
        .map(|(j, k)| {
            let mut s = 0.0;
            for pi in perms {
                let (a, b, c) = (xs[pi[0]], xs[pi[1]], xs[pi[2]]);
                s += sign_cmp(a[j], b[j]) * sign_cmp(a[k], c[k]);
            }
            0.5 * s
        })
        .collect())
}

/// Reference Bergsma-Dassios kernel of order 4.
pub fn eval_bergsma_dassios(xs: [&[f64]; 4]) -> Result<Vec<f64>> {
    let p = check_lengths(&xs)?;
    let map = PairIndexMap::new(p)?;
    let perms = perm_table(4);
    Ok(map
        .pairs()
        .map(|(j, k)| {
            let mut s = 0.0;
            for pi in perms {
                let y = [xs[pi[0]], xs[pi[1]], xs[pi[2]], xs[pi[3]]];
                s += bd_phi(y[0][j], y[1][j], y[2][j], y[3][j])
                    * bd_phi(y[0][k], y[1][k], y[2][k], y[3][k]);
            }
            s / 24.0
        })
        .collect())
}

/// Reference Hoeffding-D kernel of order 5.
pub fn eval_hoeffding_d(xs: [&[f64]; 5]) -> Result<Vec<f64>> {
    let p = check_lengths(&xs)?;
    let map = PairIndexMap::new(p)?;
    let perms = perm_table(5);
    Ok(map
        .pairs()
        .map(|(j, k)| {
            let mut s = 0.0;
            for pi in perms {
                let y = [xs[pi[0]], xs[pi[1]], xs[pi[2]], xs[pi[3]], xs[pi[4]]];
                s += hoeffding_phi(y[0][j], y[1][j], y[2][j], y[3][j], y[4][j])
                    * hoeffding_phi(y[0][k], y[1][k], y[2][k], y[3][k], y[4][k]);
            }
            s / 120.0
        })
        .collect())
}

/// Reference evaluation of any built-in kernel.
pub fn eval_reference(kind: RankKernel, obs: &[&[f64]]) -> Result<Vec<f64>> {
    if obs.len() != kind.order() {
        return Err(Error::Domain(format!(
            "{} takes {} observations, got {}",
            kind,
            kind.order(),
            obs.len()
        )));
    }
    match kind {
        RankKernel::Kendall => eval_kendall(obs[0], obs[1]),
        RankKernel::Spearman => eval_spearman(obs[0], obs[1], obs[2]),
        RankKernel::BergsmaDassios => eval_bergsma_dassios([obs[0], obs[1], obs[2], obs[3]]),
        RankKernel::HoeffdingD => eval_hoeffding_d([obs[0], obs[1], obs[2], obs[3], obs[4]]),
    }
}

/// A built-in kernel bound to a coordinate count `p`.
#[derive(Debug, Clone)]
pub struct PairwiseKernel {
    kind: RankKernel,
    map: PairIndexMap,
    spec: KernelSpec,
}

impl PairwiseKernel {
    pub fn new(kind: RankKernel, p: usize) -> Result<Self> {
        let map = PairIndexMap::new(p)?;
        Ok(PairwiseKernel {
            kind,
            map,
            spec: KernelSpec {
                name: kind.name().to_owned(),
                order: kind.order(),
                output_dim: map.dim(),
                degeneracy_order: kind.degeneracy_order(),
            },
        })
    }

    pub fn kind(&self) -> RankKernel {
        self.kind
    }

    pub fn pair_map(&self) -> &PairIndexMap {
        &self.map
    }

    /// Fills per-permutation factors laid out `[perm][coord]` so that
    /// coordinate `(j, k)` is a rescaled `sum_pi u_j(pi) v_k(pi)`. Returns the
    /// number of permutations and whether `v` equals `u`.
    fn fill_factors(&self, obs: &[&[f64]], u: &mut Vec<f64>, v: &mut Vec<f64>) -> (usize, bool) {
        let p = self.map.p();
        u.clear();
        v.clear();
        match self.kind {
            RankKernel::Kendall => {
                u.extend((0..p).map(|j| sign_cmp(obs[0][j], obs[1][j])));
                (1, true)
            }
            RankKernel::Spearman => {
                for pi in perm_table(3) {
                    let (a, b, c) = (obs[pi[0]], obs[pi[1]], obs[pi[2]]);
                    u.extend((0..p).map(|j| sign_cmp(a[j], b[j])));
                    v.extend((0..p).map(|j| sign_cmp(a[j], c[j])));
                }
                (6, false)
            }
            RankKernel::BergsmaDassios => {
                for pi in perm_table(4) {
                    let x = [obs[pi[0]], obs[pi[1]], obs[pi[2]], obs[pi[3]]];
                    u.extend((0..p).map(|j| bd_phi(x[0][j], x[1][j], x[2][j], x[3][j])));
                }
                (24, true)
            }
            RankKernel::HoeffdingD => {
                for pi in perm_table(5) {
                    let x = [obs[pi[0]], obs[pi[1]], obs[pi[2]], obs[pi[3]], obs[pi[4]]];
                    u.extend(
                        (0..p).map(|j| hoeffding_phi(x[0][j], x[1][j], x[2][j], x[3][j], x[4][j])),
                    );
                }
                (120, true)
            }
        }
    }
}

thread_local! {
    static SCRATCH: RefCell<(Vec<f64>, Vec<f64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

impl Kernel for PairwiseKernel {
    fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.map.p())
    }

    fn eval(&self, obs: &[&[f64]], out: &mut [f64]) {
        debug_assert_eq!(obs.len(), self.spec.order);
        let p = self.map.p();
        SCRATCH.with(|cell| {
            let (u, v) = &mut *cell.borrow_mut();
            let (m, symmetric) = self.fill_factors(obs, u, v);
            let v: &[f64] = if symmetric { u } else { v };
            // Permutations outermost: each coordinate still accumulates its
            // terms in permutation order, exactly as the reference does.
            out.fill(0.0);
            for pi in 0..m {
                let up = &u[pi * p..(pi + 1) * p];
                let vp = &v[pi * p..(pi + 1) * p];
                let mut base = 0;
                for j in 0..p {
                    let len = p - j - 1;
                    let a = up[j];
                    if a != 0.0 {
                        for (o, b) in out[base..base + len].iter_mut().zip(&vp[j + 1..]) {
                            *o += a * b;
                        }
                    }
                    base += len;
                }
            }
            match self.kind {
                RankKernel::Kendall => {}
                RankKernel::Spearman => out.iter_mut().for_each(|o| *o *= 0.5),
                RankKernel::BergsmaDassios => out.iter_mut().for_each(|o| *o /= 24.0),
                RankKernel::HoeffdingD => out.iter_mut().for_each(|o| *o /= 120.0),
            }
        });
    }
}
