//! Fixed-shape summation shared by every estimator.
//!
//! Rows are grouped into consecutive chunks of [`CHUNK`] rows, each chunk is
//! accumulated sequentially, and chunk totals are combined by a balanced
//! pairwise tree. The shape depends only on the row count, so results are
//! identical for any number of worker threads.

use std::ops::Range;

use rayon::prelude::*;

pub(crate) const CHUNK: usize = 256;

/// Sums `count` d-vectors; `add_rows(range, acc)` must add rows `range` into
/// `acc` in increasing order.
pub(crate) fn tree_sum<F>(count: usize, d: usize, add_rows: F) -> Vec<f64>
where
    F: Fn(Range<usize>, &mut [f64]) + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    if chunks == 0 {
        return vec![0.0; d];
    }
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; d];
            add_rows(c * CHUNK..((c + 1) * CHUNK).min(count), &mut acc);
            acc
        })
        .collect();
    pairwise(&partials)
}

fn pairwise(parts: &[Vec<f64>]) -> Vec<f64> {
    if parts.len() == 1 {
        return parts[0].clone();
    }
    let mid = parts.len() / 2;
    let mut left = pairwise(&parts[..mid]);
    let right = pairwise(&parts[mid..]);
    for (a, b) in left.iter_mut().zip(&right) {
        *a += b;
    }
    left
}

/// Column sums of a row-major `rows x d` matrix with the fixed tree shape.
pub(crate) fn column_sums(matrix: &[f64], d: usize) -> Vec<f64> {
    let rows = matrix.len().checked_div(d).unwrap_or(0);
    tree_sum(rows, d, |range, acc| {
        for i in range {
            for (a, v) in acc.iter_mut().zip(&matrix[i * d..(i + 1) * d]) {
                *a += v;
            }
        }
    })
}
