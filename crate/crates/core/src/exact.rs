//! Exact integer rank tests for small-integer matrices.
//!
//! Used by the reduction oracles so yes/no answers on integer instances do not
//! depend on a floating-point threshold.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::Mat;

/// Entries must be integers with magnitude at most this to take the exact path.
pub const EXACT_LIMIT: f64 = (1u64 << 20) as f64;

/// Converts to big integers when every entry is a small integer.
pub fn integer_matrix(m: &Mat) -> Option<Vec<Vec<BigInt>>> {
    let ok = m
        .iter()
        .all(|&x| x.is_finite() && x.fract() == 0.0 && x.abs() <= EXACT_LIMIT);
    if !ok {
        return None;
    }
    Some(
        m.row_iter()
            .map(|r| r.iter().map(|&x| BigInt::from(x as i64)).collect())
            .collect(),
    )
}

/// Rank by fraction-free (Bareiss) elimination; every division is exact.
pub fn rank(mut a: Vec<Vec<BigInt>>) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(p, rank);
        for i in rank + 1..rows {
            for j in col + 1..cols {
                let v = (&a[rank][col] * &a[i][j] - &a[i][col] * &a[rank][j]) / &prev;
                a[i][j] = v;
            }
            a[i][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Exact product of two integer matrices.
pub fn matmul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).fold(BigInt::zero(), |acc, k| acc + &row[k] * &b[k][j]))
                .collect()
        })
        .collect()
}
