//! Small dense matrix helpers over a generic scalar. Everything here is
//! desk-scale (dimension at most a few hundred for the cohomology and
//! least-squares paths), so plain Gaussian elimination is adequate.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Mat<S> = Vec<Vec<S>>;

pub fn zeros<S: Scalar>(rows: usize, cols: usize) -> Mat<S> {
    vec![vec![S::zero(); cols]; rows]
}

pub fn identity<S: Scalar>(n: usize) -> Mat<S> {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = S::one();
    }
    m
}

pub fn add<S: Scalar>(a: &Mat<S>, b: &Mat<S>) -> Mat<S> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.add(y)).collect())
        .collect()
}

pub fn scale<S: Scalar>(a: &Mat<S>, c: &S) -> Mat<S> {
    a.iter()
        .map(|r| r.iter().map(|x| x.mul(c)).collect())
        .collect()
}

pub fn neg<S: Scalar>(a: &Mat<S>) -> Mat<S> {
    a.iter().map(|r| r.iter().map(S::neg).collect()).collect()
}

pub fn mul<S: Scalar>(a: &Mat<S>, b: &Mat<S>) -> Mat<S> {
    let n = a.len();
    let k = b.len();
    let m = if k > 0 { b[0].len() } else { 0 };
    let mut out = zeros::<S>(n, m);
    for i in 0..n {
        for (l, brow) in b.iter().enumerate().take(k) {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                if brow[j].is_zero() {
                    continue;
                }
                out[i][j] = out[i][j].add(&a[i][l].mul(&brow[j]));
            }
        }
    }
    out
}

pub fn max_abs<S: Scalar>(a: &Mat<S>) -> f64 {
    a.iter()
        .flat_map(|r| r.iter())
        .map(S::abs_f64)
        .fold(0.0, f64::max)
}

pub fn max_abs_diff<S: Scalar>(a: &Mat<S>, b: &Mat<S>) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.sub(y).abs_f64()))
        .fold(0.0, f64::max)
}

pub fn is_zero<S: Scalar>(a: &Mat<S>) -> bool {
    a.iter().all(|r| r.iter().all(S::is_zero))
}

/// Matrix inverse by Gauss-Jordan elimination with partial pivoting.
pub fn inverse<S: Scalar>(a: &Mat<S>) -> Result<Mat<S>> {
    let n = a.len();
    let mut work: Vec<Vec<S>> = a.iter().map(|r| {
        debug_assert_eq!(r.len(), n);
        r.clone()
    }).collect();
    let mut inv = identity::<S>(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .filter(|&r| !work[r][col].is_zero())
            .max_by(|&r1, &r2| {
                work[r1][col]
                    .abs_f64()
                    .partial_cmp(&work[r2][col].abs_f64())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or(Error::NotInvertible)?;
        work.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let pivot = work[col][col].clone();
        for j in 0..n {
            work[col][j] = work[col][j].div(&pivot)?;
            inv[col][j] = inv[col][j].div(&pivot)?;
        }
        for row in 0..n {
            if row == col || work[row][col].is_zero() {
                continue;
            }
            let factor = work[row][col].clone();
            for j in 0..n {
                work[row][j] = work[row][j].sub(&factor.mul(&work[col][j]));
                inv[row][j] = inv[row][j].sub(&factor.mul(&inv[col][j]));
            }
        }
    }
    Ok(inv)
}

/// Row-echelon rank. In float mode entries below `pivot_tol` count as zero.
pub fn rank<S: Scalar>(a: &Mat<S>, pivot_tol: f64) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut work = a.to_vec();
    let mut rank = 0;
    for col in 0..cols {
        let pivot = (rank..rows)
            .filter(|&r| treat_nonzero(&work[r][col], pivot_tol))
            .max_by(|&r1, &r2| {
                work[r1][col]
                    .abs_f64()
                    .partial_cmp(&work[r2][col].abs_f64())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        let Some(pivot_row) = pivot else { continue };
        work.swap(rank, pivot_row);
        let pivot = work[rank][col].clone();
        for row in rank + 1..rows {
            if !treat_nonzero(&work[row][col], pivot_tol) {
                continue;
            }
            let factor = work[row][col].div(&pivot).expect("pivot nonzero");
            for j in col..cols {
                work[row][j] = work[row][j].sub(&factor.mul(&work[rank][j]));
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

fn treat_nonzero<S: Scalar>(x: &S, pivot_tol: f64) -> bool {
    if S::EXACT {
        !x.is_zero()
    } else {
        x.abs_f64() > pivot_tol
    }
}

/// Solves `a x = b` via row reduction, setting free variables to zero.
/// Returns `None` when the system is inconsistent (exact mode) or the
/// residual cannot be eliminated (float mode pivots below tolerance).
/// `check_consistency` is switched off for normal-equation systems, which
/// are consistent by construction; residual rows there are pure roundoff.
pub fn solve<S: Scalar>(
    a: &Mat<S>,
    b: &[S],
    pivot_tol: f64,
    check_consistency: bool,
) -> Option<Vec<S>> {
    let rows = a.len();
    let cols = if rows > 0 { a[0].len() } else { 0 };
    let mut work: Vec<Vec<S>> = a
        .iter()
        .zip(b)
        .map(|(r, rhs)| {
            let mut row = r.clone();
            row.push(rhs.clone());
            row
        })
        .collect();
    let mut pivot_cols = Vec::new();
    let mut rank = 0;
    for col in 0..cols {
        let pivot = (rank..rows)
            .filter(|&r| treat_nonzero(&work[r][col], pivot_tol))
            .max_by(|&r1, &r2| {
                work[r1][col]
                    .abs_f64()
                    .partial_cmp(&work[r2][col].abs_f64())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        let Some(pivot_row) = pivot else { continue };
        work.swap(rank, pivot_row);
        let pivot = work[rank][col].clone();
        for j in col..=cols {
            work[rank][j] = work[rank][j].div(&pivot).expect("pivot nonzero");
        }
        for row in 0..rows {
            if row == rank || !treat_nonzero(&work[row][col], 0.0) {
                continue;
            }
            let factor = work[row][col].clone();
            for j in col..=cols {
                work[row][j] = work[row][j].sub(&factor.mul(&work[rank][j]));
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == rows {
            break;
        }
    }
    if check_consistency {
        for row in work.iter().skip(rank) {
            if treat_nonzero(&row[cols], pivot_tol) {
                return None;
            }
        }
    }
    let mut x = vec![S::zero(); cols];
    for (r, &col) in pivot_cols.iter().enumerate() {
        x[col] = work[r][cols].clone();
    }
    Some(x)
}
