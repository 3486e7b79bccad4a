//! Modified Gram-Schmidt orthonormalization with one re-orthogonalization
//! pass. Classical GS loses orthogonality catastrophically at the
//! conditioning the update subspaces exhibit, so the modified variant plus a
//! second pass is mandatory here.

use super::entry::Entry;
use super::matrix::{dot, vec_norm, DenseMatrix};
use crate::error::{Error, Result};

/// Relative drop tolerance used when callers have no better choice.
pub const GS_DEFAULT_TOL: f64 = 1e-10;

/// Orthonormalize `vectors`, dropping those whose residual after projection
/// falls below `tol` times their original norm.
///
/// Returns the basis as columns of an `n x rank` matrix. Empty input yields
/// rank 0 with an empty basis.
pub fn gram_schmidt<T: Entry>(vectors: &[Vec<T>], tol: f64) -> Result<(DenseMatrix<T>, usize)> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("gram_schmidt tol must be > 0, got {tol}")));
    }
    if vectors.is_empty() {
        return Ok((DenseMatrix::zeros(0, 0), 0));
    }
    let n = vectors[0].len();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidArgument("gram_schmidt inputs differ in length".into()));
    }

    let mut basis: Vec<Vec<T>> = Vec::new();
    for v in vectors {
        let orig = vec_norm(v);
        if orig == 0.0 {
            continue;
        }
        let mut w = v.clone();
        // Two MGS passes; the second repairs the orthogonality the first
        // loses when w is nearly in the current span.
        for _ in 0..2 {
            for q in &basis {
                let coeff = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= coeff * *qi;
                }
            }
        }
        let res = vec_norm(&w);
        if res < tol * orig {
            continue;
        }
        let inv = 1.0 / res;
        for wi in w.iter_mut() {
            *wi = wi.scale(inv);
        }
        basis.push(w);
    }

    let rank = basis.len();
    let mut out = DenseMatrix::zeros(n, rank);
    for (j, q) in basis.iter().enumerate() {
        out.set_col(j, q);
    }
    Ok((out, rank))
}

/// Orthonormalize the columns of a matrix (panel form of [`gram_schmidt`]).
pub fn gram_schmidt_cols<T: Entry>(m: &DenseMatrix<T>, tol: f64) -> Result<(DenseMatrix<T>, usize)> {
    let cols: Vec<Vec<T>> = (0..m.cols()).map(|j| m.col(j)).collect();
    let (basis, rank) = gram_schmidt(&cols, tol)?;
    if rank == 0 {
        // Preserve the row count so downstream shape checks stay meaningful.
        return Ok((DenseMatrix::zeros(m.rows(), 0), 0));
    }
    Ok((basis, rank))
}
