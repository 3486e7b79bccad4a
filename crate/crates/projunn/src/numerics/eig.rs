//! Cyclic Jacobi eigensolver for small Hermitian matrices.
//!
//! This is the workhorse behind the subspace eigendecompositions in the
//! low-rank manifold updates and behind the skew-Hermitian matrix
//! exponential. It is deliberately independent of the SVD backend so it can
//! serve as one side of dual-route checks.

use super::entry::Entry;
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Eigendecomposition `H = V diag(values) V^H` of a Hermitian matrix.
/// Values are real and sorted descending; columns of `vectors` are the
/// matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigPair<T: Entry> {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix<T>,
}

const MAX_SWEEPS: usize = 40;
const HERMITICITY_RTOL: f64 = 1e-8;
const ABS_FLOOR: f64 = 1e-14;

fn off_diagonal_norm<T: Entry>(a: &DenseMatrix<T>) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            s += a[(p, q)].modulus_sq();
        }
    }
    (2.0 * s).sqrt()
}

/// Eigendecompose a small Hermitian matrix by cyclic Jacobi rotations.
///
/// Rejects inputs with `||H - H^H||_F >= 1e-8 * ||H||_F`.
pub fn herm_eig_small<T: Entry>(h: &DenseMatrix<T>) -> Result<EigPair<T>> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "herm_eig_small needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let n = h.rows();
    let scale = h.fro_norm().max(ABS_FLOOR);
    let herm_defect = h.sub(&h.adjoint()).fro_norm();
    if herm_defect >= HERMITICITY_RTOL * scale {
        return Err(Error::InvalidArgument(format!(
            "matrix is not Hermitian: defect {herm_defect:.3e} vs {:.3e}",
            HERMITICITY_RTOL * scale
        )));
    }

    // Work on the Hermitian part so roundoff in the input cannot leak into
    // complex diagonal entries.
    let mut a = h.add(&h.adjoint()).scale(0.5);
    let mut v = DenseMatrix::<T>::identity(n);

    for _sweep in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let hmod = apq.modulus();
                if hmod <= 1e-300 || hmod <= 1e-18 * scale {
                    continue;
                }
                let app = a[(p, p)].re();
                let aqq = a[(q, q)].re();
                // Phase that makes the (p,q) entry real, then a standard
                // real Jacobi rotation on the phase-adjusted 2x2 block.
                let u = apq.scale(1.0 / hmod);
                let tau = (aqq - app) / (2.0 * hmod);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G restricted to (p,q): [[c, s], [-s*conj(u), c*conj(u)]].
                let g_qp = u.conj().scale(-s);
                let g_qq = u.conj().scale(c);

                // A <- A G (columns p, q).
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip.scale(c) + aiq * g_qp;
                    a[(i, q)] = aip.scale(s) + aiq * g_qq;
                }
                // A <- G^H A (rows p, q).
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj.scale(c) + aqj * g_qp.conj();
                    a[(q, j)] = apj.scale(s) + aqj * g_qq.conj();
                }
                // V <- V G.
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip.scale(c) + viq * g_qp;
                    v[(i, q)] = vip.scale(s) + viq * g_qq;
                }
                // Pin what the rotation guarantees.
                a[(p, q)] = T::ZERO;
                a[(q, p)] = T::ZERO;
                let dpp = a[(p, p)].re();
                let dqq = a[(q, q)].re();
                a[(p, p)] = T::from_re(dpp);
                a[(q, q)] = T::from_re(dqq);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let values_raw: Vec<f64> = (0..n).map(|i| a[(i, i)].re()).collect();
    order.sort_by(|&i, &j| values_raw[j].partial_cmp(&values_raw[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| values_raw[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigPair { values, vectors })
}
