//! Dense linear-algebra oracles: full SVD, polar projection, and the matrix
//! exponential. These are the exact references that the fast low-rank paths
//! in `manifold` are tested against; none of them is rate-critical.

use super::eig::herm_eig_small;
use super::entry::Entry;
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Thin SVD `A = U diag(s) V^H` with `s` sorted descending.
#[derive(Clone, Debug)]
pub struct Svd<T: Entry> {
    pub u: DenseMatrix<T>,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix<T>,
}

/// Full (thin) SVD via the nalgebra backend.
pub fn svd<T: Entry>(a: &DenseMatrix<T>) -> Svd<T> {
    let (ubuf, s, vbuf) = T::svd_raw(a.rows(), a.cols(), a.data());
    let k = s.len();
    let u = DenseMatrix::from_row_major(a.rows(), k, ubuf).expect("svd u shape");
    let v = DenseMatrix::from_row_major(a.cols(), k, vbuf).expect("svd v shape");
    Svd { u, singular_values: s, v }
}

/// `||U^H U - I||_F`, the drift of a square matrix off the unitary manifold.
pub fn unitarity_error<T: Entry>(u: &DenseMatrix<T>) -> f64 {
    assert!(u.is_square(), "unitarity_error needs a square matrix");
    let n = u.rows();
    let mut g = DenseMatrix::<T>::identity(n);
    // G = U^H U - I in one gemm.
    DenseMatrix::gemm_into(T::ONE, &u.adjoint(), u, -T::ONE, &mut g);
    g.fro_norm()
}

/// Frobenius-closest unitary/orthogonal matrix to `A`, computed from the
/// full SVD `A = W S V^H` as `W V^H`. This is the exact oracle; the
/// low-rank fast path lives in the `manifold` module.
///
/// Rank-deficient inputs are rejected: the projection is not unique there.
pub fn polar_project_dense<T: Entry>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "polar projection needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let decomp = svd(a);
    let smax = decomp.singular_values.first().copied().unwrap_or(0.0);
    let smin = decomp.singular_values.last().copied().unwrap_or(0.0);
    if !(smin > 1e-12 * smax) || smax == 0.0 {
        return Err(Error::SingularMatrix(format!(
            "polar projection undefined: sigma_min = {smin:.3e}, sigma_max = {smax:.3e}"
        )));
    }
    Ok(decomp.u.matmul(&decomp.v.adjoint()))
}

const SKEW_RTOL: f64 = 1e-8;
const ABS_FLOOR: f64 = 1e-14;

/// Matrix exponential at oracle scale.
///
/// Skew-Hermitian inputs go through the Hermitian eigendecomposition of
/// `iA`, which is exact and lands exactly on the unitary manifold. Anything
/// else falls back to scaling and squaring.
pub fn expm_dense<T: Entry>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let scale = a.fro_norm().max(ABS_FLOOR);
    let skew_defect = a.add(&a.adjoint()).fro_norm();
    if skew_defect < SKEW_RTOL * scale {
        expm_skew(a)
    } else {
        Ok(expm_scaling_squaring(a))
    }
}

/// exp(A) for skew-Hermitian A: eigendecompose H = iA = V diag(l) V^H, then
/// exp(A) = V diag(exp(-i l)) V^H. The subspace arithmetic is complex even
/// for real (skew-symmetric) inputs; realness of the result is checked on
/// the way back.
fn expm_skew<T: Entry>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let n = a.rows();
    let i_unit = Complex64::new(0.0, 1.0);
    let h = a.to_complex().scale_entry(i_unit);
    let eig = herm_eig_small(&h)?;
    let mut phases = DenseMatrix::<Complex64>::zeros(n, n);
    for (j, &lam) in eig.values.iter().enumerate() {
        phases[(j, j)] = Complex64::new(0.0, -lam).exp();
    }
    let result_c = eig.vectors.matmul(&phases).matmul(&eig.vectors.adjoint());
    let imag = result_c.max_imag();
    if T::FIELD == super::entry::Field::Real && imag > 1e-8 {
        return Err(Error::Numeric(format!(
            "expm of a real skew-symmetric matrix came back complex (residue {imag:.3e})"
        )));
    }
    Ok(DenseMatrix::from_complex_lossy(&result_c))
}

fn expm_scaling_squaring<T: Entry>(a: &DenseMatrix<T>) -> DenseMatrix<T> {
    let n = a.rows();
    let norm = a.fro_norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil().max(0.0) as u32 } else { 0 };
    let b = a.scale(0.5f64.powi(squarings as i32));
    let mut sum = DenseMatrix::<T>::identity(n);
    let mut term = DenseMatrix::<T>::identity(n);
    for j in 1..=30u32 {
        term = term.matmul(&b).scale(1.0 / j as f64);
        sum.add_assign(&term);
        if term.fro_norm() <= 1e-16 * sum.fro_norm() {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}
