//! Rank-k updates that keep an `n x n` parameter exactly unitary, in
//! `O(k n^2)`: direct polar projection of the perturbed matrix, and
//! transport along the geodesic of the tangent-projected gradient. Both run
//! entirely in the <= 2k-dimensional subspace spanned by the factor panels;
//! no `n x n` matrix-matrix product ever happens on the fast path.

mod io;

pub use io::{load_parameter, save_parameter, AnyParameter};

use crate::error::{Error, Result};
use crate::lowrank::LowRankFactor;
use crate::numerics::{
    gram_schmidt, herm_eig_small, polar_project_dense, unitarity_error, DenseMatrix, Entry, Field,
    GS_DEFAULT_TOL,
};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Which rank-k update rule a parameter is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Project `U - eta G` back onto the closest unitary (polar step).
    Direct,
    /// Rotate along the geodesic of the tangent-projected gradient.
    /// Involves no inversion, hence the preferred default.
    Tangent,
}

/// Initialization schemes for unitary/orthogonal parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    Identity,
    /// Block-diagonal 2x2 rotations, angles uniform on [-pi, pi).
    Henaff,
    /// Same blocks with angles s = sqrt((1 - cos t) / (1 + cos t)),
    /// t uniform on [0, pi/2].
    Cayley,
    /// Haar measure via Gram-Schmidt of a Gaussian matrix (the positive
    /// normalization plays the role of the R-diagonal phase correction).
    Haar,
}

/// An `n x n` matrix kept unitary/orthogonal across rank-k updates.
///
/// Exact arithmetic would keep every update exactly on the manifold;
/// floating point drifts slowly, so the parameter re-projects itself onto
/// the closest unitary every `reprojection_interval` updates (default: n,
/// amortizing the O(n^3) polar step to O(n^2) per update). Tangent-mode
/// parameters are stable without it and may set the interval to `None`.
#[derive(Clone, Debug)]
pub struct UnitaryParameter<T: Entry> {
    matrix: DenseMatrix<T>,
    steps_since_reprojection: usize,
    reprojection_interval: Option<usize>,
    drift_tolerance: f64,
}

pub const DEFAULT_DRIFT_TOLERANCE: f64 = 1e-6;

impl<T: Entry> UnitaryParameter<T> {
    /// Wrap a matrix, verifying it is unitary within the drift tolerance.
    pub fn from_matrix(matrix: DenseMatrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "unitary parameter must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let err = unitarity_error(&matrix);
        if err >= DEFAULT_DRIFT_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "matrix is not unitary: drift {err:.3e} >= {DEFAULT_DRIFT_TOLERANCE:.0e}"
            )));
        }
        let n = matrix.rows();
        Ok(Self {
            matrix,
            steps_since_reprojection: 0,
            reprojection_interval: Some(n),
            drift_tolerance: DEFAULT_DRIFT_TOLERANCE,
        })
    }

    /// Wrap a matrix without the manifold check. Finite-difference
    /// harnesses need to evaluate losses at off-manifold perturbations;
    /// everything else should go through [`Self::from_matrix`].
    pub fn from_matrix_unchecked(matrix: DenseMatrix<T>) -> Self {
        assert!(matrix.is_square(), "unitary parameter must be square");
        let n = matrix.rows();
        Self {
            matrix,
            steps_since_reprojection: 0,
            reprojection_interval: Some(n),
            drift_tolerance: DEFAULT_DRIFT_TOLERANCE,
        }
    }

    #[inline]
    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.matrix
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
    #[inline]
    pub fn field(&self) -> Field {
        T::FIELD
    }
    #[inline]
    pub fn steps_since_reprojection(&self) -> usize {
        self.steps_since_reprojection
    }
    #[inline]
    pub fn reprojection_interval(&self) -> Option<usize> {
        self.reprojection_interval
    }
    #[inline]
    pub fn drift_tolerance(&self) -> f64 {
        self.drift_tolerance
    }

    /// `None` disables periodic reprojection (tangent-mode usage).
    pub fn with_reprojection_interval(mut self, interval: Option<usize>) -> Self {
        self.reprojection_interval = interval;
        self
    }

    pub fn with_drift_tolerance(mut self, tol: f64) -> Self {
        self.drift_tolerance = tol;
        self
    }

    /// Current `||U^H U - I||_F`. O(n^3); diagnostics only.
    pub fn unitarity_error(&self) -> f64 {
        unitarity_error(&self.matrix)
    }

    /// Rank-k direct update: the unitary closest in Frobenius norm to
    /// `U - eta * G`.
    pub fn update_direct(&self, g: &LowRankFactor<T>, eta: f64) -> Result<Self> {
        match direct_step(&self.matrix, g, eta)? {
            None => Ok(self.clone()),
            Some(matrix) => Ok(self.advanced(matrix)?),
        }
    }

    /// Rank-k tangent update: `U exp(-eta U^H Pi_T(G))`.
    pub fn update_tangent(&self, g: &LowRankFactor<T>, eta: f64) -> Result<Self> {
        match tangent_step(&self.matrix, g, eta)? {
            None => Ok(self.clone()),
            Some(matrix) => Ok(self.advanced(matrix)?),
        }
    }

    fn advanced(&self, matrix: DenseMatrix<T>) -> Result<Self> {
        let mut next = Self {
            matrix,
            steps_since_reprojection: self.steps_since_reprojection + 1,
            reprojection_interval: self.reprojection_interval,
            drift_tolerance: self.drift_tolerance,
        };
        if let Some(interval) = next.reprojection_interval {
            if next.steps_since_reprojection >= interval {
                next = next.reproject()?;
            }
        }
        Ok(next)
    }

    /// Snap back onto the manifold via the dense polar projection and reset
    /// the drift counter.
    pub fn reproject(&self) -> Result<Self> {
        let matrix = polar_project_dense(&self.matrix)?;
        Ok(Self {
            matrix,
            steps_since_reprojection: 0,
            reprojection_interval: self.reprojection_interval,
            drift_tolerance: self.drift_tolerance,
        })
    }
}

/// Orthogonal projection of `X` onto the tangent space at `U`:
/// `P = (X - U X^H U) / 2`, the Frobenius-closest tangent vector to `X`.
/// `U^H P` is skew-Hermitian.
pub fn tangent_project<T: Entry>(
    u: &DenseMatrix<T>,
    x: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    if !u.is_square() || !x.same_shape(u) {
        return Err(Error::DimensionMismatch(format!(
            "tangent projection needs matching square matrices, got {}x{} and {}x{}",
            u.rows(),
            u.cols(),
            x.rows(),
            x.cols()
        )));
    }
    let drift = unitarity_error(u);
    if drift >= DEFAULT_DRIFT_TOLERANCE {
        return Err(Error::InvalidState(format!(
            "tangent projection at a non-unitary point: drift {drift:.3e}"
        )));
    }
    let uxu = u.matmul(&x.adjoint()).matmul(u);
    Ok(x.sub(&uxu).scale(0.5))
}

/// Orthonormal basis of the update subspace span{b_i} + span{a_hat_i}.
fn update_basis<T: Entry>(
    b: &DenseMatrix<T>,
    a_hat: &DenseMatrix<T>,
) -> Result<(DenseMatrix<T>, usize)> {
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(b.cols() + a_hat.cols());
    for j in 0..b.cols() {
        cols.push(b.col(j));
    }
    for j in 0..a_hat.cols() {
        cols.push(a_hat.col(j));
    }
    gram_schmidt(&cols, GS_DEFAULT_TOL)
}

/// Pure direct step on a matrix. Returns `None` when the update is
/// degenerate (zero gradient / empty subspace) and the input should be kept
/// as-is.
///
/// The perturbed matrix is `M = U + A B^H` with `A = -eta * left`. Its Gram
/// matrix is `M^H M = I + A_hat B^H + B A_hat^H - B (A^H A) B^H` where
/// `A_hat = M^H A`, a rank <= 2k Hermitian perturbation of the identity.
/// Eigendecomposing it inside the subspace gives the inverse square root by
/// eigenvalue manipulation: the polar factor is
/// `M + sum_j ((s_j + 1)^{-1/2} - 1) (M u_j) u_j^H`.
pub fn direct_step<T: Entry>(
    u: &DenseMatrix<T>,
    g: &LowRankFactor<T>,
    eta: f64,
) -> Result<Option<DenseMatrix<T>>> {
    check_factor_shape(u, g)?;
    if g.is_zero() {
        return Ok(None);
    }
    let a = g.left().scale(-eta);
    let b = g.right();

    // M = U + A B^H, materialized in O(k n^2).
    let mut m = u.clone();
    DenseMatrix::gemm_into(T::ONE, &a, &b.adjoint(), T::ONE, &mut m);

    // A_hat = M^H A = U^H A + B (A^H A).
    let w = a.adjoint().matmul(&a); // k x k
    let mut a_hat = u.adjoint().matmul(&a);
    DenseMatrix::gemm_into(T::ONE, b, &w, T::ONE, &mut a_hat);

    let (basis, rank) = update_basis(b, &a_hat)?;
    if rank == 0 {
        return Ok(None);
    }

    // Subspace representation of M^H M - I.
    let ac = basis.adjoint().matmul(&a_hat); // r x k
    let bc = basis.adjoint().matmul(b); // r x k
    let mut t_sub = ac.matmul(&bc.adjoint());
    t_sub.add_assign(&bc.matmul(&ac.adjoint()));
    let bw = bc.matmul(&w);
    DenseMatrix::gemm_into(-T::ONE, &bw, &bc.adjoint(), T::ONE, &mut t_sub);
    let t_sub = t_sub.add(&t_sub.adjoint()).scale(0.5);

    let eig = herm_eig_small(&t_sub)?;
    let s_min = *eig.values.last().expect("non-empty spectrum");
    if s_min <= -1.0 + 1e-10 {
        return Err(Error::StepTooLarge { eigenvalue: s_min });
    }

    // E = C diag((s + 1)^{-1/2} - 1) C^H, then U_new = M + (M V) E V^H.
    let coeffs: Vec<f64> = eig.values.iter().map(|s| 1.0 / (s + 1.0).sqrt() - 1.0).collect();
    let e_sub = eigvec_weighted_outer(&eig.vectors, &coeffs);
    let mv = m.matmul(&basis); // n x r
    let mve = mv.matmul(&e_sub);
    DenseMatrix::gemm_into(T::ONE, &mve, &basis.adjoint(), T::ONE, &mut m);
    Ok(Some(m))
}

/// Pure tangent step on a matrix; `None` on a degenerate update.
///
/// `U^H Pi_T(G) = (A_hat B^H - B A_hat^H) / 2` with `A_hat = U^H A` is
/// skew-Hermitian of rank <= 2k. Its subspace eigendecomposition (run in
/// complex arithmetic for both fields, since the spectrum is purely
/// imaginary) turns the exponential into per-eigenvalue phases:
/// `U_new = U + sum_j (exp(-eta s_j) - 1) (U u_j) u_j^H`, which is
/// unconditionally unitary.
pub fn tangent_step<T: Entry>(
    u: &DenseMatrix<T>,
    g: &LowRankFactor<T>,
    eta: f64,
) -> Result<Option<DenseMatrix<T>>> {
    check_factor_shape(u, g)?;
    if g.is_zero() {
        return Ok(None);
    }
    let a = g.left();
    let b = g.right();
    let a_hat = u.adjoint().matmul(a);

    let (basis, rank) = update_basis(b, &a_hat)?;
    if rank == 0 {
        return Ok(None);
    }

    // Subspace representation of the skew-Hermitian U^H Pi_T(G), promoted
    // to complex where its spectrum lives.
    let ac = basis.adjoint().matmul(&a_hat).to_complex();
    let bc = basis.adjoint().matmul(b).to_complex();
    let mut t_sub = ac.matmul(&bc.adjoint());
    DenseMatrix::gemm_into(-Complex64::ONE, &bc, &ac.adjoint(), Complex64::ONE, &mut t_sub);
    let t_sub = t_sub.sub(&t_sub.adjoint()).scale(0.25);
    // (the two symmetrizations combined: T = (S - S^H)/2 with S already
    // skew up to roundoff, and the overall 1/2 from the projection)

    // i T is Hermitian with eigenvalues mu_j; T's are s_j = -i mu_j.
    let i_unit = Complex64::new(0.0, 1.0);
    let eig = herm_eig_small(&t_sub.scale_entry(i_unit))?;

    // E = C diag(exp(i eta mu_j) - 1) C^H.
    let n_r = eig.values.len();
    let mut phase = DenseMatrix::<Complex64>::zeros(n_r, n_r);
    for (j, &mu) in eig.values.iter().enumerate() {
        phase[(j, j)] = Complex64::new(0.0, eta * mu).exp() - Complex64::ONE;
    }
    let e_complex = eig.vectors.matmul(&phase).matmul(&eig.vectors.adjoint());

    if T::FIELD == Field::Real {
        let residue = e_complex.max_imag();
        if residue > 1e-8 * (1.0 + e_complex.fro_norm()) {
            return Err(Error::Numeric(format!(
                "tangent update of an orthogonal parameter came back complex (residue {residue:.3e})"
            )));
        }
    }
    let e_sub = DenseMatrix::<T>::from_complex_lossy(&e_complex);

    let uv = u.matmul(&basis); // n x r
    let uve = uv.matmul(&e_sub);
    let mut out = u.clone();
    DenseMatrix::gemm_into(T::ONE, &uve, &basis.adjoint(), T::ONE, &mut out);
    Ok(Some(out))
}

fn check_factor_shape<T: Entry>(u: &DenseMatrix<T>, g: &LowRankFactor<T>) -> Result<()> {
    if g.rows() != u.rows() || g.cols() != u.cols() {
        return Err(Error::DimensionMismatch(format!(
            "factor is {}x{} but parameter is {}x{}",
            g.rows(),
            g.cols(),
            u.rows(),
            u.cols()
        )));
    }
    Ok(())
}

/// `sum_j w_j c_j c_j^H` for the columns of an eigenvector matrix.
fn eigvec_weighted_outer<T: Entry>(vectors: &DenseMatrix<T>, weights: &[f64]) -> DenseMatrix<T> {
    let n = vectors.rows();
    let mut weighted = DenseMatrix::<T>::zeros(n, weights.len());
    for (j, &w) in weights.iter().enumerate() {
        for i in 0..n {
            weighted[(i, j)] = vectors[(i, j)].scale(w);
        }
    }
    weighted.matmul(&vectors.adjoint())
}

/// `||update_direct - update_tangent||_F` at the same (U, G, eta): a
/// diagnostic whose Theta(eta^2) scaling certifies that both updates agree
/// with the shared first-order expansion `U + Pi_T(-eta G)`.
pub fn first_order_gap<T: Entry>(
    u: &UnitaryParameter<T>,
    g: &LowRankFactor<T>,
    eta: f64,
) -> Result<f64> {
    let d = direct_step(u.matrix(), g, eta)?;
    let t = tangent_step(u.matrix(), g, eta)?;
    Ok(match (d, t) {
        (Some(d), Some(t)) => d.sub(&t).fro_norm(),
        (None, None) => 0.0,
        // A degenerate update is a no-op in both modes.
        (Some(d), None) => d.sub(u.matrix()).fro_norm(),
        (None, Some(t)) => t.sub(u.matrix()).fro_norm(),
    })
}

/// Draw a fresh unitary/orthogonal parameter.
pub fn init_parameter<T: Entry>(
    n: usize,
    scheme: InitScheme,
    rng: &mut ChaCha8Rng,
) -> Result<UnitaryParameter<T>> {
    let matrix = init_matrix::<T>(n, scheme, rng)?;
    UnitaryParameter::from_matrix(matrix)
}

/// Matrix-level initialization (shared with the per-block convolution
/// filters).
pub fn init_matrix<T: Entry>(
    n: usize,
    scheme: InitScheme,
    rng: &mut ChaCha8Rng,
) -> Result<DenseMatrix<T>> {
    match scheme {
        InitScheme::Identity => Ok(DenseMatrix::identity(n)),
        InitScheme::Henaff | InitScheme::Cayley => {
            if n % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "{scheme:?} initialization needs even n, got {n}"
                )));
            }
            let mut m = DenseMatrix::<T>::zeros(n, n);
            for blk in 0..n / 2 {
                let angle = match scheme {
                    InitScheme::Henaff => rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                    InitScheme::Cayley => {
                        let t: f64 = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
                        ((1.0 - t.cos()) / (1.0 + t.cos())).sqrt()
                    }
                    _ => unreachable!(),
                };
                let (s, c) = angle.sin_cos();
                let i = 2 * blk;
                m[(i, i)] = T::from_re(c);
                m[(i, i + 1)] = T::from_re(s);
                m[(i + 1, i)] = T::from_re(-s);
                m[(i + 1, i + 1)] = T::from_re(c);
            }
            Ok(m)
        }
        InitScheme::Haar => {
            let g = DenseMatrix::<T>::standard_normal(n, n, rng);
            let cols: Vec<Vec<T>> = (0..n).map(|j| g.col(j)).collect();
            let (q, rank) = gram_schmidt(&cols, 1e-12)?;
            if rank != n {
                return Err(Error::Numeric(format!(
                    "Gaussian matrix was numerically rank deficient ({rank} < {n})"
                )));
            }
            Ok(q)
        }
    }
}
