//! Scalar field abstraction: every algorithm in this crate is generic over
//! the real (orthogonal) and complex (unitary) fields through [`Entry`].

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Which field a scalar, matrix or parameter lives over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Field::Real => write!(f, "real"),
            Field::Complex => write!(f, "complex"),
        }
    }
}

mod sealed {
    pub trait Sealed {}
    impl Sealed for f64 {}
    impl Sealed for num_complex::Complex64 {}
}

/// A matrix entry: `f64` or [`Complex64`].
///
/// Conjugation is the identity on the real variant, so adjoints degrade to
/// plain transposes there.
pub trait Entry:
    sealed::Sealed
    + Copy
    + PartialEq
    + Debug
    + Display
    + Send
    + Sync
    + Sum
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const FIELD: Field;
    const ZERO: Self;
    const ONE: Self;

    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn modulus(self) -> f64;
    fn modulus_sq(self) -> f64;
    fn from_re(x: f64) -> Self;
    fn to_c64(self) -> Complex64;
    /// Demote a complex value, discarding the imaginary part on the real
    /// field. Callers are responsible for checking the residue first.
    fn from_c64_lossy(z: Complex64) -> Self;
    fn scale(self, s: f64) -> Self;
    /// Standard normal draw; on the complex field both components are
    /// independent N(0,1).
    fn standard_normal<R: Rng>(rng: &mut R) -> Self;

    /// C <- alpha * A * B + beta * C with arbitrary strides (row stride,
    /// col stride per operand), dispatched to the matching gemm kernel.
    ///
    /// # Safety
    /// Pointers must cover the strided index ranges and C must not alias
    /// A or B.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    /// Thin SVD `A = U diag(s) V^H` of a row-major `rows x cols` buffer,
    /// backed by nalgebra. Returns `(u, s, v)` with `u` of shape
    /// `rows x min`, `v` of shape `cols x min`, both row-major, and `s`
    /// sorted descending.
    fn svd_raw(rows: usize, cols: usize, data: &[Self]) -> (Vec<Self>, Vec<f64>, Vec<Self>);
}

fn svd_na<N>(rows: usize, cols: usize, data: &[N]) -> (Vec<N>, Vec<f64>, Vec<N>)
where
    N: nalgebra::ComplexField<RealField = f64> + Copy,
{
    let m = nalgebra::DMatrix::<N>::from_row_slice(rows, cols, data);
    let svd = m
        .try_svd(true, true, f64::EPSILON, 0)
        .expect("SVD did not converge");
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let k = s.len();
    let mut ubuf = Vec::with_capacity(rows * k);
    for i in 0..rows {
        for j in 0..k {
            ubuf.push(u[(i, j)]);
        }
    }
    let mut vbuf = Vec::with_capacity(cols * k);
    for i in 0..cols {
        for j in 0..k {
            vbuf.push(vt[(j, i)].conjugate());
        }
    }
    (ubuf, s, vbuf)
}

impl Entry for f64 {
    const FIELD: Field = Field::Real;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn im(self) -> f64 {
        0.0
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn modulus_sq(self) -> f64 {
        self * self
    }
    #[inline]
    fn from_re(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    #[inline]
    fn from_c64_lossy(z: Complex64) -> Self {
        z.re
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn standard_normal<R: Rng>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn svd_raw(rows: usize, cols: usize, data: &[Self]) -> (Vec<Self>, Vec<f64>, Vec<Self>) {
        svd_na(rows, cols, data)
    }
}

impl Entry for Complex64 {
    const FIELD: Field = Field::Complex;
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const ONE: Self = Complex64::new(1.0, 0.0);

    #[inline]
    fn conj(self) -> Self {
        Complex64::new(self.re, -self.im)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn im(self) -> f64 {
        self.im
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn modulus_sq(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn to_c64(self) -> Complex64 {
        self
    }
    #[inline]
    fn from_c64_lossy(z: Complex64) -> Self {
        z
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        Complex64::new(self.re * s, self.im * s)
    }
    #[inline]
    fn standard_normal<R: Rng>(rng: &mut R) -> Self {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        use matrixmultiply::CGemmOption::Standard;
        // Complex64 is #[repr(C)] { re: f64, im: f64 }, layout-identical to [f64; 2].
        matrixmultiply::zgemm(
            Standard,
            Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a as *const [f64; 2],
            rsa,
            csa,
            b as *const [f64; 2],
            rsb,
            csb,
            [beta.re, beta.im],
            c as *mut [f64; 2],
            rsc,
            csc,
        )
    }

    fn svd_raw(rows: usize, cols: usize, data: &[Self]) -> (Vec<Self>, Vec<f64>, Vec<Self>) {
        svd_na(rows, cols, data)
    }
}

