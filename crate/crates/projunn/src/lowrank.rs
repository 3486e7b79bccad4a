//! Factored low-rank matrices and the two randomized samplers that
//! compress approximately-low-rank gradients to explicit rank-k form.
//!
//! Samplers consume dense gradients and are deterministic given the seeded
//! generator; callers that parallelize construct one generator per call so
//! no RNG state is ever shared.

use crate::error::{Error, Result};
use crate::numerics::{gram_schmidt_cols, herm_eig_small, svd, DenseMatrix, Entry};
use rand::distributions::{Distribution, WeightedIndex};
use rand_chacha::ChaCha8Rng;
use std::io::Write;

/// Rank-k factored matrix `G = left * right^H`, stored as two panels with k
/// columns each (`G = sum_i a_i b_i^H` over the panel columns).
#[derive(Clone, Debug)]
pub struct LowRankFactor<T: Entry> {
    left: DenseMatrix<T>,
    right: DenseMatrix<T>,
}

impl<T: Entry> LowRankFactor<T> {
    pub fn new(left: DenseMatrix<T>, right: DenseMatrix<T>) -> Result<Self> {
        if left.cols() != right.cols() {
            return Err(Error::DimensionMismatch(format!(
                "factor panels disagree on rank: {} vs {}",
                left.cols(),
                right.cols()
            )));
        }
        if left.cols() == 0 {
            return Err(Error::InvalidArgument("factor rank must be >= 1".into()));
        }
        Ok(Self { left, right })
    }

    pub fn zero(rows: usize, cols: usize, k: usize) -> Self {
        Self { left: DenseMatrix::zeros(rows, k), right: DenseMatrix::zeros(cols, k) }
    }

    #[inline]
    pub fn left(&self) -> &DenseMatrix<T> {
        &self.left
    }
    #[inline]
    pub fn right(&self) -> &DenseMatrix<T> {
        &self.right
    }
    #[inline]
    pub fn rank_bound(&self) -> usize {
        self.left.cols()
    }
    pub fn rows(&self) -> usize {
        self.left.rows()
    }
    pub fn cols(&self) -> usize {
        self.right.rows()
    }

    pub fn is_zero(&self) -> bool {
        self.left.fro_norm_sq() == 0.0 || self.right.fro_norm_sq() == 0.0
    }

    /// Dense `left * right^H`.
    pub fn materialize(&self) -> DenseMatrix<T> {
        let mut g = DenseMatrix::zeros(self.rows(), self.cols());
        DenseMatrix::gemm_into(T::ONE, &self.left, &self.right.adjoint(), T::ZERO, &mut g);
        g
    }

    /// Factor with the left panel scaled by `s` (represents `s * G`).
    pub fn scale_left(&self, s: f64) -> Self {
        Self { left: self.left.scale(s), right: self.right.clone() }
    }
}

/// Relative Frobenius error `||A - G||_F / ||A||_F` of an approximation.
/// Defined as 0 for a zero `A` approximated by a zero factor.
pub fn rel_error<T: Entry>(a: &DenseMatrix<T>, factor: &LowRankFactor<T>) -> f64 {
    let denom = a.fro_norm();
    let num = a.sub(&factor.materialize()).fro_norm();
    if denom == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / denom
    }
}

/// Best rank-k approximation by full SVD (Eckart-Young optimal); the test
/// oracle both samplers are measured against.
pub fn truncated_svd_oracle<T: Entry>(a: &DenseMatrix<T>, k: usize) -> Result<LowRankFactor<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument("rank k must be >= 1".into()));
    }
    let d = svd(a);
    let kk = k.min(d.singular_values.len());
    let mut left = DenseMatrix::zeros(a.rows(), k);
    let mut right = DenseMatrix::zeros(a.cols(), k);
    for j in 0..kk {
        let s = d.singular_values[j];
        for i in 0..a.rows() {
            left[(i, j)] = d.u[(i, j)].scale(s);
        }
        for i in 0..a.cols() {
            right[(i, j)] = d.v[(i, j)];
        }
    }
    LowRankFactor::new(left, right)
}

/// Linear-time SVD by column sampling: draw `c` columns i.i.d. with
/// probability proportional to their squared norms, rescale, and recover
/// approximate left singular vectors from the eigendecomposition of the
/// small `c x c` Gram matrix. The right panel is `A^H` applied to the left
/// singular vectors.
pub fn column_sample<T: Entry>(
    a: &DenseMatrix<T>,
    k: usize,
    c: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LowRankFactor<T>> {
    let (n, m) = (a.rows(), a.cols());
    if k == 0 || k > c {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= c, got k={k}, c={c}")));
    }
    if c > m {
        return Err(Error::InvalidArgument(format!("c={c} exceeds column count {m}")));
    }

    let col_sq: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| a[(i, j)].modulus_sq()).sum::<f64>())
        .collect();
    let total: f64 = col_sq.iter().sum();
    if total == 0.0 {
        return Ok(LowRankFactor::zero(n, m, k));
    }

    // Zero-norm columns get probability 0; ties are broken by the
    // generator's draws.
    let dist = WeightedIndex::new(&col_sq)
        .map_err(|e| Error::InvalidArgument(format!("column weights: {e}")))?;
    let mut panel = DenseMatrix::<T>::zeros(n, c);
    for t in 0..c {
        let j = dist.sample(rng);
        let p_j = col_sq[j] / total;
        let scale = 1.0 / (c as f64 * p_j).sqrt();
        for i in 0..n {
            panel[(i, t)] = a[(i, j)].scale(scale);
        }
    }

    // Eigen-decompose the c x c Gram matrix of the panel.
    let gram = panel.adjoint().matmul(&panel);
    let eig = herm_eig_small(&gram)?;
    let lam_floor = eig.values[0].max(0.0) * 1e-24;

    // Left singular vector estimates h_t = panel * v_t / sigma_t; ranks
    // past the numerical rank of the Gram matrix yield zero columns.
    let mut left = DenseMatrix::<T>::zeros(n, k);
    for t in 0..k.min(c) {
        let lam = eig.values[t];
        if lam <= lam_floor || lam <= 0.0 {
            continue;
        }
        let inv_sigma = 1.0 / lam.sqrt();
        let v_t = eig.vectors.col(t);
        let h = panel.matvec(&v_t);
        for i in 0..n {
            left[(i, t)] = h[i].scale(inv_sigma);
        }
    }
    let right = a.adjoint().matmul(&left);
    LowRankFactor::new(left, right)
}

/// Randomized range finder: project onto a Gaussian test subspace of
/// dimension `k + oversample`, orthonormalize, and take the rank-k
/// truncated SVD of the small projected matrix.
pub fn lsi_sample<T: Entry>(
    a: &DenseMatrix<T>,
    k: usize,
    oversample: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LowRankFactor<T>> {
    let (n, m) = (a.rows(), a.cols());
    if k == 0 {
        return Err(Error::InvalidArgument("rank k must be >= 1".into()));
    }
    let p = k + oversample;
    if p > n.min(m) {
        return Err(Error::InvalidArgument(format!(
            "k + oversample = {p} exceeds min(n, m) = {}",
            n.min(m)
        )));
    }

    let omega = DenseMatrix::<T>::standard_normal(m, p, rng);
    let y = a.matmul(&omega);
    let (q, rank) = gram_schmidt_cols(&y, 1e-12)?;
    if rank == 0 {
        return Ok(LowRankFactor::zero(n, m, k));
    }
    let b = q.adjoint().matmul(a); // rank x m
    let d = svd(&b);
    let kk = k.min(d.singular_values.len());
    let mut u_scaled = DenseMatrix::<T>::zeros(rank, k);
    let mut right = DenseMatrix::<T>::zeros(m, k);
    for j in 0..kk {
        let s = d.singular_values[j];
        for i in 0..rank {
            u_scaled[(i, j)] = d.u[(i, j)].scale(s);
        }
        for i in 0..m {
            right[(i, j)] = d.v[(i, j)];
        }
    }
    let left = q.matmul(&u_scaled);
    LowRankFactor::new(left, right)
}

/// Which rank-k compressor to run on a dense gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Column,
    Lsi,
    Exact,
}

/// Run the chosen sampler with its default hyperparameters: `c = 4k`
/// columns (capped at the column count) for column sampling, oversampling
/// 5 (capped by the dimensions) for the range finder, and the exact
/// truncated SVD for `Exact`.
pub fn sample_with<T: Entry>(
    kind: SamplerKind,
    a: &DenseMatrix<T>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LowRankFactor<T>> {
    match kind {
        SamplerKind::Column => {
            let c = (4 * k).clamp(k, a.cols());
            column_sample(a, k, c, rng)
        }
        SamplerKind::Lsi => {
            let max_dim = a.rows().min(a.cols());
            if k > max_dim {
                return Err(Error::InvalidArgument(format!(
                    "rank {k} exceeds min dimension {max_dim}"
                )));
            }
            let oversample = 5.min(max_dim - k);
            lsi_sample(a, k, oversample, rng)
        }
        SamplerKind::Exact => truncated_svd_oracle(a, k),
    }
}

/// How compressible a matrix is: its singular values, the relative error
/// curve `E_rel(k)` for `k = 1..=K`, and the stable rank
/// `||A||_F^2 / ||A||_2^2`.
#[derive(Clone, Debug)]
pub struct RankProfile {
    pub singular_values: Vec<f64>,
    pub rel_error_curve: Vec<f64>,
    pub stable_rank: f64,
}

impl RankProfile {
    /// E_rel at rank `k` (1-based); ranks past min(n, m) are exact.
    pub fn rel_error_at(&self, k: usize) -> f64 {
        assert!(k >= 1, "rank is 1-based");
        if k > self.rel_error_curve.len() {
            0.0
        } else {
            self.rel_error_curve[k - 1]
        }
    }

    /// CSV with a stable-rank header row followed by the error curve,
    /// consumed by the CLI's plot-data output.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "stable_rank,{:.12e}", self.stable_rank)?;
        writeln!(w, "k,rel_error")?;
        for (i, e) in self.rel_error_curve.iter().enumerate() {
            writeln!(w, "{},{:.12e}", i + 1, e)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Full-SVD rank profile of `A`, with the error curve truncated at `K`.
pub fn rank_profile<T: Entry>(a: &DenseMatrix<T>, max_rank: usize) -> RankProfile {
    let d = svd(a);
    let sv = d.singular_values;
    // Suffix sums from the small end; a running subtraction would cancel
    // catastrophically when the spectrum has a sharp cliff.
    let mut suffix_sq = vec![0.0; sv.len() + 1];
    for i in (0..sv.len()).rev() {
        suffix_sq[i] = suffix_sq[i + 1] + sv[i] * sv[i];
    }
    let total_sq = suffix_sq[0];
    let stable_rank = if total_sq == 0.0 { 0.0 } else { total_sq / (sv[0] * sv[0]) };
    let kmax = max_rank.min(sv.len()).max(1);
    let mut curve = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let e = if total_sq == 0.0 { 0.0 } else { (suffix_sq[k] / total_sq).sqrt() };
        curve.push(e);
    }
    RankProfile { singular_values: sv, rel_error_curve: curve, stable_rank }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Field;
    use num_complex::Complex64;
    use rand::SeedableRng;

    fn outer<T: Entry>(a: &[T], b: &[T]) -> DenseMatrix<T> {
        DenseMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    /// Matrix with prescribed singular values via random rotations.
    fn with_spectrum<T: Entry>(n: usize, sv: &[f64], rng: &mut ChaCha8Rng) -> DenseMatrix<T> {
        let (u, _) = gram_schmidt_cols(&DenseMatrix::<T>::standard_normal(n, n, rng), 1e-10).unwrap();
        let (v, _) = gram_schmidt_cols(&DenseMatrix::<T>::standard_normal(n, n, rng), 1e-10).unwrap();
        let mut s = DenseMatrix::<T>::zeros(n, n);
        for (i, &x) in sv.iter().enumerate() {
            s[(i, i)] = T::from_re(x);
        }
        u.matmul(&s).matmul(&v.adjoint())
    }

    #[test]
    fn column_sampler_exact_on_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a_vec: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin() + 0.1).collect();
        let b_vec: Vec<f64> = (0..32).map(|i| (i as f64 * 0.11).cos() + 0.2).collect();
        let a = outer(&a_vec, &b_vec);
        let f = column_sample(&a, 1, 4, &mut rng).unwrap();
        assert!(rel_error(&a, &f) < 1e-10);
    }

    #[test]
    fn samplers_zero_matrix_gives_zero_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a = DenseMatrix::<f64>::zeros(8, 8);
        let f = column_sample(&a, 2, 4, &mut rng).unwrap();
        assert!(f.is_zero());
        assert_eq!(f.rank_bound(), 2);
        let f = lsi_sample(&a, 2, 3, &mut rng).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn lsi_exact_on_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let sv = [3.0, 2.0, 1.0];
        let mut full_sv = vec![0.0; 32];
        full_sv[..3].copy_from_slice(&sv);
        let a = with_spectrum::<Complex64>(32, &full_sv, &mut rng);
        let f = lsi_sample(&a, 3, 5, &mut rng).unwrap();
        assert!(rel_error(&a, &f) < 1e-9);
    }

    #[test]
    fn lsi_identity_best_rank_one() {
        // Best rank-1 approximation of I_16 leaves E_rel = sqrt(15/16).
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let a = DenseMatrix::<f64>::identity(16);
        let f = lsi_sample(&a, 1, 5, &mut rng).unwrap();
        let expect = (15.0f64 / 16.0).sqrt();
        assert!((rel_error(&a, &f) - expect).abs() < 0.05);
    }

    #[test]
    fn oracle_on_identity() {
        let a = DenseMatrix::<f64>::identity(4);
        let f = truncated_svd_oracle(&a, 2).unwrap();
        assert!((rel_error(&a, &f) - (0.5f64).sqrt()).abs() < 1e-12);
        let rank1 = outer(&[1.0, 2.0], &[3.0, 4.0]);
        let f1 = truncated_svd_oracle(&rank1, 1).unwrap();
        assert!(rel_error(&rank1, &f1) < 1e-12);
    }

    #[test]
    fn oracle_error_matches_singular_value_tail() {
        // Independent route: eigenvalues of A^H A from the Jacobi solver.
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let a = DenseMatrix::<Complex64>::standard_normal(32, 32, &mut rng);
        let k = 8;
        let f = truncated_svd_oracle(&a, k).unwrap();
        let gram = a.adjoint().matmul(&a);
        let eig = herm_eig_small(&gram).unwrap();
        let tail: f64 = eig.values[k..].iter().map(|l| l.max(0.0)).sum();
        let expect = (tail / a.fro_norm_sq()).sqrt();
        assert!((rel_error(&a, &f) - expect).abs() < 1e-8);
    }

    #[test]
    fn decaying_spectrum_sampler_quality() {
        // sigma_i = 2^-i at n = 64: both samplers stay within their factor
        // of the Eckart-Young optimum on average (50 seeds).
        let n = 64;
        let k = 4;
        let sv: Vec<f64> = (1..=n).map(|i| 2f64.powi(-(i as i32))).collect();
        let mut gen_rng = ChaCha8Rng::seed_from_u64(26);
        let a = with_spectrum::<f64>(n, &sv, &mut gen_rng);
        let opt = rel_error(&a, &truncated_svd_oracle(&a, k).unwrap());
        let mut col_sum = 0.0;
        let mut lsi_sum = 0.0;
        let trials = 50;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            col_sum += rel_error(&a, &column_sample(&a, k, 4 * k, &mut rng).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
            lsi_sum += rel_error(&a, &lsi_sample(&a, k, 5, &mut rng).unwrap());
        }
        let col_mean = col_sum / trials as f64;
        let lsi_mean = lsi_sum / trials as f64;
        assert!(col_mean <= 2.0 * opt, "column: {col_mean:.4} vs optimum {opt:.4}");
        assert!(lsi_mean <= 1.5 * opt, "lsi: {lsi_mean:.4} vs optimum {opt:.4}");
    }

    #[test]
    fn sampler_reproducibility_bitwise() {
        let mut gen_rng = ChaCha8Rng::seed_from_u64(27);
        let a = DenseMatrix::<Complex64>::standard_normal(24, 24, &mut gen_rng);
        for sampler in 0..2 {
            let run = |seed: u64| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                if sampler == 0 {
                    column_sample(&a, 3, 12, &mut rng).unwrap()
                } else {
                    lsi_sample(&a, 3, 5, &mut rng).unwrap()
                }
            };
            let f1 = run(99);
            let f2 = run(99);
            assert!(f1.left() == f2.left() && f1.right() == f2.right());
            let f3 = run(100);
            assert!(f1.left() != f3.left() || f1.right() != f3.right());
        }
    }

    #[test]
    fn oracle_dominates_samplers_and_errors_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        for trial in 0..20 {
            let n = 8 + (trial % 3) * 8;
            let a = DenseMatrix::<f64>::standard_normal(n, n, &mut rng);
            let k = 1 + trial % 4;
            let opt = rel_error(&a, &truncated_svd_oracle(&a, k).unwrap());
            for f in [
                column_sample(&a, k, (4 * k).min(n), &mut rng).unwrap(),
                lsi_sample(&a, k, 5.min(n - k), &mut rng).unwrap(),
            ] {
                let e = rel_error(&a, &f);
                assert!((0.0..=1.0 + 1e-12).contains(&e), "E_rel out of range: {e}");
                assert!(opt <= e + 1e-10, "oracle beaten: {opt} > {e}");
            }
        }
    }

    #[test]
    fn rank_profile_identity() {
        let a = DenseMatrix::<f64>::identity(10);
        let p = rank_profile(&a, 10);
        assert!((p.stable_rank - 10.0).abs() < 1e-10);
        for k in 1..=10usize {
            let expect = ((10 - k) as f64 / 10.0).sqrt();
            assert!((p.rel_error_at(k) - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_profile_projector() {
        // Orthogonal projector of rank 3 in dimension 12.
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = DenseMatrix::<f64>::standard_normal(12, 3, &mut rng);
        let (q, rank) = gram_schmidt_cols(&g, 1e-10).unwrap();
        assert_eq!(rank, 3);
        let proj = q.matmul(&q.adjoint());
        let p = rank_profile(&proj, 12);
        assert!((p.stable_rank - 3.0).abs() < 1e-8);
        assert!(p.rel_error_at(3) < 1e-10);
    }

    #[test]
    fn rank_profile_curve_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..10 {
            let a = DenseMatrix::<Complex64>::standard_normal(20, 14, &mut rng);
            let p = rank_profile(&a, 14);
            assert!(p.rel_error_curve.windows(2).all(|w| w[0] >= w[1] - 1e-14));
        }
    }

    #[test]
    fn rank_profile_csv_shape() {
        let a = DenseMatrix::<f64>::identity(4);
        let p = rank_profile(&a, 4);
        let csv = p.to_csv_string();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("stable_rank,"));
        assert_eq!(lines.next().unwrap(), "k,rel_error");
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn field_tags_propagate() {
        let a = DenseMatrix::<Complex64>::identity(3);
        assert_eq!(a.field(), Field::Complex);
        let f = truncated_svd_oracle(&a, 1).unwrap();
        assert_eq!(f.left().field(), Field::Complex);
    }
}
