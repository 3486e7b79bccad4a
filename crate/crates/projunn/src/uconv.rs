//! Unitary/orthogonal convolution parameterized directly in the Fourier
//! domain as one C x C unitary block per spatial frequency, updated
//! blockwise with the low-rank manifold steps and verified against a
//! brute-force cyclic convolution oracle.
//!
//! Orthogonal (real) convolution needs the frequency blocks to be
//! Hermitian-symmetric across conjugate frequency pairs. Only a canonical
//! half-grid is stored and mirror blocks are derived by conjugation on
//! demand, so the symmetry holds by construction and cannot drift.
//! Self-paired frequencies (fixed points of the mirror map) hold real
//! orthogonal blocks and are updated in real arithmetic.

use crate::error::{Error, Result};
use crate::lowrank::{sample_with, SamplerKind};
use crate::manifold::{direct_step, init_matrix, tangent_step, InitScheme, UpdateMode};
use crate::numerics::{polar_project_dense, unitarity_error, DenseMatrix, Entry, Field};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Batched spatial data: `batch x height x width x channels`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialTensor<T: Entry> {
    batch: usize,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Entry> SpatialTensor<T> {
    pub fn zeros(batch: usize, height: usize, width: usize, channels: usize) -> Self {
        Self { batch, height, width, channels, data: vec![T::ZERO; batch * height * width * channels] }
    }

    pub fn standard_normal<R: Rng>(
        batch: usize,
        height: usize,
        width: usize,
        channels: usize,
        rng: &mut R,
    ) -> Self {
        let data = (0..batch * height * width * channels).map(|_| T::standard_normal(rng)).collect();
        Self { batch, height, width, channels, data }
    }

    #[inline]
    fn idx(&self, b: usize, r: usize, s: usize, c: usize) -> usize {
        debug_assert!(b < self.batch && r < self.height && s < self.width && c < self.channels);
        ((b * self.height + r) * self.width + s) * self.channels + c
    }

    #[inline]
    pub fn get(&self, b: usize, r: usize, s: usize, c: usize) -> T {
        self.data[self.idx(b, r, s, c)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, r: usize, s: usize, c: usize, v: T) {
        let i = self.idx(b, r, s, c);
        self.data[i] = v;
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|x| x.modulus_sq()).sum::<f64>().sqrt()
    }

    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|x| x.im().abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.data.len(), other.data.len());
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Self { data, ..*self }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { data: self.data.iter().map(|x| x.scale(s)).collect(), ..*self }
    }

    pub fn to_complex(&self) -> SpatialTensor<Complex64> {
        SpatialTensor {
            batch: self.batch,
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|x| x.to_c64()).collect(),
        }
    }

    pub fn from_complex_lossy(t: &SpatialTensor<Complex64>) -> Self {
        Self {
            batch: t.batch,
            height: t.height,
            width: t.width,
            channels: t.channels,
            data: t.data.iter().map(|&z| T::from_c64_lossy(z)).collect(),
        }
    }
}

/// A spatial filter tensor `height x width x out_channels x in_channels`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialFilter<T: Entry> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Entry> SpatialFilter<T> {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, data: vec![T::ZERO; height * width * channels * channels] }
    }

    pub fn standard_normal<R: Rng>(height: usize, width: usize, channels: usize, rng: &mut R) -> Self {
        let data =
            (0..height * width * channels * channels).map(|_| T::standard_normal(rng)).collect();
        Self { height, width, channels, data }
    }

    #[inline]
    fn idx(&self, m: usize, n: usize, d: usize, c: usize) -> usize {
        ((m * self.width + n) * self.channels + d) * self.channels + c
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize, d: usize, c: usize) -> T {
        self.data[self.idx(m, n, d, c)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, d: usize, c: usize, v: T) {
        let i = self.idx(m, n, d, c);
        self.data[i] = v;
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|x| x.im().abs()).fold(0.0, f64::max)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|x| x.modulus_sq()).sum::<f64>().sqrt()
    }

    pub fn to_complex(&self) -> SpatialFilter<Complex64> {
        SpatialFilter {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|x| x.to_c64()).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// 2-D FFT plumbing
// ---------------------------------------------------------------------------

/// In-place 2-D DFT over the spatial axes of every (batch, channel) plane.
/// Forward is unnormalized; inverse includes the 1/(MN) factor.
fn fft2_tensor(x: &mut SpatialTensor<Complex64>, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft_w =
        if inverse { planner.plan_fft_inverse(x.width) } else { planner.plan_fft_forward(x.width) };
    let fft_h =
        if inverse { planner.plan_fft_inverse(x.height) } else { planner.plan_fft_forward(x.height) };
    let mut line = vec![Complex64::ZERO; x.width.max(x.height)];
    for b in 0..x.batch {
        for c in 0..x.channels {
            for r in 0..x.height {
                for s in 0..x.width {
                    line[s] = x.get(b, r, s, c);
                }
                fft_w.process(&mut line[..x.width]);
                for s in 0..x.width {
                    x.set(b, r, s, c, line[s]);
                }
            }
            for s in 0..x.width {
                for r in 0..x.height {
                    line[r] = x.get(b, r, s, c);
                }
                fft_h.process(&mut line[..x.height]);
                for r in 0..x.height {
                    x.set(b, r, s, c, line[r]);
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / (x.height * x.width) as f64;
        for v in x.data.iter_mut() {
            *v = v.scale(scale);
        }
    }
}

/// Same 2-D DFT over the spatial axes of a filter tensor, for every (d, c).
fn fft2_filter(w: &mut SpatialFilter<Complex64>, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft_w =
        if inverse { planner.plan_fft_inverse(w.width) } else { planner.plan_fft_forward(w.width) };
    let fft_h =
        if inverse { planner.plan_fft_inverse(w.height) } else { planner.plan_fft_forward(w.height) };
    let c_total = w.channels;
    let mut line = vec![Complex64::ZERO; w.width.max(w.height)];
    for d in 0..c_total {
        for c in 0..c_total {
            for m in 0..w.height {
                for n in 0..w.width {
                    line[n] = w.get(m, n, d, c);
                }
                fft_w.process(&mut line[..w.width]);
                for n in 0..w.width {
                    w.set(m, n, d, c, line[n]);
                }
            }
            for n in 0..w.width {
                for m in 0..w.height {
                    line[m] = w.get(m, n, d, c);
                }
                fft_h.process(&mut line[..w.height]);
                for m in 0..w.height {
                    w.set(m, n, d, c, line[m]);
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / (w.height * w.width) as f64;
        for v in w.data.iter_mut() {
            *v = v.scale(scale);
        }
    }
}

// ---------------------------------------------------------------------------
// The filter
// ---------------------------------------------------------------------------

/// Conjugate partner of a frequency.
#[inline]
fn mirror(r: usize, s: usize, m: usize, n: usize) -> (usize, usize) {
    ((m - r) % m, (n - s) % n)
}

/// Canonical-cell predicate: keep the lower half of the width axis; inside
/// self-paired columns (s = -s mod N) fall back to the height axis,
/// keeping r <= -r mod M. Lexicographic iteration over (r, s) of the cells
/// passing this predicate defines the storage order.
fn is_canonical(r: usize, s: usize, m: usize, n: usize) -> bool {
    let s_conj = (n - s) % n;
    if s != s_conj {
        return s < s_conj;
    }
    r <= (m - r) % m
}

fn is_self_paired(r: usize, s: usize, m: usize, n: usize) -> bool {
    mirror(r, s, m, n) == (r, s)
}

/// Per-frequency stack of C x C unitary blocks applied in the Fourier
/// domain. `realness` marks an orthogonal (real-space) convolution, which
/// stores only the canonical half-grid.
#[derive(Clone, Debug)]
pub struct UConvFilter {
    height: usize,
    width: usize,
    channels: usize,
    realness: bool,
    /// Stored blocks; `cells[i]` is the frequency of `blocks[i]`.
    blocks: Vec<DenseMatrix<Complex64>>,
    cells: Vec<(usize, usize)>,
    /// Index into `blocks` per frequency, `None` for derived mirrors.
    cell_index: Vec<Option<usize>>,
    steps_since_reprojection: usize,
    reprojection_interval: Option<usize>,
    drift_tolerance: f64,
}

impl UConvFilter {
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn realness(&self) -> bool {
        self.realness
    }
    /// Frequencies of the stored blocks, in storage order.
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }
    pub fn stored_blocks(&self) -> &[DenseMatrix<Complex64>] {
        &self.blocks
    }
    pub fn stored_blocks_mut(&mut self) -> &mut [DenseMatrix<Complex64>] {
        &mut self.blocks
    }
    pub fn steps_since_reprojection(&self) -> usize {
        self.steps_since_reprojection
    }

    pub fn with_reprojection_interval(mut self, interval: Option<usize>) -> Self {
        self.reprojection_interval = interval;
        self
    }

    pub fn is_self_paired_cell(&self, i: usize) -> bool {
        let (r, s) = self.cells[i];
        is_self_paired(r, s, self.height, self.width)
    }

    fn storage_layout(
        height: usize,
        width: usize,
        realness: bool,
    ) -> (Vec<(usize, usize)>, Vec<Option<usize>>) {
        let mut cells = Vec::new();
        let mut cell_index = vec![None; height * width];
        for r in 0..height {
            for s in 0..width {
                if !realness || is_canonical(r, s, height, width) {
                    cell_index[r * width + s] = Some(cells.len());
                    cells.push((r, s));
                }
            }
        }
        (cells, cell_index)
    }

    fn from_blocks(
        height: usize,
        width: usize,
        channels: usize,
        realness: bool,
        blocks: Vec<DenseMatrix<Complex64>>,
    ) -> Self {
        let (cells, cell_index) = Self::storage_layout(height, width, realness);
        assert_eq!(blocks.len(), cells.len());
        Self {
            height,
            width,
            channels,
            realness,
            blocks,
            cells,
            cell_index,
            steps_since_reprojection: 0,
            reprojection_interval: Some(channels),
            drift_tolerance: 1e-6,
        }
    }

    /// The matrix applied at frequency (r, s): the stored block, or the
    /// entrywise conjugate of its canonical mirror.
    pub fn applied_block(&self, r: usize, s: usize) -> DenseMatrix<Complex64> {
        if let Some(i) = self.cell_index[r * self.width + s] {
            return self.blocks[i].clone();
        }
        let (rm, sm) = mirror(r, s, self.height, self.width);
        let i = self.cell_index[rm * self.width + sm].expect("mirror of a derived cell is stored");
        self.blocks[i].conj()
    }

    /// Worst unitarity drift across all stored blocks.
    pub fn max_block_drift(&self) -> f64 {
        self.blocks.iter().map(unitarity_error).fold(0.0, f64::max)
    }

    /// Check every stored invariant: block unitarity within the drift
    /// tolerance and realness of self-paired blocks.
    pub fn validate(&self) -> Result<()> {
        for (i, block) in self.blocks.iter().enumerate() {
            let drift = unitarity_error(block);
            if drift >= self.drift_tolerance {
                return Err(Error::InvalidState(format!(
                    "block {:?} drifted off the manifold: {drift:.3e}",
                    self.cells[i]
                )));
            }
            if self.realness && self.is_self_paired_cell(i) && block.max_imag() > 1e-12 {
                return Err(Error::InvalidState(format!(
                    "self-paired block {:?} is not real",
                    self.cells[i]
                )));
            }
        }
        Ok(())
    }

    /// Project every stored block back onto the manifold.
    pub fn reproject(&self) -> Result<Self> {
        let mut out = self.clone();
        for (i, block) in self.blocks.iter().enumerate() {
            if self.realness && self.is_self_paired_cell(i) {
                let real = DenseMatrix::<f64>::from_complex_lossy(block);
                out.blocks[i] = polar_project_dense(&real)?.to_complex();
            } else {
                out.blocks[i] = polar_project_dense(block)?;
            }
        }
        out.steps_since_reprojection = 0;
        Ok(out)
    }
}

/// Independent per-block initialization on the canonical half-grid;
/// mirrored conjugates fill the rest when `realness`, and self-paired
/// frequencies draw real orthogonal blocks.
pub fn init_uconv(
    height: usize,
    width: usize,
    channels: usize,
    scheme: InitScheme,
    realness: bool,
    rng: &mut ChaCha8Rng,
) -> Result<UConvFilter> {
    if !matches!(scheme, InitScheme::Identity | InitScheme::Haar | InitScheme::Henaff) {
        return Err(Error::InvalidArgument(format!("unsupported filter init scheme {scheme:?}")));
    }
    let (cells, _) = UConvFilter::storage_layout(height, width, realness);
    let mut blocks = Vec::with_capacity(cells.len());
    for &(r, s) in &cells {
        let block = if realness && is_self_paired(r, s, height, width) {
            init_matrix::<f64>(channels, scheme, rng)?.to_complex()
        } else {
            init_matrix::<Complex64>(channels, scheme, rng)?
        };
        blocks.push(block);
    }
    Ok(UConvFilter::from_blocks(height, width, channels, realness, blocks))
}

/// Build a filter from an arbitrary spatial-domain filter tensor. No
/// unitarity is enforced (use [`UConvFilter::validate`] when the result is
/// meant to be a manifold point).
pub fn spatial_to_filter(w: &SpatialFilter<Complex64>, realness: bool) -> Result<UConvFilter> {
    if realness && w.max_imag() > 1e-10 * (1.0 + w.fro_norm()) {
        return Err(Error::InvalidArgument("realness filter requires a real spatial filter".into()));
    }
    let (m, n, c) = (w.height, w.width, w.channels);
    let mut what = w.clone();
    fft2_filter(&mut what, false);
    let (cells, _) = UConvFilter::storage_layout(m, n, realness);
    let mut blocks = Vec::with_capacity(cells.len());
    for &(r, s) in &cells {
        // Applied block V[r, s] = W_hat[(-r) mod M, (-s) mod N].
        let (rr, ss) = mirror(r, s, m, n);
        let mut block = DenseMatrix::<Complex64>::zeros(c, c);
        for d in 0..c {
            for cc in 0..c {
                block[(d, cc)] = what.get(rr, ss, d, cc);
            }
        }
        if realness && is_self_paired(r, s, m, n) {
            // Exactly real by symmetry; drop the roundoff imaginary dust.
            block = DenseMatrix::<f64>::from_complex_lossy(&block).to_complex();
        }
        blocks.push(block);
    }
    Ok(UConvFilter::from_blocks(m, n, c, realness, blocks))
}

/// Inverse FFT of the blocks (frequency-reversed, i.e. conjugate layout)
/// back to the spatial filter.
pub fn filter_to_spatial(filter: &UConvFilter) -> SpatialFilter<Complex64> {
    let (m, n, c) = (filter.height, filter.width, filter.channels);
    let mut what = SpatialFilter::<Complex64>::zeros(m, n, c);
    for r in 0..m {
        for s in 0..n {
            let (rr, ss) = mirror(r, s, m, n);
            let block = filter.applied_block(rr, ss);
            for d in 0..c {
                for cc in 0..c {
                    what.set(r, s, d, cc, block[(d, cc)]);
                }
            }
        }
    }
    fft2_filter(&mut what, true);
    what
}

/// [`filter_to_spatial`] for realness filters, checking and stripping the
/// imaginary residue.
pub fn filter_to_spatial_real(filter: &UConvFilter) -> Result<SpatialFilter<f64>> {
    let w = filter_to_spatial(filter);
    let residue = w.max_imag();
    if residue > 1e-8 {
        return Err(Error::CorruptedSymmetry(format!(
            "spatial filter has imaginary residue {residue:.3e}"
        )));
    }
    Ok(SpatialFilter {
        height: w.height,
        width: w.width,
        channels: w.channels,
        data: w.data.iter().map(|z| z.re).collect(),
    })
}

fn check_forward_shapes<T: Entry>(filter: &UConvFilter, x: &SpatialTensor<T>) -> Result<()> {
    if x.height != filter.height || x.width != filter.width || x.channels != filter.channels {
        return Err(Error::DimensionMismatch(format!(
            "input {}x{}x{} does not match filter {}x{}x{}",
            x.height, x.width, x.channels, filter.height, filter.width, filter.channels
        )));
    }
    match (filter.realness, T::FIELD) {
        (true, Field::Real) | (false, Field::Complex) => Ok(()),
        (true, Field::Complex) => {
            Err(Error::InvalidArgument("orthogonal (realness) filter expects real input".into()))
        }
        (false, Field::Real) => {
            Err(Error::InvalidArgument("real input with complex-only filter".into()))
        }
    }
}

/// FFT -> per-frequency block multiply -> inverse FFT. Norm-preserving for
/// unitary blocks.
pub fn uconv_forward<T: Entry>(
    filter: &UConvFilter,
    x: &SpatialTensor<T>,
) -> Result<SpatialTensor<T>> {
    check_forward_shapes(filter, x)?;
    let mut xhat = x.to_complex();
    fft2_tensor(&mut xhat, false);
    let mut yhat = SpatialTensor::<Complex64>::zeros(x.batch, x.height, x.width, x.channels);
    let c = x.channels;
    for r in 0..x.height {
        for s in 0..x.width {
            let block = filter.applied_block(r, s);
            for b in 0..x.batch {
                for d in 0..c {
                    let mut acc = Complex64::ZERO;
                    for cc in 0..c {
                        acc += block[(d, cc)] * xhat.get(b, r, s, cc);
                    }
                    yhat.set(b, r, s, d, acc);
                }
            }
        }
    }
    fft2_tensor(&mut yhat, true);
    if T::FIELD == Field::Real {
        let residue = yhat.max_imag();
        if residue > 1e-8 * (1.0 + x.fro_norm()) {
            return Err(Error::CorruptedSymmetry(format!(
                "orthogonal convolution output has imaginary residue {residue:.3e}"
            )));
        }
    }
    Ok(SpatialTensor::from_complex_lossy(&yhat))
}

/// Per-cell gradients of a real loss with respect to the stored blocks,
/// aligned with [`UConvFilter::cells`]. Mirror-frequency contributions are
/// conjugated into their canonical cells; self-paired cells keep only the
/// real part (their imaginary dof does not exist).
#[derive(Clone, Debug)]
pub struct BlockGrads {
    pub grads: Vec<DenseMatrix<Complex64>>,
}

impl BlockGrads {
    pub fn zeros_like(filter: &UConvFilter) -> Self {
        let c = filter.channels;
        Self { grads: vec![DenseMatrix::zeros(c, c); filter.blocks.len()] }
    }

    pub fn max_modulus(&self) -> f64 {
        self.grads.iter().map(|g| g.max_modulus()).fold(0.0, f64::max)
    }
}

/// Backward pass: gradients for every stored block (packed
/// `dL/dRe + i dL/dIm` convention) and the input adjoint.
pub fn uconv_backward<T: Entry>(
    filter: &UConvFilter,
    x: &SpatialTensor<T>,
    dy: &SpatialTensor<T>,
) -> Result<(BlockGrads, SpatialTensor<T>)> {
    check_forward_shapes(filter, x)?;
    if dy.batch != x.batch
        || dy.height != x.height
        || dy.width != x.width
        || dy.channels != x.channels
    {
        return Err(Error::DimensionMismatch("dY shape does not match input".into()));
    }
    let mut xhat = x.to_complex();
    fft2_tensor(&mut xhat, false);
    // Adjoint of the normalized inverse FFT is the forward FFT scaled by
    // 1/(MN).
    let mut dyhat = dy.to_complex();
    fft2_tensor(&mut dyhat, false);
    let dyhat = dyhat.scale(1.0 / (x.height * x.width) as f64);

    let c = x.channels;
    let mut full_grads: Vec<DenseMatrix<Complex64>> =
        vec![DenseMatrix::zeros(c, c); x.height * x.width];
    let mut dxhat = SpatialTensor::<Complex64>::zeros(x.batch, x.height, x.width, c);
    for r in 0..x.height {
        for s in 0..x.width {
            let block = filter.applied_block(r, s);
            let g = &mut full_grads[r * x.width + s];
            for b in 0..x.batch {
                for d in 0..c {
                    let dyv = dyhat.get(b, r, s, d);
                    for cc in 0..c {
                        // G += dy_hat x_hat^H over the batch.
                        g[(d, cc)] += dyv * xhat.get(b, r, s, cc).conj();
                        // dx_hat += V^H dy_hat.
                        let cur = dxhat.get(b, r, s, cc);
                        dxhat.set(b, r, s, cc, cur + block[(d, cc)].conj() * dyv);
                    }
                }
            }
        }
    }

    // Fold the full grid onto the stored cells.
    let mut grads = Vec::with_capacity(filter.blocks.len());
    for (i, &(r, s)) in filter.cells.iter().enumerate() {
        let own = full_grads[r * x.width + s].clone();
        let g = if !filter.realness {
            own
        } else if filter.is_self_paired_cell(i) {
            own.map(|z| Complex64::new(z.re, 0.0))
        } else {
            let (rm, sm) = mirror(r, s, x.height, x.width);
            own.add(&full_grads[rm * x.width + sm].conj())
        };
        grads.push(g);
    }

    // Adjoint of the forward FFT is the unnormalized inverse FFT.
    fft2_tensor(&mut dxhat, true);
    let dxhat = dxhat.scale((x.height * x.width) as f64);
    Ok((BlockGrads { grads }, SpatialTensor::from_complex_lossy(&dxhat)))
}

/// One rank-k manifold step on every stored block: sample the block
/// gradient down to rank k, update (direct or tangent), re-derive mirrors
/// by conjugation. Fails atomically: any per-block error (e.g. a
/// direct-mode step-too-large) leaves the input filter untouched.
pub fn uconv_update(
    filter: &UConvFilter,
    grads: &BlockGrads,
    k: usize,
    eta: f64,
    mode: UpdateMode,
    sampler: SamplerKind,
    seed: u64,
) -> Result<UConvFilter> {
    if k > filter.channels {
        return Err(Error::InvalidArgument(format!(
            "rank {k} exceeds channel count {}",
            filter.channels
        )));
    }
    if grads.grads.len() != filter.blocks.len() {
        return Err(Error::DimensionMismatch("gradient grid does not match filter".into()));
    }

    let updated: Vec<Result<DenseMatrix<Complex64>>> = filter
        .blocks
        .par_iter()
        .enumerate()
        .map(|(i, block)| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ 0x9e3779b97f4a7c15u64.wrapping_mul(i as u64 + 1),
            );
            let grad = &grads.grads[i];
            if filter.realness && filter.is_self_paired_cell(i) {
                let g_real = DenseMatrix::<f64>::from_complex_lossy(grad);
                let b_real = DenseMatrix::<f64>::from_complex_lossy(block);
                let factor = sample_with(sampler, &g_real, k, &mut rng)?;
                let next = match mode {
                    UpdateMode::Direct => direct_step(&b_real, &factor, eta)?,
                    UpdateMode::Tangent => tangent_step(&b_real, &factor, eta)?,
                };
                Ok(next.unwrap_or(b_real).to_complex())
            } else {
                let factor = sample_with(sampler, grad, k, &mut rng)?;
                let next = match mode {
                    UpdateMode::Direct => direct_step(block, &factor, eta)?,
                    UpdateMode::Tangent => tangent_step(block, &factor, eta)?,
                };
                Ok(next.unwrap_or_else(|| block.clone()))
            }
        })
        .collect();

    let mut blocks = Vec::with_capacity(updated.len());
    for b in updated {
        blocks.push(b?);
    }
    let mut out = UConvFilter {
        blocks,
        cells: filter.cells.clone(),
        cell_index: filter.cell_index.clone(),
        steps_since_reprojection: filter.steps_since_reprojection + 1,
        ..*filter
    };
    if let Some(interval) = out.reprojection_interval {
        if out.steps_since_reprojection >= interval {
            out = out.reproject()?;
        }
    }
    Ok(out)
}

/// Direct quadruple-loop cyclic cross-correlation,
/// `y[p,q,d] = sum_{c,m,n} w[m,n,d,c] x[p+m, q+n, c]` with indices modulo
/// the spatial dimensions. Desk-scale test oracle only.
pub fn cyclic_conv_oracle<T: Entry>(
    w: &SpatialFilter<T>,
    x: &SpatialTensor<T>,
) -> Result<SpatialTensor<T>> {
    if x.height != w.height || x.width != w.width || x.channels != w.channels {
        return Err(Error::DimensionMismatch("filter/input shape mismatch".into()));
    }
    let (m, n, c) = (w.height, w.width, w.channels);
    let mut y = SpatialTensor::<T>::zeros(x.batch, m, n, c);
    for b in 0..x.batch {
        for p in 0..m {
            for q in 0..n {
                for d in 0..c {
                    let mut acc = T::ZERO;
                    for mm in 0..m {
                        for nn in 0..n {
                            for cc in 0..c {
                                acc +=
                                    w.get(mm, nn, d, cc) * x.get(b, (p + mm) % m, (q + nn) % n, cc);
                            }
                        }
                    }
                    y.set(b, p, q, d, acc);
                }
            }
        }
    }
    Ok(y)
}

/// Squared Frobenius norm of the spatial filter outside a `window x window`
/// neighborhood of the origin (cyclically centered). An optional locality
/// penalty; zero for filters supported inside the window. Off by default.
pub fn locality_penalty(filter: &UConvFilter, window: usize) -> f64 {
    let w = filter_to_spatial(filter);
    let inside = |idx: usize, dim: usize| {
        let half = window / 2;
        let centered = (idx + half) % dim;
        centered < window
    };
    let mut penalty = 0.0;
    for m in 0..w.height {
        for n in 0..w.width {
            if inside(m, w.height) && inside(n, w.width) {
                continue;
            }
            for d in 0..w.channels {
                for c in 0..w.channels {
                    penalty += w.get(m, n, d, c).norm_sqr();
                }
            }
        }
    }
    penalty
}

// ---------------------------------------------------------------------------
// Save/load: magic PUCV, version, dims, realness, then the stored blocks
// in canonical order as interleaved little-endian f64 pairs.
// ---------------------------------------------------------------------------

const FILTER_MAGIC: &[u8; 4] = b"PUCV";
const FILTER_VERSION: u32 = 1;

pub fn save_filter(path: &Path, filter: &UConvFilter) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FILTER_MAGIC)?;
    for word in [FILTER_VERSION, filter.height as u32, filter.width as u32, filter.channels as u32]
    {
        w.write_all(&word.to_le_bytes())?;
    }
    w.write_all(&[filter.realness as u8])?;
    for block in &filter.blocks {
        for &z in block.data() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_filter(path: &Path) -> Result<UConvFilter> {
    let mut r = BufReader::new(File::open(path)?);
    let bad = |msg: String| Error::CorruptedFile(format!("{}: {msg}", path.display()));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("truncated".into()))?;
    if &magic != FILTER_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let next_u32 = |r: &mut BufReader<File>| -> Result<u32> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)
            .map_err(|_| Error::CorruptedFile(format!("{}: truncated", path.display())))?;
        Ok(u32::from_le_bytes(word))
    };
    let version = next_u32(&mut r)?;
    if version != FILTER_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let height = next_u32(&mut r)? as usize;
    let width = next_u32(&mut r)? as usize;
    let channels = next_u32(&mut r)? as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag).map_err(|_| bad("truncated".into()))?;
    let realness = match flag[0] {
        0 => false,
        1 => true,
        other => return Err(bad(format!("bad realness byte {other}"))),
    };
    let (cells, _) = UConvFilter::storage_layout(height, width, realness);
    let mut blocks = Vec::with_capacity(cells.len());
    for _ in 0..cells.len() {
        let mut data = Vec::with_capacity(channels * channels);
        for _ in 0..channels * channels {
            let mut buf = [0u8; 16];
            r.read_exact(&mut buf).map_err(|_| bad("truncated".into()))?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            data.push(Complex64::new(re, im));
        }
        blocks.push(DenseMatrix::from_row_major(channels, channels, data)?);
    }
    let filter = UConvFilter::from_blocks(height, width, channels, realness, blocks);
    filter.validate().map_err(|e| bad(e.to_string()))?;
    Ok(filter)
}

// ---------------------------------------------------------------------------
// Finite-difference harness over the stored (half-grid) real parameters
// ---------------------------------------------------------------------------

/// Check the analytic block gradients of the regression loss
/// `L = ||uconv_forward(filter, x) - y_target||_F^2` against central finite
/// differences on `coords` random real parameters of the stored grid.
/// Returns the maximum relative error.
pub fn fd_check_uconv<T: Entry>(
    filter: &UConvFilter,
    x: &SpatialTensor<T>,
    y_target: &SpatialTensor<T>,
    coords: usize,
    step: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let loss = |f: &UConvFilter| -> Result<f64> {
        let y = uconv_forward(f, x)?;
        Ok(y.sub(y_target).data.iter().map(|v| v.modulus_sq()).sum())
    };
    let y = uconv_forward(filter, x)?;
    let dy = y.sub(y_target).scale(2.0);
    let (grads, _) = uconv_backward(filter, x, &dy)?;
    let skip_below = 1e-7 * (1.0 + grads.max_modulus());

    let mut max_rel: f64 = 0.0;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < coords {
        attempts += 1;
        if attempts > 300 {
            return Err(Error::Numeric("could not find enough informative FD coordinates".into()));
        }
        let i = rng.gen_range(0..filter.blocks.len());
        let row = rng.gen_range(0..filter.channels);
        let col = rng.gen_range(0..filter.channels);
        let self_paired = filter.realness && filter.is_self_paired_cell(i);
        let imag = !self_paired && rng.gen_bool(0.5);
        let an = if imag { grads.grads[i][(row, col)].im } else { grads.grads[i][(row, col)].re };
        if an.abs() < skip_below {
            continue;
        }
        let bump = |delta: f64| -> UConvFilter {
            let mut f = filter.clone();
            let unit = if imag { Complex64::new(0.0, delta) } else { Complex64::new(delta, 0.0) };
            f.blocks[i][(row, col)] += unit;
            f
        };
        let fd = (loss(&bump(step))? - loss(&bump(-step))?) / (2.0 * step);
        let rel = (fd - an).abs() / fd.abs().max(an.abs());
        max_rel = max_rel.max(rel);
        accepted += 1;
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_layout_counts() {
        // M = N = 4: the self-paired set is {0,2} x {0,2}; the canonical
        // half stores (16 + 4) / 2 = 10 cells.
        let (cells, index) = UConvFilter::storage_layout(4, 4, true);
        assert_eq!(cells.len(), 10);
        let self_paired: Vec<_> =
            cells.iter().filter(|&&(r, s)| is_self_paired(r, s, 4, 4)).collect();
        assert_eq!(self_paired.len(), 4);
        for sp in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert!(cells.contains(&sp));
        }
        // Every non-stored frequency has a stored mirror.
        for r in 0..4 {
            for s in 0..4 {
                if index[r * 4 + s].is_none() {
                    let (rm, sm) = mirror(r, s, 4, 4);
                    assert!(index[rm * 4 + sm].is_some());
                }
            }
        }
        // Complex filters store the full grid.
        let (cells, _) = UConvFilter::storage_layout(4, 4, false);
        assert_eq!(cells.len(), 16);
        // Odd dims: only (0, 0) self-pairs, so (15 + 1) / 2 = 8 cells.
        let (cells, _) = UConvFilter::storage_layout(3, 5, true);
        assert_eq!(cells.len(), 8);
    }

    #[test]
    fn identity_filter_is_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(130);
        for realness in [true, false] {
            let f = init_uconv(4, 6, 3, InitScheme::Identity, realness, &mut rng).unwrap();
            if realness {
                let x = SpatialTensor::<f64>::standard_normal(2, 4, 6, 3, &mut rng);
                let y = uconv_forward(&f, &x).unwrap();
                assert!(y.sub(&x).fro_norm() < 1e-12);
            } else {
                let x = SpatialTensor::<Complex64>::standard_normal(2, 4, 6, 3, &mut rng);
                let y = uconv_forward(&f, &x).unwrap();
                assert!(y.sub(&x).fro_norm() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_filter_spatial_is_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        let f = init_uconv(4, 4, 2, InitScheme::Identity, true, &mut rng).unwrap();
        let w = filter_to_spatial_real(&f).unwrap();
        for m in 0..4 {
            for n in 0..4 {
                for d in 0..2 {
                    for c in 0..2 {
                        let expect = if m == 0 && n == 0 && d == c { 1.0 } else { 0.0 };
                        assert!((w.get(m, n, d, c) - expect).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn shift_filter_shifts() {
        // w[1, 0] = I, else 0: output is x shifted by one row (cyclically).
        let (m, n, c) = (4usize, 4usize, 2usize);
        let mut w = SpatialFilter::<f64>::zeros(m, n, c);
        for d in 0..c {
            w.set(1, 0, d, d, 1.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(132);
        let x = SpatialTensor::<f64>::standard_normal(1, m, n, c, &mut rng);
        let y = cyclic_conv_oracle(&w, &x).unwrap();
        for p in 0..m {
            for q in 0..n {
                for d in 0..c {
                    assert!((y.get(0, p, q, d) - x.get(0, (p + 1) % m, q, d)).abs() < 1e-12);
                }
            }
        }
        // The FFT path agrees.
        let f = spatial_to_filter(&w.to_complex(), true).unwrap();
        let y_fft = uconv_forward(&f, &x).unwrap();
        assert!(y_fft.sub(&y).fro_norm() < 1e-10);
    }

    #[test]
    fn realness_filter_has_real_spatial_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(133);
        let f = init_uconv(4, 4, 3, InitScheme::Haar, true, &mut rng).unwrap();
        let w = filter_to_spatial(&f);
        assert!(w.max_imag() < 1e-10);
        assert!(filter_to_spatial_real(&f).is_ok());
    }

    #[test]
    fn spatial_roundtrip_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(134);
        // Complex round trip from an arbitrary spatial filter.
        let w = SpatialFilter::<Complex64>::standard_normal(6, 4, 2, &mut rng);
        let f = spatial_to_filter(&w, false).unwrap();
        let back = filter_to_spatial(&f);
        let diff: f64 = w
            .data
            .iter()
            .zip(&back.data)
            .map(|(a, b)| (*a - *b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-10 * w.fro_norm());
        // Real round trip keeps realness.
        let w = SpatialFilter::<f64>::standard_normal(4, 4, 3, &mut rng);
        let f = spatial_to_filter(&w.to_complex(), true).unwrap();
        let back = filter_to_spatial_real(&f).unwrap();
        let diff: f64 = w
            .data
            .iter()
            .zip(&back.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-10 * w.fro_norm());
    }

    #[test]
    fn fft_path_matches_oracle_and_preserves_norm() {
        for (seeds, (m, n, c)) in [(0u64..20, (4usize, 4usize, 2usize)), (20..40, (8, 8, 4)), (40..60, (6, 10, 3))] {
            for seed in seeds {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                // Real/orthogonal path.
                let f = init_uconv(m, n, c, InitScheme::Haar, true, &mut rng).unwrap();
                let x = SpatialTensor::<f64>::standard_normal(2, m, n, c, &mut rng);
                let y = uconv_forward(&f, &x).unwrap();
                let w = filter_to_spatial_real(&f).unwrap();
                let y_oracle = cyclic_conv_oracle(&w, &x).unwrap();
                let err = y.sub(&y_oracle).fro_norm();
                assert!(err < 1e-8, "({m},{n},{c}) seed {seed}: {err:e}");
                assert!((y.fro_norm() - x.fro_norm()).abs() < 1e-8 * x.fro_norm());
                // Complex/unitary path.
                let f = init_uconv(m, n, c, InitScheme::Haar, false, &mut rng).unwrap();
                let x = SpatialTensor::<Complex64>::standard_normal(2, m, n, c, &mut rng);
                let y = uconv_forward(&f, &x).unwrap();
                let w = filter_to_spatial(&f);
                let y_oracle = cyclic_conv_oracle(&w, &x.to_complex()).unwrap();
                let err = y.to_complex().sub(&y_oracle).fro_norm();
                assert!(err < 1e-8, "complex ({m},{n},{c}) seed {seed}: {err:e}");
                assert!((y.fro_norm() - x.fro_norm()).abs() < 1e-8 * x.fro_norm());
            }
        }
    }

    #[test]
    fn composition_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(135);
        let f1 = init_uconv(6, 6, 2, InitScheme::Haar, true, &mut rng).unwrap();
        let f2 = init_uconv(6, 6, 2, InitScheme::Haar, true, &mut rng).unwrap();
        let x = SpatialTensor::<f64>::standard_normal(3, 6, 6, 2, &mut rng);
        let y = uconv_forward(&f2, &uconv_forward(&f1, &x).unwrap()).unwrap();
        assert!((y.fro_norm() - x.fro_norm()).abs() < 1e-8 * x.fro_norm());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(136);
        // Realness filter, M = N = 4, C = 2 per the contract example.
        let f = init_uconv(4, 4, 2, InitScheme::Haar, true, &mut rng).unwrap();
        let x = SpatialTensor::<f64>::standard_normal(2, 4, 4, 2, &mut rng);
        let y_target = SpatialTensor::<f64>::standard_normal(2, 4, 4, 2, &mut rng);
        let err = fd_check_uconv(&f, &x, &y_target, 10, 1e-5, &mut rng).unwrap();
        assert!(err < 1e-4, "realness fd: {err:.2e}");
        // Complex filter.
        let f = init_uconv(4, 4, 2, InitScheme::Haar, false, &mut rng).unwrap();
        let x = SpatialTensor::<Complex64>::standard_normal(2, 4, 4, 2, &mut rng);
        let y_target = SpatialTensor::<Complex64>::standard_normal(2, 4, 4, 2, &mut rng);
        let err = fd_check_uconv(&f, &x, &y_target, 10, 1e-5, &mut rng).unwrap();
        assert!(err < 1e-4, "complex fd: {err:.2e}");
    }

    #[test]
    fn input_adjoint_matches_finite_differences() {
        // dX from the backward pass against FD on input entries.
        let mut rng = ChaCha8Rng::seed_from_u64(137);
        let f = init_uconv(4, 4, 2, InitScheme::Haar, true, &mut rng).unwrap();
        let x = SpatialTensor::<f64>::standard_normal(1, 4, 4, 2, &mut rng);
        let y_target = SpatialTensor::<f64>::standard_normal(1, 4, 4, 2, &mut rng);
        let y = uconv_forward(&f, &x).unwrap();
        let dy = y.sub(&y_target).scale(2.0);
        let (_, dx) = uconv_backward(&f, &x, &dy).unwrap();
        let loss = |x: &SpatialTensor<f64>| -> f64 {
            let y = uconv_forward(&f, x).unwrap();
            y.sub(&y_target).data.iter().map(|v| v * v).sum()
        };
        let h = 1e-6;
        for trial in 0..10 {
            let i = rng.gen_range(0..x.data.len());
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
            let an = dx.data[i];
            let denom = fd.abs().max(an.abs()).max(1e-8);
            assert!((fd - an).abs() / denom < 1e-4, "trial {trial}: fd {fd} vs {an}");
        }
    }

    #[test]
    fn gradient_rank_bounded_by_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(138);
        let (m, n, c, b) = (4usize, 4usize, 4usize, 3usize);
        let f = init_uconv(m, n, c, InitScheme::Haar, false, &mut rng).unwrap();
        let x = SpatialTensor::<Complex64>::standard_normal(b, m, n, c, &mut rng);
        let dy = SpatialTensor::<Complex64>::standard_normal(b, m, n, c, &mut rng);
        let (grads, _) = uconv_backward(&f, &x, &dy).unwrap();
        for g in &grads.grads {
            let profile = crate::lowrank::rank_profile(g, c);
            assert!(profile.rel_error_at(b) < 1e-8);
        }
    }

    #[test]
    fn update_noop_cases_and_symmetry_survival() {
        let mut rng = ChaCha8Rng::seed_from_u64(139);
        let f = init_uconv(4, 4, 3, InitScheme::Haar, true, &mut rng).unwrap();
        // Zero grads: unchanged.
        let zeros = BlockGrads::zeros_like(&f);
        let f2 = uconv_update(&f, &zeros, 1, 0.1, UpdateMode::Tangent, SamplerKind::Exact, 7).unwrap();
        for (a, b) in f.blocks.iter().zip(&f2.blocks) {
            assert!(a.sub(b).fro_norm() == 0.0);
        }
        // eta = 0: unchanged.
        let x = SpatialTensor::<f64>::standard_normal(2, 4, 4, 3, &mut rng);
        let dy = SpatialTensor::<f64>::standard_normal(2, 4, 4, 3, &mut rng);
        let (grads, _) = uconv_backward(&f, &x, &dy).unwrap();
        let f3 = uconv_update(&f, &grads, 1, 0.0, UpdateMode::Tangent, SamplerKind::Exact, 7).unwrap();
        for (a, b) in f.blocks.iter().zip(&f3.blocks) {
            assert!(a.sub(b).fro_norm() < 1e-14);
        }
        // Real update steps keep all invariants (symmetry is structural,
        // self-paired blocks stay real, unitarity within tolerance).
        let mut cur = f;
        for step in 0..100 {
            let dy = SpatialTensor::<f64>::standard_normal(2, 4, 4, 3, &mut rng);
            let (grads, _) = uconv_backward(&cur, &x, &dy).unwrap();
            cur = uconv_update(&cur, &grads, 1, 0.05, UpdateMode::Tangent, SamplerKind::Column, step)
                .unwrap();
        }
        cur.validate().unwrap();
        assert!(cur.max_block_drift() < 1e-6);
        let y = uconv_forward(&cur, &x).unwrap();
        assert!((y.fro_norm() - x.fro_norm()).abs() < 1e-8 * x.fro_norm());
    }

    #[test]
    fn update_descends_on_regression() {
        // A single rank-1 step decreases ||F(x) - y||^2 in >= 95% of
        // seeded trials.
        let (m, n, c) = (4usize, 4usize, 4usize);
        let mut successes = 0;
        let trials = 200;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
            let f = init_uconv(m, n, c, InitScheme::Haar, false, &mut rng).unwrap();
            let x = SpatialTensor::<Complex64>::standard_normal(2, m, n, c, &mut rng);
            let y_target = SpatialTensor::<Complex64>::standard_normal(2, m, n, c, &mut rng);
            let loss = |f: &UConvFilter| -> f64 {
                let y = uconv_forward(f, &x).unwrap();
                y.sub(&y_target).data.iter().map(|v| v.norm_sqr()).sum()
            };
            let before = loss(&f);
            let y = uconv_forward(&f, &x).unwrap();
            let dy = y.sub(&y_target).scale(2.0);
            let (grads, _) = uconv_backward(&f, &x, &dy).unwrap();
            let f2 =
                uconv_update(&f, &grads, 1, 1e-2, UpdateMode::Tangent, SamplerKind::Column, seed)
                    .unwrap();
            if loss(&f2) < before {
                successes += 1;
            }
        }
        assert!(successes * 100 >= trials * 95, "descent in {successes}/{trials}");
    }

    #[test]
    fn update_atomic_on_step_too_large() {
        // Force a direct-mode singularity in one block; the whole update
        // must fail without touching the filter.
        let mut rng = ChaCha8Rng::seed_from_u64(140);
        let f = init_uconv(4, 4, 2, InitScheme::Identity, false, &mut rng).unwrap();
        let mut grads = BlockGrads::zeros_like(&f);
        // G = e1 e1^H on one block with eta = 1 makes U - eta G singular.
        grads.grads[3][(0, 0)] = Complex64::ONE;
        match uconv_update(&f, &grads, 1, 1.0, UpdateMode::Direct, SamplerKind::Exact, 7) {
            Err(Error::StepTooLarge { .. }) => {}
            other => panic!("expected StepTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn forward_field_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(141);
        let f_real = init_uconv(4, 4, 2, InitScheme::Haar, true, &mut rng).unwrap();
        let xc = SpatialTensor::<Complex64>::standard_normal(1, 4, 4, 2, &mut rng);
        assert!(uconv_forward(&f_real, &xc).is_err());
        let f_cplx = init_uconv(4, 4, 2, InitScheme::Haar, false, &mut rng).unwrap();
        let xr = SpatialTensor::<f64>::standard_normal(1, 4, 4, 2, &mut rng);
        assert!(uconv_forward(&f_cplx, &xr).is_err());
    }

    #[test]
    fn locality_penalty_zero_for_local_filter() {
        // A delta filter is supported at the origin: zero penalty for any
        // window >= 1.
        let mut rng = ChaCha8Rng::seed_from_u64(142);
        let f = init_uconv(6, 6, 2, InitScheme::Identity, true, &mut rng).unwrap();
        assert!(locality_penalty(&f, 3) < 1e-20);
        // A Haar filter has full support: positive penalty.
        let f = init_uconv(6, 6, 2, InitScheme::Haar, true, &mut rng).unwrap();
        assert!(locality_penalty(&f, 3) > 1e-3);
    }

    #[test]
    fn filter_io_roundtrip_and_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(143);
        let f = init_uconv(4, 6, 3, InitScheme::Haar, true, &mut rng).unwrap();
        let path = dir.path().join("filter.pucv");
        save_filter(&path, &f).unwrap();
        let loaded = load_filter(&path).unwrap();
        assert_eq!(loaded.cells(), f.cells());
        for (a, b) in loaded.blocks.iter().zip(&f.blocks) {
            assert!(a.sub(b).fro_norm() == 0.0);
        }
        // Corrupt a block entry: loader must reject.
        let mut bytes = std::fs::read(&path).unwrap();
        let header = 4 + 4 * 4 + 1;
        bytes[header..header + 8].copy_from_slice(&3.0f64.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_filter(&path), Err(Error::CorruptedFile(_))));
    }

    #[test]
    fn henaff_filter_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(144);
        let f = init_uconv(4, 4, 4, InitScheme::Henaff, true, &mut rng).unwrap();
        f.validate().unwrap();
        assert!(init_uconv(4, 4, 3, InitScheme::Henaff, true, &mut rng).is_err());
        assert!(init_uconv(4, 4, 4, InitScheme::Cayley, true, &mut rng).is_err());
    }
}
