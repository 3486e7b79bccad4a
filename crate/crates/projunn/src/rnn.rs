//! A minimal unitary RNN with hand-derived backpropagation through time,
//! plus the three synthetic benchmarks: the adding task, the copy-memory
//! task and random-unitary regression.
//!
//! The cell is `h_t = modrelu(M x_t + W h_{t-1})` with a unitary hidden
//! transformation `W`, a dense input map `M`, a linear output head `V` and
//! a per-unit real modReLU bias. The random-unitary task bypasses `M`, `V`
//! and the nonlinearity entirely (pure `W x` regression). On the complex
//! field the heads read the real part of the output, so losses stay real
//! and gradients follow the packed `dL/dRe + i dL/dIm` convention
//! throughout.

use crate::error::{Error, Result};
use crate::manifold::{init_parameter, InitScheme, UnitaryParameter};
use crate::numerics::{DenseMatrix, Entry, Field};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Additive smoothing inside the modReLU modulus division.
pub const MODRELU_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Adding,
    Copy,
    RandomUnitary,
}

/// Recurrent cell parameters.
#[derive(Clone, Debug)]
pub struct RnnCell<T: Entry> {
    /// Hidden-to-hidden unitary/orthogonal transformation.
    pub w: UnitaryParameter<T>,
    /// Input-to-hidden map, `hidden x input`.
    pub m: DenseMatrix<T>,
    /// Hidden-to-output head, `output x hidden`.
    pub v: DenseMatrix<T>,
    /// modReLU bias, one real entry per hidden unit.
    pub bias: Vec<f64>,
}

impl<T: Entry> RnnCell<T> {
    /// Fresh cell: `W` from the given scheme, `M` and `V` Gaussian scaled
    /// by `1/sqrt(fan_in)`, zero bias.
    pub fn new(
        hidden: usize,
        input: usize,
        output: usize,
        scheme: InitScheme,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let w = init_parameter::<T>(hidden, scheme, rng)?;
        let m = DenseMatrix::standard_normal(hidden, input, rng).scale(1.0 / (input as f64).sqrt());
        let v =
            DenseMatrix::standard_normal(output, hidden, rng).scale(1.0 / (hidden as f64).sqrt());
        Ok(Self { w, m, v, bias: vec![0.0; hidden] })
    }

    pub fn hidden_size(&self) -> usize {
        self.w.dim()
    }
    pub fn input_size(&self) -> usize {
        self.m.cols()
    }
    pub fn output_size(&self) -> usize {
        self.v.rows()
    }
    pub fn field(&self) -> Field {
        T::FIELD
    }
}

/// Task targets; shape depends on the task.
#[derive(Clone, Debug)]
pub enum Targets<T: Entry> {
    /// Adding: one real sum per sample.
    Scalars(Vec<f64>),
    /// Copy: `tokens[t][i]` is the target symbol of sample `i` at step `t`.
    Tokens(Vec<Vec<usize>>),
    /// Random unitary: target vectors as columns.
    Vectors(DenseMatrix<T>),
}

/// A generated batch. Inputs are stored step-major: `inputs[t]` holds the
/// step-`t` feature vectors of all samples as a `features x batch` matrix.
#[derive(Clone, Debug)]
pub struct TaskBatch<T: Entry> {
    pub task: TaskKind,
    pub inputs: Vec<DenseMatrix<T>>,
    pub targets: Targets<T>,
}

impl<T: Entry> TaskBatch<T> {
    pub fn seq_len(&self) -> usize {
        self.inputs.len()
    }

    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, |m| m.cols())
    }

    pub fn features(&self) -> usize {
        self.inputs.first().map_or(0, |m| m.rows())
    }
}

/// Per-step network outputs.
#[derive(Clone, Debug)]
pub enum Outputs<T: Entry> {
    /// Adding: predicted sum per sample (real part of the scalar head).
    Scalars(Vec<f64>),
    /// Copy: per-step real logits, `output x batch` each.
    Logits(Vec<DenseMatrix<f64>>),
    /// Random unitary: `W X`.
    Vectors(DenseMatrix<T>),
}

/// Everything the backward pass needs from the forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T: Entry> {
    /// Hidden states `h_0 = 0, h_1, ..., h_T`, each `hidden x batch`.
    pub hidden: Vec<DenseMatrix<T>>,
    /// Pre-activations `z_t = M x_t + W h_{t-1}`, each `hidden x batch`.
    pub preact: Vec<DenseMatrix<T>>,
    pub outputs: Outputs<T>,
    /// Hash of the modReLU gate pattern; identical hashes mean the
    /// piecewise-smooth region did not change (used by the
    /// finite-difference harness to avoid differentiating across a kink).
    pub gate_hash: u64,
}

/// Gradients of the batch loss with respect to every cell parameter
/// (Euclidean: `W` is differentiated as a free matrix).
#[derive(Clone, Debug)]
pub struct Gradients<T: Entry> {
    pub dw: DenseMatrix<T>,
    pub dm: DenseMatrix<T>,
    pub dv: DenseMatrix<T>,
    pub dbias: Vec<f64>,
}

/// modReLU: `(|z| + b) z / (|z| + eps)` where `|z| + b > 0`, else 0.
/// Phase-preserving on the complex field.
pub fn modrelu<T: Entry>(z: &[T], bias: &[f64]) -> Vec<T> {
    assert_eq!(z.len(), bias.len(), "modrelu length mismatch");
    z.iter().zip(bias).map(|(&zi, &bi)| modrelu_scalar(zi, bi)).collect()
}

#[inline]
fn modrelu_scalar<T: Entry>(z: T, b: f64) -> T {
    let r = z.modulus();
    if r + b > 0.0 {
        z.scale((r + b) / (r + MODRELU_EPS))
    } else {
        T::ZERO
    }
}

/// Adjoint of [`modrelu`] at one element: given upstream `dw` (packed
/// `dL/dRe + i dL/dIm`), returns `(dz, dL/db)`. Subgradient 0 on the dead
/// zone, consistent with the forward formula.
#[inline]
fn modrelu_backward_scalar<T: Entry>(z: T, b: f64, dw: T) -> (T, f64) {
    let r = z.modulus();
    if r + b <= 0.0 {
        return (T::ZERO, 0.0);
    }
    let denom = r + MODRELU_EPS;
    let g = (r + b) / denom;
    let gp = (MODRELU_EPS - b) / (denom * denom);
    let zdw = (z.conj() * dw).re();
    let mut dz = dw.scale(g);
    if r > 1e-300 {
        dz += z.scale(gp * zdw / r);
    }
    (dz, zdw / denom)
}

fn modrelu_matrix<T: Entry>(z: &DenseMatrix<T>, bias: &[f64]) -> DenseMatrix<T> {
    DenseMatrix::from_fn(z.rows(), z.cols(), |i, j| modrelu_scalar(z[(i, j)], bias[i]))
}

struct GateHasher(u64);

impl GateHasher {
    fn new() -> Self {
        GateHasher(0xcbf29ce484222325)
    }
    fn push(&mut self, active: bool) {
        self.0 ^= active as u64 + 1;
        self.0 = self.0.wrapping_mul(0x100000001b3);
    }
}

/// Run the recurrence and the task head. Returns the trace and the batch
/// loss (mean over samples; for the copy task also over steps).
pub fn rnn_forward<T: Entry>(
    cell: &RnnCell<T>,
    batch: &TaskBatch<T>,
) -> Result<(ForwardTrace<T>, f64)> {
    let n = cell.hidden_size();
    let b = batch.batch_size();
    if b == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }

    if batch.task == TaskKind::RandomUnitary {
        let x = &batch.inputs[0];
        if x.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "input dimension {} != hidden size {n}",
                x.rows()
            )));
        }
        let y_target = match &batch.targets {
            Targets::Vectors(y) => y,
            _ => {
                return Err(Error::InvalidArgument(
                    "random-unitary batch needs vector targets".into(),
                ))
            }
        };
        let y = cell.w.matrix().matmul(x);
        if y.has_nan() {
            return Err(Error::NumericFailure { step: 0, msg: "NaN in outputs".into() });
        }
        let loss = y.sub(y_target).fro_norm_sq() / b as f64;
        let trace = ForwardTrace {
            hidden: Vec::new(),
            preact: Vec::new(),
            outputs: Outputs::Vectors(y),
            gate_hash: 0,
        };
        return Ok((trace, loss));
    }

    let seq_len = batch.seq_len();
    if batch.features() != cell.input_size() {
        return Err(Error::DimensionMismatch(format!(
            "batch features {} != cell input size {}",
            batch.features(),
            cell.input_size()
        )));
    }

    let mut hidden = Vec::with_capacity(seq_len + 1);
    let mut preact = Vec::with_capacity(seq_len);
    hidden.push(DenseMatrix::<T>::zeros(n, b));
    let mut gates = GateHasher::new();
    let mut logits: Vec<DenseMatrix<f64>> = Vec::new();

    for t in 0..seq_len {
        let mut z = cell.w.matrix().matmul(&hidden[t]);
        DenseMatrix::gemm_into(T::ONE, &cell.m, &batch.inputs[t], T::ONE, &mut z);
        if z.has_nan() {
            return Err(Error::NumericFailure { step: t, msg: "NaN in pre-activations".into() });
        }
        let h = modrelu_matrix(&z, &cell.bias);
        for i in 0..n {
            for j in 0..b {
                gates.push(z[(i, j)].modulus() + cell.bias[i] > 0.0);
            }
        }
        if batch.task == TaskKind::Copy {
            let out = cell.v.matmul(&h);
            logits.push(DenseMatrix::from_fn(out.rows(), out.cols(), |i, j| out[(i, j)].re()));
        }
        preact.push(z);
        hidden.push(h);
    }

    match (&batch.task, &batch.targets) {
        (TaskKind::Adding, Targets::Scalars(targets)) => {
            if targets.len() != b {
                return Err(Error::DimensionMismatch("target count != batch size".into()));
            }
            let out = cell.v.matmul(&hidden[seq_len]);
            let preds: Vec<f64> = (0..b).map(|j| out[(0, j)].re()).collect();
            let loss =
                preds.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / b as f64;
            Ok((
                ForwardTrace { hidden, preact, outputs: Outputs::Scalars(preds), gate_hash: gates.0 },
                loss,
            ))
        }
        (TaskKind::Copy, Targets::Tokens(tokens)) => {
            if tokens.len() != seq_len {
                return Err(Error::DimensionMismatch("token steps != sequence length".into()));
            }
            let o = cell.output_size();
            let mut loss = 0.0;
            for (t, step_logits) in logits.iter().enumerate() {
                for j in 0..b {
                    let target = tokens[t][j];
                    if target >= o {
                        return Err(Error::InvalidArgument(format!(
                            "token {target} out of range for {o} symbols"
                        )));
                    }
                    let col: Vec<f64> = (0..o).map(|i| step_logits[(i, j)]).collect();
                    loss += cross_entropy(&col, target);
                }
            }
            loss /= (b * seq_len) as f64;
            Ok((
                ForwardTrace { hidden, preact, outputs: Outputs::Logits(logits), gate_hash: gates.0 },
                loss,
            ))
        }
        _ => Err(Error::InvalidArgument("targets do not match task".into())),
    }
}

/// `-log softmax(logits)[target]`, numerically stable, in nats.
fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    lse - logits[target]
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Exact gradients of the forward loss by backpropagation through time.
/// `dW` accumulates the sum over (batch, time) of rank-one outer products
/// `delta_z h^H`, materialized densely.
pub fn rnn_backward<T: Entry>(
    cell: &RnnCell<T>,
    batch: &TaskBatch<T>,
    trace: &ForwardTrace<T>,
) -> Result<Gradients<T>> {
    let n = cell.hidden_size();
    let b = batch.batch_size();

    if batch.task == TaskKind::RandomUnitary {
        let x = &batch.inputs[0];
        let y = match &trace.outputs {
            Outputs::Vectors(y) => y,
            _ => return Err(Error::InvalidArgument("trace does not match task".into())),
        };
        let y_target = match &batch.targets {
            Targets::Vectors(t) => t,
            _ => return Err(Error::InvalidArgument("targets do not match task".into())),
        };
        // L = ||W X - Y||_F^2 / b has packed gradient (2/b) E X^H.
        let e = y.sub(y_target);
        let mut dw = DenseMatrix::<T>::zeros(n, n);
        DenseMatrix::gemm_into(T::from_re(2.0 / b as f64), &e, &x.adjoint(), T::ZERO, &mut dw);
        return Ok(Gradients {
            dw,
            dm: DenseMatrix::zeros(cell.m.rows(), cell.m.cols()),
            dv: DenseMatrix::zeros(cell.v.rows(), cell.v.cols()),
            dbias: vec![0.0; n],
        });
    }

    let seq_len = batch.seq_len();
    let o = cell.output_size();
    let mut dw = DenseMatrix::<T>::zeros(n, n);
    let mut dm = DenseMatrix::<T>::zeros(cell.m.rows(), cell.m.cols());
    let mut dv = DenseMatrix::<T>::zeros(o, n);
    let mut dbias = vec![0.0; n];

    // Adjoint of the step-t head output, if the head is read at t.
    let head_adjoint = |t: usize| -> Result<Option<DenseMatrix<T>>> {
        match (&batch.task, &batch.targets, &trace.outputs) {
            (TaskKind::Adding, Targets::Scalars(targets), Outputs::Scalars(preds)) => {
                if t + 1 == seq_len {
                    let mut d = DenseMatrix::<T>::zeros(o, b);
                    for j in 0..b {
                        d[(0, j)] = T::from_re(2.0 * (preds[j] - targets[j]) / b as f64);
                    }
                    Ok(Some(d))
                } else {
                    Ok(None)
                }
            }
            (TaskKind::Copy, Targets::Tokens(tokens), Outputs::Logits(logits)) => {
                let scale = 1.0 / (b * seq_len) as f64;
                let step = &logits[t];
                let mut d = DenseMatrix::<T>::zeros(o, b);
                for j in 0..b {
                    let col: Vec<f64> = (0..o).map(|i| step[(i, j)]).collect();
                    let probs = softmax(&col);
                    for i in 0..o {
                        let g = (probs[i] - if i == tokens[t][j] { 1.0 } else { 0.0 }) * scale;
                        d[(i, j)] = T::from_re(g);
                    }
                }
                Ok(Some(d))
            }
            _ => Err(Error::InvalidArgument("trace does not match task".into())),
        }
    };

    let w_adj = cell.w.matrix().adjoint();
    let v_adj = cell.v.adjoint();
    let mut dh = DenseMatrix::<T>::zeros(n, b);
    for t in (0..seq_len).rev() {
        if let Some(dout) = head_adjoint(t)? {
            DenseMatrix::gemm_into(T::ONE, &dout, &trace.hidden[t + 1].adjoint(), T::ONE, &mut dv);
            DenseMatrix::gemm_into(T::ONE, &v_adj, &dout, T::ONE, &mut dh);
        }
        let z = &trace.preact[t];
        let mut dz = DenseMatrix::<T>::zeros(n, b);
        for i in 0..n {
            for j in 0..b {
                let (dzij, db) = modrelu_backward_scalar(z[(i, j)], cell.bias[i], dh[(i, j)]);
                dz[(i, j)] = dzij;
                dbias[i] += db;
            }
        }
        DenseMatrix::gemm_into(T::ONE, &dz, &batch.inputs[t].adjoint(), T::ONE, &mut dm);
        DenseMatrix::gemm_into(T::ONE, &dz, &trace.hidden[t].adjoint(), T::ONE, &mut dw);
        dh = w_adj.matmul(&dz);
    }

    Ok(Gradients { dw, dm, dv, dbias })
}

/// Adding task: channel 0 carries values uniform on [0,1); channel 1 marks
/// exactly two positions, one in [1, T/2) and one in [T/2, T). The target
/// is the sum of the two marked values.
pub fn gen_adding<T: Entry>(seq_len: usize, batch: usize, rng: &mut ChaCha8Rng) -> TaskBatch<T> {
    assert!(seq_len >= 4, "adding task needs T >= 4");
    let half = seq_len / 2;
    let mut inputs = vec![DenseMatrix::<T>::zeros(2, batch); seq_len];
    let mut targets = Vec::with_capacity(batch);
    for j in 0..batch {
        let values: Vec<f64> = (0..seq_len).map(|_| rng.gen::<f64>()).collect();
        let p1 = rng.gen_range(1..half);
        let p2 = rng.gen_range(half..seq_len);
        for (t, &v) in values.iter().enumerate() {
            inputs[t][(0, j)] = T::from_re(v);
        }
        inputs[p1][(1, j)] = T::ONE;
        inputs[p2][(1, j)] = T::ONE;
        targets.push(values[p1] + values[p2]);
    }
    TaskBatch { task: TaskKind::Adding, inputs, targets: Targets::Scalars(targets) }
}

/// Index of the void symbol in the copy-task alphabet of `n_sym + 2`.
pub fn copy_void_symbol(n_sym: usize) -> usize {
    n_sym
}

/// Index of the start-recall symbol.
pub fn copy_recall_symbol(n_sym: usize) -> usize {
    n_sym + 1
}

/// Copy-memory task. Input layout over `T + 2K` steps: `K` data tokens,
/// `T - 1` void tokens, one recall token, `K` void tokens. Targets are void
/// everywhere except the last `K` steps, which repeat the data tokens.
/// Inputs are one-hot over the `n_sym + 2` alphabet.
pub fn gen_copy<T: Entry>(
    delay: usize,
    copy_len: usize,
    n_sym: usize,
    batch: usize,
    rng: &mut ChaCha8Rng,
) -> TaskBatch<T> {
    assert!(delay >= 1 && copy_len >= 1 && n_sym >= 2, "degenerate copy task");
    let total = delay + 2 * copy_len;
    let d = n_sym + 2;
    let void = copy_void_symbol(n_sym);
    let recall = copy_recall_symbol(n_sym);
    let mut inputs = vec![DenseMatrix::<T>::zeros(d, batch); total];
    let mut tokens = vec![vec![void; batch]; total];
    for j in 0..batch {
        let data: Vec<usize> = (0..copy_len).map(|_| rng.gen_range(0..n_sym)).collect();
        for t in 0..total {
            let sym = if t < copy_len {
                data[t]
            } else if t == copy_len + delay - 1 {
                recall
            } else {
                void
            };
            inputs[t][(sym, j)] = T::ONE;
            if t >= delay + copy_len {
                tokens[t][j] = data[t - delay - copy_len];
            }
        }
    }
    TaskBatch { task: TaskKind::Copy, inputs, targets: Targets::Tokens(tokens) }
}

/// Baseline loss of the naive copy predictor (void for the first `T + K`
/// steps, then uniform over the `n` data symbols): `K ln(n) / (T + 2K)`,
/// in nats.
pub fn baseline_loss_copy(delay: usize, copy_len: usize, n_sym: usize) -> f64 {
    copy_len as f64 * (n_sym as f64).ln() / (delay + 2 * copy_len) as f64
}

/// Cross-entropy of the naive predictor evaluated against an actual batch.
/// Infinite if the batch layout ever puts a data target where the
/// predictor is certain of void, so this doubles as a layout check.
pub fn naive_copy_predictor_ce<T: Entry>(batch: &TaskBatch<T>, n_sym: usize, copy_len: usize) -> f64 {
    let tokens = match &batch.targets {
        Targets::Tokens(t) => t,
        _ => panic!("not a copy batch"),
    };
    let total = batch.seq_len();
    let b = batch.batch_size();
    let mut ce = 0.0;
    for (t, step) in tokens.iter().enumerate() {
        for &target in step {
            if t < total - copy_len {
                if target != copy_void_symbol(n_sym) {
                    return f64::INFINITY;
                }
                // -ln 1 = 0
            } else {
                ce += (n_sym as f64).ln();
                if target >= n_sym {
                    return f64::INFINITY;
                }
            }
        }
    }
    ce / (b * total) as f64
}

/// Random-unitary regression dataset: pairs `(x_i, y_i = U_tar x_i)` with
/// i.i.d. Gaussian inputs and a Haar-random target.
#[derive(Clone, Debug)]
pub struct RandomUnitaryDataset<T: Entry> {
    pub xs: DenseMatrix<T>,
    pub ys: DenseMatrix<T>,
}

impl<T: Entry> RandomUnitaryDataset<T> {
    pub fn size(&self) -> usize {
        self.xs.cols()
    }

    /// Sample a batch of dataset columns (with replacement).
    pub fn sample_batch(&self, batch: usize, rng: &mut ChaCha8Rng) -> TaskBatch<T> {
        let n = self.xs.rows();
        let mut x = DenseMatrix::<T>::zeros(n, batch);
        let mut y = DenseMatrix::<T>::zeros(n, batch);
        for j in 0..batch {
            let idx = rng.gen_range(0..self.size());
            x.set_col(j, &self.xs.col(idx));
            y.set_col(j, &self.ys.col(idx));
        }
        TaskBatch { task: TaskKind::RandomUnitary, inputs: vec![x], targets: Targets::Vectors(y) }
    }
}

pub fn gen_random_unitary_task<T: Entry>(
    n: usize,
    size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(RandomUnitaryDataset<T>, UnitaryParameter<T>)> {
    let u_tar = init_parameter::<T>(n, InitScheme::Haar, rng)?;
    let xs = DenseMatrix::<T>::standard_normal(n, size, rng);
    let ys = u_tar.matrix().matmul(&xs);
    Ok((RandomUnitaryDataset { xs, ys }, u_tar))
}

// ---------------------------------------------------------------------------
// Finite-difference gradient harness
// ---------------------------------------------------------------------------

/// A single real degree of freedom of the cell; the flag selects the
/// imaginary part on the complex field.
#[derive(Clone, Copy, Debug)]
pub enum CellCoord {
    W(usize, usize, bool),
    M(usize, usize, bool),
    V(usize, usize, bool),
    Bias(usize),
}

fn perturb_cell<T: Entry>(cell: &RnnCell<T>, coord: CellCoord, delta: f64) -> RnnCell<T> {
    let mut out = cell.clone();
    let unit = |imag: bool| {
        if imag {
            T::from_c64_lossy(Complex64::new(0.0, 1.0))
        } else {
            T::ONE
        }
    };
    match coord {
        CellCoord::W(i, j, imag) => {
            let mut w = cell.w.matrix().clone();
            w[(i, j)] += unit(imag).scale(delta);
            out.w = UnitaryParameter::from_matrix_unchecked(w);
        }
        CellCoord::M(i, j, imag) => out.m[(i, j)] += unit(imag).scale(delta),
        CellCoord::V(i, j, imag) => out.v[(i, j)] += unit(imag).scale(delta),
        CellCoord::Bias(i) => out.bias[i] += delta,
    }
    out
}

fn analytic_component<T: Entry>(grads: &Gradients<T>, coord: CellCoord) -> f64 {
    let pick = |x: T, imag: bool| if imag { x.im() } else { x.re() };
    match coord {
        CellCoord::W(i, j, imag) => pick(grads.dw[(i, j)], imag),
        CellCoord::M(i, j, imag) => pick(grads.dm[(i, j)], imag),
        CellCoord::V(i, j, imag) => pick(grads.dv[(i, j)], imag),
        CellCoord::Bias(i) => grads.dbias[i],
    }
}

fn random_coord<T: Entry>(cell: &RnnCell<T>, tensor: usize, rng: &mut ChaCha8Rng) -> CellCoord {
    let imag = T::FIELD == Field::Complex && rng.gen_bool(0.5);
    match tensor {
        0 => CellCoord::W(
            rng.gen_range(0..cell.hidden_size()),
            rng.gen_range(0..cell.hidden_size()),
            imag,
        ),
        1 => CellCoord::M(rng.gen_range(0..cell.m.rows()), rng.gen_range(0..cell.m.cols()), imag),
        2 => CellCoord::V(rng.gen_range(0..cell.v.rows()), rng.gen_range(0..cell.v.cols()), imag),
        _ => CellCoord::Bias(rng.gen_range(0..cell.hidden_size())),
    }
}

/// Central finite-difference check of the BPTT gradients.
///
/// For each parameter tensor, draws `coords_per_tensor` random real
/// coordinates, compares `(L(+h) - L(-h)) / 2h` against the analytic
/// component, and returns the maximum relative error seen. Coordinates
/// whose FD stencil crosses a modReLU gate boundary (the loss is only
/// piecewise smooth) or whose gradient is too small to measure reliably
/// are redrawn.
pub fn fd_check_rnn<T: Entry>(
    cell: &RnnCell<T>,
    batch: &TaskBatch<T>,
    coords_per_tensor: usize,
    step: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let (trace, _) = rnn_forward(cell, batch)?;
    let grads = rnn_backward(cell, batch, &trace)?;
    let scale = grads.dw.max_modulus().max(grads.dm.max_modulus()).max(grads.dv.max_modulus());
    let skip_below = 1e-6 * (1.0 + scale);

    let tensors: &[usize] =
        if batch.task == TaskKind::RandomUnitary { &[0] } else { &[0, 1, 2, 3] };
    let mut max_rel: f64 = 0.0;
    for &tensor in tensors {
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < coords_per_tensor {
            attempts += 1;
            if attempts > 400 {
                return Err(Error::Numeric(
                    "could not find enough informative FD coordinates".into(),
                ));
            }
            let coord = random_coord(cell, tensor, rng);
            let an = analytic_component(&grads, coord);
            if an.abs() < skip_below {
                continue;
            }
            let eval = |delta: f64| rnn_forward(&perturb_cell(cell, coord, delta), batch);
            let (tr_plus, l_plus) = eval(step)?;
            let (tr_minus, l_minus) = eval(-step)?;
            let (tr_hplus, l_hplus) = eval(step / 2.0)?;
            let (tr_hminus, l_hminus) = eval(-step / 2.0)?;
            if tr_plus.gate_hash != tr_minus.gate_hash
                || tr_hplus.gate_hash != tr_plus.gate_hash
                || tr_hminus.gate_hash != tr_plus.gate_hash
            {
                continue;
            }
            let fd = (l_plus - l_minus) / (2.0 * step);
            let fd_half = (l_hplus - l_hminus) / step;
            // The smoothed modulus in modReLU has enormous curvature near
            // |z| = 0; a stencil whose two step sizes disagree sits in
            // that regime and measures truncation error, not the gradient.
            if (fd - fd_half).abs() > 1e-5 * fd.abs().max(fd_half.abs()) + 1e-14 {
                continue;
            }
            let rel = (fd - an).abs() / fd.abs().max(an.abs());
            max_rel = max_rel.max(rel);
            accepted += 1;
        }
    }
    Ok(max_rel)
}

// ---------------------------------------------------------------------------
// Batch (de)serialization: shape header + little-endian f64 payload
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum AnyTaskBatch {
    Real(TaskBatch<f64>),
    Complex(TaskBatch<Complex64>),
}

const BATCH_MAGIC: &[u8; 4] = b"PUTB";

pub fn save_batch<T: Entry>(path: &Path, batch: &TaskBatch<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(BATCH_MAGIC)?;
    let task_byte = match batch.task {
        TaskKind::Adding => 0u8,
        TaskKind::Copy => 1,
        TaskKind::RandomUnitary => 2,
    };
    let field_byte = match T::FIELD {
        Field::Real => 0u8,
        Field::Complex => 1,
    };
    w.write_all(&[task_byte, field_byte])?;
    // Inputs as a (steps, features, batch) tensor.
    w.write_all(&3u32.to_le_bytes())?;
    for d in [batch.seq_len(), batch.features(), batch.batch_size()] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for step in &batch.inputs {
        for &x in step.data() {
            w.write_all(&x.re().to_le_bytes())?;
            if T::FIELD == Field::Complex {
                w.write_all(&x.im().to_le_bytes())?;
            }
        }
    }
    match &batch.targets {
        Targets::Scalars(s) => {
            w.write_all(&[0u8])?;
            w.write_all(&(s.len() as u32).to_le_bytes())?;
            for &x in s {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Targets::Tokens(tok) => {
            w.write_all(&[1u8])?;
            w.write_all(&(tok.len() as u32).to_le_bytes())?;
            w.write_all(&(tok.first().map_or(0, Vec::len) as u32).to_le_bytes())?;
            for step in tok {
                for &t in step {
                    w.write_all(&(t as u32).to_le_bytes())?;
                }
            }
        }
        Targets::Vectors(v) => {
            w.write_all(&[2u8])?;
            w.write_all(&(v.rows() as u32).to_le_bytes())?;
            w.write_all(&(v.cols() as u32).to_le_bytes())?;
            for &x in v.data() {
                w.write_all(&x.re().to_le_bytes())?;
                if T::FIELD == Field::Complex {
                    w.write_all(&x.im().to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_batch(path: &Path) -> Result<AnyTaskBatch> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BATCH_MAGIC {
        return Err(Error::CorruptedFile(format!("{}: bad magic", path.display())));
    }
    let mut tags = [0u8; 2];
    r.read_exact(&mut tags)?;
    match tags[1] {
        0 => Ok(AnyTaskBatch::Real(load_batch_typed::<f64, _>(&mut r, tags[0], path)?)),
        1 => Ok(AnyTaskBatch::Complex(load_batch_typed::<Complex64, _>(&mut r, tags[0], path)?)),
        other => Err(Error::CorruptedFile(format!("{}: bad field byte {other}", path.display()))),
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64_le<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_entry<T: Entry, R: Read>(r: &mut R) -> Result<T> {
    let re = read_f64_le(r)?;
    let im = if T::FIELD == Field::Complex { read_f64_le(r)? } else { 0.0 };
    Ok(T::from_c64_lossy(Complex64::new(re, im)))
}

fn load_batch_typed<T: Entry, R: Read>(
    r: &mut R,
    task_byte: u8,
    path: &Path,
) -> Result<TaskBatch<T>> {
    let task = match task_byte {
        0 => TaskKind::Adding,
        1 => TaskKind::Copy,
        2 => TaskKind::RandomUnitary,
        other => {
            return Err(Error::CorruptedFile(format!("{}: bad task byte {other}", path.display())))
        }
    };
    let ndim = read_u32(r)?;
    if ndim != 3 {
        return Err(Error::CorruptedFile(format!(
            "{}: expected 3 input dims, got {ndim}",
            path.display()
        )));
    }
    let steps = read_u32(r)? as usize;
    let features = read_u32(r)? as usize;
    let batch = read_u32(r)? as usize;
    let mut inputs = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut data = Vec::with_capacity(features * batch);
        for _ in 0..features * batch {
            data.push(read_entry::<T, _>(r)?);
        }
        inputs.push(DenseMatrix::from_row_major(features, batch, data)?);
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let targets = match kind[0] {
        0 => {
            let len = read_u32(r)? as usize;
            Targets::Scalars((0..len).map(|_| read_f64_le(r)).collect::<Result<_>>()?)
        }
        1 => {
            let t_steps = read_u32(r)? as usize;
            let b = read_u32(r)? as usize;
            let mut tok = Vec::with_capacity(t_steps);
            for _ in 0..t_steps {
                let mut step = Vec::with_capacity(b);
                for _ in 0..b {
                    step.push(read_u32(r)? as usize);
                }
                tok.push(step);
            }
            Targets::Tokens(tok)
        }
        2 => {
            let rows = read_u32(r)? as usize;
            let cols = read_u32(r)? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(read_entry::<T, _>(r)?);
            }
            Targets::Vectors(DenseMatrix::from_row_major(rows, cols, data)?)
        }
        other => {
            return Err(Error::CorruptedFile(format!(
                "{}: bad target kind {other}",
                path.display()
            )))
        }
    };
    Ok(TaskBatch { task, inputs, targets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cell<T: Entry>(hidden: usize, input: usize, output: usize, seed: u64) -> RnnCell<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = RnnCell::<T>::new(hidden, input, output, InitScheme::Haar, &mut rng).unwrap();
        // Small random biases so both gate branches show up in tests.
        for b in c.bias.iter_mut() {
            *b = rng.gen_range(-0.2..0.2);
        }
        c
    }

    #[test]
    fn modrelu_formula_and_dead_zone() {
        // z = 1 + 0i, b = 0.5 -> 1.5 up to the eps smoothing.
        let out = modrelu(&[Complex64::new(1.0, 0.0)], &[0.5]);
        assert!((out[0].re - 1.5).abs() < 2e-8);
        assert!(out[0].im.abs() < 1e-15);
        // Dead zone: |0.3| - 0.5 <= 0.
        let out = modrelu(&[0.3f64], &[-0.5]);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn modrelu_preserves_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..200 {
            let z = Complex64::standard_normal(&mut rng);
            let b = rng.gen_range(-1.0..1.0);
            let out = modrelu(&[z], &[b])[0];
            if out.norm() > 0.0 {
                let dphase = (out.arg() - z.arg()).abs();
                assert!(dphase < 1e-8, "phase changed by {dphase}");
            }
        }
    }

    #[test]
    fn adding_batch_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let batch = gen_adding::<f64>(20, 16, &mut rng);
        assert_eq!(batch.seq_len(), 20);
        assert_eq!(batch.features(), 2);
        let targets = match &batch.targets {
            Targets::Scalars(t) => t.clone(),
            _ => panic!(),
        };
        for j in 0..16 {
            let mut marked = Vec::new();
            for t in 0..20 {
                let m = batch.inputs[t][(1, j)];
                assert!(m == 0.0 || m == 1.0);
                if m == 1.0 {
                    marked.push(t);
                }
            }
            assert_eq!(marked.len(), 2);
            assert!(marked[0] >= 1 && marked[0] < 10);
            assert!(marked[1] >= 10 && marked[1] < 20);
            let sum = batch.inputs[marked[0]][(0, j)] + batch.inputs[marked[1]][(0, j)];
            assert!((sum - targets[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn adding_statistics() {
        // Mean target 1.0 and baseline MSE of the constant-1 predictor
        // 1/6 (~0.167), estimated over 1e5 samples.
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let mut sum = 0.0;
        let mut sq = 0.0;
        let total = 100_000;
        let batch = gen_adding::<f64>(50, total, &mut rng);
        let targets = match &batch.targets {
            Targets::Scalars(t) => t.clone(),
            _ => panic!(),
        };
        for &y in &targets {
            sum += y;
            sq += (y - 1.0) * (y - 1.0);
        }
        let mean = sum / total as f64;
        let baseline = sq / total as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!((baseline - 0.167).abs() < 0.005, "baseline {baseline}");
    }

    #[test]
    fn constant_zero_network_hits_adding_baseline() {
        // V = 0 predicts 0, so the loss is exactly the mean squared target.
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let batch = gen_adding::<f64>(12, 64, &mut rng);
        let mut c = cell::<f64>(8, 2, 1, 104);
        c.v = DenseMatrix::zeros(1, 8);
        let (_, loss) = rnn_forward(&c, &batch).unwrap();
        let expect = match &batch.targets {
            Targets::Scalars(t) => t.iter().map(|y| y * y).sum::<f64>() / 64.0,
            _ => panic!(),
        };
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn forward_matches_scalar_loop_oracle() {
        // Straight-line scalar reimplementation of the recursion.
        let mut rng = ChaCha8Rng::seed_from_u64(105);
        let (n, d, b, t_len) = (6, 2, 4, 100);
        let batch = gen_adding::<f64>(t_len, b, &mut rng);
        let c = cell::<f64>(n, d, 1, 106);
        let (_, loss) = rnn_forward(&c, &batch).unwrap();

        let mut h = vec![vec![0.0f64; n]; b];
        for t in 0..t_len {
            for j in 0..b {
                let mut z = vec![0.0f64; n];
                for i in 0..n {
                    for kk in 0..d {
                        z[i] += c.m[(i, kk)] * batch.inputs[t][(kk, j)];
                    }
                    for kk in 0..n {
                        z[i] += c.w.matrix()[(i, kk)] * h[j][kk];
                    }
                }
                for i in 0..n {
                    let r = z[i].abs();
                    h[j][i] = if r + c.bias[i] > 0.0 {
                        z[i] * (r + c.bias[i]) / (r + MODRELU_EPS)
                    } else {
                        0.0
                    };
                }
            }
        }
        let targets = match &batch.targets {
            Targets::Scalars(t) => t.clone(),
            _ => panic!(),
        };
        let mut oracle_loss = 0.0;
        for j in 0..b {
            let mut pred = 0.0;
            for i in 0..n {
                pred += c.v[(0, i)] * h[j][i];
            }
            oracle_loss += (pred - targets[j]) * (pred - targets[j]);
        }
        oracle_loss /= b as f64;
        assert!((loss - oracle_loss).abs() < 1e-12, "{loss} vs {oracle_loss}");
    }

    #[test]
    fn copy_batch_layout_and_baseline() {
        let (t_delay, k, n_sym, b) = (15, 3, 4, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        let batch = gen_copy::<f64>(t_delay, k, n_sym, b, &mut rng);
        assert_eq!(batch.seq_len(), t_delay + 2 * k);
        assert_eq!(batch.features(), n_sym + 2);
        let tokens = match &batch.targets {
            Targets::Tokens(t) => t.clone(),
            _ => panic!(),
        };
        for j in 0..b {
            // Targets: void until the last K, then the first K input tokens.
            for (t, step) in tokens.iter().enumerate() {
                if t < t_delay + k {
                    assert_eq!(step[j], copy_void_symbol(n_sym));
                } else {
                    let inp_t = t - t_delay - k;
                    let sym = (0..n_sym + 2)
                        .find(|&s| batch.inputs[inp_t][(s, j)] == 1.0)
                        .unwrap();
                    assert_eq!(step[j], sym);
                    assert!(sym < n_sym);
                }
            }
            // Recall marker sits right before the output window.
            assert_eq!(batch.inputs[k + t_delay - 1][(copy_recall_symbol(n_sym), j)], 1.0);
        }
        // Naive-predictor Monte Carlo agrees with the closed form.
        let mut rng = ChaCha8Rng::seed_from_u64(108);
        let big = gen_copy::<f64>(t_delay, k, n_sym, 10_000, &mut rng);
        let mc = naive_copy_predictor_ce(&big, n_sym, k);
        let formula = baseline_loss_copy(t_delay, k, n_sym);
        assert!((mc - formula).abs() / formula < 0.01, "{mc} vs {formula}");
        assert!(baseline_loss_copy(10, 0, 8) == 0.0);
        let expect = 10.0 * 8f64.ln() / 1020.0;
        assert!((baseline_loss_copy(1000, 10, 8) - expect).abs() < 1e-12);
        assert!((baseline_loss_copy(1000, 10, 8) - 0.02039).abs() < 1e-4);
        assert!((baseline_loss_copy(2000, 10, 8) - 0.01029).abs() < 1e-4);
    }

    #[test]
    fn random_unitary_task_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        let (data, u_tar) = gen_random_unitary_task::<Complex64>(16, 64, &mut rng).unwrap();
        // Norm preservation of every pair.
        for i in 0..data.size() {
            let nx = crate::numerics::vec_norm(&data.xs.col(i));
            let ny = crate::numerics::vec_norm(&data.ys.col(i));
            assert!((nx - ny).abs() < 1e-10);
        }
        // Loss at the target is zero.
        let batch = data.sample_batch(8, &mut rng);
        let c = RnnCell { w: u_tar.clone(), m: DenseMatrix::zeros(16, 1), v: DenseMatrix::zeros(1, 16), bias: vec![0.0; 16] };
        let (trace, loss) = rnn_forward(&c, &batch).unwrap();
        assert!(loss < 1e-22);
        let grads = rnn_backward(&c, &batch, &trace).unwrap();
        assert!(grads.dw.fro_norm() < 1e-12);
    }

    #[test]
    fn bptt_matches_finite_differences_all_tasks_both_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(110);
        // Adding, real.
        let batch = gen_adding::<f64>(20, 2, &mut rng);
        let c = cell::<f64>(16, 2, 1, 111);
        let err = fd_check_rnn(&c, &batch, 20, 1e-5, &mut rng).unwrap();
        assert!(err < 1e-4, "adding/real: {err:.2e}");
        // Adding, complex.
        let batch = gen_adding::<Complex64>(20, 2, &mut rng);
        let c = cell::<Complex64>(16, 2, 1, 112);
        let err = fd_check_rnn(&c, &batch, 20, 1e-5, &mut rng).unwrap();
        assert!(err < 1e-4, "adding/complex: {err:.2e}");
        // Copy, real.
        let batch = gen_copy::<f64>(10, 3, 4, 2, &mut rng);
        let c = cell::<f64>(16, 6, 6, 113);
        let err = fd_check_rnn(&c, &batch, 20, 1e-5, &mut rng).unwrap();
        assert!(err < 1e-4, "copy/real: {err:.2e}");
        // Copy, complex.
        let batch = gen_copy::<Complex64>(10, 3, 4, 2, &mut rng);
        let c = cell::<Complex64>(16, 6, 6, 114);
        let err = fd_check_rnn(&c, &batch, 20, 1e-5, &mut rng).unwrap();
        assert!(err < 1e-4, "copy/complex: {err:.2e}");
        // Random unitary, both fields.
        let (data, _) = gen_random_unitary_task::<f64>(16, 32, &mut rng).unwrap();
        let batch = data.sample_batch(2, &mut rng);
        let c = cell::<f64>(16, 16, 1, 115);
        let err = fd_check_rnn(&c, &batch, 20, 1e-5, &mut rng).unwrap();
        assert!(err < 1e-4, "rand-unitary/real: {err:.2e}");
        let (data, _) = gen_random_unitary_task::<Complex64>(16, 32, &mut rng).unwrap();
        let batch = data.sample_batch(2, &mut rng);
        let c = cell::<Complex64>(16, 16, 1, 116);
        let err = fd_check_rnn(&c, &batch, 20, 1e-5, &mut rng).unwrap();
        assert!(err < 1e-4, "rand-unitary/complex: {err:.2e}");
    }

    #[test]
    fn gradient_rank_bound_holds() {
        // Prop-style check: rank(dW) <= b*T, verified via the rank profile.
        let (n, b, t_len) = (32usize, 2usize, 5usize);
        let mut rng = ChaCha8Rng::seed_from_u64(117);
        let batch = gen_adding::<f64>(t_len, b, &mut rng);
        let c = cell::<f64>(n, 2, 1, 118);
        let (trace, _) = rnn_forward(&c, &batch).unwrap();
        let grads = rnn_backward(&c, &batch, &trace).unwrap();
        let profile = crate::lowrank::rank_profile(&grads.dw, n);
        assert!(profile.rel_error_at(b * t_len) < 1e-8);
    }

    #[test]
    fn linear_cell_preserves_hidden_norm() {
        // Identity activation: the recursion is h <- W h, an isometry.
        let n = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(119);
        let w = init_parameter::<f64>(n, InitScheme::Haar, &mut rng).unwrap();
        let mut h: Vec<f64> = (0..n).map(|_| f64::standard_normal(&mut rng)).collect();
        let norm0 = crate::numerics::vec_norm(&h);
        for _ in 0..1000 {
            h = w.matrix().matvec(&h);
        }
        assert!((crate::numerics::vec_norm(&h) - norm0).abs() < 1e-10);
    }

    #[test]
    fn nan_input_reports_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(120);
        let mut batch = gen_adding::<f64>(8, 2, &mut rng);
        batch.inputs[3][(0, 0)] = f64::NAN;
        let c = cell::<f64>(4, 2, 1, 121);
        match rnn_forward(&c, &batch) {
            Err(Error::NumericFailure { step, .. }) => assert_eq!(step, 3),
            other => panic!("expected NumericFailure, got {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(122);
        let batch = gen_copy::<f64>(5, 2, 4, 3, &mut rng);
        let c = cell::<f64>(8, 2, 1, 123); // expects 2 input features, copy has 6
        assert!(matches!(rnn_forward(&c, &batch), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn batch_serialization_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(124);
        let batch = gen_copy::<f64>(6, 2, 4, 3, &mut rng);
        let path = dir.path().join("copy.putb");
        save_batch(&path, &batch).unwrap();
        match load_batch(&path).unwrap() {
            AnyTaskBatch::Real(loaded) => {
                assert_eq!(loaded.task, TaskKind::Copy);
                assert_eq!(loaded.seq_len(), batch.seq_len());
                for (a, b) in loaded.inputs.iter().zip(&batch.inputs) {
                    assert!(a == b);
                }
                match (&loaded.targets, &batch.targets) {
                    (Targets::Tokens(a), Targets::Tokens(b)) => assert_eq!(a, b),
                    _ => panic!(),
                }
            }
            _ => panic!("field mismatch"),
        }
        // Complex vectors variant.
        let (data, _) = gen_random_unitary_task::<Complex64>(5, 8, &mut rng).unwrap();
        let batch = data.sample_batch(4, &mut rng);
        let path = dir.path().join("ru.putb");
        save_batch(&path, &batch).unwrap();
        match load_batch(&path).unwrap() {
            AnyTaskBatch::Complex(loaded) => {
                assert!(loaded.inputs[0] == batch.inputs[0]);
            }
            _ => panic!("field mismatch"),
        }
    }

    #[test]
    fn deterministic_generation() {
        let b1 = gen_adding::<f64>(10, 4, &mut ChaCha8Rng::seed_from_u64(7));
        let b2 = gen_adding::<f64>(10, 4, &mut ChaCha8Rng::seed_from_u64(7));
        for (a, b) in b1.inputs.iter().zip(&b2.inputs) {
            assert!(a == b);
        }
    }
}
