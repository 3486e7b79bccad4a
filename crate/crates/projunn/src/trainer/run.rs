//! The training loop: RMSprop on Euclidean parameters, sampled low-rank
//! manifold steps on unitary parameters, per-epoch learning-rate decay,
//! and CSV/JSON reporting.

use super::config::TrainConfig;
use super::report::{RunReport, RunSummary, StepRecord};
use super::rmsprop::RmspropState;
use crate::error::{Error, Result};
use crate::lowrank::{sample_with, LowRankFactor, SamplerKind};
use crate::manifold::{init_parameter, UnitaryParameter, UpdateMode};
use crate::numerics::{DenseMatrix, Entry, Field};
use crate::rnn::{
    gen_adding, gen_copy, gen_random_unitary_task, rnn_backward, rnn_forward, Gradients, RnnCell,
    TaskBatch, TaskKind,
};
use crate::uconv::{uconv_update, BlockGrads, UConvFilter};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use std::time::Instant;

/// Halvings of eta attempted after a direct-mode step-too-large.
pub const MAX_ETA_RETRIES: usize = 5;

/// RMSprop accumulators for the Euclidean cell parameters.
#[derive(Clone, Debug)]
pub struct CellOptState {
    pub m: RmspropState,
    pub v: RmspropState,
    pub bias: RmspropState,
}

impl CellOptState {
    pub fn for_cell<T: Entry>(cell: &RnnCell<T>) -> Self {
        Self {
            m: RmspropState::new(cell.m.data().len()),
            v: RmspropState::new(cell.v.data().len()),
            bias: RmspropState::new(cell.bias.len()),
        }
    }
}

/// One manifold step with the documented retry policy: a direct-mode
/// step-too-large halves eta, at most [`MAX_ETA_RETRIES`] times.
pub fn manifold_step_with_retry<T: Entry>(
    w: &UnitaryParameter<T>,
    factor: &LowRankFactor<T>,
    eta: f64,
    mode: UpdateMode,
) -> Result<UnitaryParameter<T>> {
    let mut eta_now = eta;
    for attempt in 0..=MAX_ETA_RETRIES {
        let result = match mode {
            UpdateMode::Direct => w.update_direct(factor, eta_now),
            UpdateMode::Tangent => w.update_tangent(factor, eta_now),
        };
        match result {
            Ok(next) => return Ok(next),
            Err(Error::StepTooLarge { .. }) if attempt < MAX_ETA_RETRIES => eta_now *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::StepFailure {
        retries: MAX_ETA_RETRIES,
        msg: format!("direct step still singular after shrinking eta to {eta_now:.3e}"),
    })
}

/// Apply one full model update: Euclidean parameters through RMSprop at
/// `lr`, the unitary parameter through sampler + manifold step at
/// `lr / unitary_lr_divisor` with no preconditioning.
pub fn unitary_step<T: Entry>(
    cell: &mut RnnCell<T>,
    grads: &Gradients<T>,
    cfg: &TrainConfig,
    opt: &mut CellOptState,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    opt.m.step_matrix(&mut cell.m, &grads.dm, lr);
    opt.v.step_matrix(&mut cell.v, &grads.dv, lr);
    opt.bias.step_vec(&mut cell.bias, &grads.dbias, lr);
    // The sampler sees the raw gradient; eta scales inside the update.
    let factor = sample_with(cfg.sampler, &grads.dw, cfg.rank, rng)?;
    let eta = lr / cfg.unitary_lr_divisor;
    cell.w = manifold_step_with_retry(&cell.w, &factor, eta, cfg.mode)?;
    Ok(())
}

/// Filter counterpart of [`unitary_step`] (per-block sampling + manifold
/// update with the same eta-halving retry policy).
pub fn unitary_step_filter(
    filter: &UConvFilter,
    grads: &BlockGrads,
    rank: usize,
    eta: f64,
    mode: UpdateMode,
    sampler: SamplerKind,
    seed: u64,
) -> Result<UConvFilter> {
    let mut eta_now = eta;
    for attempt in 0..=MAX_ETA_RETRIES {
        match uconv_update(filter, grads, rank, eta_now, mode, sampler, seed) {
            Ok(next) => return Ok(next),
            Err(Error::StepTooLarge { .. }) if attempt < MAX_ETA_RETRIES => eta_now *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::StepFailure {
        retries: MAX_ETA_RETRIES,
        msg: format!("filter update still singular after shrinking eta to {eta_now:.3e}"),
    })
}

/// Deterministic training entry point; dispatches on the configured field.
pub fn train(cfg: &TrainConfig) -> Result<RunReport> {
    cfg.validate()?;
    match cfg.field {
        Field::Real => train_typed::<f64>(cfg),
        Field::Complex => train_typed::<Complex64>(cfg),
    }
}

fn train_typed<T: Entry>(cfg: &TrainConfig) -> Result<RunReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.task {
        TaskKind::RandomUnitary => train_random_unitary::<T>(cfg, &mut rng),
        TaskKind::Adding | TaskKind::Copy => train_rnn::<T>(cfg, &mut rng),
    }
}

fn gen_batch<T: Entry>(cfg: &TrainConfig, batch: usize, rng: &mut ChaCha8Rng) -> TaskBatch<T> {
    match cfg.task {
        TaskKind::Adding => gen_adding(cfg.seq_len, batch, rng),
        TaskKind::Copy => gen_copy(cfg.seq_len, cfg.copy_len, cfg.n_sym, batch, rng),
        TaskKind::RandomUnitary => unreachable!("random-unitary batches come from the dataset"),
    }
}

fn train_rnn<T: Entry>(cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<RunReport> {
    let started = Instant::now();
    let (d, o) = match cfg.task {
        TaskKind::Adding => (2, 1),
        TaskKind::Copy => (cfg.n_sym + 2, cfg.n_sym + 2),
        TaskKind::RandomUnitary => unreachable!(),
    };
    let mut cell = RnnCell::<T>::new(cfg.hidden_size, d, o, cfg.init, rng)?;
    cell.w = cell.w.with_reprojection_interval(cfg.unitary_reprojection_interval());
    let mut opt = CellOptState::for_cell(&cell);

    let mut records = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut best_test = f64::INFINITY;
    let mut final_test = f64::NAN;
    let mut aborted = None;
    let mut step = 0;
    'outer: for epoch in 0..cfg.epochs {
        let lr_now = cfg.effective_lr(epoch);
        for _ in 0..cfg.steps_per_epoch {
            let t0 = Instant::now();
            let batch = gen_batch::<T>(cfg, cfg.batch, rng);
            let (trace, loss) = rnn_forward(&cell, &batch)?;
            let grads = rnn_backward(&cell, &batch, &trace)?;
            if let Err(e @ Error::StepFailure { .. }) =
                unitary_step(&mut cell, &grads, cfg, &mut opt, lr_now, rng)
            {
                aborted = Some(e.to_string());
                break 'outer;
            }
            best_loss = best_loss.min(loss);
            step += 1;
            records.push(StepRecord {
                step,
                loss,
                unitarity_error: cell.w.unitarity_error(),
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            });
        }
        // Held-out evaluation after each epoch.
        let eval = gen_batch::<T>(cfg, cfg.eval_batch, rng);
        let (_, test_loss) = rnn_forward(&cell, &eval)?;
        best_test = best_test.min(test_loss);
        final_test = test_loss;
        if let Some(target) = cfg.target_loss {
            if test_loss < target {
                break 'outer;
            }
        }
    }

    let final_unitarity = cell.w.unitarity_error();
    let final_loss = records.last().map_or(f64::NAN, |r| r.loss);
    Ok(RunReport {
        records,
        summary: RunSummary {
            steps_run: step,
            final_loss,
            best_loss,
            final_unitarity_error: final_unitarity,
            final_test_loss: if final_test.is_nan() { None } else { Some(final_test) },
            best_test_loss: if best_test.is_finite() { Some(best_test) } else { None },
            initial_distance_sq: None,
            final_distance_sq: None,
            steps_to_hundredfold: None,
            elapsed_s: started.elapsed().as_secs_f64(),
            aborted,
            config: cfg.clone(),
        },
    })
}

fn train_random_unitary<T: Entry>(cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<RunReport> {
    let started = Instant::now();
    let n = cfg.hidden_size;
    let (dataset, u_tar) = gen_random_unitary_task::<T>(n, cfg.dataset_size, rng)?;
    let mut w = init_parameter::<T>(n, cfg.init, rng)?
        .with_reprojection_interval(cfg.unitary_reprojection_interval());

    let dist_sq = |w: &UnitaryParameter<T>| w.matrix().sub(u_tar.matrix()).fro_norm_sq();
    let initial_dist = dist_sq(&w);
    let mut steps_to_hundredfold = None;
    let mut records = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut aborted = None;
    let mut step = 0;

    'outer: for epoch in 0..cfg.epochs {
        let lr_now = cfg.effective_lr(epoch);
        let eta = lr_now / cfg.unitary_lr_divisor;
        for _ in 0..cfg.steps_per_epoch {
            let t0 = Instant::now();
            let batch = dataset.sample_batch(cfg.batch, rng);
            let x = &batch.inputs[0];
            let y = match &batch.targets {
                crate::rnn::Targets::Vectors(y) => y,
                _ => unreachable!(),
            };
            let err = w.matrix().matmul(x).sub(y);
            let loss = err.fro_norm_sq() / cfg.batch as f64;
            let mut grad = DenseMatrix::<T>::zeros(n, n);
            DenseMatrix::gemm_into(
                T::from_re(2.0 / cfg.batch as f64),
                &err,
                &x.adjoint(),
                T::ZERO,
                &mut grad,
            );
            let factor = sample_with(cfg.sampler, &grad, cfg.rank, rng)?;
            match manifold_step_with_retry(&w, &factor, eta, cfg.mode) {
                Ok(next) => w = next,
                Err(e @ Error::StepFailure { .. }) => {
                    aborted = Some(e.to_string());
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
            step += 1;
            best_loss = best_loss.min(loss);
            let d = dist_sq(&w);
            if steps_to_hundredfold.is_none() && d <= initial_dist / 100.0 {
                steps_to_hundredfold = Some(step);
            }
            records.push(StepRecord {
                step,
                loss,
                unitarity_error: w.unitarity_error(),
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            });
            if let Some(target) = cfg.target_loss {
                if d / initial_dist <= target {
                    break 'outer;
                }
            }
        }
    }

    let final_dist = dist_sq(&w);
    let final_loss = records.last().map_or(f64::NAN, |r| r.loss);
    let final_unitarity = w.unitarity_error();
    Ok(RunReport {
        records,
        summary: RunSummary {
            steps_run: step,
            final_loss,
            best_loss,
            final_unitarity_error: final_unitarity,
            final_test_loss: None,
            best_test_loss: None,
            initial_distance_sq: Some(initial_dist),
            final_distance_sq: Some(final_dist),
            steps_to_hundredfold,
            elapsed_s: started.elapsed().as_secs_f64(),
            aborted,
            config: cfg.clone(),
        },
    })
}

/// Exact-sampler consistency: with `k = n` and the exact sampler, a step
/// must reproduce the full-gradient update. Exposed for the self-check
/// suite.
pub fn full_rank_step_matches_dense<T: Entry>(seed: u64, n: usize, mode: UpdateMode) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = init_parameter::<T>(n, crate::manifold::InitScheme::Haar, &mut rng)?;
    let grad = DenseMatrix::<T>::standard_normal(n, n, &mut rng);
    let factor = sample_with(SamplerKind::Exact, &grad, n, &mut rng)?;
    let eta = 0.05;
    let fast = manifold_step_with_retry(&w, &factor, eta, mode)?;
    let dense = match mode {
        UpdateMode::Direct => {
            crate::numerics::polar_project_dense(&w.matrix().sub(&grad.scale(eta)))?
        }
        UpdateMode::Tangent => {
            let proj = crate::manifold::tangent_project(w.matrix(), &grad)?;
            let exponent = w.matrix().adjoint().matmul(&proj).scale(-eta);
            w.matrix().matmul(&crate::numerics::expm_dense(&exponent)?)
        }
    };
    Ok(fast.matrix().sub(&dense).fro_norm())
}

/// Convenience for tests and examples: a quick deterministic smoke config.
pub fn smoke_config() -> TrainConfig {
    TrainConfig {
        task: TaskKind::Adding,
        hidden_size: 16,
        seq_len: 12,
        copy_len: 2,
        n_sym: 4,
        batch: 8,
        epochs: 2,
        steps_per_epoch: 4,
        lr: 1e-3,
        unitary_lr_divisor: 32.0,
        lr_decay_per_epoch: 0.96,
        mode: UpdateMode::Tangent,
        rank: 1,
        sampler: SamplerKind::Column,
        init: crate::manifold::InitScheme::Identity,
        seed: 7,
        field: Field::Real,
        dataset_size: 64,
        eval_batch: 32,
        target_loss: None,
        reprojection_interval: None,
    }
}

/// Zero out the wall_ms column for byte-comparison of CSVs.
pub fn csv_without_wall_ms(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let mut parts: Vec<&str> = line.split(',').collect();
            if parts.len() == 4 && parts[3] != "wall_ms" {
                parts[3] = "-";
            }
            parts.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
