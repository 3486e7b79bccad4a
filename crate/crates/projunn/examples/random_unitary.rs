//! Learn a Haar-random target unitary from (x, U_tar x) pairs with rank-k
//! tangent updates and the column sampler.
//!
//!     cargo run --release --example random_unitary -- [n] [k] [steps] [lr] [seed]
//!
//! Prints the squared Frobenius distance to the target every 50 steps and
//! a summary line at the end.

use projunn::lowrank::SamplerKind;
use projunn::manifold::{InitScheme, UpdateMode};
use projunn::numerics::Field;
use projunn::rnn::TaskKind;
use projunn::trainer::{train, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let get = |i: usize, default: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let n = get(1, 128.0) as usize;
    let k = get(2, 1.0) as usize;
    let steps = get(3, 3000.0) as usize;
    let lr = get(4, 0.25);
    let seed = get(5, 1.0) as u64;

    let cfg = TrainConfig {
        task: TaskKind::RandomUnitary,
        hidden_size: n,
        seq_len: 1,
        copy_len: 1,
        n_sym: 2,
        batch: 16,
        epochs: 1,
        steps_per_epoch: steps,
        lr,
        unitary_lr_divisor: 1.0,
        lr_decay_per_epoch: 1.0,
        mode: UpdateMode::Tangent,
        rank: k,
        sampler: SamplerKind::Column,
        init: InitScheme::Haar,
        seed,
        field: Field::Complex,
        dataset_size: 4096,
        eval_batch: 16,
        target_loss: Some(1e-2),
        reprojection_interval: None,
    };

    let report = train(&cfg).expect("training failed");
    let init = report.summary.initial_distance_sq.unwrap();
    for r in report.records.iter().step_by(50) {
        println!("step {:5}  batch loss {:.6e}  unitarity drift {:.2e}", r.step, r.loss, r.unitarity_error);
    }
    println!(
        "n={n} k={k} lr={lr} seed={seed}: distance^2 {:.3} -> {:.3e} in {} steps (100x at step {:?})",
        init,
        report.summary.final_distance_sq.unwrap(),
        report.summary.steps_run,
        report.summary.steps_to_hundredfold,
    );
}
