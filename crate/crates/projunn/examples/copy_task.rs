//! Train the orthogonal RNN on the copy-memory task: replay K tokens
//! after a delay of T void steps. The naive predictor (void until the end,
//! then uniform guesses) scores K ln(n) / (T + 2K); learning means beating
//! that baseline.
//!
//!     cargo run --release --example copy_task -- [T] [hidden] [epochs] [lr] [seed]

use projunn::lowrank::SamplerKind;
use projunn::manifold::{InitScheme, UpdateMode};
use projunn::numerics::Field;
use projunn::rnn::{baseline_loss_copy, TaskKind};
use projunn::trainer::{train, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let get = |i: usize, default: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let delay = get(1, 100.0) as usize;
    let hidden = get(2, 128.0) as usize;
    let epochs = get(3, 50.0) as usize;
    let lr = get(4, 7e-4);
    let seed = get(5, 1.0) as u64;
    let copy_len = 10;
    let n_sym = 8;

    let baseline = baseline_loss_copy(delay, copy_len, n_sym);
    let cfg = TrainConfig {
        task: TaskKind::Copy,
        hidden_size: hidden,
        seq_len: delay,
        copy_len,
        n_sym,
        batch: 128,
        epochs,
        steps_per_epoch: 50,
        lr,
        unitary_lr_divisor: 32.0,
        lr_decay_per_epoch: 0.96,
        mode: UpdateMode::Tangent,
        rank: 1,
        sampler: SamplerKind::Column,
        init: InitScheme::Henaff,
        seed,
        field: Field::Real,
        dataset_size: 0,
        eval_batch: 512,
        target_loss: Some(baseline * 0.9),
        reprojection_interval: None,
    };

    let report = train(&cfg).expect("training failed");
    for r in report.records.iter().step_by(cfg.steps_per_epoch) {
        println!(
            "step {:5}  train CE {:.4}  (baseline {:.4})  drift {:.2e}",
            r.step, r.loss, baseline, r.unitarity_error
        );
    }
    println!(
        "T={delay} K={copy_len} n={n_sym} hidden={hidden}: final test CE {:.4} vs baseline {:.4} after {} steps",
        report.summary.final_test_loss.unwrap(),
        baseline,
        report.summary.steps_run,
    );
}
