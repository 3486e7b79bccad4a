//! Optimizer, training loop, benchmark harness and self-check suite.
//!
//! Unitary parameters take plain (non-preconditioned) manifold steps at
//! `lr / unitary_lr_divisor`; everything Euclidean goes through RMSprop at
//! `lr`. The learning rate decays by a fixed factor per epoch.

mod bench;
mod config;
mod report;
mod rmsprop;
pub(crate) mod run;
mod verify;

pub use bench::{bench, bench_csv, BenchOp, BenchRow};
pub use config::TrainConfig;
pub use report::{RunReport, RunSummary, StepRecord};
pub use rmsprop::{rmsprop_step, RmspropState, RMSPROP_DECAY, RMSPROP_EPS};
pub use run::{
    csv_without_wall_ms, full_rank_step_matches_dense, manifold_step_with_retry, smoke_config,
    train, unitary_step, unitary_step_filter, CellOptState, MAX_ETA_RETRIES,
};
pub use verify::{fit_slope, gap_slopes, verify, verify_with_seed, CheckOutcome, VerifyReport};

/// Cap the worker pool from the `PROJUNN_THREADS` environment variable.
/// Call once at process start; later calls are no-ops.
pub fn init_thread_pool() {
    if let Ok(value) = std::env::var("PROJUNN_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
