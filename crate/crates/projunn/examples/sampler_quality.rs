//! Randomized low-rank samplers against the Eckart-Young optimum on a
//! matrix with geometrically decaying spectrum, plus the rank profile of
//! an actual BPTT gradient.
//!
//!     cargo run --release --example sampler_quality

use projunn::lowrank::{column_sample, lsi_sample, rank_profile, rel_error, truncated_svd_oracle};
use projunn::manifold::InitScheme;
use projunn::numerics::{gram_schmidt_cols, DenseMatrix};
use projunn::rnn::{gen_adding, rnn_backward, rnn_forward, RnnCell};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 64;
    let k = 4;

    // A = U diag(2^-i) V^T.
    let (u, _) = gram_schmidt_cols(&DenseMatrix::<f64>::standard_normal(n, n, &mut rng), 1e-10).unwrap();
    let (v, _) = gram_schmidt_cols(&DenseMatrix::<f64>::standard_normal(n, n, &mut rng), 1e-10).unwrap();
    let mut sig = DenseMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        sig[(i, i)] = 2f64.powi(-(i as i32 + 1));
    }
    let a = u.matmul(&sig).matmul(&v.adjoint());

    let optimum = rel_error(&a, &truncated_svd_oracle(&a, k).unwrap());
    let trials = 50;
    let mut col = 0.0;
    let mut lsi = 0.0;
    for seed in 0..trials {
        let mut r = ChaCha8Rng::seed_from_u64(100 + seed);
        col += rel_error(&a, &column_sample(&a, k, 4 * k, &mut r).unwrap());
        lsi += rel_error(&a, &lsi_sample(&a, k, 5, &mut r).unwrap());
    }
    println!("rank-{k} approximation of the 2^-i spectrum at n = {n} ({trials} seeds):");
    println!("  truncated SVD optimum  E_rel = {optimum:.4}");
    println!("  column sampling mean   E_rel = {:.4}  ({:.2}x optimum)", col / trials as f64, col / trials as f64 / optimum);
    println!("  range finder mean      E_rel = {:.4}  ({:.2}x optimum)", lsi / trials as f64, lsi / trials as f64 / optimum);

    // Rank profile of a real gradient: bounded by batch * seq_len.
    let (b, t_len, hidden) = (2usize, 5usize, 32usize);
    let batch = gen_adding::<f64>(t_len, b, &mut rng);
    let cell = RnnCell::<f64>::new(hidden, 2, 1, InitScheme::Haar, &mut rng).unwrap();
    let (trace, _) = rnn_forward(&cell, &batch).unwrap();
    let grads = rnn_backward(&cell, &batch, &trace).unwrap();
    let profile = rank_profile(&grads.dw, hidden);
    println!("\nBPTT gradient (batch {b}, length {t_len}, hidden {hidden}):");
    println!("  stable rank {:.2}, E_rel at the rank bound bT = {}: {:.2e}", profile.stable_rank, b * t_len, profile.rel_error_at(b * t_len));
    print!("{}", profile.to_csv_string());
}
