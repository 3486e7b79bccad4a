//! Scratch debug (removed before ship).
use projunn::lowrank::LowRankFactor;
use projunn::manifold::{init_parameter, InitScheme};
use projunn::numerics::{polar_project_dense, svd, DenseMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    // The two bad trials plus neighbors: print sigma_min(M) and error.
    for (n, ni, k, ki, trial) in [(32usize, 2u64, 8usize, 3u64, 56u64), (64, 3, 4, 2, 77), (64, 3, 4, 2, 78), (8, 0, 1, 0, 95), (64, 3, 1, 0, 4), (64, 3, 2, 1, 12)] {
        let seed = 10_000 + ni * 1000 + ki * 100 + trial;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = init_parameter::<f64>(n, InitScheme::Haar, &mut rng).unwrap();
        let g = LowRankFactor::new(
            DenseMatrix::<f64>::standard_normal(n, k, &mut rng),
            DenseMatrix::<f64>::standard_normal(n, k, &mut rng),
        ).unwrap();
        let eta = 0.1;
        let dense = u.matrix().sub(&g.materialize().scale(eta));
        let d = svd(&dense);
        let smin = *d.singular_values.last().unwrap();
        let smax = d.singular_values[0];
        let fast = u.update_direct(&g, eta).unwrap();
        let oracle = polar_project_dense(&dense).unwrap();
        let err = fast.matrix().sub(&oracle).fro_norm();
        println!("n={n:3} k={k} trial {trial:3}: sigma_min {smin:.3e} sigma_max {smax:.2e} (s+1 = {:.3e})  err {err:.3e}", smin*smin);
    }
}
