//! The two rank-k update rules against their dense oracles, drift over a
//! long chain of rank-1 updates, and parameter save/load.
//!
//!     cargo run --release --example manifold_updates

use num_complex::Complex64;
use projunn::lowrank::LowRankFactor;
use projunn::manifold::{
    first_order_gap, init_parameter, load_parameter, save_parameter, tangent_project, AnyParameter,
    InitScheme, UpdateMode,
};
use projunn::numerics::{expm_dense, polar_project_dense, DenseMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 32;
    let k = 2;
    let eta = 0.05;

    let u = init_parameter::<Complex64>(n, InitScheme::Haar, &mut rng).unwrap();
    let g = LowRankFactor::new(
        DenseMatrix::<Complex64>::standard_normal(n, k, &mut rng),
        DenseMatrix::<Complex64>::standard_normal(n, k, &mut rng),
    )
    .unwrap();

    // Direct mode vs the dense polar oracle.
    let fast = u.update_direct(&g, eta).unwrap();
    let oracle = polar_project_dense(&u.matrix().sub(&g.materialize().scale(eta))).unwrap();
    println!("direct vs dense polar oracle:  {:.3e}", fast.matrix().sub(&oracle).fro_norm());

    // Tangent mode vs the dense exponential-map oracle.
    let fast = u.update_tangent(&g, eta).unwrap();
    let proj = tangent_project(u.matrix(), &g.materialize()).unwrap();
    let exponent = u.matrix().adjoint().matmul(&proj).scale(-eta);
    let oracle = u.matrix().matmul(&expm_dense(&exponent).unwrap());
    println!("tangent vs dense expm oracle:  {:.3e}", fast.matrix().sub(&oracle).fro_norm());

    // The two modes agree to first order; their gap shrinks as eta^2.
    for eta in [1e-2, 1e-3, 1e-4] {
        println!("first-order gap at eta = {eta:.0e}: {:.3e}", first_order_gap(&u, &g, eta).unwrap());
    }

    // Drift over 2000 rank-1 tangent updates without any reprojection.
    let mut p = init_parameter::<f64>(64, InitScheme::Haar, &mut rng)
        .unwrap()
        .with_reprojection_interval(None);
    for _ in 0..2000 {
        let g = LowRankFactor::new(
            DenseMatrix::<f64>::standard_normal(64, 1, &mut rng),
            DenseMatrix::<f64>::standard_normal(64, 1, &mut rng),
        )
        .unwrap();
        p = p.update_tangent(&g, 0.01).unwrap();
    }
    println!("drift after 2000 tangent updates, no reprojection: {:.3e}", p.unitarity_error());

    // Round-trip through the binary parameter format.
    let dir = std::env::temp_dir().join("projunn-example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("param.punn");
    save_parameter(&path, &p, UpdateMode::Tangent).unwrap();
    let (loaded, mode) = load_parameter(&path).unwrap();
    match loaded {
        AnyParameter::Real(q) => println!(
            "reloaded {}x{} orthogonal parameter ({mode:?} mode), drift {:.3e}",
            q.dim(),
            q.dim(),
            q.unitarity_error()
        ),
        AnyParameter::Complex(_) => unreachable!(),
    }
    let _ = std::fs::remove_dir_all(&dir);
}
