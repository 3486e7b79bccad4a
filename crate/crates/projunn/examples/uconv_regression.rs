//! Fourier-domain orthogonal convolution: verify the convolution theorem
//! against the brute-force cyclic oracle, then fit a random target by
//! rank-1 blockwise tangent updates.
//!
//!     cargo run --release --example uconv_regression

use projunn::lowrank::SamplerKind;
use projunn::manifold::{InitScheme, UpdateMode};
use projunn::uconv::{
    cyclic_conv_oracle, filter_to_spatial_real, init_uconv, uconv_backward, uconv_forward,
    uconv_update, SpatialTensor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (m, n, c, b) = (8usize, 8usize, 4usize, 2usize);

    // Convolution theorem at work: the FFT path equals the quadruple-loop
    // cyclic cross-correlation of the spatial filter.
    let filter = init_uconv(m, n, c, InitScheme::Haar, true, &mut rng).unwrap();
    let x = SpatialTensor::<f64>::standard_normal(b, m, n, c, &mut rng);
    let y_fft = uconv_forward(&filter, &x).unwrap();
    let w = filter_to_spatial_real(&filter).unwrap();
    let y_oracle = cyclic_conv_oracle(&w, &x).unwrap();
    println!(
        "FFT path vs cyclic oracle: {:.3e} relative deviation, norm ratio {:.12}",
        y_fft.sub(&y_oracle).fro_norm() / x.fro_norm(),
        y_fft.fro_norm() / x.fro_norm()
    );

    // Blockwise rank-1 learning of a random orthogonal-convolution target.
    let target = init_uconv(m, n, c, InitScheme::Haar, true, &mut rng).unwrap();
    let y_target = uconv_forward(&target, &x).unwrap();
    let mut current = init_uconv(m, n, c, InitScheme::Identity, true, &mut rng).unwrap();
    let loss = |f: &projunn::uconv::UConvFilter| -> f64 {
        let y = uconv_forward(f, &x).unwrap();
        let d = y.sub(&y_target);
        d.fro_norm() * d.fro_norm()
    };
    println!("initial loss {:.4}", loss(&current));
    for step in 0..300u64 {
        let y = uconv_forward(&current, &x).unwrap();
        let dy = y.sub(&y_target).scale(2.0);
        let (grads, _) = uconv_backward(&current, &x, &dy).unwrap();
        current = uconv_update(
            &current,
            &grads,
            1,
            2e-2,
            UpdateMode::Tangent,
            SamplerKind::Column,
            step,
        )
        .unwrap();
        if (step + 1) % 50 == 0 {
            println!("step {:3}: loss {:.5}, worst block drift {:.2e}", step + 1, loss(&current), current.max_block_drift());
        }
    }
    current.validate().unwrap();
    println!("filter invariants hold after training");
}
