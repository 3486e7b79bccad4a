//! Wall-time scaling of the rank-1 manifold updates (quadratic in n)
//! against the dense polar projection (cubic in n).
//!
//!     cargo run --release --example runtime_scaling -- [reps]

use projunn::trainer::{bench, bench_csv, BenchOp};

fn main() {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let sizes = [256usize, 512, 1024];
    for op in [BenchOp::UpdateT, BenchOp::UpdateD, BenchOp::PolarDense] {
        let rows = bench(op, &sizes, 1, reps).expect("bench failed");
        print!("{}", bench_csv(&rows));
    }
    println!("\nper-doubling ratios near 4 are quadratic, near 8 cubic");
}
