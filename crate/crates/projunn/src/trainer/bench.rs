//! Runtime-scaling benchmark: rank-k manifold updates are O(k n^2), the
//! dense polar projection is O(n^3). The CSV output carries the ratio of
//! each size to the previous one so the scaling exponent is visible
//! directly.

use crate::error::{Error, Result};
use crate::lowrank::LowRankFactor;
use crate::manifold::{direct_step, init_matrix, tangent_step, InitScheme};
use crate::numerics::{polar_project_dense, DenseMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchOp {
    UpdateD,
    UpdateT,
    PolarDense,
}

impl std::str::FromStr for BenchOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "update_d" => Ok(BenchOp::UpdateD),
            "update_t" => Ok(BenchOp::UpdateT),
            "polar_dense" => Ok(BenchOp::PolarDense),
            other => Err(Error::Config(format!(
                "unknown bench op '{other}' (expected update_d, update_t or polar_dense)"
            ))),
        }
    }
}

impl std::fmt::Display for BenchOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BenchOp::UpdateD => "update_d",
            BenchOp::UpdateT => "update_t",
            BenchOp::PolarDense => "polar_dense",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub op: String,
    pub n: usize,
    pub k: usize,
    pub median_ms: f64,
    pub ratio_to_prev_size: Option<f64>,
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("op,n,k,median_ms,ratio_to_prev_size\n");
    for r in rows {
        let ratio = r.ratio_to_prev_size.map_or(String::new(), |x| format!("{x:.4}"));
        out.push_str(&format!("{},{},{},{:.4},{}\n", r.op, r.n, r.k, r.median_ms, ratio));
    }
    out
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    samples[samples.len() / 2]
}

/// Median-of-reps wall time per size. The benchmark runs the real
/// (orthogonal) field single-threaded so timings stay clean; scaling is
/// identical for the complex field up to a constant.
pub fn bench(op: BenchOp, sizes: &[usize], k: usize, reps: usize) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() || reps == 0 {
        return Err(Error::Config("bench needs at least one size and one rep".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("bench sizes must be sorted strictly ascending".into()));
    }
    let mut rows: Vec<BenchRow> = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if k > n {
            return Err(Error::Config(format!("rank {k} exceeds size {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0xB5EC ^ n as u64);
        // Block-diagonal rotations are as unitary as Haar for timing and
        // cost O(n) to build (Haar setup would dwarf the op at n = 2048).
        let scheme = if n % 2 == 0 { InitScheme::Henaff } else { InitScheme::Haar };
        let u = init_matrix::<f64>(n, scheme, &mut rng)?;
        let factor = LowRankFactor::new(
            DenseMatrix::<f64>::standard_normal(n, k, &mut rng),
            DenseMatrix::<f64>::standard_normal(n, k, &mut rng),
        )?;
        // Full-rank, well-conditioned input for the polar projection.
        let perturbed = {
            let mut m = u.clone();
            DenseMatrix::gemm_into(
                1e-3,
                factor.left(),
                &factor.right().adjoint(),
                1.0,
                &mut m,
            );
            m
        };
        let mut samples = Vec::with_capacity(reps);
        for _ in 0..reps {
            let t0 = Instant::now();
            match op {
                BenchOp::UpdateD => {
                    let out = direct_step(&u, &factor, 1e-3)?;
                    std::hint::black_box(&out);
                }
                BenchOp::UpdateT => {
                    let out = tangent_step(&u, &factor, 1e-3)?;
                    std::hint::black_box(&out);
                }
                BenchOp::PolarDense => {
                    let out = polar_project_dense(&perturbed)?;
                    std::hint::black_box(&out);
                }
            }
            samples.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        let med = median(&mut samples);
        let ratio = rows.last().map(|prev: &BenchRow| med / prev.median_ms);
        rows.push(BenchRow { op: op.to_string(), n, k, median_ms: med, ratio_to_prev_size: ratio });
    }
    Ok(rows)
}
