//! Workloads shared by the benchmarks.

use std::sync::Arc;

use netmend::fixtures::{generated_job, toy_network, toy_point, GeneratedJob};
use netmend::lp::{LinearProgram, Norm};
use netmend::search::JobContext;
use netmend::single_layer::LpFinalLayer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A feasible random min-norm program with `dim` variables and `rows` rows.
pub fn random_program(seed: u64, dim: usize, rows: usize, norm: Norm) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lp = LinearProgram::new(dim, norm);
    for _ in 0..rows {
        let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.iter().zip(&d0).map(|(x, y)| x * y).sum::<f64>() + rng.gen_range(0.0..0.2);
        lp.add_row(a, b).expect("finite row");
    }
    lp
}

pub fn toy_context(epsilon: f64) -> JobContext {
    JobContext::new(
        &toy_network(),
        &[toy_point()],
        &[3],
        epsilon,
        Norm::L1,
        Arc::new(LpFinalLayer),
    )
    .expect("toy job is valid")
}

pub fn generated(seed: u64, layers: usize, seams: usize) -> GeneratedJob {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generated_job(&mut rng, layers, 8, 3, 2, seams)
}

pub fn generated_context(job: &GeneratedJob, epsilon: f64) -> JobContext {
    JobContext::new(
        &job.network,
        &job.points,
        &job.separation,
        epsilon,
        Norm::L1,
        Arc::new(LpFinalLayer),
    )
    .expect("generated job is valid")
}
