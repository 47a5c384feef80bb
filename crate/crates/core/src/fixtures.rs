//! Reference networks and seeded generators shared by tests, benches, and
//! the acceptance suite.

use rand::Rng;

use crate::constraints::PointSpec;
use crate::matrix::Matrix;
use crate::network::Network;

fn m(rows: &[&[f64]]) -> Matrix {
    Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

/// The five-layer running example: `[1] -> [11, -11]`.
pub fn toy_network() -> Network {
    Network::new(
        vec![1, 2, 2, 2, 2],
        vec![
            m(&[&[1.0], &[1.0]]),
            m(&[&[0.01, 0.0], &[0.0, 100.0]]),
            m(&[&[1000.0, 0.0], &[0.0, 0.01]]),
            m(&[&[1.0, 1.0], &[-1.0, -1.0]]),
        ],
    )
    .unwrap()
}

/// The toy network with the output edge `v4[1] -> v5[1]` moved from 1 to -1.21.
pub fn toy_single_layer_fix() -> Network {
    let mut w = toy_network().weights().to_vec();
    w[3] = m(&[&[-1.21, 1.0], &[-1.0, -1.0]]);
    Network::new(vec![1, 2, 2, 2, 2], w).unwrap()
}

/// The two-layer fix: edge `v2[1] -> v3[1]` zeroed and `v4[2] -> v5[2]` set to 1.1.
pub fn toy_two_layer_fix() -> Network {
    let mut w = toy_network().weights().to_vec();
    w[1] = m(&[&[0.0, 0.0], &[0.0, 100.0]]);
    w[3] = m(&[&[1.0, 1.0], &[-1.0, 1.1]]);
    Network::new(vec![1, 2, 2, 2, 2], w).unwrap()
}

/// `x = [1]` must be classified as label 2 with margin 0.1.
pub fn toy_point() -> PointSpec {
    PointSpec::label(vec![1.0], 2, 0.1).unwrap()
}

/// Bias-free network with weights uniform in `[-1, 1]`.
pub fn random_network<R: Rng>(rng: &mut R, sizes: &[usize]) -> Network {
    let weights = sizes
        .windows(2)
        .map(|w| {
            let data = (0..w[0] * w[1]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Matrix::from_row_major(w[1], w[0], data).unwrap()
        })
        .collect();
    Network::new(sizes.to_vec(), weights).unwrap()
}

/// A generated repair job.
#[derive(Debug, Clone)]
pub struct GeneratedJob {
    pub network: Network,
    pub points: Vec<PointSpec>,
    pub separation: Vec<usize>,
}

/// Random job: `num_layers` layers with hidden widths in `2..=max_width`,
/// `num_points` inputs in `[0, 1]` whose goals flip them away from the current
/// prediction, and `num_seams` separation layers spread over the interior.
///
/// Weights are scaled by `1/sqrt(fan_in)` and hidden layers get a small
/// positive bias so activations neither vanish nor explode with depth.
pub fn generated_job<R: Rng>(
    rng: &mut R,
    num_layers: usize,
    max_width: usize,
    num_outputs: usize,
    num_points: usize,
    num_seams: usize,
) -> GeneratedJob {
    assert!(num_layers >= num_seams + 2);
    let input = rng.gen_range(2..=max_width);
    let mut sizes = vec![input];
    for _ in 0..num_layers - 2 {
        sizes.push(rng.gen_range(2..=max_width));
    }
    sizes.push(num_outputs);

    let last = sizes.len() - 2;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (i, w) in sizes.windows(2).enumerate() {
        let scale = 1.5 / (w[0] as f64).sqrt();
        let data = (0..w[0] * w[1])
            .map(|_| rng.gen_range(-1.0..1.0) * scale)
            .collect();
        weights.push(Matrix::from_row_major(w[1], w[0], data).unwrap());
        let b = if i == last {
            vec![0.0; w[1]]
        } else {
            (0..w[1]).map(|_| rng.gen_range(0.0..0.3)).collect()
        };
        biases.push(b);
    }
    let network = Network::with_biases(sizes.clone(), weights, biases).unwrap();

    let points = (0..num_points)
        .map(|_| {
            let x: Vec<f64> = (0..input).map(|_| rng.gen_range(0.0..1.0)).collect();
            let current = network.classify(&x).unwrap();
            let mut label = rng.gen_range(1..num_outputs);
            if label >= current {
                label += 1;
            }
            PointSpec::label(x, label, 0.1).unwrap()
        })
        .collect();

    // Spread over the interior layers 2..=n-1, strictly increasing.
    let interior = num_layers - 2;
    let separation = (1..=num_seams)
        .map(|j| 1 + (j * interior).div_ceil(num_seams + 1).max(j))
        .collect::<Vec<_>>();
    debug_assert!(separation.windows(2).all(|w| w[0] < w[1]));

    GeneratedJob {
        network,
        points,
        separation,
    }
}
