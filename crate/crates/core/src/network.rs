//! Feed-forward ReLU networks: evaluation, splitting along separation layers,
//! and re-combination.
//!
//! Layers are numbered from 1 (the input layer) to `n` (the output layer).
//! Weight matrix `i` (0-based) maps layer `i + 1` to layer `i + 2`. ReLU is
//! applied after every weighted layer except the last.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub fn relu(v: f64) -> f64 {
    v.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

impl Network {
    /// Bias-free network, the plain `v_i = ReLU(W_i v_{i-1})` model.
    pub fn new(layer_sizes: Vec<usize>, weights: Vec<Matrix>) -> Result<Self> {
        let biases = layer_sizes.iter().skip(1).map(|&s| vec![0.0; s]).collect();
        Self::with_biases(layer_sizes, weights, biases)
    }

    pub fn with_biases(
        layer_sizes: Vec<usize>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidNetwork(format!(
                "need at least 2 layers, got {}",
                layer_sizes.len()
            )));
        }
        if let Some(i) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidNetwork(format!("layer {} has size 0", i + 1)));
        }
        if weights.len() != layer_sizes.len() - 1 {
            return Err(Error::InvalidNetwork(format!(
                "{} layers need {} weight matrices, got {}",
                layer_sizes.len(),
                layer_sizes.len() - 1,
                weights.len()
            )));
        }
        if biases.len() != weights.len() {
            return Err(Error::InvalidNetwork(format!(
                "expected {} bias vectors, got {}",
                weights.len(),
                biases.len()
            )));
        }
        for (i, w) in weights.iter().enumerate() {
            let expected = (layer_sizes[i + 1], layer_sizes[i]);
            if w.shape() != expected {
                return Err(Error::InvalidNetwork(format!(
                    "weight matrix {i} has shape {}x{}, expected {}x{}",
                    w.rows(),
                    w.cols(),
                    expected.0,
                    expected.1
                )));
            }
            if !w.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "weight matrix {i} has non-finite entries"
                )));
            }
            if biases[i].len() != layer_sizes[i + 1] {
                return Err(Error::InvalidNetwork(format!(
                    "bias vector {i} has length {}, expected {}",
                    biases[i].len(),
                    layer_sizes[i + 1]
                )));
            }
            if biases[i].iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidNetwork(format!(
                    "bias vector {i} has non-finite entries"
                )));
            }
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn has_biases(&self) -> bool {
        self.biases.iter().flatten().any(|&b| b != 0.0)
    }

    /// Full activation trace on `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<ActivationTrace> {
        self.check_input(x)?;
        let last = self.weights.len() - 1;
        let mut layers = Vec::with_capacity(self.num_layers());
        layers.push(x.to_vec());
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.mul_vec(layers.last().unwrap());
            for (zj, bj) in z.iter_mut().zip(b) {
                *zj += bj;
            }
            if i != last {
                z.iter_mut().for_each(|v| *v = relu(*v));
            }
            layers.push(z);
        }
        Ok(ActivationTrace { layers })
    }

    pub fn output(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(x)?.layers.pop().unwrap())
    }

    /// Predicted label, 1-based. Ties go to the lowest index.
    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.output(x)?) + 1)
    }

    /// Returns a copy with `delta` added to weight matrix `layer` (0-based).
    pub fn apply_delta(&self, layer: usize, delta: &Matrix) -> Result<Network> {
        let Some(w) = self.weights.get(layer) else {
            return Err(Error::InvalidNetwork(format!(
                "weight index {layer} out of range (network has {})",
                self.weights.len()
            )));
        };
        let updated = w.add(delta)?;
        let mut net = self.clone();
        net.weights[layer] = updated;
        Ok(net)
    }

    /// Splits along the given separation layers (1-based, strictly interior,
    /// strictly increasing).
    pub fn split(&self, separation: &[usize]) -> Result<SubnetworkChain> {
        let n = self.num_layers();
        let mut prev = 1;
        for &i in separation {
            if i <= 1 || i >= n {
                return Err(Error::InvalidSplit(format!(
                    "separation index {i} not in 2..={}",
                    n - 1
                )));
            }
            if i <= prev {
                return Err(Error::InvalidSplit(format!(
                    "separation indices must be strictly increasing, got {separation:?}"
                )));
            }
            prev = i;
        }
        let mut bounds = vec![1];
        bounds.extend_from_slice(separation);
        bounds.push(n);
        let subnets = bounds
            .windows(2)
            .map(|w| self.slice_layers(w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(SubnetworkChain { subnets })
    }

    /// Sub-network over layers `first..=last` (1-based).
    fn slice_layers(&self, first: usize, last: usize) -> Result<Network> {
        Network::with_biases(
            self.layer_sizes[first - 1..last].to_vec(),
            self.weights[first - 1..last - 1].to_vec(),
            self.biases[first - 1..last - 1].to_vec(),
        )
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::InputShape {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// Index of the largest entry; the first one wins on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Per-layer assignments `v_1..v_n` of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub layers: Vec<Vec<f64>>,
}

impl ActivationTrace {
    /// Assignment of layer `i` (1-based).
    pub fn layer(&self, i: usize) -> &[f64] {
        &self.layers[i - 1]
    }

    pub fn output(&self) -> &[f64] {
        self.layers.last().unwrap()
    }
}

/// Consecutive sub-networks sharing their seam layers.
#[derive(Debug, Clone, PartialEq)]
pub struct SubnetworkChain {
    subnets: Vec<Network>,
}

impl SubnetworkChain {
    /// Wraps sub-networks without validating seams; `combine` does that.
    pub fn from_subnets(subnets: Vec<Network>) -> Self {
        Self { subnets }
    }

    pub fn subnets(&self) -> &[Network] {
        &self.subnets
    }

    pub fn len(&self) -> usize {
        self.subnets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subnets.is_empty()
    }

    pub fn replace(&mut self, index: usize, subnet: Network) {
        self.subnets[index] = subnet;
    }

    /// Separation layer indices (1-based in the combined network).
    pub fn separation_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut at = 1;
        for s in &self.subnets[..self.subnets.len().saturating_sub(1)] {
            at += s.num_layers() - 1;
            out.push(at);
        }
        out
    }

    /// Weight index (0-based, combined network) of each sub-network's final matrix.
    pub fn final_weight_indices(&self) -> Vec<usize> {
        let mut at = 0;
        self.subnets
            .iter()
            .map(|s| {
                at += s.weights.len();
                at - 1
            })
            .collect()
    }

    /// Sequential evaluation with ReLU applied at every seam.
    pub fn output(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut v = x.to_vec();
        let last = self.subnets.len() - 1;
        for (j, s) in self.subnets.iter().enumerate() {
            v = s.output(&v)?;
            if j != last {
                v.iter_mut().for_each(|e| *e = relu(*e));
            }
        }
        Ok(v)
    }

    pub fn combine(&self) -> Result<Network> {
        let Some(first) = self.subnets.first() else {
            return Err(Error::InvalidChain("empty chain".into()));
        };
        let mut sizes = first.layer_sizes.clone();
        let mut weights = first.weights.clone();
        let mut biases = first.biases.clone();
        for (j, s) in self.subnets.iter().enumerate().skip(1) {
            let seam = *sizes.last().unwrap();
            if s.input_dim() != seam {
                return Err(Error::InvalidChain(format!(
                    "sub-network {j} takes {} inputs but its predecessor emits {seam}",
                    s.input_dim()
                )));
            }
            sizes.extend_from_slice(&s.layer_sizes[1..]);
            weights.extend(s.weights.iter().cloned());
            biases.extend(s.biases.iter().cloned());
        }
        Network::with_biases(sizes, weights, biases)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_network, toy_network};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn toy_trace_matches_running_example() {
        let t = toy_network().evaluate(&[1.0]).unwrap();
        assert!(close(t.layer(2), &[1.0, 1.0], 1e-12));
        assert!(close(t.layer(3), &[0.01, 100.0], 1e-12));
        assert!(close(t.layer(4), &[10.0, 1.0], 1e-12));
        assert!(close(t.output(), &[11.0, -11.0], 1e-12));
    }

    #[test]
    fn zero_input_propagates_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = random_network(&mut rng, &[3, 4, 4, 2]);
        let t = net.evaluate(&[0.0; 3]).unwrap();
        for l in &t.layers {
            assert!(l.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn negative_weights_kill_positive_inputs() {
        let w1 = Matrix::from_rows(&[vec![-1.0, -0.5], vec![-2.0, -0.1], vec![-0.3, -0.3]]).unwrap();
        let w2 = Matrix::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap();
        let net = Network::new(vec![2, 3, 1], vec![w1, w2]).unwrap();
        let t = net.evaluate(&[0.7, 2.0]).unwrap();
        assert_eq!(t.layer(2), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn input_shape_error() {
        assert_eq!(
            toy_network().evaluate(&[1.0, 2.0]),
            Err(Error::InputShape {
                expected: 1,
                actual: 2
            })
        );
    }

    #[test]
    fn invalid_shapes_rejected() {
        let w = Matrix::zeros(2, 2);
        assert!(Network::new(vec![1, 2], vec![w.clone()]).is_err());
        assert!(Network::new(vec![2], vec![]).is_err());
        assert!(Network::new(vec![2, 2, 2], vec![w]).is_err());
    }

    #[test]
    fn classify_toy_and_ties() {
        assert_eq!(toy_network().classify(&[1.0]).unwrap(), 1);
        let w = Matrix::from_rows(&[vec![5.0], vec![5.0]]).unwrap();
        let constant = Network::new(vec![1, 2], vec![w]).unwrap();
        assert_eq!(constant.classify(&[1.0]).unwrap(), 1);
    }

    #[test]
    fn split_toy_at_layer_three() {
        let chain = toy_network().split(&[3]).unwrap();
        assert_eq!(chain.len(), 2);
        assert_eq!(chain.subnets()[0].layer_sizes(), &[1, 2, 2]);
        assert_eq!(chain.subnets()[1].layer_sizes(), &[2, 2, 2]);
        assert_eq!(chain.subnets()[0].weights().len(), 2);
        assert_eq!(chain.subnets()[1].weights().len(), 2);
        assert_eq!(chain.separation_indices(), vec![3]);
        assert_eq!(chain.final_weight_indices(), vec![1, 3]);
        assert_eq!(chain.combine().unwrap(), toy_network());
    }

    #[test]
    fn empty_split_is_identity() {
        let chain = toy_network().split(&[]).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.subnets()[0], toy_network());
    }

    #[test]
    fn split_five_layers_two_seams() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = random_network(&mut rng, &[3, 4, 5, 4, 2]);
        let chain = net.split(&[2, 4]).unwrap();
        let counts: Vec<_> = chain.subnets().iter().map(|s| s.weights().len()).collect();
        assert_eq!(counts, vec![1, 2, 1]);
        let back = chain.combine().unwrap();
        for (a, b) in back.weights().iter().zip(net.weights()) {
            assert_eq!(a.as_slice(), b.as_slice());
        }
    }

    #[test]
    fn split_rejects_bad_indices() {
        let net = toy_network();
        for bad in [&[1usize][..], &[5], &[3, 3], &[4, 3], &[0]] {
            assert!(matches!(net.split(bad), Err(Error::InvalidSplit(_))), "{bad:?}");
        }
    }

    #[test]
    fn combine_rejects_seam_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_network(&mut rng, &[2, 3]);
        let b = random_network(&mut rng, &[4, 2]);
        let chain = SubnetworkChain::from_subnets(vec![a, b]);
        assert!(matches!(chain.combine(), Err(Error::InvalidChain(_))));
    }

    #[test]
    fn apply_delta_single_entry_gives_single_layer_fix() {
        let net = toy_network();
        let mut d = Matrix::zeros(2, 2);
        d.set(0, 0, -2.21);
        let fixed = net.apply_delta(3, &d).unwrap();
        assert!((fixed.weights()[3].get(0, 0) - (-1.21)).abs() < 1e-12);
        assert!(close(&fixed.output(&[1.0]).unwrap(), &[-11.1, -11.0], 1e-9));
        assert_eq!(fixed.layer_sizes(), net.layer_sizes());
    }

    #[test]
    fn apply_delta_zero_and_additivity() {
        let net = toy_network();
        assert_eq!(net.apply_delta(1, &Matrix::zeros(2, 2)).unwrap(), net);
        let d1 = Matrix::from_rows(&[vec![0.5, -0.25], vec![1.0, 0.0]]).unwrap();
        let d2 = Matrix::from_rows(&[vec![0.25, 0.5], vec![-2.0, 4.0]]).unwrap();
        let twice = net.apply_delta(1, &d1).unwrap().apply_delta(1, &d2).unwrap();
        let once = net.apply_delta(1, &d1.add(&d2).unwrap()).unwrap();
        assert_eq!(twice, once);
        let wrong = Matrix::zeros(3, 2);
        assert!(net.apply_delta(1, &wrong).is_err());
    }

    fn arb_net_and_split() -> impl Strategy<Value = (Network, Vec<usize>, Vec<f64>)> {
        (3usize..8, any::<u64>()).prop_flat_map(|(n, seed)| {
            proptest::collection::vec(1usize..6, n).prop_flat_map(move |sizes| {
                let interior: Vec<usize> = (2..n).collect();
                let k = interior.len();
                (
                    Just(sizes.clone()),
                    proptest::sample::subsequence(interior, 0..=k),
                    proptest::collection::vec(-3.0f64..3.0, sizes[0]),
                )
                    .prop_map(move |(sizes, sep, x)| {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        (random_network(&mut rng, &sizes), sep, x)
                    })
            })
        })
    }

    proptest! {
        #[test]
        fn split_combine_round_trip((net, sep, _x) in arb_net_and_split()) {
            let chain = net.split(&sep).unwrap();
            prop_assert_eq!(chain.separation_indices(), sep);
            prop_assert_eq!(chain.combine().unwrap(), net);
        }

        #[test]
        fn chain_composition_matches_forward((net, sep, x) in arb_net_and_split()) {
            let chain = net.split(&sep).unwrap();
            let direct = net.output(&x).unwrap();
            let staged = chain.output(&x).unwrap();
            prop_assert!(close(&direct, &staged, 1e-9));
        }

        #[test]
        fn apply_delta_keeps_layer_sizes((net, _sep, _x) in arb_net_and_split(), pick in 0usize..8, v in -2.0f64..2.0) {
            let layer = pick % net.weights().len();
            let (r, c) = net.weights()[layer].shape();
            let delta = Matrix::from_row_major(r, c, vec![v; r * c]).unwrap();
            let changed = net.apply_delta(layer, &delta).unwrap();
            prop_assert_eq!(changed.layer_sizes(), net.layer_sizes());
        }

        #[test]
        fn hidden_layers_non_negative((net, _sep, x) in arb_net_and_split()) {
            let t = net.evaluate(&x).unwrap();
            let n = t.layers.len();
            for l in &t.layers[1..n - 1] {
                prop_assert!(l.iter().all(|&v| v >= 0.0));
            }
        }
    }
}
