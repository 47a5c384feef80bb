//! Per-point output constraints `A y <= b` and the encodings that turn
//! classification and exact-value requirements into such systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{relu, Network};

/// Absolute slack allowed when checking a constraint row.
pub const SATISFACTION_TOL: f64 = 1e-7;

pub const DEFAULT_MARGIN: f64 = 0.1;

/// Rows `a_i . y <= b_i` over a network's output vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearSystem {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl LinearSystem {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Parse {
                field: "b".into(),
                message: format!("{} rows in A but {} entries in b", a.len(), b.len()),
            });
        }
        Ok(Self { a, b })
    }

    pub fn num_rows(&self) -> usize {
        self.a.len()
    }

    /// Column count shared by all rows, if any row exists.
    pub fn num_cols(&self) -> Option<usize> {
        self.a.first().map(Vec::len)
    }

    pub fn check_columns(&self, expected: usize) -> Result<()> {
        if let Some(bad) = self.a.iter().find(|r| r.len() != expected) {
            return Err(Error::ConstraintShape {
                expected,
                actual: bad.len(),
            });
        }
        Ok(())
    }

    /// Largest violation `max_i (a_i . y - b_i)`, or `-inf` for an empty system.
    pub fn max_violation(&self, y: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, &bi)| row.iter().zip(y).map(|(a, v)| a * v).sum::<f64>() - bi)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_satisfied(&self, y: &[f64], tol: f64) -> bool {
        self.max_violation(y) <= tol
    }
}

/// Goal for a network output on one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OutputGoal {
    /// Strict classification as `label` (1-based) with the given margin.
    Label { label: usize, margin: f64 },
    Linear(LinearSystem),
}

impl OutputGoal {
    pub fn label(label: usize, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::InvalidMargin(margin));
        }
        Ok(OutputGoal::Label { label, margin })
    }

    pub fn to_system(&self, num_outputs: usize) -> Result<LinearSystem> {
        match self {
            OutputGoal::Label { label, margin } => {
                encode_classification(*label, num_outputs, *margin)
            }
            OutputGoal::Linear(sys) => {
                sys.check_columns(num_outputs)?;
                Ok(sys.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    pub x: Vec<f64>,
    pub goal: OutputGoal,
}

impl PointSpec {
    pub fn new(x: Vec<f64>, goal: OutputGoal) -> Self {
        Self { x, goal }
    }

    pub fn label(x: Vec<f64>, label: usize, margin: f64) -> Result<Self> {
        Ok(Self::new(x, OutputGoal::label(label, margin)?))
    }

    /// Checks consistency against a network's input and output widths.
    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.x.len() != net.input_dim() {
            return Err(Error::InputShape {
                expected: net.input_dim(),
                actual: self.x.len(),
            });
        }
        self.goal.to_system(net.output_dim()).map(|_| ())
    }
}

/// Desired post-activation values of a separation layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactOutputGoal {
    target: Vec<f64>,
}

impl ExactOutputGoal {
    pub fn new(target: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = target
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidTarget { index, value });
        }
        Ok(Self { target })
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Whether `ReLU(z)` hits the target within `tol`, for pre-activation `z`.
    pub fn is_met(&self, pre_activation: &[f64], tol: f64) -> bool {
        pre_activation.len() == self.target.len()
            && pre_activation
                .iter()
                .zip(&self.target)
                .all(|(&z, &t)| (relu(z) - t).abs() <= tol)
    }
}

/// Rows `y_j - y_label <= -margin` for every `j != label`.
pub fn encode_classification(label: usize, num_outputs: usize, margin: f64) -> Result<LinearSystem> {
    if label == 0 || label > num_outputs {
        return Err(Error::LabelOutOfRange { label, num_outputs });
    }
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::InvalidMargin(margin));
    }
    let target = label - 1;
    let mut a = Vec::with_capacity(num_outputs - 1);
    for j in (0..num_outputs).filter(|&j| j != target) {
        let mut row = vec![0.0; num_outputs];
        row[j] = 1.0;
        row[target] = -1.0;
        a.push(row);
    }
    let b = vec![-margin; a.len()];
    Ok(LinearSystem { a, b })
}

/// Linearizes `ReLU(z) = t` over the pre-activation `z`: equality for positive
/// entries, `z_j <= 0` for zero entries.
pub fn encode_exact_output(goal: &ExactOutputGoal) -> LinearSystem {
    let d = goal.target.len();
    let mut sys = LinearSystem::default();
    for (j, &t) in goal.target.iter().enumerate() {
        let mut unit = vec![0.0; d];
        unit[j] = 1.0;
        if t > 0.0 {
            sys.a.push(unit.clone());
            sys.b.push(t);
            sys.a.push(unit.iter().map(|v| -v).collect());
            sys.b.push(-t);
        } else {
            sys.a.push(unit);
            sys.b.push(0.0);
        }
    }
    sys
}

pub fn check_satisfied(net: &Network, spec: &PointSpec) -> Result<bool> {
    let sys = spec.goal.to_system(net.output_dim())?;
    let y = net.output(&spec.x)?;
    Ok(sys.is_satisfied(&y, SATISFACTION_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{toy_network, toy_single_layer_fix, toy_two_layer_fix};
    use crate::network::argmax;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn classification_two_outputs() {
        let sys = encode_classification(2, 2, 0.1).unwrap();
        assert_eq!(sys.a, vec![vec![1.0, -1.0]]);
        assert_eq!(sys.b, vec![-0.1]);
    }

    #[test]
    fn classification_single_output_is_vacuous() {
        let sys = encode_classification(1, 1, 0.1).unwrap();
        assert_eq!(sys.num_rows(), 0);
        assert!(sys.is_satisfied(&[-3.0], 0.0));
    }

    #[test]
    fn classification_errors() {
        assert!(matches!(
            encode_classification(0, 3, 0.1),
            Err(Error::LabelOutOfRange { .. })
        ));
        assert!(matches!(
            encode_classification(4, 3, 0.1),
            Err(Error::LabelOutOfRange { .. })
        ));
        assert!(matches!(
            encode_classification(1, 3, 0.0),
            Err(Error::InvalidMargin(_))
        ));
    }

    // Every permutation of a fixed set of distinct values: the system must accept
    // exactly those orderings that put a value at least `margin` above the rest
    // at the label position.
    #[test]
    fn classification_four_outputs_all_orderings() {
        let sys = encode_classification(3, 4, 0.05).unwrap();
        assert_eq!(sys.num_rows(), 3);
        let values = [0.3, -1.2, 0.9, 0.31];
        let mut perm = [0usize, 1, 2, 3];
        let mut seen = 0;
        loop {
            let y: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
            let top = argmax(&y);
            let gap = y
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != 2)
                .map(|(_, &v)| y[2] - v)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(sys.is_satisfied(&y, 0.0), top == 2 && gap >= 0.05, "{y:?}");
            seen += 1;
            if !next_permutation(&mut perm) {
                break;
            }
        }
        assert_eq!(seen, 24);
    }

    fn next_permutation(p: &mut [usize]) -> bool {
        let Some(i) = (0..p.len() - 1).rev().find(|&i| p[i] < p[i + 1]) else {
            return false;
        };
        let j = (i + 1..p.len()).rev().find(|&j| p[j] > p[i]).unwrap();
        p.swap(i, j);
        p[i + 1..].reverse();
        true
    }

    #[test]
    fn classification_soundness_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let sys = encode_classification(3, 5, 0.1).unwrap();
        let mut accepted = 0;
        while accepted < 1000 {
            let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if sys.is_satisfied(&y, 0.0) {
                assert_eq!(argmax(&y), 2);
                accepted += 1;
            }
        }
    }

    #[test]
    fn exact_output_rows() {
        let sys = encode_exact_output(&ExactOutputGoal::new(vec![0.0, 100.0]).unwrap());
        assert_eq!(sys.a, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]);
        assert_eq!(sys.b, vec![0.0, 100.0, -100.0]);

        let zeros = encode_exact_output(&ExactOutputGoal::new(vec![0.0; 4]).unwrap());
        assert_eq!(zeros.num_rows(), 4);
        assert!(zeros.b.iter().all(|&b| b == 0.0));

        let three = encode_exact_output(&ExactOutputGoal::new(vec![3.0]).unwrap());
        assert!(three.is_satisfied(&[3.0], 0.0));
        assert!(!three.is_satisfied(&[2.999], 0.0));
    }

    #[test]
    fn exact_output_rejects_negative() {
        assert_eq!(
            ExactOutputGoal::new(vec![1.0, -0.5]),
            Err(Error::InvalidTarget {
                index: 1,
                value: -0.5
            })
        );
    }

    #[test]
    fn toy_satisfaction() {
        let spec = PointSpec::label(vec![1.0], 2, 0.1).unwrap();
        assert!(!check_satisfied(&toy_network(), &spec).unwrap());
        assert!(check_satisfied(&toy_two_layer_fix(), &spec).unwrap());
        assert!(check_satisfied(&toy_single_layer_fix(), &spec).unwrap());
    }

    #[test]
    fn single_layer_fix_output_by_hand() {
        // v4 = [10, 1]; row 1 weights become [-1.21, 1], row 2 stays [-1, -1].
        let y = toy_single_layer_fix().output(&[1.0]).unwrap();
        assert!((y[0] - (10.0 * -1.21 + 1.0)).abs() < 1e-9);
        assert!((y[1] - (-11.0)).abs() < 1e-9);
    }

    #[test]
    fn linear_goal_column_check() {
        let sys = LinearSystem::new(vec![vec![1.0, 0.0, 0.0]], vec![1.0]).unwrap();
        let spec = PointSpec::new(vec![1.0], OutputGoal::Linear(sys));
        assert!(matches!(
            spec.validate(&toy_network()),
            Err(Error::ConstraintShape { .. })
        ));
    }

    proptest! {
        #[test]
        fn exact_output_soundness(
            target in proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], 1..6),
            noise in proptest::collection::vec(-3.0f64..3.0, 6),
        ) {
            let goal = ExactOutputGoal::new(target.clone()).unwrap();
            let sys = encode_exact_output(&goal);
            // Candidate pre-activations: the target itself, plus arbitrary
            // non-positive values on zero entries.
            let z: Vec<f64> = target
                .iter()
                .zip(&noise)
                .map(|(&t, &n)| if t == 0.0 { -n.abs() } else { t })
                .collect();
            prop_assert!(sys.is_satisfied(&z, 0.0));
            prop_assert!(goal.is_met(&z, 0.0));
            // Perturbed vectors that satisfy the system must still hit the target.
            let perturbed: Vec<f64> = z.iter().zip(&noise).map(|(v, n)| v + n).collect();
            if sys.is_satisfied(&perturbed, 0.0) {
                prop_assert!(goal.is_met(&perturbed, 0.0));
            }
        }
    }
}
