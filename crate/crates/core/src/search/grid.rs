use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One change vector per separation layer, stored as integer multiples of the
/// grid step so every coordinate lies exactly on the grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChangeProposal {
    steps: Vec<Vec<i64>>,
}

impl ChangeProposal {
    pub fn origin(widths: &[usize]) -> Self {
        Self {
            steps: widths.iter().map(|&w| vec![0; w]).collect(),
        }
    }

    pub fn from_steps(steps: Vec<Vec<i64>>) -> Self {
        Self { steps }
    }

    pub fn steps(&self) -> &[Vec<i64>] {
        &self.steps
    }

    pub fn layer(&self, l: usize) -> &[i64] {
        &self.steps[l]
    }

    pub fn num_layers(&self) -> usize {
        self.steps.len()
    }

    pub fn is_origin(&self) -> bool {
        self.steps.iter().flatten().all(|&s| s == 0)
    }

    pub fn with_layer(&self, l: usize, steps: Vec<i64>) -> Self {
        let mut p = self.clone();
        p.steps[l] = steps;
        p
    }

    /// Moves coordinate `coord` of layer `l` by `dir` grid steps.
    pub fn shifted(&self, l: usize, coord: usize, dir: i64) -> Self {
        let mut p = self.clone();
        p.steps[l][coord] += dir;
        p
    }
}

/// A single move on one separation layer's grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Stay,
    Step { coord: usize, dir: i64 },
}

impl Move {
    pub fn apply(&self, p: &ChangeProposal, layer: usize) -> ChangeProposal {
        match *self {
            Move::Stay => p.clone(),
            Move::Step { coord, dir } => p.shifted(layer, coord, dir),
        }
    }
}

/// The lattice of change vectors with coordinates in `epsilon * Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    epsilon: f64,
    widths: Vec<usize>,
}

impl Grid {
    pub fn new(epsilon: f64, widths: Vec<usize>) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "grid step must be positive, got {epsilon}"
            )));
        }
        Ok(Self { epsilon, widths })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len()
    }

    pub fn dimension(&self) -> usize {
        self.widths.iter().sum()
    }

    pub fn origin(&self) -> ChangeProposal {
        ChangeProposal::origin(&self.widths)
    }

    pub fn value(&self, step: i64) -> f64 {
        step as f64 * self.epsilon
    }

    pub fn layer_coords(&self, p: &ChangeProposal, l: usize) -> Vec<f64> {
        p.layer(l).iter().map(|&s| self.value(s)).collect()
    }

    pub fn coords(&self, p: &ChangeProposal) -> Vec<Vec<f64>> {
        (0..p.num_layers()).map(|l| self.layer_coords(p, l)).collect()
    }

    /// Whether every entry of `v` is an integer multiple of the step (to 1e-9).
    pub fn contains(&self, v: &[f64]) -> bool {
        v.iter().all(|&x| {
            let k = (x / self.epsilon).round();
            (x - k * self.epsilon).abs() <= 1e-9
        })
    }

    /// Points at L1 distance `epsilon` from `p`, restricted to layer `block`
    /// when given. Order: layer, coordinate, then `+epsilon` before `-epsilon`.
    pub fn neighbors(&self, p: &ChangeProposal, block: Option<usize>) -> Vec<ChangeProposal> {
        let layers: Vec<usize> = match block {
            Some(l) => vec![l],
            None => (0..self.widths.len()).collect(),
        };
        let mut out = Vec::new();
        for l in layers {
            for c in 0..self.widths[l] {
                out.push(p.shifted(l, c, 1));
                out.push(p.shifted(l, c, -1));
            }
        }
        out
    }

    /// The `2 s + 1` moves on layer `l`: stay, then `+/-` per coordinate.
    pub fn moves(&self, l: usize) -> Vec<Move> {
        let mut out = vec![Move::Stay];
        for coord in 0..self.widths[l] {
            out.push(Move::Step { coord, dir: 1 });
            out.push(Move::Step { coord, dir: -1 });
        }
        out
    }
}
