//! Single-layer modification: the minimal change to one weight matrix of a
//! sub-network that makes every query point meet its goal.
//!
//! For the final matrix `W` the prefix of the sub-network is untouched, so each
//! point contributes a fixed feature vector `u` and the pre-activation output
//! `(W + D) u + b` is linear in `D`. Goals become LP rows over the flattened `D`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::constraints::{encode_exact_output, ExactOutputGoal, OutputGoal, SATISFACTION_TOL};
use crate::error::{Error, Result};
use crate::lp::{solve_min_norm, LinearProgram, Norm};
use crate::matrix::Matrix;
use crate::network::Network;

pub const DEFAULT_BACKEND: &str = "lp-final";

/// What a sub-network must produce on one input.
#[derive(Debug, Clone, PartialEq)]
pub enum SubnetGoal {
    /// Exact post-activation values at a separation layer.
    Exact(ExactOutputGoal),
    /// Classification or linear constraints on the network output.
    Output(OutputGoal),
}

impl SubnetGoal {
    /// Checks the goal against the sub-network's (pre-activation) output.
    pub fn is_met(&self, output: &[f64], tol: f64) -> Result<bool> {
        match self {
            SubnetGoal::Exact(g) => Ok(g.is_met(output, tol)),
            SubnetGoal::Output(g) => Ok(g.to_system(output.len())?.is_satisfied(output, tol)),
        }
    }

    fn rows(&self, num_outputs: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let sys = match self {
            SubnetGoal::Exact(g) => {
                if g.target().len() != num_outputs {
                    return Err(Error::ConstraintShape {
                        expected: num_outputs,
                        actual: g.target().len(),
                    });
                }
                encode_exact_output(g)
            }
            SubnetGoal::Output(g) => g.to_system(num_outputs)?,
        };
        Ok((sys.a, sys.b))
    }
}

#[derive(Debug, Clone)]
pub struct SingleLayerQuery {
    pub subnet: Network,
    /// Weight index to modify; `None` means the final matrix.
    pub layer: Option<usize>,
    pub points: Vec<(Vec<f64>, SubnetGoal)>,
    pub norm: Norm,
}

impl SingleLayerQuery {
    pub fn final_layer(subnet: Network, points: Vec<(Vec<f64>, SubnetGoal)>, norm: Norm) -> Self {
        Self {
            subnet,
            layer: None,
            points,
            norm,
        }
    }

    pub fn modifiable_layer(&self) -> usize {
        self.layer.unwrap_or(self.subnet.weights().len() - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerStatus {
    Repaired,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SingleLayerAnswer {
    pub status: AnswerStatus,
    /// The modified sub-network (the original when infeasible).
    pub subnet: Network,
    /// Weight index the delta applies to.
    pub layer: usize,
    pub delta: Matrix,
    pub cost: f64,
}

impl SingleLayerAnswer {
    pub fn is_repaired(&self) -> bool {
        self.status == AnswerStatus::Repaired
    }
}

/// Builds the min-norm program over the final matrix's flattened delta.
pub fn build_final_layer_program(q: &SingleLayerQuery) -> Result<LinearProgram> {
    let last = q.subnet.weights().len() - 1;
    let layer = q.modifiable_layer();
    if layer != last {
        return Err(Error::UnsupportedLayer { layer, last });
    }
    let w = &q.subnet.weights()[last];
    let bias = &q.subnet.biases()[last];
    let (rows, cols) = w.shape();
    let mut lp = LinearProgram::new(rows * cols, q.norm);
    for (x, goal) in &q.points {
        let trace = q.subnet.evaluate(x)?;
        let u = trace.layer(q.subnet.num_layers() - 1);
        let base: Vec<f64> = w.mul_vec(u).iter().zip(bias).map(|(z, b)| z + b).collect();
        let (a, b) = goal.rows(rows)?;
        for (ai, bi) in a.iter().zip(&b) {
            let mut coeffs = vec![0.0; rows * cols];
            for (r, &ar) in ai.iter().enumerate() {
                if ar != 0.0 {
                    for (c, &uc) in u.iter().enumerate() {
                        coeffs[r * cols + c] += ar * uc;
                    }
                }
            }
            let offset: f64 = ai.iter().zip(&base).map(|(a, z)| a * z).sum();
            lp.add_row(coeffs, bi - offset)?;
        }
    }
    Ok(lp)
}

pub fn modify_final_layer(q: &SingleLayerQuery) -> Result<SingleLayerAnswer> {
    let lp = build_final_layer_program(q)?;
    let layer = q.modifiable_layer();
    let (rows, cols) = q.subnet.weights()[layer].shape();
    let sol = solve_min_norm(&lp)?;
    if !sol.is_optimal() {
        return Ok(SingleLayerAnswer {
            status: AnswerStatus::Infeasible,
            subnet: q.subnet.clone(),
            layer,
            delta: Matrix::zeros(rows, cols),
            cost: f64::INFINITY,
        });
    }
    let delta = Matrix::from_row_major(rows, cols, sol.delta)?;
    let subnet = if delta.is_zero() {
        q.subnet.clone()
    } else {
        q.subnet.apply_delta(layer, &delta)?
    };
    Ok(SingleLayerAnswer {
        status: AnswerStatus::Repaired,
        subnet,
        layer,
        delta,
        cost: sol.objective,
    })
}

/// Checks every goal of `q` against `subnet`'s outputs.
pub fn goals_met(subnet: &Network, q: &SingleLayerQuery) -> Result<bool> {
    for (x, goal) in &q.points {
        if !goal.is_met(&subnet.output(x)?, SATISFACTION_TOL)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A single-layer modification engine.
pub trait RepairBackend: Send + Sync {
    fn name(&self) -> &str;

    fn modify(&self, q: &SingleLayerQuery) -> Result<SingleLayerAnswer>;
}

/// Exact final-layer repair via linear programming.
#[derive(Debug, Default, Clone, Copy)]
pub struct LpFinalLayer;

impl RepairBackend for LpFinalLayer {
    fn name(&self) -> &str {
        DEFAULT_BACKEND
    }

    fn modify(&self, q: &SingleLayerQuery) -> Result<SingleLayerAnswer> {
        modify_final_layer(q)
    }
}

/// Named backends. `default()` registers `lp-final`.
#[derive(Clone)]
pub struct BackendRegistry {
    backends: BTreeMap<String, Arc<dyn RepairBackend>>,
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self {
            backends: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, backend: Arc<dyn RepairBackend>) {
        self.backends.insert(backend.name().to_string(), backend);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn RepairBackend>> {
        self.backends
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownBackend(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.backends.keys().map(String::as_str)
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(LpFinalLayer));
        r
    }
}

impl std::fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.backends.keys()).finish()
    }
}

pub fn backend_dispatch(
    q: &SingleLayerQuery,
    registry: &BackendRegistry,
    name: &str,
) -> Result<SingleLayerAnswer> {
    registry.get(name)?.modify(q)
}
