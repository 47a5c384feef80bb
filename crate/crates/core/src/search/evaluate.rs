//! Scoring a change proposal: one single-layer query per sub-network.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constraints::{check_satisfied, ExactOutputGoal, PointSpec};
use crate::error::{Error, Result};
use crate::lp::Norm;
use crate::matrix::Matrix;
use crate::network::{Network, SubnetworkChain};
use crate::search::grid::{ChangeProposal, Grid};
use crate::single_layer::{RepairBackend, SingleLayerQuery, SubnetGoal};

/// Proposed assignments this far below zero are rejected; smaller dips are
/// float noise and clamp to zero.
const NEGATIVE_TOL: f64 = 1e-12;

/// A final-layer change to one weight matrix of the combined network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDelta {
    /// Weight index (0-based) in the combined network.
    pub layer: usize,
    pub delta: Matrix,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct ProposalEvaluation {
    /// `cost_0..cost_k`; `None` for an infeasible sub-query and every one after it.
    pub sub_costs: Vec<Option<f64>>,
    /// Combined cost, or `None` when any sub-query is infeasible.
    pub total: Option<f64>,
    /// Modified chain, when feasible.
    pub chain: Option<SubnetworkChain>,
    pub deltas: Vec<LayerDelta>,
}

impl ProposalEvaluation {
    pub fn is_feasible(&self) -> bool {
        self.total.is_some()
    }

    fn infeasible(sub_costs: Vec<Option<f64>>) -> Self {
        Self {
            sub_costs,
            total: None,
            chain: None,
            deltas: Vec::new(),
        }
    }
}

/// Everything fixed for one repair job: the split network, its points, and
/// each point's original separation-layer assignments.
pub struct JobContext {
    pub network: Network,
    pub chain: SubnetworkChain,
    pub points: Vec<PointSpec>,
    /// `base[l][j]`: assignment of separation layer `l` on point `j`.
    pub base: Vec<Vec<Vec<f64>>>,
    pub grid: Grid,
    pub norm: Norm,
    pub backend: Arc<dyn RepairBackend>,
}

impl JobContext {
    pub fn new(
        network: &Network,
        points: &[PointSpec],
        separation: &[usize],
        epsilon: f64,
        norm: Norm,
        backend: Arc<dyn RepairBackend>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("no points to repair".into()));
        }
        for p in points {
            p.validate(network)?;
        }
        let chain = network.split(separation)?;
        let traces = points
            .iter()
            .map(|p| network.evaluate(&p.x))
            .collect::<Result<Vec<_>>>()?;
        let base = separation
            .iter()
            .map(|&i| traces.iter().map(|t| t.layer(i).to_vec()).collect())
            .collect();
        let widths = separation
            .iter()
            .map(|&i| network.layer_sizes()[i - 1])
            .collect();
        Ok(Self {
            network: network.clone(),
            chain,
            points: points.to_vec(),
            base,
            grid: Grid::new(epsilon, widths)?,
            norm,
            backend,
        })
    }

    /// Whether layer `l`'s change keeps every point's assignment non-negative.
    pub fn layer_admissible(&self, l: usize, steps: &[i64]) -> bool {
        self.base[l].iter().all(|v| {
            v.iter()
                .zip(steps)
                .all(|(&b, &s)| b + self.grid.value(s) >= -NEGATIVE_TOL)
        })
    }

    pub fn admissible(&self, p: &ChangeProposal) -> bool {
        p.num_layers() == self.grid.num_layers()
            && (0..p.num_layers()).all(|l| self.layer_admissible(l, p.layer(l)))
    }

    /// Proposed assignment `v'` of layer `l` for point `j`.
    pub fn proposed(&self, p: &ChangeProposal, l: usize, j: usize) -> Vec<f64> {
        self.base[l][j]
            .iter()
            .zip(p.layer(l))
            .map(|(&b, &s)| (b + self.grid.value(s)).max(0.0))
            .collect()
    }

    pub fn evaluate(&self, p: &ChangeProposal) -> Result<ProposalEvaluation> {
        evaluate_proposal(self, p)
    }
}

/// The `k + 1` single-layer queries induced by `proposal`.
///
/// `N^0` maps each `x_j` to its proposed first seam assignment, each middle
/// sub-network maps one proposed seam assignment to the next, and `N^k`
/// maps the last proposed assignment to the point's output goal. Every
/// query starts from the unmodified sub-network.
pub fn proposal_queries(ctx: &JobContext, proposal: &ChangeProposal) -> Result<Vec<SingleLayerQuery>> {
    if proposal.num_layers() != ctx.grid.num_layers()
        || (0..proposal.num_layers()).any(|l| proposal.layer(l).len() != ctx.grid.widths()[l])
    {
        return Err(Error::InvalidProposal(format!(
            "proposal shape does not match separation widths {:?}",
            ctx.grid.widths()
        )));
    }
    for l in 0..proposal.num_layers() {
        if let Some(point) = ctx.base[l].iter().position(|v| {
            v.iter()
                .zip(proposal.layer(l))
                .any(|(&b, &s)| b + ctx.grid.value(s) < -NEGATIVE_TOL)
        }) {
            return Err(Error::NegativeAssignment { layer: l, point });
        }
    }

    let k = ctx.chain.len() - 1;
    let subnets = ctx.chain.subnets();
    (0..=k)
        .map(|s| {
            let points = (0..ctx.points.len())
                .map(|j| {
                    let input = if s == 0 {
                        ctx.points[j].x.clone()
                    } else {
                        ctx.proposed(proposal, s - 1, j)
                    };
                    let goal = if s == k {
                        SubnetGoal::Output(ctx.points[j].goal.clone())
                    } else {
                        SubnetGoal::Exact(ExactOutputGoal::new(ctx.proposed(proposal, s, j))?)
                    };
                    Ok((input, goal))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SingleLayerQuery::final_layer(subnets[s].clone(), points, ctx.norm))
        })
        .collect()
}

/// Solves the queries of [`proposal_queries`] in order, stopping at the
/// first infeasible one.
pub fn evaluate_proposal(ctx: &JobContext, proposal: &ChangeProposal) -> Result<ProposalEvaluation> {
    let queries = proposal_queries(ctx, proposal)?;
    let weight_index = ctx.chain.final_weight_indices();
    let mut sub_costs = vec![None; queries.len()];
    let mut chain = ctx.chain.clone();
    let mut deltas = Vec::with_capacity(queries.len());

    for (s, query) in queries.iter().enumerate() {
        let answer = ctx.backend.modify(query)?;
        if !answer.is_repaired() {
            return Ok(ProposalEvaluation::infeasible(sub_costs));
        }
        sub_costs[s] = Some(answer.cost);
        deltas.push(LayerDelta {
            layer: weight_index[s],
            delta: answer.delta,
            cost: answer.cost,
        });
        chain.replace(s, answer.subnet);
    }

    // Seams are only met to LP tolerance; confirm the assembled network.
    let combined = chain.combine()?;
    for p in &ctx.points {
        if !check_satisfied(&combined, p)? {
            return Ok(ProposalEvaluation::infeasible(sub_costs));
        }
    }

    let costs: Vec<f64> = sub_costs.iter().map(|c| c.unwrap()).collect();
    Ok(ProposalEvaluation {
        total: Some(ctx.norm.total(&costs)),
        sub_costs,
        chain: Some(chain),
        deltas,
    })
}
