//! The search level: an anytime loop over grid changes to the separation
//! layers' assignments, scored by single-layer modifications of each
//! sub-network.

pub mod evaluate;
pub mod greedy;
pub mod grid;
pub mod mcts;
pub mod random;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::PointSpec;
use crate::error::{Error, Result};
use crate::lp::Norm;
use crate::network::Network;
use crate::single_layer::{BackendRegistry, DEFAULT_BACKEND};

pub use evaluate::{evaluate_proposal, proposal_queries, JobContext, LayerDelta, ProposalEvaluation};
pub use greedy::{propose_greedy_step, GreedyStep};
pub use grid::{ChangeProposal, Grid, Move};
pub use mcts::{propose_mcts, MctsOutcome, MctsTree};
pub use random::{propose_random, propose_random_admissible};

/// Consecutive cache hits after which the search is considered exhausted.
const STALL_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    Random,
    Greedy,
    Mcts,
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heuristic::Random => "random",
            Heuristic::Greedy => "greedy",
            Heuristic::Mcts => "mcts",
        })
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" | "uniform" => Ok(Heuristic::Random),
            "greedy" => Ok(Heuristic::Greedy),
            "mcts" | "tree" => Ok(Heuristic::Mcts),
            other => Err(Error::InvalidConfig(format!("unknown heuristic `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MctsConfig {
    /// Iterations per move.
    pub iterations: usize,
    /// Random-walk length of each simulation.
    pub depth: usize,
    pub simulations: usize,
    pub exploration: f64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            depth: 3,
            simulations: 1,
            exploration: std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub epsilon: f64,
    pub heuristic: Heuristic,
    pub norm: Norm,
    pub timeout: Duration,
    pub seed: u64,
    /// Random sampling box half-width; `None` means `5 * epsilon`.
    pub random_radius: Option<f64>,
    pub mcts: MctsConfig,
    /// Cap on fresh (uncached) proposal evaluations.
    pub max_evaluations: Option<usize>,
    /// Worker threads for batched evaluations; 1 evaluates inline.
    pub workers: usize,
    pub backend: String,
    pub registry: BackendRegistry,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            heuristic: Heuristic::Greedy,
            norm: Norm::L1,
            timeout: Duration::from_secs(60),
            seed: 0,
            random_radius: None,
            mcts: MctsConfig::default(),
            max_evaluations: None,
            workers: 1,
            backend: DEFAULT_BACKEND.to_string(),
            registry: BackendRegistry::default(),
        }
    }
}

impl SearchConfig {
    pub fn radius_steps(&self) -> i64 {
        let r = self.random_radius.unwrap_or(5.0 * self.epsilon);
        (r / self.epsilon + 1e-9).floor().max(0.0) as i64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if let Some(r) = self.random_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "random radius must be non-negative, got {r}"
                )));
            }
        }
        if !(self.mcts.exploration >= 0.0 && self.mcts.exploration.is_finite()) {
            return Err(Error::InvalidConfig("MCTS exploration must be non-negative".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// One fresh proposal evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub steps: Vec<Vec<i64>>,
    pub change: Vec<Vec<f64>>,
    pub sub_costs: Vec<Option<f64>>,
    pub total: Option<f64>,
    /// Running best after this evaluation.
    pub best: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Start,
    Step,
    Restart,
}

/// A change of the heuristic's current point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicMove {
    pub kind: MoveKind,
    pub steps: Vec<Vec<i64>>,
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub entries: Vec<TraceEntry>,
    pub moves: Vec<HeuristicMove>,
}

impl SearchTrace {
    pub fn min_total(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.total)
            .min_by(f64::total_cmp)
    }
}

/// Why evaluation stopped early.
#[derive(Debug)]
pub enum Interrupt {
    /// Timeout, evaluation budget, or exhausted search space.
    Halt,
    Fail(Error),
}

impl From<Error> for Interrupt {
    fn from(e: Error) -> Self {
        Interrupt::Fail(e)
    }
}

pub type Step<T> = std::result::Result<T, Interrupt>;

/// Mutable search state: cache, trace, best-so-far, RNG, and stop conditions.
pub struct Search {
    ctx: JobContext,
    cache: HashMap<ChangeProposal, Option<f64>>,
    trace: SearchTrace,
    best: Option<(ChangeProposal, ProposalEvaluation)>,
    rng: ChaCha8Rng,
    started: Instant,
    timeout: Duration,
    budget: Option<usize>,
    fresh: usize,
    stalled: usize,
    pool: Option<rayon::ThreadPool>,
}

impl Search {
    pub fn new(ctx: JobContext, config: &SearchConfig) -> Result<Self> {
        let pool = if config.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.workers)
                    .build()
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self {
            ctx,
            cache: HashMap::new(),
            trace: SearchTrace::default(),
            best: None,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            started: Instant::now(),
            timeout: config.timeout,
            budget: config.max_evaluations,
            fresh: 0,
            stalled: 0,
            pool,
        })
    }

    pub fn ctx(&self) -> &JobContext {
        &self.ctx
    }

    pub fn grid(&self) -> &Grid {
        &self.ctx.grid
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn trace(&self) -> &SearchTrace {
        &self.trace
    }

    pub fn best_cost(&self) -> Option<f64> {
        self.best.as_ref().and_then(|(_, e)| e.total)
    }

    pub fn evaluations(&self) -> usize {
        self.fresh
    }

    pub fn record_move(&mut self, kind: MoveKind, p: &ChangeProposal, cost: Option<f64>) {
        self.trace.moves.push(HeuristicMove {
            kind,
            steps: p.steps().to_vec(),
            cost,
        });
    }

    fn should_stop(&self) -> bool {
        self.started.elapsed() >= self.timeout
            || self.budget.is_some_and(|b| self.fresh >= b)
            || self.stalled >= STALL_LIMIT
    }

    /// Total cost of `p` (`None` when infeasible), from cache when possible.
    pub fn evaluate(&mut self, p: &ChangeProposal) -> Step<Option<f64>> {
        Ok(self.evaluate_batch(std::slice::from_ref(p))?[0])
    }

    /// Evaluates proposals, possibly in parallel; results and trace entries
    /// follow submission order.
    pub fn evaluate_batch(&mut self, ps: &[ChangeProposal]) -> Step<Vec<Option<f64>>> {
        if self.should_stop() {
            return Err(Interrupt::Halt);
        }
        let mut pending: Vec<&ChangeProposal> = Vec::new();
        for p in ps {
            if !self.cache.contains_key(p) && !pending.contains(&p) {
                pending.push(p);
            }
        }
        if pending.is_empty() {
            self.stalled += ps.len();
            if self.stalled >= STALL_LIMIT {
                return Err(Interrupt::Halt);
            }
        } else {
            if let Some(b) = self.budget {
                pending.truncate(b - self.fresh);
            }
            let ctx = &self.ctx;
            let results: Vec<Result<ProposalEvaluation>> = match &self.pool {
                Some(pool) => pool.install(|| pending.par_iter().map(|p| ctx.evaluate(p)).collect()),
                None => pending.iter().map(|p| ctx.evaluate(p)).collect(),
            };
            let pending: Vec<ChangeProposal> = pending.into_iter().cloned().collect();
            for (p, r) in pending.into_iter().zip(results) {
                self.record(p, r?);
            }
            self.stalled = 0;
        }
        ps.iter()
            .map(|p| self.cache.get(p).copied().ok_or(Interrupt::Halt))
            .collect()
    }

    fn record(&mut self, p: ChangeProposal, ev: ProposalEvaluation) {
        self.fresh += 1;
        let total = ev.total;
        self.cache.insert(p.clone(), total);
        let improves = match (total, self.best_cost()) {
            (Some(t), Some(b)) => t < b,
            (Some(_), None) => true,
            _ => false,
        };
        let entry = TraceEntry {
            steps: p.steps().to_vec(),
            change: self.ctx.grid.coords(&p),
            sub_costs: ev.sub_costs.clone(),
            total,
            best: if improves { total } else { self.best_cost() },
        };
        self.trace.entries.push(entry);
        if improves {
            self.best = Some((p, ev));
        }
    }

    fn finish(self, heuristic: Heuristic) -> Result<RepairResult> {
        let elapsed = self.started.elapsed();
        let evaluations = self.fresh;
        match self.best {
            Some((proposal, ev)) => {
                let network = ev.chain.as_ref().expect("feasible evaluation").combine()?;
                let sub_costs = ev.sub_costs.iter().map(|c| c.unwrap()).collect();
                Ok(RepairResult {
                    status: RepairStatus::Repaired,
                    heuristic,
                    norm: self.ctx.norm,
                    network,
                    cost: ev.total,
                    sub_costs,
                    deltas: ev.deltas,
                    best_change: Some(self.ctx.grid.coords(&proposal)),
                    best_proposal: Some(proposal),
                    trace: self.trace,
                    evaluations,
                    elapsed,
                })
            }
            None => Ok(RepairResult {
                status: RepairStatus::NotRepaired,
                heuristic,
                norm: self.ctx.norm,
                network: self.ctx.network,
                cost: None,
                sub_costs: Vec::new(),
                deltas: Vec::new(),
                best_change: None,
                best_proposal: None,
                trace: self.trace,
                evaluations,
                elapsed,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairStatus {
    Repaired,
    NotRepaired,
}

#[derive(Debug, Clone)]
pub struct RepairResult {
    pub status: RepairStatus,
    pub heuristic: Heuristic,
    pub norm: Norm,
    /// The repaired network, or the original when nothing feasible was found.
    pub network: Network,
    pub cost: Option<f64>,
    pub sub_costs: Vec<f64>,
    pub deltas: Vec<LayerDelta>,
    pub best_change: Option<Vec<Vec<f64>>>,
    pub best_proposal: Option<ChangeProposal>,
    pub trace: SearchTrace,
    pub evaluations: usize,
    pub elapsed: Duration,
}

impl RepairResult {
    pub fn is_repaired(&self) -> bool {
        self.status == RepairStatus::Repaired
    }
}

/// Runs the anytime repair loop until the timeout (or evaluation budget)
/// expires and returns the cheapest feasible modification seen.
pub fn repair(
    network: &Network,
    points: &[PointSpec],
    separation: &[usize],
    config: &SearchConfig,
) -> Result<RepairResult> {
    config.validate()?;
    let backend = config.registry.get(&config.backend)?;
    let ctx = JobContext::new(network, points, separation, config.epsilon, config.norm, backend)?;
    let mut search = Search::new(ctx, config)?;
    let outcome = match config.heuristic {
        Heuristic::Random => random::run(&mut search, config),
        Heuristic::Greedy => greedy::run(&mut search, config),
        Heuristic::Mcts => mcts::run(&mut search, config),
    };
    match outcome {
        Ok(()) | Err(Interrupt::Halt) => search.finish(config.heuristic),
        Err(Interrupt::Fail(e)) => Err(e),
    }
}

/// Shared by the local heuristics: a fresh admissible start point.
pub(crate) fn restart_point(search: &mut Search, config: &SearchConfig) -> ChangeProposal {
    let radius = config.radius_steps();
    let origin = search.grid().origin();
    (0..search.grid().num_layers()).fold(origin, |p, l| {
        let steps = random::sample_layer_admissible(search, l, radius)
            .unwrap_or_else(|| vec![0; search.grid().widths()[l]]);
        p.with_layer(l, steps)
    })
}
