//! Monte Carlo tree search over moves on one separation layer's grid.
//!
//! Each tree node is a grid point; its children are the `2 s + 1` moves
//! (stay, or `+/- epsilon` on one coordinate) that keep every point's
//! assignment non-negative. Rewards are `1 / (1 + cost)`, zero when
//! infeasible, averaged per node.

use rand::seq::SliceRandom;
use rand::Rng;

use super::grid::{ChangeProposal, Move};
use super::{restart_point, MctsConfig, MoveKind, Search, SearchConfig, Step};

pub fn reward(cost: Option<f64>) -> f64 {
    cost.map_or(0.0, |c| 1.0 / (1.0 + c))
}

#[derive(Debug, Clone)]
pub struct MctsNode {
    pub proposal: ChangeProposal,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    untried: Vec<Move>,
    pub visits: u64,
    pub reward_sum: f64,
    /// Simulations started from this node when it was expanded.
    pub own_simulations: u64,
    pub best_cost: Option<f64>,
}

impl MctsNode {
    pub fn mean_reward(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.reward_sum / self.visits as f64
        }
    }

    pub fn is_fully_expanded(&self) -> bool {
        self.untried.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct MctsTree {
    layer: usize,
    branching: usize,
    nodes: Vec<MctsNode>,
}

impl MctsTree {
    pub fn new(search: &Search, root: ChangeProposal, layer: usize) -> Self {
        let untried = admissible_moves(search, &root, layer);
        Self {
            layer,
            branching: search.grid().moves(layer).len(),
            nodes: vec![MctsNode {
                proposal: root,
                parent: None,
                children: Vec::new(),
                untried,
                visits: 0,
                reward_sum: 0.0,
                own_simulations: 0,
                best_cost: None,
            }],
        }
    }

    pub fn nodes(&self) -> &[MctsNode] {
        &self.nodes
    }

    pub fn root(&self) -> &MctsNode {
        &self.nodes[0]
    }

    /// Upper bound on children per node, `2 s + 1`.
    pub fn max_branching(&self) -> usize {
        self.branching
    }

    fn ucb(&self, parent: usize, child: usize, c: f64) -> f64 {
        let n = &self.nodes[child];
        let total = self.nodes[parent].visits.max(1) as f64;
        n.mean_reward() + c * (total.ln() / n.visits as f64).sqrt()
    }

    fn select(&self, c: f64) -> usize {
        let mut at = 0;
        while self.nodes[at].is_fully_expanded() && !self.nodes[at].children.is_empty() {
            let children = &self.nodes[at].children;
            let mut best = children[0];
            let mut best_score = self.ucb(at, best, c);
            for &ch in &children[1..] {
                let s = self.ucb(at, ch, c);
                if s > best_score {
                    best = ch;
                    best_score = s;
                }
            }
            at = best;
        }
        at
    }

    /// One selection / expansion / simulation / backpropagation round.
    pub fn iterate(&mut self, search: &mut Search, config: &MctsConfig) -> Step<()> {
        let leaf = self.select(config.exploration);
        let node = if self.nodes[leaf].untried.is_empty() {
            leaf
        } else {
            let pick = search.rng().gen_range(0..self.nodes[leaf].untried.len());
            let mv = self.nodes[leaf].untried.swap_remove(pick);
            let proposal = mv.apply(&self.nodes[leaf].proposal, self.layer);
            let untried = admissible_moves(search, &proposal, self.layer);
            self.nodes.push(MctsNode {
                proposal,
                parent: Some(leaf),
                children: Vec::new(),
                untried,
                visits: 0,
                reward_sum: 0.0,
                own_simulations: 0,
                best_cost: None,
            });
            let id = self.nodes.len() - 1;
            self.nodes[leaf].children.push(id);
            id
        };

        let start = self.nodes[node].proposal.clone();
        let endpoints: Vec<ChangeProposal> = (0..config.simulations)
            .map(|_| random_walk(search, &start, self.layer, config.depth))
            .collect();
        let costs = search.evaluate_batch(&endpoints)?;

        for cost in costs {
            let r = reward(cost);
            self.nodes[node].own_simulations += 1;
            let mut at = Some(node);
            while let Some(i) = at {
                let n = &mut self.nodes[i];
                n.visits += 1;
                n.reward_sum += r;
                if let Some(c) = cost {
                    n.best_cost = Some(n.best_cost.map_or(c, |b: f64| b.min(c)));
                }
                at = n.parent;
            }
        }
        Ok(())
    }

    /// Root child with the highest mean reward, if any simulation was feasible.
    pub fn best_child(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for &ch in &self.root().children {
            let n = &self.nodes[ch];
            if n.reward_sum <= 0.0 {
                continue;
            }
            if best.is_none_or(|b| n.mean_reward() > self.nodes[b].mean_reward()) {
                best = Some(ch);
            }
        }
        best
    }

    /// Checks visit bookkeeping and branching bounds.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, n) in self.nodes.iter().enumerate() {
            let child_visits: u64 = n.children.iter().map(|&c| self.nodes[c].visits).sum();
            if n.visits != child_visits + n.own_simulations {
                return Err(format!(
                    "node {i}: visits {} != children {child_visits} + own {}",
                    n.visits, n.own_simulations
                ));
            }
            if n.children.len() + n.untried.len() > self.branching {
                return Err(format!(
                    "node {i}: {} children + {} untried exceeds {}",
                    n.children.len(),
                    n.untried.len(),
                    self.branching
                ));
            }
            for &c in &n.children {
                if self.nodes[c].parent != Some(i) {
                    return Err(format!("node {c} does not point back to parent {i}"));
                }
            }
        }
        Ok(())
    }
}

fn admissible_moves(search: &Search, p: &ChangeProposal, layer: usize) -> Vec<Move> {
    search
        .grid()
        .moves(layer)
        .into_iter()
        .filter(|m| {
            let q = m.apply(p, layer);
            search.ctx().layer_admissible(layer, q.layer(layer))
        })
        .collect()
}

fn random_walk(search: &mut Search, from: &ChangeProposal, layer: usize, depth: usize) -> ChangeProposal {
    let mut p = from.clone();
    for _ in 0..depth {
        let moves = admissible_moves(search, &p, layer);
        match moves.choose(search.rng()) {
            Some(m) => p = m.apply(&p, layer),
            None => break,
        }
    }
    p
}

#[derive(Debug, Clone)]
pub struct MctsOutcome {
    pub proposal: ChangeProposal,
    /// Every simulation was infeasible (or none ran); `proposal` is the root.
    pub no_progress: bool,
    pub tree: MctsTree,
}

/// Runs `config.iterations` rounds from `root` on separation layer `layer`
/// and returns the most rewarding child move.
pub fn propose_mcts(
    search: &mut Search,
    root: &ChangeProposal,
    layer: usize,
    config: &MctsConfig,
) -> Step<MctsOutcome> {
    let mut tree = MctsTree::new(search, root.clone(), layer);
    for _ in 0..config.iterations {
        tree.iterate(search, config)?;
    }
    Ok(match tree.best_child() {
        Some(ch) => MctsOutcome {
            proposal: tree.nodes[ch].proposal.clone(),
            no_progress: false,
            tree,
        },
        None => MctsOutcome {
            proposal: root.clone(),
            no_progress: true,
            tree,
        },
    })
}

/// Moves layer by layer with MCTS from the origin; restarts when a full
/// round makes no move.
pub(crate) fn run(search: &mut Search, config: &SearchConfig) -> Step<()> {
    let mut current = search.grid().origin();
    let cost = search.evaluate(&current)?;
    search.record_move(MoveKind::Start, &current, cost);
    if search.grid().dimension() == 0 {
        return Ok(());
    }
    loop {
        let mut moved = false;
        for l in 0..search.grid().num_layers() {
            let out = propose_mcts(search, &current, l, &config.mcts)?;
            if !out.no_progress && out.proposal != current {
                current = out.proposal;
                let cost = search.evaluate(&current)?;
                search.record_move(MoveKind::Step, &current, cost);
                moved = true;
            }
        }
        if !moved {
            current = restart_point(search, config);
            let cost = search.evaluate(&current)?;
            search.record_move(MoveKind::Restart, &current, cost);
        }
    }
}
