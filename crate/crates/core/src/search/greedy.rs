//! Greedy descent over grid neighbors, with random restarts at local minima.

use super::grid::ChangeProposal;
use super::{restart_point, MoveKind, Search, SearchConfig, Step};

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    pub proposal: ChangeProposal,
    pub cost: Option<f64>,
    /// No neighbor was strictly cheaper than `current`.
    pub local_minimum: bool,
}

fn better(candidate: Option<f64>, than: Option<f64>) -> bool {
    match (candidate, than) {
        (Some(c), Some(t)) => c < t,
        (Some(_), None) => true,
        (None, _) => false,
    }
}

/// Evaluates every admissible neighbor at L1 distance `epsilon` from
/// `current` (restricted to one separation layer when `block` is set) and
/// moves to the cheapest one if it beats `current_cost`.
pub fn propose_greedy_step(
    search: &mut Search,
    current: &ChangeProposal,
    current_cost: Option<f64>,
    block: Option<usize>,
) -> Step<GreedyStep> {
    let neighbors: Vec<ChangeProposal> = search
        .grid()
        .neighbors(current, block)
        .into_iter()
        .filter(|p| search.ctx().admissible(p))
        .collect();
    let costs = search.evaluate_batch(&neighbors)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in costs.iter().enumerate() {
        if let Some(c) = *c {
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((i, c));
            }
        }
    }
    Ok(match best {
        Some((i, c)) if better(Some(c), current_cost) => GreedyStep {
            proposal: neighbors[i].clone(),
            cost: Some(c),
            local_minimum: false,
        },
        _ => GreedyStep {
            proposal: current.clone(),
            cost: current_cost,
            local_minimum: true,
        },
    })
}

/// Starts at the origin and sweeps the separation layers round-robin, one
/// greedy step per layer; a sweep without progress triggers a restart.
pub(crate) fn run(search: &mut Search, config: &SearchConfig) -> Step<()> {
    let mut current = search.grid().origin();
    let mut cost = search.evaluate(&current)?;
    search.record_move(MoveKind::Start, &current, cost);
    if search.grid().dimension() == 0 {
        return Ok(());
    }
    loop {
        let mut improved = false;
        for l in 0..search.grid().num_layers() {
            let step = propose_greedy_step(search, &current, cost, Some(l))?;
            if !step.local_minimum {
                current = step.proposal;
                cost = step.cost;
                improved = true;
                search.record_move(MoveKind::Step, &current, cost);
            }
        }
        if !improved {
            current = restart_point(search, config);
            cost = search.evaluate(&current)?;
            search.record_move(MoveKind::Restart, &current, cost);
        }
    }
}
