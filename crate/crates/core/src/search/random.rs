//! Uniform random search over the grid, inside a finite sampling box.

use rand::Rng;

use super::evaluate::JobContext;
use super::grid::{ChangeProposal, Grid};
use super::{Search, SearchConfig, Step};

const MAX_REJECTIONS: usize = 1_000;

fn sample_steps<R: Rng>(rng: &mut R, width: usize, radius: i64) -> Vec<i64> {
    (0..width).map(|_| rng.gen_range(-radius..=radius)).collect()
}

/// A grid point drawn uniformly from the box `[-radius, radius]` steps per
/// coordinate. No non-negativity filtering.
pub fn propose_random<R: Rng>(grid: &Grid, rng: &mut R, radius_steps: i64) -> ChangeProposal {
    ChangeProposal::from_steps(
        grid.widths()
            .iter()
            .map(|&w| sample_steps(rng, w, radius_steps))
            .collect(),
    )
}

fn sample_admissible_layer<R: Rng>(
    ctx: &JobContext,
    rng: &mut R,
    l: usize,
    radius: i64,
) -> Option<Vec<i64>> {
    let width = ctx.grid.widths()[l];
    (0..MAX_REJECTIONS)
        .map(|_| sample_steps(rng, width, radius))
        .find(|s| ctx.layer_admissible(l, s))
}

/// Like [`propose_random`], rejecting per layer any change that drives a
/// point's separation assignment negative. `None` if rejection sampling gives up.
pub fn propose_random_admissible<R: Rng>(
    ctx: &JobContext,
    rng: &mut R,
    radius_steps: i64,
) -> Option<ChangeProposal> {
    let steps = (0..ctx.grid.num_layers())
        .map(|l| sample_admissible_layer(ctx, rng, l, radius_steps))
        .collect::<Option<Vec<_>>>()?;
    Some(ChangeProposal::from_steps(steps))
}

pub(crate) fn sample_layer_admissible(search: &mut Search, l: usize, radius: i64) -> Option<Vec<i64>> {
    sample_admissible_layer(&search.ctx, &mut search.rng, l, radius)
}

pub(crate) fn run(search: &mut Search, config: &SearchConfig) -> Step<()> {
    let radius = config.radius_steps();
    loop {
        let p = propose_random_admissible(&search.ctx, &mut search.rng, radius)
            .unwrap_or_else(|| search.grid().origin());
        search.evaluate(&p)?;
        if search.grid().dimension() == 0 {
            return Ok(());
        }
    }
}
