//! Seeded initial data generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::models::SystemModel;
use crate::riemann::{GridSpec, GridState};
use crate::tracker::StepData;

/// Admissible integer range `[lo, hi]` of coordinate `i`, in grid units.
pub fn grid_range(model: &SystemModel, grid: &GridSpec, i: usize) -> (i64, i64) {
    let step = if model.is_ld(i) { 1 } else { grid.shard_units() };
    let q = grid.unit() * step as f64;
    let dom = model.domain();
    let lo = (dom.lo[i] / q - 1e-9).ceil() as i64;
    let hi = (dom.hi[i] / q + 1e-9).floor() as i64;
    (lo * step, hi * step)
}

pub fn random_state(model: &SystemModel, grid: &GridSpec, rng: &mut impl Rng) -> GridState {
    (0..model.dim())
        .map(|i| {
            let step = if model.is_ld(i) { 1 } else { grid.shard_units() };
            let (lo, hi) = grid_range(model, grid, i);
            rng.random_range(lo / step..=hi / step) * step
        })
        .collect()
}

/// Parameters of [`random_step_data`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomDataSpec {
    pub jumps: usize,
    pub x_min: f64,
    pub x_max: f64,
    /// Largest change of any coordinate across one jump, as a fraction of
    /// the box width (1 means unrestricted).
    #[serde(default = "one")]
    pub max_step: f64,
}

fn one() -> f64 {
    1.0
}

/// `jumps` breakpoints placed uniformly in `[x_min, x_max]` with random grid
/// states, fully determined by `seed`.
pub fn random_step_data(model: &SystemModel, grid: &GridSpec, spec: &RandomDataSpec, seed: u64) -> StepData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..spec.jumps).map(|_| rng.random_range(spec.x_min..spec.x_max)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut states = vec![random_state(model, grid, &mut rng)];
    for _ in 0..xs.len() {
        let prev = states.last().unwrap().clone();
        let next = if spec.max_step >= 1.0 {
            random_state(model, grid, &mut rng)
        } else {
            (0..model.dim())
                .map(|i| {
                    let step = if model.is_ld(i) { 1 } else { grid.shard_units() };
                    let (lo, hi) = grid_range(model, grid, i);
                    let reach = (((hi - lo) as f64 * spec.max_step / step as f64).round() as i64).max(1);
                    let k = rng.random_range(-reach..=reach) * step;
                    (prev[i] + k).clamp(lo, hi)
                })
                .collect()
        };
        states.push(next);
    }
    StepData::new(xs, states)
}

/// Samples a function of `x` at cell midpoints of a uniform partition and
/// projects each value to the grid.
pub fn sampled_profile(
    model: &SystemModel,
    grid: &GridSpec,
    a: f64,
    b: f64,
    cells: usize,
    f: impl Fn(f64) -> Vec<f64>,
) -> StepData {
    let dx = (b - a) / cells as f64;
    let xs: Vec<f64> = (0..=cells).map(|k| a + k as f64 * dx).collect();
    let mut states = vec![grid.project(model, &f(a - 0.5 * dx))];
    for k in 0..cells {
        states.push(grid.project(model, &f(a + (k as f64 + 0.5) * dx)));
    }
    states.push(grid.project(model, &f(b + 0.5 * dx)));
    StepData::new(xs, states).compressed()
}

/// Like [`random_step_data`] but coordinate `family` never decreases across
/// a breakpoint, so that family carries rarefactions only.
pub fn rarefaction_step_data(model: &SystemModel, grid: &GridSpec, spec: &RandomDataSpec, family: usize, seed: u64) -> StepData {
    let mut data = random_step_data(model, grid, spec, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let step = if model.is_ld(family) { 1 } else { grid.shard_units() };
    let (lo, hi) = grid_range(model, grid, family);
    let n = data.states.len() as i64;
    let budget = (hi - lo) / step;
    // nondecreasing staircase from lo, with random increments summing to at most hi - lo
    let mut cuts: Vec<i64> = (0..n - 1).map(|_| rng.random_range(0..=budget)).collect();
    cuts.sort_unstable();
    let mut states = data.states.clone();
    states[0][family] = lo;
    for (k, c) in cuts.iter().enumerate() {
        states[k + 1][family] = lo + c * step;
    }
    data.states = states;
    data.compressed()
}
