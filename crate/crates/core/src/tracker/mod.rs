//! Discrete-event front tracking.
//!
//! Fronts move on straight lines; when adjacent fronts meet, the Riemann
//! problem between the outer states is solved again on the grid and the
//! outgoing fan replaces the incoming fronts. States are exact grid integers,
//! positions and speeds are floating point.

mod monitors;
mod trajectory;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::models::SystemModel;
use crate::riemann::{solve_riemann_grid, GridSpec, GridState, Wave, WaveKind};

pub use monitors::{interaction_potential, total_variation, Monitors};
pub use trajectory::{Replay, Side, StepProfile, Trajectory};

/// Piecewise constant grid data: `states[k]` holds on `(xs[k-1], xs[k])`,
/// with `states[0]` on the far left and `states[xs.len()]` on the far right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepData {
    pub xs: Vec<f64>,
    pub states: Vec<GridState>,
}

impl StepData {
    pub fn new(xs: Vec<f64>, states: Vec<GridState>) -> Self {
        Self { xs, states }
    }

    /// Constant data.
    pub fn constant(w: GridState) -> Self {
        Self { xs: Vec::new(), states: vec![w] }
    }

    /// Builds grid data from real Riemann coordinates by rounding each state
    /// to the grid.
    pub fn projected(model: &SystemModel, grid: &GridSpec, xs: Vec<f64>, states: &[Vec<f64>]) -> Self {
        Self { xs, states: states.iter().map(|w| grid.project(model, w)).collect() }
    }

    /// Drops breakpoints across which the state does not change.
    pub fn compressed(self) -> Self {
        let mut xs = Vec::new();
        let mut states = vec![self.states[0].clone()];
        for (k, x) in self.xs.iter().enumerate() {
            if self.states[k + 1] != *states.last().unwrap() {
                xs.push(*x);
                states.push(self.states[k + 1].clone());
            }
        }
        Self { xs, states }
    }

    /// Moves breakpoint `k` to `x`; the caller keeps the order intact.
    pub fn with_breakpoint(&self, k: usize, x: f64) -> Self {
        let mut out = self.clone();
        out.xs[k] = x;
        out
    }

    fn validate(&self, model: &SystemModel, grid: &GridSpec) -> Result<()> {
        if self.states.len() != self.xs.len() + 1 {
            return Err(Error::Scenario(format!(
                "{} breakpoints need {} states, got {}",
                self.xs.len(),
                self.xs.len() + 1,
                self.states.len()
            )));
        }
        for (k, x) in self.xs.iter().enumerate() {
            if !x.is_finite() || (k > 0 && *x <= self.xs[k - 1]) {
                return Err(Error::NonMonotoneBreakpoints(k));
            }
        }
        for w in &self.states {
            grid.check(model, w)?;
        }
        Ok(())
    }
}

/// One moving discontinuity. `id` indexes [`Trajectory::fronts`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Front {
    pub id: usize,
    pub wave: Wave,
    pub x0: f64,
    pub t0: f64,
    /// Time at which the front was absorbed by an interaction.
    pub t1: Option<f64>,
}

impl Front {
    pub fn position(&self, t: f64) -> f64 {
        self.x0 + self.wave.speed * (t - self.t0)
    }

    pub fn speed(&self) -> f64 {
        self.wave.speed
    }

    fn intercept(&self) -> f64 {
        self.x0 - self.wave.speed * self.t0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    /// The number of fronts drops.
    FewerFronts,
    /// Total variation drops by at least two grid units.
    LessVariation,
    /// The interaction potential drops.
    LowerPotential,
}

impl Alternative {
    pub fn label(self) -> &'static str {
        match self {
            Alternative::FewerFronts => "i",
            Alternative::LessVariation => "ii",
            Alternative::LowerPotential => "iii",
        }
    }
}

/// Everything that happened at one interaction point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub time: f64,
    pub x: f64,
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
    /// Slot of the first incoming front in the ordered list before the event.
    pub slot: usize,
    pub d_tv: i64,
    pub d_q: i64,
    pub d_count: i64,
    pub after: Monitors,
    /// First alternative that holds with grid-unit thresholds.
    pub alternative: Option<Alternative>,
    /// Whether `Δcount ≤ -1`, `ΔTV ≤ -2^{1-ν}` or `ΔQ ≤ -2^{-ν}` holds with
    /// the thresholds read in real units.
    pub meets_real_thresholds: bool,
    /// `|∫u(t*+) - ∫u(t*-)|` relative to the jumps involved.
    pub mass_defect: f64,
    /// Mismatch of `Σ σ Δu` between incoming and outgoing fronts, relative.
    pub flux_defect: f64,
}

impl InteractionRecord {
    /// Two incoming fronts of different families.
    pub fn is_transversal(&self, fronts: &[Front]) -> bool {
        self.incoming.len() == 2 && fronts[self.incoming[0]].wave.family != fronts[self.incoming[1]].wave.family
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Fronts closer than this fraction of the data length scale at an
    /// interaction time join the same event.
    pub merge_rel: f64,
    /// Event cap as a multiple of the analytic bound.
    pub budget_factor: usize,
    /// Explicit event cap; overrides `budget_factor`.
    pub budget: Option<usize>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { merge_rel: 1e-9, budget_factor: 10, budget: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    t: f64,
    x: f64,
    left: usize,
    right: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // reversed so that BinaryHeap pops the earliest candidate
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.x.total_cmp(&self.x))
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Next interaction as reported by [`Tracker::next_collision`].
#[derive(Debug, Clone, PartialEq)]
pub struct Collision {
    pub t: f64,
    pub x: f64,
    pub fronts: Vec<usize>,
}

/// The evolving front-tracking solution.
#[derive(Debug, Clone)]
pub struct Tracker {
    model: SystemModel,
    grid: GridSpec,
    config: TrackerConfig,
    time: f64,
    left_state: GridState,
    order: Vec<usize>,
    slot: Vec<usize>,
    fronts: Vec<Front>,
    initial: Vec<usize>,
    data: StepData,
    events: Vec<InteractionRecord>,
    queue: BinaryHeap<Candidate>,
    monitors: Monitors,
    initial_monitors: Monitors,
    length_scale: f64,
    budget: usize,
}

const DEAD: usize = usize::MAX;

impl Tracker {
    /// Solves the initial Riemann problems and places their fans.
    pub fn init_from_data(model: &SystemModel, grid: &GridSpec, data: &StepData) -> Result<Self> {
        Self::with_config(model, grid, data, TrackerConfig::default())
    }

    pub fn with_config(model: &SystemModel, grid: &GridSpec, data: &StepData, config: TrackerConfig) -> Result<Self> {
        data.validate(model, grid)?;
        let mut fronts = Vec::new();
        for (k, x) in data.xs.iter().enumerate() {
            let fan = solve_riemann_grid(model, grid, &data.states[k], &data.states[k + 1])?;
            for wave in fan.waves {
                fronts.push(Front { id: fronts.len(), wave, x0: *x, t0: 0.0, t1: None });
            }
        }
        let order: Vec<usize> = (0..fronts.len()).collect();
        let extent = match (data.xs.first(), data.xs.last()) {
            (Some(a), Some(b)) => (b - a).abs().max(a.abs()).max(b.abs()),
            _ => 0.0,
        };
        let length_scale = extent.max(1.0);
        let monitors = Monitors::measure(&fronts, &order);
        let budget = config.budget.unwrap_or_else(|| {
            let bound = monitors.count as i64 + monitors.tv / 2 + monitors.q + 1;
            config.budget_factor * bound.max(1) as usize
        });
        let mut tracker = Tracker {
            model: model.clone(),
            grid: *grid,
            config,
            time: 0.0,
            left_state: data.states[0].clone(),
            slot: order.clone(),
            initial: order.clone(),
            order,
            fronts,
            data: data.clone(),
            events: Vec::new(),
            queue: BinaryHeap::new(),
            monitors,
            initial_monitors: monitors,
            length_scale,
            budget,
        };
        for k in 1..tracker.order.len() {
            tracker.schedule(tracker.order[k - 1], tracker.order[k]);
        }
        Ok(tracker)
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn monitors(&self) -> Monitors {
        self.monitors
    }

    pub fn events(&self) -> &[InteractionRecord] {
        &self.events
    }

    pub fn event_budget(&self) -> usize {
        self.budget
    }

    pub fn left_state(&self) -> &GridState {
        &self.left_state
    }

    /// Live fronts from left to right.
    pub fn fronts(&self) -> impl Iterator<Item = &Front> {
        self.order.iter().map(move |id| &self.fronts[*id])
    }

    pub fn front(&self, id: usize) -> Result<&Front> {
        self.fronts.get(id).ok_or(Error::UnknownFront(id))
    }

    fn schedule(&mut self, a: usize, b: usize) {
        let fa = &self.fronts[a];
        let fb = &self.fronts[b];
        let ds = fa.speed() - fb.speed();
        if ds <= 0.0 {
            return;
        }
        let t = ((fb.intercept() - fa.intercept()) / ds).max(self.time);
        let x = fa.position(t);
        self.queue.push(Candidate { t, x, left: a, right: b });
    }

    fn is_valid(&self, c: &Candidate) -> bool {
        let sa = self.slot[c.left];
        let sb = self.slot[c.right];
        sa != DEAD && sb != DEAD && sb == sa + 1
    }

    fn peek_valid(&mut self) -> Option<Candidate> {
        while let Some(c) = self.queue.peek().copied() {
            if self.is_valid(&c) {
                return Some(c);
            }
            self.queue.pop();
        }
        None
    }

    /// Contiguous run of slots `lo..=hi` that take part in the interaction
    /// found by `c`.
    fn group(&self, c: &Candidate) -> (usize, usize) {
        let tol = self.config.merge_rel * self.length_scale;
        let mut lo = self.slot[c.left];
        let mut hi = self.slot[c.right];
        while lo > 0 {
            let prev = &self.fronts[self.order[lo - 1]];
            let first = &self.fronts[self.order[lo]];
            if (prev.position(c.t) - c.x).abs() <= tol && prev.speed() > first.speed() {
                lo -= 1;
            } else {
                break;
            }
        }
        while hi + 1 < self.order.len() {
            let next = &self.fronts[self.order[hi + 1]];
            let last = &self.fronts[self.order[hi]];
            if (next.position(c.t) - c.x).abs() <= tol && last.speed() > next.speed() {
                hi += 1;
            } else {
                break;
            }
        }
        (lo, hi)
    }

    /// Earliest upcoming interaction, or `None` if fronts never meet again.
    pub fn next_collision(&mut self) -> Option<Collision> {
        let c = self.peek_valid()?;
        let (lo, hi) = self.group(&c);
        Some(Collision { t: c.t, x: c.x, fronts: self.order[lo..=hi].to_vec() })
    }

    /// Processes the next interaction. Returns `false` when none is left.
    pub fn step(&mut self) -> Result<bool> {
        let Some(c) = self.peek_valid() else {
            return Ok(false);
        };
        self.queue.pop();
        if self.events.len() >= self.budget {
            return Err(Error::EventBudgetExceeded { budget: self.budget });
        }
        let (lo, hi) = self.group(&c);
        self.check_order(&c, lo, hi)?;
        self.time = c.t;
        let incoming: Vec<usize> = self.order[lo..=hi].to_vec();
        let w_left = self.fronts[incoming[0]].wave.left.clone();
        let w_right = self.fronts[*incoming.last().unwrap()].wave.right.clone();
        let fan = solve_riemann_grid(&self.model, &self.grid, &w_left, &w_right)?;
        let mut outgoing = Vec::with_capacity(fan.waves.len());
        for wave in fan.waves {
            let id = self.fronts.len();
            self.fronts.push(Front { id, wave, x0: c.x, t0: c.t, t1: None });
            self.slot.push(DEAD);
            outgoing.push(id);
        }
        for id in &incoming {
            self.fronts[*id].t1 = Some(c.t);
            self.slot[*id] = DEAD;
        }
        self.order.splice(lo..=hi, outgoing.iter().copied());
        for (k, id) in self.order.iter().enumerate().skip(lo) {
            self.slot[*id] = k;
        }

        let (mass_defect, flux_defect) = self.conservation_defects(&incoming, &outgoing, c.t, c.x);
        let before = self.monitors;
        let after = Monitors::measure(&self.fronts, &self.order);
        self.monitors = after;
        let d_tv = after.tv - before.tv;
        let d_q = after.q - before.q;
        let d_count = after.count as i64 - before.count as i64;
        let (alternative, meets_real_thresholds) = classify(&self.grid, d_count, d_tv, d_q);
        self.events.push(InteractionRecord {
            time: c.t,
            x: c.x,
            incoming,
            outgoing: outgoing.clone(),
            slot: lo,
            d_tv,
            d_q,
            d_count,
            after,
            alternative,
            meets_real_thresholds,
            mass_defect,
            flux_defect,
        });

        let end = lo + outgoing.len();
        if lo > 0 && end > lo {
            self.schedule(self.order[lo - 1], self.order[lo]);
        }
        if end > lo && end < self.order.len() {
            self.schedule(self.order[end - 1], self.order[end]);
        }
        for k in lo + 1..end {
            self.schedule(self.order[k - 1], self.order[k]);
        }
        if end == lo && lo > 0 && lo < self.order.len() {
            self.schedule(self.order[lo - 1], self.order[lo]);
        }
        Ok(true)
    }

    fn check_order(&self, c: &Candidate, lo: usize, hi: usize) -> Result<()> {
        let tol = 10.0 * self.config.merge_rel * self.length_scale;
        if lo > 0 {
            let prev = &self.fronts[self.order[lo - 1]];
            if prev.position(c.t) > c.x + tol {
                return Err(Error::CrossingOrderViolation {
                    time: c.t,
                    detail: format!("front {} passed the interaction point from the left", prev.id),
                });
            }
        }
        if hi + 1 < self.order.len() {
            let next = &self.fronts[self.order[hi + 1]];
            if next.position(c.t) < c.x - tol {
                return Err(Error::CrossingOrderViolation {
                    time: c.t,
                    detail: format!("front {} passed the interaction point from the right", next.id),
                });
            }
        }
        Ok(())
    }

    fn conservation_defects(&self, incoming: &[usize], outgoing: &[usize], t: f64, x: f64) -> (f64, f64) {
        let n = self.model.dim();
        let mut mass = vec![0.0; n];
        let mut rate = vec![0.0; n];
        let mut mass_scale = 0.0;
        let mut rate_scale = 0.0;
        for (ids, sign) in [(incoming, 1.0), (outgoing, -1.0)] {
            for id in ids {
                let f = &self.fronts[*id];
                let du = f.wave.jump(&self.model, &self.grid);
                let dx = f.position(t) - x;
                for k in 0..n {
                    mass[k] += sign * du[k] * dx;
                    rate[k] += sign * du[k] * f.speed();
                }
                mass_scale += norm(&du) * self.length_scale;
                rate_scale += norm(&du) * f.speed().abs().max(1.0);
            }
        }
        let rel = |v: &[f64], s: f64| if s == 0.0 { 0.0 } else { norm(v) / s };
        (rel(&mass, mass_scale), rel(&rate, rate_scale))
    }

    /// Advances through every interaction strictly before `t_end`, then sets
    /// the clock to `t_end`.
    pub fn run_until(&mut self, t_end: f64) -> Result<()> {
        if t_end < self.time {
            return Err(Error::OutOfSpan { t: t_end, end: self.time });
        }
        while let Some(c) = self.peek_valid() {
            if c.t >= t_end {
                break;
            }
            self.step()?;
        }
        self.time = t_end;
        Ok(())
    }

    /// Snapshot of the whole history up to the current time.
    pub fn trajectory(&self) -> Trajectory {
        Trajectory::new(
            self.model.clone(),
            self.grid,
            self.data.clone(),
            self.fronts.clone(),
            self.initial.clone(),
            self.events.clone(),
            self.time,
            self.initial_monitors,
        )
    }

    /// Convenience: build, run to `t_end`, return the trajectory.
    pub fn simulate(model: &SystemModel, grid: &GridSpec, data: &StepData, t_end: f64) -> Result<Trajectory> {
        let mut tr = Tracker::init_from_data(model, grid, data)?;
        tr.run_until(t_end)?;
        Ok(tr.trajectory())
    }
}

fn classify(grid: &GridSpec, d_count: i64, d_tv: i64, d_q: i64) -> (Option<Alternative>, bool) {
    let alternative = if d_count <= -1 {
        Some(Alternative::FewerFronts)
    } else if d_tv <= -2 {
        Some(Alternative::LessVariation)
    } else if d_q <= -1 {
        Some(Alternative::LowerPotential)
    } else {
        None
    };
    let unit = grid.unit();
    let h = grid.h();
    let real = d_count <= -1 || (d_tv as f64) * unit <= -2.0 * h || (d_q as f64) * unit * unit <= -h;
    (alternative, real)
}

/// Whether a wave is a contact, shock or shard, as a short tag.
pub fn kind_tag(kind: WaveKind) -> &'static str {
    match kind {
        WaveKind::Contact => "contact",
        WaveKind::Shock => "shock",
        WaveKind::RarefactionShard => "shard",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin::{decoupled, ld_ld};

    fn burgers_grid() -> (SystemModel, GridSpec) {
        (decoupled(5.0), GridSpec::new(2))
    }

    #[test]
    fn trivial_data_has_no_fronts() {
        let (m, g) = burgers_grid();
        let tr = Tracker::init_from_data(&m, &g, &StepData::new(vec![0.0], vec![vec![2, 1], vec![2, 1]])).unwrap();
        assert_eq!(tr.monitors(), Monitors { tv: 0, q: 0, count: 0 });
    }

    #[test]
    fn single_shock_moves_on_a_line() {
        let (m, g) = burgers_grid();
        let mut tr = Tracker::init_from_data(&m, &g, &StepData::new(vec![0.0], vec![vec![4, 0], vec![0, 0]])).unwrap();
        assert_eq!(tr.monitors().count, 1);
        tr.run_until(3.0).unwrap();
        let f = tr.fronts().next().unwrap();
        assert_eq!(f.speed(), 0.5);
        assert_eq!(f.position(3.0), 1.5);
        assert!(tr.events().is_empty());
    }

    #[test]
    fn contact_left_of_shock_is_approaching() {
        let (m, g) = burgers_grid();
        // family-1 contact at x=0 (speed 5), family-0 shock at x=1
        let data = StepData::new(vec![0.0, 1.0], vec![vec![4, 0], vec![4, 2], vec![0, 2]]);
        let mut tr = Tracker::init_from_data(&m, &g, &data).unwrap();
        assert_eq!(tr.monitors().q, 2 * 4);
        let c = tr.next_collision().unwrap();
        // shock speed 0.5: 5t = 1 + 0.5t
        assert!((c.t - 1.0 / 4.5).abs() < 1e-15);
        assert_eq!(c.fronts.len(), 2);
        tr.step().unwrap();
        let ev = &tr.events()[0];
        assert_eq!(ev.d_q, -8);
        assert_eq!(ev.alternative, Some(Alternative::LowerPotential));
        assert!(ev.mass_defect < 1e-12 && ev.flux_defect < 1e-12);
    }

    #[test]
    fn parallel_fronts_never_meet() {
        let m = ld_ld();
        let g = GridSpec::new(3);
        let data = StepData::new(vec![0.0, 1.0], vec![vec![16, 4], vec![18, 4], vec![20, 4]]);
        let mut tr = Tracker::init_from_data(&m, &g, &data).unwrap();
        assert!(tr.next_collision().is_none());
    }

    #[test]
    fn same_family_contacts_merge() {
        let m = decoupled(5.0);
        let g = GridSpec::new(2);
        // two family-0 shocks: left one faster
        let data = StepData::new(vec![0.0, 1.0], vec![vec![4, 0], vec![2, 0], vec![0, 0]]);
        let mut tr = Tracker::init_from_data(&m, &g, &data).unwrap();
        tr.run_until(10.0).unwrap();
        assert_eq!(tr.events().len(), 1);
        assert_eq!(tr.events()[0].d_count, -1);
        assert_eq!(tr.events()[0].alternative, Some(Alternative::FewerFronts));
    }

    #[test]
    fn shock_cancels_shard() {
        let m = decoupled(5.0);
        let g = GridSpec::new(1);
        // shock [1, 0] at x=0 overtakes shard [0, 1/2] at x=1
        let data = StepData::new(vec![0.0, 1.0], vec![vec![2, 0], vec![0, 0], vec![1, 0]]);
        let mut tr = Tracker::init_from_data(&m, &g, &data).unwrap();
        tr.run_until(100.0).unwrap();
        let ev = &tr.events()[0];
        assert!((ev.time - 4.0).abs() < 1e-14);
        assert_eq!(ev.d_tv, -2);
        assert_eq!(tr.monitors().count, 1);
        assert_eq!(tr.fronts().next().unwrap().speed(), 0.75);
        assert!(ev.meets_real_thresholds);
    }

    #[test]
    fn rejects_bad_breakpoints() {
        let (m, g) = burgers_grid();
        let data = StepData::new(vec![1.0, 0.0], vec![vec![0, 0]; 3]);
        assert_eq!(Tracker::init_from_data(&m, &g, &data).unwrap_err(), Error::NonMonotoneBreakpoints(1));
        let data = StepData::new(vec![0.0], vec![vec![0, 0], vec![9, 0]]);
        assert!(matches!(Tracker::init_from_data(&m, &g, &data), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn budget_is_enforced() {
        let (m, g) = burgers_grid();
        let data = StepData::new(vec![0.0, 1.0], vec![vec![4, 0], vec![2, 0], vec![0, 0]]);
        let cfg = TrackerConfig { budget: Some(0), ..TrackerConfig::default() };
        let mut tr = Tracker::with_config(&m, &g, &data, cfg).unwrap();
        assert_eq!(tr.run_until(10.0), Err(Error::EventBudgetExceeded { budget: 0 }));
    }
}
