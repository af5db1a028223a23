use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{kind_tag, Front, InteractionRecord, Monitors, StepData};
use crate::error::{Error, Result};
use crate::linalg::norm1;
use crate::models::SystemModel;
use crate::riemann::{GridSpec, GridState};

const CHECKPOINT_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Complete record of a tracker run: every front ever created, the initial
/// ordering and the interaction log. Immutable once built.
#[derive(Debug, Clone)]
pub struct Trajectory {
    model: SystemModel,
    grid: GridSpec,
    data: StepData,
    fronts: Vec<Front>,
    initial: Vec<usize>,
    events: Vec<InteractionRecord>,
    end_time: f64,
    initial_monitors: Monitors,
    checkpoints: Vec<Vec<usize>>,
}

impl Trajectory {
    #[allow(clippy::too_many_arguments)]
    pub(super) fn new(
        model: SystemModel,
        grid: GridSpec,
        data: StepData,
        fronts: Vec<Front>,
        initial: Vec<usize>,
        events: Vec<InteractionRecord>,
        end_time: f64,
        initial_monitors: Monitors,
    ) -> Self {
        let mut tr = Trajectory {
            model,
            grid,
            data,
            fronts,
            initial,
            events,
            end_time,
            initial_monitors,
            checkpoints: Vec::new(),
        };
        let mut cursor = Replay { order: tr.initial.clone(), applied: 0 };
        tr.checkpoints.push(cursor.order.clone());
        while cursor.applied < tr.events.len() {
            cursor.forward(&tr.events);
            if cursor.applied.is_multiple_of(CHECKPOINT_EVERY) {
                tr.checkpoints.push(cursor.order.clone());
            }
        }
        tr
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &StepData {
        &self.data
    }

    pub fn fronts(&self) -> &[Front] {
        &self.fronts
    }

    pub fn front(&self, id: usize) -> Result<&Front> {
        self.fronts.get(id).ok_or(Error::UnknownFront(id))
    }

    /// Fronts present at time zero, left to right.
    pub fn initial_ids(&self) -> &[usize] {
        &self.initial
    }

    pub fn events(&self) -> &[InteractionRecord] {
        &self.events
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn initial_monitors(&self) -> Monitors {
        self.initial_monitors
    }

    pub fn left_state(&self) -> &GridState {
        &self.data.states[0]
    }

    pub fn right_state(&self) -> &GridState {
        self.data.states.last().expect("at least one state")
    }

    /// Number of events with time `<= t`.
    pub fn events_through(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }

    /// Whether some interaction happens within `tol` of `t`.
    pub fn is_interaction_time(&self, t: f64, tol: f64) -> bool {
        let k = self.events.partition_point(|e| e.time < t - tol);
        k < self.events.len() && self.events[k].time <= t + tol
    }

    /// Cursor positioned after the first `applied` events.
    pub fn replay_at(&self, applied: usize) -> Replay {
        let applied = applied.min(self.events.len());
        let cp = applied / CHECKPOINT_EVERY;
        let mut cursor = Replay { order: self.checkpoints[cp].clone(), applied: cp * CHECKPOINT_EVERY };
        while cursor.applied < applied {
            cursor.forward(&self.events);
        }
        cursor
    }

    /// Ordered live front ids at time `t` (interactions at `t` already applied).
    pub fn order_at(&self, t: f64) -> Result<Vec<usize>> {
        self.check_span(t)?;
        Ok(self.replay_at(self.events_through(t)).order)
    }

    fn check_span(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.end_time.abs().max(1.0);
        if !(t >= 0.0 && t <= self.end_time + slack) {
            return Err(Error::OutOfSpan { t, end: self.end_time });
        }
        Ok(())
    }

    pub fn profile_at(&self, t: f64) -> Result<StepProfile> {
        let order = self.order_at(t)?;
        Ok(self.profile_from_order(t, &order))
    }

    pub(crate) fn profile_from_order(&self, t: f64, order: &[usize]) -> StepProfile {
        let mut xs = Vec::with_capacity(order.len());
        let mut states = Vec::with_capacity(order.len() + 1);
        states.push(self.left_state().clone());
        for id in order {
            let f = &self.fronts[*id];
            xs.push(f.position(t));
            states.push(f.wave.right.clone());
        }
        StepProfile { t, xs, states, ids: order.to_vec() }
    }

    /// Grid state at `x-` or `x+` at time `t`.
    pub fn sample(&self, t: f64, x: f64, side: Side) -> Result<GridState> {
        Ok(self.profile_at(t)?.sample(x, side).clone())
    }

    /// Monitors after each event, starting with the initial ones at `t = 0`.
    pub fn monitor_series(&self) -> Vec<(f64, Monitors)> {
        std::iter::once((0.0, self.initial_monitors)).chain(self.events.iter().map(|e| (e.time, e.after))).collect()
    }

    /// One row per interaction.
    pub fn write_event_log<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,x,alternative,d_tv_units,d_q_units,d_count,incoming,outgoing")?;
        for e in &self.events {
            let ids = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.time,
                e.x,
                e.alternative.map_or("none", |a| a.label()),
                e.d_tv,
                e.d_q,
                e.d_count,
                ids(&e.incoming),
                ids(&e.outgoing)
            )?;
        }
        Ok(())
    }

    /// Two rows per front: where it starts and where it ends.
    pub fn write_trajectory_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "front,family,kind,strength_units,t,x")?;
        for f in &self.fronts {
            let end = f.t1.unwrap_or(self.end_time);
            for t in [f.t0, end] {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    f.id,
                    f.wave.family,
                    kind_tag(f.wave.kind),
                    f.wave.strength(),
                    t,
                    f.position(t)
                )?;
            }
        }
        Ok(())
    }
}

/// Ordered front ids after a given number of events; steps either way
/// through the interaction log by splicing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replay {
    pub order: Vec<usize>,
    pub applied: usize,
}

impl Replay {
    pub fn forward(&mut self, events: &[InteractionRecord]) {
        let e = &events[self.applied];
        self.order.splice(e.slot..e.slot + e.incoming.len(), e.outgoing.iter().copied());
        self.applied += 1;
    }

    pub fn backward(&mut self, events: &[InteractionRecord]) {
        let e = &events[self.applied - 1];
        self.order.splice(e.slot..e.slot + e.outgoing.len(), e.incoming.iter().copied());
        self.applied -= 1;
    }
}

/// Piecewise constant snapshot: `states[k]` holds between `xs[k-1]` and
/// `xs[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    pub t: f64,
    pub xs: Vec<f64>,
    pub states: Vec<GridState>,
    pub ids: Vec<usize>,
}

impl StepProfile {
    pub fn sample(&self, x: f64, side: Side) -> &GridState {
        let k = match side {
            Side::Left => self.xs.partition_point(|p| *p < x),
            Side::Right => self.xs.partition_point(|p| *p <= x),
        };
        &self.states[k]
    }

    /// State on the open interval containing `x`, which must not be a
    /// breakpoint.
    pub fn at(&self, x: f64) -> &GridState {
        self.sample(x, Side::Right)
    }

    /// Pieces `(lo, hi, state)` covering `[a, b]`.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, &GridState)> {
        let mut out = Vec::new();
        let mut lo = a;
        let start = self.xs.partition_point(|p| *p <= a);
        for k in start..=self.xs.len() {
            let hi = if k < self.xs.len() { self.xs[k].min(b) } else { b };
            if hi > lo {
                out.push((lo, hi, &self.states[k]));
            }
            lo = lo.max(hi);
            if lo >= b {
                break;
            }
        }
        out
    }

    /// `∫_a^b u dx` in conserved variables.
    pub fn integral(&self, model: &SystemModel, grid: &GridSpec, a: f64, b: f64) -> Vec<f64> {
        let mut acc = vec![0.0; model.dim()];
        for (lo, hi, w) in self.pieces(a, b) {
            let u = model.to_conserved(&grid.to_real(w));
            for (s, v) in acc.iter_mut().zip(&u) {
                *s += v * (hi - lo);
            }
        }
        acc
    }

    /// Exact `∫_a^b g(w_1(x), w_2(x)) dx` over the merged breakpoints of two
    /// profiles.
    pub fn merged_integral(&self, other: &StepProfile, a: f64, b: f64, g: impl Fn(&GridState, &GridState) -> f64) -> f64 {
        let mut cuts: Vec<f64> = self.xs.iter().chain(&other.xs).copied().filter(|x| *x > a && *x < b).collect();
        cuts.push(a);
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .map(|p| {
                let mid = 0.5 * (p[0] + p[1]);
                (p[1] - p[0]) * g(self.at(mid), other.at(mid))
            })
            .sum()
    }

    /// `‖u_1 - u_2‖_{L¹(a,b)}` with the 1-norm on conserved vectors.
    pub fn l1_distance(&self, other: &StepProfile, model: &SystemModel, grid: &GridSpec, a: f64, b: f64) -> f64 {
        self.merged_integral(other, a, b, |w1, w2| {
            let u1 = model.to_conserved(&grid.to_real(w1));
            let u2 = model.to_conserved(&grid.to_real(w2));
            norm1(&crate::linalg::sub(&u1, &u2))
        })
    }

    /// `‖w_{1,k} - w_{2,k}‖_{L¹(a,b)}` for one Riemann coordinate.
    pub fn l1_distance_coord(&self, other: &StepProfile, grid: &GridSpec, k: usize, a: f64, b: f64) -> f64 {
        let unit = grid.unit();
        self.merged_integral(other, a, b, |w1, w2| ((w1[k] - w2[k]).abs() as f64) * unit)
    }
}

#[cfg(test)]
mod tests {
    use super::super::Tracker;
    use super::*;
    use crate::models::builtin::decoupled;

    #[test]
    fn sample_sides_and_far_field() {
        let m = decoupled(5.0);
        let g = GridSpec::new(2);
        let data = StepData::new(vec![0.0], vec![vec![4, 0], vec![0, 0]]);
        let tr = Tracker::simulate(&m, &g, &data, 2.0).unwrap();
        assert_eq!(tr.sample(2.0, 1.0, Side::Left).unwrap(), vec![4, 0]);
        assert_eq!(tr.sample(2.0, 1.0, Side::Right).unwrap(), vec![0, 0]);
        assert_eq!(tr.sample(2.0, -50.0, Side::Right).unwrap(), vec![4, 0]);
        assert_eq!(tr.sample(2.0, 50.0, Side::Left).unwrap(), vec![0, 0]);
        assert!(matches!(tr.sample(2.5, 0.0, Side::Left), Err(Error::OutOfSpan { .. })));
    }

    #[test]
    fn mid_fan_sample_is_intermediate_state() {
        let m = decoupled(5.0);
        let g = GridSpec::new(2);
        let data = StepData::new(vec![0.0], vec![vec![0, 0], vec![2, 0]]);
        let tr = Tracker::simulate(&m, &g, &data, 4.0).unwrap();
        // shards at speeds 1/8 and 3/8: positions 0.5 and 1.5
        assert_eq!(tr.sample(4.0, 1.0, Side::Left).unwrap(), vec![1, 0]);
    }

    #[test]
    fn replay_backward_undoes_forward() {
        let m = decoupled(5.0);
        let g = GridSpec::new(2);
        let data = StepData::new(vec![0.0, 1.0, 2.0], vec![vec![4, 0], vec![4, 3], vec![2, 3], vec![0, 1]]);
        let tr = Tracker::simulate(&m, &g, &data, 10.0).unwrap();
        assert!(!tr.events().is_empty());
        let mut r = tr.replay_at(tr.events().len());
        while r.applied > 0 {
            r.backward(tr.events());
        }
        assert_eq!(r.order, tr.initial_ids());
    }

    #[test]
    fn l1_distance_of_shifted_step() {
        let m = decoupled(5.0);
        let g = GridSpec::new(2);
        let a = StepProfile { t: 0.0, xs: vec![0.0], states: vec![vec![4, 0], vec![0, 0]], ids: vec![0] };
        let b = StepProfile { t: 0.0, xs: vec![0.25], states: vec![vec![4, 0], vec![0, 0]], ids: vec![0] };
        assert!((a.l1_distance(&b, &m, &g, -1.0, 1.0) - 0.25).abs() < 1e-15);
        assert!((a.l1_distance_coord(&b, &g, 0, -1.0, 1.0) - 0.25).abs() < 1e-15);
    }
}
