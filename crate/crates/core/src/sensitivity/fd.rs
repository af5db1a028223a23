use serde::{Deserialize, Serialize};

use super::{integral_shift, IntegralShift, ShiftAssignment};
use crate::error::{Error, Result};
use crate::linalg::{add, scale, sub};
use crate::models::SystemModel;
use crate::riemann::GridSpec;
use crate::tracker::{StepData, Tracker, Trajectory};

/// A run from shifted initial data together with the correspondence of its
/// fronts to the unshifted run.
#[derive(Debug, Clone)]
pub struct ShiftedRun {
    pub traj: Trajectory,
    /// `base_id[k]` is the front of the unshifted run matching front `k`.
    pub base_id: Vec<usize>,
}

fn reorder(msg: impl Into<String>) -> Error {
    Error::EventReorder(msg.into())
}

/// Runs the tracker on data whose initial fronts sit at `y_α + θ ξ_α`, up to
/// `t_end`, and checks that every interaction before `t_end` involves the
/// same fronts as in `base`.
pub fn perturbed_trajectory(base: &Trajectory, assignment: &ShiftAssignment, theta: f64, t_end: f64) -> Result<ShiftedRun> {
    assignment.check(base)?;
    let fronts = base.fronts();
    let initial = base.initial_ids();
    let shifted: Vec<f64> = initial.iter().map(|id| fronts[*id].x0 + theta * assignment.rate(*id)).collect();
    if shifted.windows(2).any(|w| w[1] < w[0]) {
        return Err(reorder("initial fronts change order"));
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut states = vec![base.left_state().clone()];
    for (id, x) in initial.iter().zip(&shifted) {
        if xs.last() == Some(x) {
            *states.last_mut().unwrap() = fronts[*id].wave.right.clone();
        } else {
            xs.push(*x);
            states.push(fronts[*id].wave.right.clone());
        }
    }
    let traj = Tracker::simulate(base.model(), base.grid(), &StepData::new(xs, states), t_end)?;

    let same_wave = |a: usize, b: usize| {
        let (wa, wb) = (&traj.fronts()[a].wave, &fronts[b].wave);
        wa.family == wb.family && wa.kind == wb.kind && wa.left == wb.left && wa.right == wb.right
    };
    let mut base_id = vec![usize::MAX; traj.fronts().len()];
    if traj.initial_ids().len() != initial.len() {
        return Err(reorder("initial fans differ"));
    }
    for (p, b) in traj.initial_ids().iter().zip(initial) {
        if !same_wave(*p, *b) {
            return Err(reorder("initial fans differ"));
        }
        base_id[*p] = *b;
    }
    let mut ended_at = vec![usize::MAX; fronts.len()];
    for (k, e) in base.events().iter().enumerate() {
        for id in &e.incoming {
            ended_at[*id] = k;
        }
    }
    for e in traj.events() {
        let mapped: Vec<usize> = e.incoming.iter().map(|id| base_id[*id]).collect();
        let k = ended_at[mapped[0]];
        if k == usize::MAX || mapped.iter().any(|b| ended_at[*b] != k) {
            return Err(reorder(format!("interaction at t = {} regroups fronts", e.time)));
        }
        let be = &base.events()[k];
        if be.incoming.len() != mapped.len() || be.outgoing.len() != e.outgoing.len() {
            return Err(reorder(format!("interaction at t = {} changes its fan", e.time)));
        }
        for (p, b) in e.outgoing.iter().zip(&be.outgoing) {
            if !same_wave(*p, *b) {
                return Err(reorder(format!("interaction at t = {} changes its fan", e.time)));
            }
            base_id[*p] = *b;
        }
    }
    let base_count = base.events().iter().filter(|e| e.time < t_end).count();
    if base_count != traj.events().len() {
        return Err(reorder(format!("{} interactions before t = {t_end} instead of {base_count}", traj.events().len())));
    }
    Ok(ShiftedRun { traj, base_id })
}

/// `-(1/θ) ∫_{-∞}^x (u^θ(t) - u(t)) dy` from two tracker runs; exact for
/// the piecewise constant profiles.
pub fn fd_integral_shift_from(base: &Trajectory, assignment: &ShiftAssignment, t: f64, theta: f64) -> Result<IntegralShift> {
    let n = base.model().dim();
    if assignment.is_zero() {
        return Ok(IntegralShift::zero(t, n));
    }
    let run = perturbed_trajectory(base, assignment, theta, t)?;
    let p0 = base.profile_at(t)?;
    let p1 = run.traj.profile_at(t)?;
    let mut knots: Vec<f64> = p0.xs.iter().chain(&p1.xs).copied().collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let (model, grid) = (base.model(), base.grid());
    let mut acc = vec![0.0; n];
    let mut values = Vec::with_capacity(knots.len());
    for k in 0..knots.len() {
        values.push(scale(&acc, -1.0 / theta));
        if k + 1 < knots.len() {
            let mid = 0.5 * (knots[k] + knots[k + 1]);
            let d = sub(&model.to_conserved(&grid.to_real(p1.at(mid))), &model.to_conserved(&grid.to_real(p0.at(mid))));
            acc = add(&acc, &scale(&d, knots[k + 1] - knots[k]));
        }
    }
    Ok(IntegralShift { t, dim: n, knots, left: values.clone(), right: values })
}

/// Reference integral shift from `data` run directly.
pub fn fd_integral_shift(model: &SystemModel, grid: &GridSpec, data: &StepData, assignment: &ShiftAssignment, t: f64, theta: f64) -> Result<IntegralShift> {
    let base = Tracker::simulate(model, grid, data, t)?;
    fd_integral_shift_from(&base, assignment, t, theta)
}

/// Defects `‖v - v_θ‖_{L¹}` over a θ sweep and the log-log slopes between
/// consecutive θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonReport {
    pub t: f64,
    pub thetas: Vec<f64>,
    pub defects: Vec<f64>,
    /// `None` when a defect vanishes.
    pub slopes: Vec<Option<f64>>,
}

impl RichardsonReport {
    pub fn slopes_within(&self, lo: f64, hi: f64) -> bool {
        !self.slopes.is_empty() && self.slopes.iter().all(|s| s.is_some_and(|s| s >= lo && s <= hi))
    }

    pub fn max_defect(&self) -> f64 {
        self.defects.iter().copied().fold(0.0, f64::max)
    }
}

pub fn richardson(base: &Trajectory, assignment: &ShiftAssignment, t: f64, thetas: &[f64]) -> Result<RichardsonReport> {
    let v = integral_shift(base, t, assignment)?;
    let defects = thetas
        .iter()
        .map(|th| Ok(v.l1_distance(&fd_integral_shift_from(base, assignment, t, *th)?)))
        .collect::<Result<Vec<f64>>>()?;
    let slopes = log_slopes(thetas, &defects);
    Ok(RichardsonReport { t, thetas: thetas.to_vec(), defects, slopes })
}

/// Log-log slopes between consecutive `(θ, defect)` pairs; `None` where a
/// defect vanishes.
pub fn log_slopes(thetas: &[f64], defects: &[f64]) -> Vec<Option<f64>> {
    defects
        .windows(2)
        .zip(thetas.windows(2))
        .map(|(d, th)| (d[0] > 0.0 && d[1] > 0.0).then(|| (d[0] / d[1]).ln() / (th[0] / th[1]).ln()))
        .collect()
}
