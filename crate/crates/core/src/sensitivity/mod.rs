//! First-order response of a front-tracking solution to shifts of its
//! initial jumps.
//!
//! Two independent routes compute the integral shift function `v(t, ·)`:
//! the closed projection formula evaluated from backward characteristics
//! ([`integral_shift`]) and conservation chained through the event log
//! ([`chained_integral_shift`]). [`fd_integral_shift`] differences two
//! tracker runs and serves as the reference for both.

mod fd;
mod involution;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::characteristics::{trace_back, Foot};
use crate::error::{Error, Result};
use crate::linalg::{abs_linear_integral, add, columns, lstsq, norm, rank, scale, sub};
use crate::riemann::{frame_vectors_w, projection_p};
use crate::tracker::{Side, Trajectory};

pub use fd::{fd_integral_shift, fd_integral_shift_from, log_slopes, perturbed_trajectory, richardson, RichardsonReport, ShiftedRun};
pub use involution::{check_involution, descendant, involution_shift_assignment, shift_ode_bound_check, strip_at, ShiftOdeCheck};

/// Shift rates `ξ_α` keyed by initial front id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShiftAssignment {
    pub rates: BTreeMap<usize, f64>,
}

impl ShiftAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, id: usize, rate: f64) -> Self {
        self.rates.insert(id, rate);
        self
    }

    pub fn rate(&self, id: usize) -> f64 {
        self.rates.get(&id).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.rates.values().all(|r| *r == 0.0)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &ShiftAssignment, b: f64) -> ShiftAssignment {
        let mut rates = BTreeMap::new();
        for id in self.rates.keys().chain(other.rates.keys()) {
            rates.insert(*id, a * self.rate(*id) + b * other.rate(*id));
        }
        ShiftAssignment { rates }
    }

    pub fn check(&self, traj: &Trajectory) -> Result<()> {
        match self.rates.keys().find(|id| !traj.initial_ids().contains(id)) {
            Some(id) => Err(Error::UnknownFront(*id)),
            None => Ok(()),
        }
    }
}

/// Piecewise linear vector function of `x`, zero at `-∞`: linear from
/// `right[k]` at `knots[k]` to `left[k+1]` at `knots[k+1]`, constant
/// outside the knots. Functions built from front positions alone are
/// piecewise constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralShift {
    pub t: f64,
    pub dim: usize,
    pub knots: Vec<f64>,
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

impl IntegralShift {
    pub fn zero(t: f64, dim: usize) -> Self {
        IntegralShift { t, dim, knots: Vec::new(), left: Vec::new(), right: Vec::new() }
    }

    pub fn value(&self, x: f64, side: Side) -> Vec<f64> {
        let n = self.knots.len();
        if n == 0 {
            return vec![0.0; self.dim];
        }
        let k = self.knots.partition_point(|p| *p < x);
        if k < n && self.knots[k] == x {
            return match side {
                Side::Left => self.left[k].clone(),
                Side::Right => self.right[k].clone(),
            };
        }
        if k == 0 {
            return self.left[0].clone();
        }
        if k == n {
            return self.right[n - 1].clone();
        }
        let (x0, x1) = (self.knots[k - 1], self.knots[k]);
        let s = (x - x0) / (x1 - x0);
        add(&scale(&self.right[k - 1], 1.0 - s), &scale(&self.left[k], s))
    }

    /// Value far to the right.
    pub fn far_right(&self) -> Vec<f64> {
        self.right.last().cloned().unwrap_or_else(|| vec![0.0; self.dim])
    }

    fn abs_integral(f: &IntegralShift, g: Option<&IntegralShift>, a: f64, b: f64) -> f64 {
        let mut cuts: Vec<f64> = f.knots.iter().chain(g.map_or(&[][..], |g| &g.knots[..])).copied().filter(|x| *x > a && *x < b).collect();
        cuts.push(a);
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let diff = |x: f64, side: Side| match g {
            Some(g) => sub(&f.value(x, side), &g.value(x, side)),
            None => f.value(x, side),
        };
        let mut total = 0.0;
        for p in cuts.windows(2) {
            let len = p[1] - p[0];
            if len <= 0.0 {
                continue;
            }
            let lo = diff(p[0], Side::Right);
            let hi = diff(p[1], Side::Left);
            for c in 0..f.dim {
                total += abs_linear_integral(lo[c], (hi[c] - lo[c]) / len, len);
            }
        }
        total
    }

    fn hull(&self, other: Option<&IntegralShift>) -> Option<(f64, f64)> {
        let all = self.knots.iter().chain(other.map_or(&[][..], |g| &g.knots[..]));
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    }

    /// Exact `∫ |v - other|_1` over the hull of both knot sets.
    pub fn l1_distance(&self, other: &IntegralShift) -> f64 {
        match self.hull(Some(other)) {
            Some((a, b)) => Self::abs_integral(self, Some(other), a, b),
            None => 0.0,
        }
    }

    /// `∫_a^b |v|_1`.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        Self::abs_integral(self, None, a, b)
    }

    /// `∫ |v|_1` over the knot hull.
    pub fn total_mass(&self) -> f64 {
        match self.hull(None) {
            Some((a, b)) => self.mass_in(a, b),
            None => 0.0,
        }
    }

    /// Rows `x, v_1, ..., v_n`, two per knot (left and right limits).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let head: Vec<String> = (0..self.dim).map(|c| format!("v{c}")).collect();
        writeln!(out, "x,{}", head.join(","))?;
        for (k, x) in self.knots.iter().enumerate() {
            for v in [&self.left[k], &self.right[k]] {
                let vals: Vec<String> = v.iter().map(|c| c.to_string()).collect();
                writeln!(out, "{x},{}", vals.join(","))?;
            }
        }
        Ok(())
    }
}

/// Outgoing shift rates from `Σ ξ'_β σ'_β = Σ ξ_α σ_α`.
pub fn resolve_interaction_shifts(incoming: &[(Vec<f64>, f64)], outgoing: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = incoming.first().map(|(s, _)| s.len()).or(outgoing.first().map(Vec::len)).unwrap_or(0);
    let mut target = vec![0.0; n];
    let mut mag: f64 = 0.0;
    for (s, xi) in incoming {
        target = add(&target, &scale(s, *xi));
        mag = mag.max(norm(s) * xi.abs());
    }
    let (coef, _) = lstsq(outgoing, &target, 1e-10).ok_or(Error::DependentOutgoing)?;
    let mut back = vec![0.0; n];
    for (s, c) in outgoing.iter().zip(&coef) {
        back = add(&back, &scale(s, *c));
    }
    let residual = norm(&sub(&back, &target)) / mag.max(f64::MIN_POSITIVE);
    if mag > 0.0 && residual > 1e-10 {
        return Err(Error::ShiftResidual { residual });
    }
    Ok(coef)
}

/// Post-interaction rates `(ξ̄', ξ')` of a sheaf of parallel contacts
/// (speed `Λ̄`, rate `ξ̄`) crossed by one front (speed `Λ`, rate `ξ`).
///
/// Oracle-normalized: the denominator is `Λ̄ - Λ`, and the second numerator
/// uses `Λ' - Λ̄`, which makes a rigid translation `ξ̄ = ξ` invariant.
pub fn sheaf_interaction_shifts(xi_bar: f64, xi: f64, lam_bar: f64, lam: f64, lam_bar_after: f64, lam_after: f64) -> Result<(f64, f64)> {
    let den = lam_bar - lam;
    if den.abs() <= 1e-14 * (lam_bar.abs() + lam.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::ParallelSpeeds);
    }
    // same quotients, arranged so equal rates pass through untouched
    let bar = xi_bar + (xi_bar - xi) * (lam_bar_after - lam_bar) / den;
    let front = xi + (xi_bar - xi) * (lam_after - lam) / den;
    Ok((bar, front))
}

/// Data needed to evaluate `P(x, y)` for every initial jump at a fixed
/// probe `(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftContext {
    pub t: f64,
    pub x: f64,
    /// `w(t, x)` in real coordinates.
    pub w: Vec<f64>,
    /// Backward characteristic feet, one per family.
    pub feet: Vec<Foot>,
}

impl ShiftContext {
    pub fn new(traj: &Trajectory, t: f64, x: f64) -> Result<Self> {
        let profile = traj.profile_at(t)?;
        let tol = 1e-12 * x.abs().max(1.0);
        if profile.xs.iter().any(|p| (p - x).abs() <= tol) {
            return Err(Error::ProbeOnFront { x });
        }
        let w = traj.grid().to_real(profile.at(x));
        let feet = (0..traj.model().dim())
            .map(|i| trace_back(traj, i, t, x, Side::Right).map(|p| p.foot.expect("backward trace reaches t = 0")))
            .collect::<Result<_>>()?;
        Ok(ShiftContext { t, x, w, feet })
    }

    /// `j(y)` for the initial jump at `slot`, counted from one as in
    /// `x_j ≤ y < x_{j-1}`.
    pub fn j_index(&self, slot: usize) -> usize {
        1 + self.feet.iter().filter(|f| f.rank > slot).count()
    }

    /// `(w_l, w_m, w_r)` for a `k`-jump from `w_minus` to `w_plus` at `slot`.
    pub fn states(&self, slot: usize, k: usize, w_minus: &[f64], w_plus: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.w.len();
        let jm = self.j_index(slot) - 1;
        let w_l = (0..n).map(|f| if f < jm { w_minus[f] } else { self.w[f] }).collect();
        let w_r = (0..n).map(|f| if f < jm { self.w[f] } else { w_plus[f] }).collect();
        let w_m = (0..n)
            .map(|f| {
                if k < jm {
                    if f == k || f >= jm {
                        w_plus[f]
                    } else {
                        self.w[f]
                    }
                } else if f < jm {
                    self.w[f]
                } else if f == k {
                    w_minus[f]
                } else {
                    w_plus[f]
                }
            })
            .collect();
        (w_l, w_m, w_r)
    }

    /// `P(x, y)` for the initial front `id` of `traj`.
    pub fn p_vector(&self, traj: &Trajectory, id: usize) -> Result<Vec<f64>> {
        let slot = traj.initial_ids().iter().position(|i| *i == id).ok_or(Error::UnknownFront(id))?;
        let front = &traj.fronts()[id];
        let grid = traj.grid();
        let model = traj.model();
        let w_minus = grid.to_real(&front.wave.left);
        let w_plus = grid.to_real(&front.wave.right);
        let sigma = sub(&model.to_conserved(&w_plus), &model.to_conserved(&w_minus));
        let n = model.dim();
        let j = self.j_index(slot);
        if j == 1 {
            return Ok(vec![0.0; n]);
        }
        let k = front.wave.family;
        let (w_l, w_m, w_r) = self.states(slot, k, &w_minus, &w_plus);
        let left = frame_vectors_w(model, &w_l, &w_m)?;
        let right = frame_vectors_w(model, &w_m, &w_r)?;
        if k < j - 1 {
            let a = projection_p(&left, j - 1, &sigma);
            Ok(add(&a, &projection_p(&right, j - 1, &sub(&sigma, &a))))
        } else {
            Ok(projection_p(&left, j - 1, &projection_p(&right, j - 1, &sigma)))
        }
    }
}

/// `P(x, y)` for one initial front, evaluated at the probe `(t, x)`.
pub fn shift_vector_p(traj: &Trajectory, t: f64, x: f64, id: usize) -> Result<Vec<f64>> {
    ShiftContext::new(traj, t, x)?.p_vector(traj, id)
}

fn probe_points(xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let span = match (xs.first(), xs.last()) {
        (Some(a), Some(b)) => (b - a).max(1.0),
        _ => 1.0,
    };
    let tol = 1e-12 * span;
    let mut knots: Vec<f64> = Vec::new();
    for x in xs {
        if knots.last().is_none_or(|k| x - k > tol) {
            knots.push(*x);
        }
    }
    let mut probes = Vec::with_capacity(knots.len() + 1);
    if let Some(first) = knots.first() {
        probes.push(first - span);
        for w in knots.windows(2) {
            probes.push(0.5 * (w[0] + w[1]));
        }
        probes.push(knots.last().unwrap() + span);
    }
    (knots, probes)
}

fn from_pieces(t: f64, dim: usize, knots: Vec<f64>, values: Vec<Vec<f64>>) -> IntegralShift {
    let left = values[..knots.len()].to_vec();
    let right = values[1..].to_vec();
    IntegralShift { t, dim, knots, left, right }
}

fn check_probe_time(traj: &Trajectory, t: f64) -> Result<()> {
    if traj.is_interaction_time(t, 1e-12 * t.abs().max(1.0)) {
        return Err(Error::ProbeAtInteractionTime(t));
    }
    Ok(())
}

/// `v(t, x) = Σ_α P(x, y_α) ξ_α`, evaluated on every interval between the
/// fronts alive at `t`.
pub fn integral_shift(traj: &Trajectory, t: f64, assignment: &ShiftAssignment) -> Result<IntegralShift> {
    assignment.check(traj)?;
    check_probe_time(traj, t)?;
    let n = traj.model().dim();
    if assignment.is_zero() {
        return Ok(IntegralShift::zero(t, n));
    }
    let profile = traj.profile_at(t)?;
    let (knots, probes) = probe_points(&profile.xs);
    if knots.is_empty() {
        return Ok(IntegralShift::zero(t, n));
    }
    let mut values = Vec::with_capacity(probes.len());
    for x in probes {
        let ctx = ShiftContext::new(traj, t, x)?;
        let mut v = vec![0.0; n];
        for (id, xi) in &assignment.rates {
            if *xi != 0.0 {
                v = add(&v, &scale(&ctx.p_vector(traj, *id)?, *xi));
            }
        }
        values.push(v);
    }
    Ok(from_pieces(t, n, knots, values))
}

/// Shift rate of every front, chained through the interaction log. Several
/// outgoing fronts of one family leave an interaction from one point and
/// share a rate.
pub fn front_shifts(traj: &Trajectory, assignment: &ShiftAssignment) -> Result<Vec<f64>> {
    assignment.check(traj)?;
    let fronts = traj.fronts();
    let (model, grid) = (traj.model(), traj.grid());
    let mut xi = vec![0.0; fronts.len()];
    for id in traj.initial_ids() {
        xi[*id] = assignment.rate(*id);
    }
    for e in traj.events() {
        let incoming: Vec<(Vec<f64>, f64)> = e.incoming.iter().map(|id| (fronts[*id].wave.jump(model, grid), xi[*id])).collect();
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for id in &e.outgoing {
            let fam = fronts[*id].wave.family;
            match groups.last_mut() {
                Some((f, ids)) if *f == fam => ids.push(*id),
                _ => groups.push((fam, vec![*id])),
            }
        }
        let jumps: Vec<Vec<f64>> = groups
            .iter()
            .map(|(_, ids)| ids.iter().map(|id| fronts[*id].wave.jump(model, grid)).fold(vec![0.0; model.dim()], |a, b| add(&a, &b)))
            .collect();
        let rates = resolve_interaction_shifts(&incoming, &jumps)?;
        for ((_, ids), r) in groups.iter().zip(rates) {
            for id in ids {
                xi[*id] = r;
            }
        }
    }
    Ok(xi)
}

/// `v(t, ·)` as the running sum of `σ_β ξ_β` over the fronts alive at `t`.
pub fn chained_integral_shift(traj: &Trajectory, t: f64, assignment: &ShiftAssignment) -> Result<IntegralShift> {
    check_probe_time(traj, t)?;
    let xi = front_shifts(traj, assignment)?;
    let n = traj.model().dim();
    let profile = traj.profile_at(t)?;
    let (knots, _) = probe_points(&profile.xs);
    let fronts = traj.fronts();
    let mut values = vec![vec![0.0; n]];
    let mut acc = vec![0.0; n];
    let mut k = 0;
    for knot in &knots {
        while k < profile.xs.len() && profile.xs[k] - knot <= 1e-12 * knot.abs().max(1.0) {
            let f = &fronts[profile.ids[k]];
            acc = add(&acc, &scale(&f.wave.jump(traj.model(), traj.grid()), xi[f.id]));
            k += 1;
        }
        values.push(acc.clone());
    }
    Ok(from_pieces(t, n, knots, values))
}

/// Rank and speed-strength residuals at one transversal interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransversalCheck {
    pub event: usize,
    /// Rank of `{σ_i, σ_j, σ_i', σ_j'}`; two when the spans coincide.
    pub span_rank: usize,
    /// Relative residuals of the two speed-strength identities.
    pub residuals: [f64; 2],
}

/// Checks every transversal two-front interaction of `traj`.
///
/// Oracle-normalized identities, with `i` the lower family (the right
/// incoming front): `σ_i(Λ_i - Λ_j) = σ_i'(Λ_i' - Λ_j) + σ_j'(Λ_j' - Λ_j)`
/// and `σ_j(Λ_j - Λ_i) = σ_i'(Λ_i' - Λ_i) + σ_j'(Λ_j' - Λ_i)`.
pub fn transversal_relations(traj: &Trajectory) -> Vec<TransversalCheck> {
    let fronts = traj.fronts();
    let (model, grid) = (traj.model(), traj.grid());
    let mut out = Vec::new();
    for (idx, e) in traj.events().iter().enumerate() {
        if !e.is_transversal(fronts) || e.outgoing.len() != 2 {
            continue;
        }
        let fj = &fronts[e.incoming[0]];
        let fi = &fronts[e.incoming[1]];
        let find = |fam: usize| e.outgoing.iter().map(|id| &fronts[*id]).find(|f| f.wave.family == fam);
        let (Some(fi2), Some(fj2)) = (find(fi.wave.family), find(fj.wave.family)) else {
            continue;
        };
        let (si, sj, si2, sj2) = (fi.wave.jump(model, grid), fj.wave.jump(model, grid), fi2.wave.jump(model, grid), fj2.wave.jump(model, grid));
        let (li, lj, li2, lj2) = (fi.speed(), fj.speed(), fi2.speed(), fj2.speed());
        let span_rank = rank(&columns(&[si.clone(), sj.clone(), si2.clone(), sj2.clone()], model.dim()), 1e-8);
        let rel = |lhs: Vec<f64>, a: Vec<f64>, b: Vec<f64>| {
            let s = norm(&lhs).max(norm(&a)).max(norm(&b)).max(f64::MIN_POSITIVE);
            norm(&sub(&lhs, &add(&a, &b))) / s
        };
        let r1 = rel(scale(&si, li - lj), scale(&si2, li2 - lj), scale(&sj2, lj2 - lj));
        let r2 = rel(scale(&sj, lj - li), scale(&si2, li2 - li), scale(&sj2, lj2 - li));
        out.push(TransversalCheck { event: idx, span_rank, residuals: [r1, r2] });
    }
    out
}
