//! Characteristic curves through a front-tracking solution.
//!
//! Inside each constant region the `i`-characteristic is a straight line with
//! slope `λ_i`; crossing times with fronts are computed in closed form. A
//! curve that cannot consistently cross a front follows it instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, scale};
use crate::models::FieldKind;
use crate::riemann::{frame_vectors_w, GridState, WaveKind};
use crate::tracker::{InteractionRecord, Replay, Side, Trajectory};

/// Where a backward characteristic lands at time zero. `rank` counts the
/// initial fronts lying to its left, so breakpoints that coincide with the
/// foot are still ordered unambiguously.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Foot {
    pub x: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicPath {
    pub family: usize,
    /// Vertices in increasing time.
    pub vertices: Vec<(f64, f64)>,
    /// `(front id, time)` for every front crossed.
    pub crossings: Vec<(usize, f64)>,
    /// Fronts followed, with the time span spent on each.
    pub rides: Vec<(usize, f64, f64)>,
    pub foot: Option<Foot>,
}

impl CharacteristicPath {
    pub fn end(&self) -> (f64, f64) {
        *self.vertices.last().expect("non-empty path")
    }

    pub fn start(&self) -> (f64, f64) {
        self.vertices[0]
    }

    /// Position at time `t` by linear interpolation between vertices.
    pub fn position(&self, t: f64) -> f64 {
        let k = self.vertices.partition_point(|(s, _)| *s < t);
        if k == 0 {
            return self.vertices[0].1;
        }
        if k == self.vertices.len() {
            return self.end().1;
        }
        let (t0, x0) = self.vertices[k - 1];
        let (t1, x1) = self.vertices[k];
        if t1 == t0 {
            x1
        } else {
            x0 + (x1 - x0) * (t - t0) / (t1 - t0)
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, y: f64, mut out: W) -> Result<()> {
        for (t, x) in &self.vertices {
            writeln!(out, "{},{},{},{}", self.family, y, t, x)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Loc {
    Region(usize),
    Riding(usize, Side),
}

struct Tracer<'a> {
    traj: &'a Trajectory,
    family: usize,
    tol_x: f64,
}

impl<'a> Tracer<'a> {
    fn new(traj: &'a Trajectory, family: usize) -> Self {
        let span = traj.data().xs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        Tracer { traj, family, tol_x: 1e-12 * span.max(traj.end_time().abs()) }
    }

    fn state(&self, order: &[usize], k: usize) -> GridState {
        let fronts = self.traj.fronts();
        if k < order.len() {
            fronts[order[k]].wave.left.clone()
        } else if k > 0 {
            fronts[order[k - 1]].wave.right.clone()
        } else {
            self.traj.left_state().clone()
        }
    }

    fn speed_of(&self, w: &[i64]) -> f64 {
        let m = self.traj.model();
        m.eigenvalue_w(self.family, &self.traj.grid().to_real(w))
    }

    fn region_speed(&self, order: &[usize], k: usize) -> f64 {
        self.speed_of(&self.state(order, k))
    }

    fn speed_tol(&self, s: f64) -> f64 {
        1e-12 * (1.0 + s.abs())
    }

    fn locate(&self, order: &[usize], t: f64, x: f64) -> Loc {
        let fronts = self.traj.fronts();
        Loc::Region(order.partition_point(|id| fronts[*id].position(t) <= x))
    }

    /// Region index that contains `x` right after event `e`, when `x` sits
    /// at the interaction point; `None` if `x` is elsewhere.
    fn at_apex(&self, e: &InteractionRecord, x: f64) -> bool {
        (x - e.x).abs() <= 1e3 * self.tol_x.max(1e-9 * e.x.abs().max(1.0))
    }

    fn forward(&self, y: f64, t0: f64, t_end: f64) -> Result<CharacteristicPath> {
        let traj = self.traj;
        let fronts = traj.fronts();
        let events = traj.events();
        let mut cursor = traj.replay_at(traj.events_through(t0));
        let mut t = t0;
        let mut x = y;
        let mut loc = self.locate(&cursor.order, t, x);
        let mut path = CharacteristicPath { family: self.family, vertices: vec![(t, x)], crossings: vec![], rides: vec![], foot: None };
        let mut ride_start = t;
        loop {
            let te = if cursor.applied < events.len() { events[cursor.applied].time.min(t_end) } else { t_end };
            // free flight or riding until `te`, handling crossings
            loop {
                match loc {
                    Loc::Riding(id, _) => {
                        x = fronts[id].position(te);
                        t = te;
                        break;
                    }
                    Loc::Region(k) => {
                        let lam = self.region_speed(&cursor.order, k);
                        let mut hit: Option<(f64, usize, bool)> = None;
                        if k > 0 {
                            let f = &fronts[cursor.order[k - 1]];
                            let ds = f.speed() - lam;
                            if ds > self.speed_tol(lam) {
                                let gap = x - f.position(t);
                                let tc = t + gap.max(0.0) / ds;
                                hit = Some((tc, k - 1, false));
                            }
                        }
                        if k < cursor.order.len() {
                            let f = &fronts[cursor.order[k]];
                            let ds = lam - f.speed();
                            if ds > self.speed_tol(lam) {
                                let gap = f.position(t) - x;
                                let tc = t + gap.max(0.0) / ds;
                                if hit.is_none_or(|(th, _, _)| tc < th) {
                                    hit = Some((tc, k, true));
                                }
                            }
                        }
                        match hit {
                            Some((tc, slot, to_right)) if tc < te => {
                                let id = cursor.order[slot];
                                t = tc;
                                x = fronts[id].position(tc);
                                path.vertices.push((t, x));
                                let next = if to_right { k + 1 } else { k - 1 };
                                let lam2 = self.region_speed(&cursor.order, next);
                                let s = fronts[id].speed();
                                let ok = if to_right { lam2 >= s - self.speed_tol(s) } else { lam2 <= s + self.speed_tol(s) };
                                if ok {
                                    path.crossings.push((id, t));
                                    loc = Loc::Region(next);
                                } else if fronts[id].wave.family == self.family && fronts[id].wave.kind == WaveKind::Shock {
                                    return Err(Error::GnlShockEncounter { family: self.family, time: t });
                                } else {
                                    ride_start = t;
                                    loc = Loc::Riding(id, if to_right { Side::Left } else { Side::Right });
                                }
                            }
                            _ => {
                                x += lam * (te - t);
                                t = te;
                                break;
                            }
                        }
                    }
                }
            }
            if t >= t_end || cursor.applied >= events.len() {
                if let Loc::Riding(id, _) = loc {
                    path.rides.push((id, ride_start, t));
                }
                if path.end() != (t, x) {
                    path.vertices.push((t, x));
                }
                return Ok(path);
            }
            let e = &events[cursor.applied];
            let before = cursor.order.clone();
            cursor.forward(events);
            let nin = e.incoming.len();
            let nout = e.outgoing.len();
            loc = match loc {
                Loc::Riding(id, side) => {
                    if e.incoming.contains(&id) {
                        path.rides.push((id, ride_start, t));
                        path.vertices.push((t, x));
                        self.forward_apex(&cursor, e, &before, t, &mut ride_start)?
                    } else {
                        Loc::Riding(id, side)
                    }
                }
                Loc::Region(k) => {
                    let inside = k > e.slot && k < e.slot + nin;
                    let touching = (k == e.slot || k == e.slot + nin) && self.at_apex(e, x);
                    if inside || touching {
                        path.vertices.push((t, x));
                        self.forward_apex(&cursor, e, &before, t, &mut ride_start)?
                    } else if k >= e.slot + nin {
                        Loc::Region(k + nout - nin)
                    } else {
                        Loc::Region(k)
                    }
                }
            };
            if let Loc::Riding(id, _) = loc {
                x = fronts[id].position(t);
            } else if matches!(loc, Loc::Region(_)) && self.at_apex(e, x) {
                x = e.x;
            }
        }
    }

    /// Outgoing region consistent with forward motion from the apex.
    fn forward_apex(&self, cursor: &Replay, e: &InteractionRecord, _before: &[usize], t: f64, ride_start: &mut f64) -> Result<Loc> {
        let fronts = self.traj.fronts();
        let nout = e.outgoing.len();
        for m in 0..=nout {
            let k = e.slot + m;
            let lam = self.region_speed(&cursor.order, k);
            let tol = self.speed_tol(lam);
            let lo_ok = m == 0 || lam >= fronts[e.outgoing[m - 1]].speed() - tol;
            let hi_ok = m == nout || lam <= fronts[e.outgoing[m]].speed() + tol;
            if lo_ok && hi_ok {
                return Ok(Loc::Region(k));
            }
        }
        let lam = self.region_speed(&cursor.order, e.slot);
        let same: Vec<usize> = e.outgoing.iter().copied().filter(|id| fronts[*id].wave.family == self.family).collect();
        if let Some(id) = same.iter().copied().find(|id| fronts[*id].wave.kind == WaveKind::RarefactionShard).or(same.first().copied()) {
            if fronts[id].wave.kind == WaveKind::Shock {
                return Err(Error::GnlShockEncounter { family: self.family, time: t });
            }
            *ride_start = t;
            return Ok(Loc::Riding(id, Side::Left));
        }
        Err(Error::CrossingOrderViolation { time: t, detail: format!("no outgoing region fits speed {lam}") })
    }

    fn backward(&self, t_start: f64, x_start: f64, start_side: Side) -> Result<CharacteristicPath> {
        let traj = self.traj;
        let fronts = traj.fronts();
        let events = traj.events();
        let mut cursor = traj.replay_at(traj.events_through(t_start));
        let mut t = t_start;
        let mut x = x_start;
        let mut loc = match start_side {
            Side::Right => self.locate(&cursor.order, t, x),
            Side::Left => Loc::Region(cursor.order.partition_point(|id| fronts[*id].position(t) < x)),
        };
        let mut rev = vec![(t, x)];
        let mut crossings = Vec::new();
        let mut rides = Vec::new();
        let mut ride_end = t;
        loop {
            let ts = if cursor.applied > 0 { events[cursor.applied - 1].time } else { 0.0 };
            loop {
                match loc {
                    Loc::Riding(id, _) => {
                        let born = fronts[id].t0.max(ts);
                        x = fronts[id].position(born);
                        t = born;
                        break;
                    }
                    Loc::Region(k) => {
                        let lam = self.region_speed(&cursor.order, k);
                        let mut hit: Option<(f64, usize, bool)> = None;
                        if k > 0 {
                            let f = &fronts[cursor.order[k - 1]];
                            let ds = lam - f.speed();
                            if ds > self.speed_tol(lam) {
                                let gap = x - f.position(t);
                                hit = Some((t - gap.max(0.0) / ds, k - 1, false));
                            }
                        }
                        if k < cursor.order.len() {
                            let f = &fronts[cursor.order[k]];
                            let ds = f.speed() - lam;
                            if ds > self.speed_tol(lam) {
                                let gap = f.position(t) - x;
                                let tc = t - gap.max(0.0) / ds;
                                if hit.is_none_or(|(th, _, _)| tc > th) {
                                    hit = Some((tc, k, true));
                                }
                            }
                        }
                        match hit {
                            Some((tc, slot, to_right)) if tc > ts => {
                                let id = cursor.order[slot];
                                t = tc;
                                x = fronts[id].position(tc);
                                rev.push((t, x));
                                let next = if to_right { k + 1 } else { k - 1 };
                                let lam2 = self.region_speed(&cursor.order, next);
                                let s = fronts[id].speed();
                                let ok = if to_right { lam2 < s - self.speed_tol(s) } else { lam2 > s + self.speed_tol(s) };
                                if ok {
                                    crossings.push((id, t));
                                    loc = Loc::Region(next);
                                } else {
                                    ride_end = t;
                                    loc = Loc::Riding(id, if to_right { Side::Left } else { Side::Right });
                                }
                            }
                            _ => {
                                x -= lam * (t - ts);
                                t = ts;
                                break;
                            }
                        }
                    }
                }
            }
            if let Loc::Riding(id, _) = loc {
                if fronts[id].t0 > ts {
                    // only possible for fronts born at an interaction later than ts
                    unreachable!("front born inside an epoch");
                }
            }
            if cursor.applied == 0 {
                rev.push((t, x));
                let foot = match loc {
                    Loc::Region(k) => Foot { x, rank: k },
                    Loc::Riding(id, side) => {
                        rides.push((id, 0.0, ride_end));
                        let p = traj.initial_ids().iter().position(|i| *i == id).expect("initial front");
                        Foot { x, rank: if side == Side::Right { p + 1 } else { p } }
                    }
                };
                rev.dedup();
                rev.reverse();
                crossings.reverse();
                rides.reverse();
                return Ok(CharacteristicPath { family: self.family, vertices: rev, crossings, rides, foot: Some(foot) });
            }
            let e = &events[cursor.applied - 1];
            cursor.backward(events);
            let nin = e.incoming.len();
            let nout = e.outgoing.len();
            loc = match loc {
                Loc::Riding(id, side) => {
                    if e.outgoing.contains(&id) {
                        rides.push((id, t, ride_end));
                        rev.push((t, x));
                        let riding = (fronts[id].wave.family == self.family).then_some(side);
                        self.backward_apex(&cursor, e, riding, t, &mut ride_end)?
                    } else {
                        Loc::Riding(id, side)
                    }
                }
                Loc::Region(k) => {
                    let inside = k > e.slot && k < e.slot + nout;
                    let touching = (k == e.slot || k == e.slot + nout) && self.at_apex(e, x);
                    if inside || touching {
                        rev.push((t, x));
                        self.backward_apex(&cursor, e, None, t, &mut ride_end)?
                    } else if k >= e.slot + nout {
                        Loc::Region(k + nin - nout)
                    } else {
                        Loc::Region(k)
                    }
                }
            };
            match loc {
                Loc::Riding(id, _) => x = fronts[id].position(t),
                Loc::Region(_) if self.at_apex(e, x) => x = e.x,
                _ => {}
            }
        }
    }

    /// Incoming region (or front) consistent with backward motion from the
    /// apex of `e`; `cursor` is positioned before `e`.
    /// `riding` carries the side of a same-family front followed into `e`.
    fn backward_apex(&self, cursor: &Replay, e: &InteractionRecord, riding: Option<Side>, t: f64, ride_end: &mut f64) -> Result<Loc> {
        let fronts = self.traj.fronts();
        let same: Vec<usize> = e.incoming.iter().copied().filter(|id| fronts[*id].wave.family == self.family).collect();
        if let Some(side) = riding {
            if let Some(id) = same.iter().copied().find(|id| fronts[*id].wave.kind != WaveKind::Contact) {
                *ride_end = t;
                return Ok(Loc::Riding(id, side));
            }
        }
        let nin = e.incoming.len();
        for m in 0..=nin {
            let k = e.slot + m;
            let lam = self.region_speed(&cursor.order, k);
            let tol = self.speed_tol(lam);
            // incoming speeds decrease left to right
            let lo_ok = m == nin || lam >= fronts[e.incoming[m]].speed() - tol;
            let hi_ok = m == 0 || lam <= fronts[e.incoming[m - 1]].speed() + tol;
            if lo_ok && hi_ok {
                return Ok(Loc::Region(k));
            }
        }
        let lam = self.region_speed(&cursor.order, e.slot);
        let pick = same
            .iter()
            .copied()
            .min_by(|a, b| (fronts[*a].speed() - lam).abs().total_cmp(&(fronts[*b].speed() - lam).abs()));
        match pick {
            Some(id) => {
                *ride_end = t;
                Ok(Loc::Riding(id, Side::Right))
            }
            None => Err(Error::CrossingOrderViolation { time: t, detail: format!("no incoming region fits speed {lam}") }),
        }
    }
}

/// Forward `i`-characteristic from `(0, y)` up to time `t_end`.
pub fn trace(traj: &Trajectory, i: usize, y: f64, t_end: f64) -> Result<CharacteristicPath> {
    check_time(traj, t_end)?;
    Tracer::new(traj, i).forward(y, 0.0, t_end)
}

/// Forward characteristic from an arbitrary starting point `(t0, y)`.
pub fn trace_from(traj: &Trajectory, i: usize, t0: f64, y: f64, t_end: f64) -> Result<CharacteristicPath> {
    check_time(traj, t_end)?;
    check_time(traj, t0)?;
    Tracer::new(traj, i).forward(y, t0, t_end)
}

/// Backward `i`-characteristic from `(t, x)` down to time zero. `side`
/// selects which limit is used when `x` sits on a front.
pub fn trace_back(traj: &Trajectory, i: usize, t: f64, x: f64, side: Side) -> Result<CharacteristicPath> {
    check_time(traj, t)?;
    Tracer::new(traj, i).backward(t, x, side)
}

fn check_time(traj: &Trajectory, t: f64) -> Result<()> {
    if !(t >= 0.0 && t <= traj.end_time() * (1.0 + 1e-12)) {
        return Err(Error::OutOfSpan { t, end: traj.end_time() });
    }
    Ok(())
}

fn require_ld(traj: &Trajectory, i: usize) -> Result<()> {
    if traj.model().kind(i) != FieldKind::LinearlyDegenerate {
        return Err(Error::NotLinearlyDegenerate(i));
    }
    Ok(())
}

/// Transports samples `(y, w_i(0, y))` of a linearly degenerate coordinate
/// along `i`-characteristics: returns `(x_i(t, y), w_i(0, y))`.
pub fn transport_ld(traj: &Trajectory, i: usize, samples: &[(f64, i64)], t: f64) -> Result<Vec<(f64, i64)>> {
    require_ld(traj, i)?;
    samples.iter().map(|(y, v)| Ok((trace(traj, i, *y, t)?.end().1, *v))).collect()
}

/// Sampled map `y ↦ x_i(t, y)` with its Lipschitz ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportMap {
    pub family: usize,
    pub t: f64,
    pub ys: Vec<f64>,
    pub hs: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max(max_ratio, 1 / min_ratio)`.
    pub c_hat: f64,
    /// Largest `|h⁻¹(h(y)) - y|` over the samples.
    pub inverse_error: f64,
}

pub fn h_map(traj: &Trajectory, i: usize, t: f64, ys: &[f64]) -> Result<TransportMap> {
    let hs: Vec<f64> = ys.iter().map(|y| Ok(trace(traj, i, *y, t)?.end().1)).collect::<Result<_>>()?;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for k in 1..ys.len() {
        let r = (hs[k] - hs[k - 1]) / (ys[k] - ys[k - 1]);
        min_ratio = min_ratio.min(r);
        max_ratio = max_ratio.max(r);
    }
    let mut inverse_error: f64 = 0.0;
    for (y, h) in ys.iter().zip(&hs) {
        let back = trace_back(traj, i, t, *h, Side::Right)?;
        inverse_error = inverse_error.max((back.start().1 - y).abs());
    }
    Ok(TransportMap { family: i, t, ys: ys.to_vec(), hs, min_ratio, max_ratio, c_hat: max_ratio.max(1.0 / min_ratio), inverse_error })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub fd_slope: f64,
    pub predicted: f64,
    pub residual: f64,
}

/// Compares a centred difference of `y ↦ x_i(t, y)` with the slope
/// predicted from the chart derivatives at both ends and the secant frame
/// between the mixed states `w_l`, `w_r`.
pub fn derivative_formula_check(traj: &Trajectory, i: usize, t: f64, y: f64, step: f64) -> Result<DerivativeCheck> {
    let data = traj.data();
    if data.xs.iter().any(|b| (b - y).abs() <= 2.0 * step) {
        return Err(Error::DiscontinuousAtProbe { x: y });
    }
    let xp = trace(traj, i, y + step, t)?.end().1;
    let xm = trace(traj, i, y - step, t)?.end().1;
    let x = trace(traj, i, y, t)?.end().1;
    let profile = traj.profile_at(t)?;
    let reach = (xp - xm).abs().max(step);
    if profile.xs.iter().any(|p| (p - x).abs() <= reach) {
        return Err(Error::DiscontinuousAtProbe { x });
    }
    if !(xm < x && x < xp) {
        return Err(Error::DiscontinuousAtProbe { x });
    }
    let fd_slope = (xp - xm) / (2.0 * step);
    let grid = traj.grid();
    let model = traj.model();
    let w0 = grid.to_real(traj.profile_at(0.0)?.at(y));
    let wt = grid.to_real(profile.at(x));
    let n = model.dim();
    let w_l: Vec<f64> = (0..n).map(|k| if k < i { w0[k] } else { wt[k] }).collect();
    let w_r: Vec<f64> = (0..n).map(|k| if k <= i { wt[k] } else { w0[k] }).collect();
    let frame = frame_vectors_w(model, &w_l, &w_r)?;
    let d0 = model.chart_column(i, &w0);
    let dt = model.chart_column(i, &wt);
    let r0 = scale(&d0, 1.0 / norm(&d0));
    let predicted = norm(&d0) / norm(&dt) * dot(&frame.l[i], &r0);
    let residual = (fd_slope - predicted).abs() / predicted.abs().max(1e-300);
    Ok(DerivativeCheck { fd_slope, predicted, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayMeasure {
    pub family: usize,
    pub tau: f64,
    /// `min (y(τ) - x(τ)) / (τ 2^-ν)` over adjacent shard pairs.
    pub kappa_hat: f64,
    pub window: (f64, f64),
    pub tv_window: f64,
    pub sup_w: f64,
    /// Number of shocks of the family at time zero.
    pub initial_shocks: usize,
    /// `2(b-a)/(κτ) + ‖w_k‖_∞ + (N+1) 2^{1-ν}` with `κ = κ̂ / 2`.
    pub bound: f64,
}

/// Spreading of adjacent rarefaction shards of family `k` at time `tau` and
/// the total variation of `w_k` on `[a, b]`.
pub fn decay_measure(traj: &Trajectory, k: usize, tau: f64, a: f64, b: f64) -> Result<DecayMeasure> {
    if traj.model().kind(k) != FieldKind::GenuinelyNonlinear {
        return Err(Error::NotGenuinelyNonlinear(k));
    }
    let grid = traj.grid();
    let profile = traj.profile_at(tau)?;
    let fronts = traj.fronts();
    let family: Vec<(f64, &crate::riemann::Wave)> = profile
        .ids
        .iter()
        .zip(&profile.xs)
        .filter(|(id, _)| fronts[**id].wave.family == k)
        .map(|(id, x)| (*x, &fronts[*id].wave))
        .collect();
    let h = grid.h();
    let mut kappa_hat = f64::INFINITY;
    for pair in family.windows(2) {
        if pair[0].1.kind == WaveKind::RarefactionShard && pair[1].1.kind == WaveKind::RarefactionShard {
            kappa_hat = kappa_hat.min((pair[1].0 - pair[0].0) / (tau * h));
        }
    }
    if !kappa_hat.is_finite() {
        return Err(Error::NoAdjacentShards(k));
    }
    let unit = grid.unit();
    let tv_window: f64 = family.iter().filter(|(x, _)| *x >= a && *x <= b).map(|(_, w)| w.strength().abs() as f64 * unit).sum();
    let sup_w = profile
        .pieces(a, b)
        .iter()
        .map(|(_, _, w)| (w[k] as f64 * unit).abs())
        .fold(0.0, f64::max);
    let initial_shocks = traj
        .initial_ids()
        .iter()
        .filter(|id| fronts[**id].wave.family == k && fronts[**id].wave.kind == WaveKind::Shock)
        .count();
    let kappa = 0.5 * kappa_hat;
    let bound = 2.0 * (b - a) / (kappa * tau) + sup_w + (initial_shocks as f64 + 1.0) * 2.0 * h;
    Ok(DecayMeasure { family: k, tau, kappa_hat, window: (a, b), tv_window, sup_w, initial_shocks, bound })
}
