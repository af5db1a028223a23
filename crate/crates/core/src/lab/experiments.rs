//! Experiment drivers. Independent simulations run on the rayon pool;
//! results are collected in input order so reports are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::random_step_data;
use super::run::{uniform, InvariantSummary};
use super::run::data_hull;
use super::scenario::{
    AssignmentSpec, CharacteristicsParams, ConvergeParams, DataSpec, DecayParams, EpsilonShockParams, Scenario, SensitivityParams, StabilityParams,
};
use crate::characteristics::{
    decay_measure, derivative_formula_check, h_map, trace, transport_ld, CharacteristicPath, DecayMeasure, DerivativeCheck, TransportMap,
};
use crate::error::{Error, Result};
use crate::linalg::{abs_linear_integral, norm1, sub};
use crate::models::{FieldKind, SystemModel};
use crate::riemann::GridSpec;
use crate::sensitivity::{
    chained_integral_shift, fd_integral_shift_from, integral_shift, log_slopes, shift_ode_bound_check, IntegralShift, ShiftAssignment,
};
use crate::tracker::{Side, StepData, StepProfile, Tracker, Trajectory};

pub(crate) fn grid_with_nu(grid: &GridSpec, nu: u32) -> GridSpec {
    GridSpec { nu, ld_refine: grid.ld_refine }
}

/// `‖u_1 - u_2‖_{L¹(a,b)}` in conserved variables for profiles on possibly
/// different grids.
pub fn l1_between(model: &SystemModel, p1: &StepProfile, g1: &GridSpec, p2: &StepProfile, g2: &GridSpec, a: f64, b: f64) -> f64 {
    p1.merged_integral(p2, a, b, |w1, w2| norm1(&sub(&model.to_conserved(&g1.to_real(w1)), &model.to_conserved(&g2.to_real(w2)))))
}

/// An interval holding every breakpoint of both profiles, padded by one.
pub fn covering_window(p1: &StepProfile, p2: &StepProfile) -> (f64, f64) {
    let all = p1.xs.iter().chain(&p2.xs);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    if lo > hi {
        (-1.0, 1.0)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn violations_of(trajs: &[&Trajectory]) -> usize {
    trajs.iter().map(|t| InvariantSummary::of(t).violations).sum()
}

/// Data for member `sample` of the TV sweep at `scale`: `scale` times as
/// many random jumps on the same interval, seeded from the scenario seed.
pub fn scaled_data(scenario: &Scenario, model: &SystemModel, scale: usize, sample: usize) -> Result<StepData> {
    let DataSpec::Random(spec) = &scenario.data else {
        if scale == 1 && sample == 0 {
            return scenario.initial_data(model);
        }
        return Err(Error::Scenario("TV sweeps need random data".into()));
    };
    let spec = super::data::RandomDataSpec { jumps: spec.jumps * scale, ..*spec };
    let seed = scenario.seed.wrapping_add(1_000_003 * scale as u64).wrapping_add(sample as u64);
    Ok(random_step_data(model, &scenario.grid, &spec, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub coarse: u32,
    pub fine: u32,
    pub l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactError {
    pub nu: u32,
    pub l1: f64,
    /// `4 · 2^-ν · (b - a)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeReport {
    pub scenario_sha256: String,
    pub violations: usize,
    pub nus: Vec<u32>,
    pub window: [f64; 2],
    pub events: Vec<usize>,
    /// Distances between consecutive refinement levels.
    pub pairwise: Vec<PairDistance>,
    /// Each distance is below the previous one, or both vanish.
    pub monotone: bool,
    /// Against the closed-form solution (decoupled model, one breakpoint).
    pub exact: Option<Vec<ExactError>>,
}

/// Exact `L¹(a, b)` distance between a decoupled-model profile and the
/// entropy solution of the Riemann problem `w_l | w_r` at `x0`: Burgers in
/// the first component, advection with speed `adv` in the second.
pub fn decoupled_riemann_error(profile: &StepProfile, grid: &GridSpec, x0: f64, w_l: &[f64], w_r: &[f64], adv: f64, a: f64, b: f64) -> f64 {
    let t = profile.t;
    let (ul, ur) = (w_l[0], w_r[0]);
    let rarefaction = ul < ur && t > 0.0;
    let shock = x0 + 0.5 * (ul + ur) * t;
    let contact = x0 + adv * t;
    let mut cuts: Vec<f64> = profile.xs.clone();
    cuts.extend([shock, contact, x0 + ul * t, x0 + ur * t, a, b]);
    cuts.retain(|x| *x >= a && *x <= b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for p in cuts.windows(2) {
        let (lo, hi) = (p[0], p[1]);
        let mid = 0.5 * (lo + hi);
        let w = grid.to_real(profile.at(mid));
        let v1 = if mid < contact { w_l[1] } else { w_r[1] };
        total += (w[1] - v1).abs() * (hi - lo);
        total += if rarefaction && mid > x0 + ul * t && mid < x0 + ur * t {
            // w - (x - x0) / t is linear on the piece
            abs_linear_integral(w[0] - (lo - x0) / t, -1.0 / t, hi - lo)
        } else {
            let v0 = if rarefaction {
                if mid <= x0 + ul * t {
                    ul
                } else {
                    ur
                }
            } else if mid < shock {
                ul
            } else {
                ur
            };
            (w[0] - v0).abs() * (hi - lo)
        };
    }
    total
}

fn simulate_on(scenario: &Scenario, model: &SystemModel, grid: &GridSpec, t: f64) -> Result<Trajectory> {
    Tracker::simulate(model, grid, &scenario.initial_data_on(model, grid)?, t)
}

/// Projects the scenario profile onto each grid, runs to the horizon and
/// measures consecutive `L¹` distances on the window.
pub fn experiment_converge(scenario: &Scenario, params: &ConvergeParams) -> Result<ConvergeReport> {
    let model = scenario.model()?;
    let [a, b] = params.window;
    let grids: Vec<GridSpec> = params.nus.iter().map(|nu| grid_with_nu(&scenario.grid, *nu)).collect();
    let trajs = grids.par_iter().map(|g| simulate_on(scenario, &model, g, scenario.horizon)).collect::<Result<Vec<_>>>()?;
    let profiles = trajs.iter().map(|t| t.profile_at(scenario.horizon)).collect::<Result<Vec<_>>>()?;
    let pairwise: Vec<PairDistance> = (1..grids.len())
        .map(|k| PairDistance {
            coarse: grids[k - 1].nu,
            fine: grids[k].nu,
            l1: l1_between(&model, &profiles[k - 1], &grids[k - 1], &profiles[k], &grids[k], a, b),
        })
        .collect();
    let monotone = pairwise.windows(2).all(|p| p[1].l1 < p[0].l1 || (p[0].l1 == 0.0 && p[1].l1 == 0.0));
    let exact = match &scenario.data {
        DataSpec::Breakpoints { xs, states } if scenario.model == "decoupled" && xs.len() == 1 => {
            let adv = model.eigenvalue_w(1, &states[0]);
            Some(
                profiles
                    .iter()
                    .zip(&grids)
                    .map(|(p, g)| ExactError {
                        nu: g.nu,
                        l1: decoupled_riemann_error(p, g, xs[0], &states[0], &states[1], adv, a, b),
                        bound: 4.0 * g.h() * (b - a),
                    })
                    .collect(),
            )
        }
        _ => None,
    };
    let refs: Vec<&Trajectory> = trajs.iter().collect();
    Ok(ConvergeReport {
        scenario_sha256: scenario.hash()?,
        violations: violations_of(&refs),
        nus: params.nus.clone(),
        window: params.window,
        events: trajs.iter().map(|t| t.events().len()).collect(),
        pairwise,
        monotone,
        exact,
    })
}

/// `u_2`: breakpoints of `u_1` moved by `delta` (translate) or by
/// `delta · r` with seeded `r ∈ [-1, 1]`, never past half the gap to a
/// neighbour.
pub fn jittered(data: &StepData, delta: f64, translate: bool, seed: u64) -> StepData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = &data.xs;
    let mut out = data.clone();
    for k in 0..xs.len() {
        let d = if translate { delta } else { delta * rng.random_range(-1.0..=1.0) };
        let room_l = if k > 0 { 0.45 * (xs[k] - xs[k - 1]) } else { f64::INFINITY };
        let room_r = if k + 1 < xs.len() { 0.45 * (xs[k + 1] - xs[k]) } else { f64::INFINITY };
        out.xs[k] = xs[k] + if translate { d } else { d.clamp(-room_l, room_r) };
    }
    out
}

/// One `u_1`, `u_2` pair at time `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySample {
    pub scale: usize,
    pub sample: usize,
    pub tv0_units: i64,
    /// `‖u_1(0) - u_2(0)‖_{L¹}`.
    pub initial_distance: f64,
    /// Per family: `‖w_{1,k}(T) - w_{2,k}(T)‖_{L¹} / ‖u_1 - u_2‖` for GNL
    /// families, `sup_y |h_1(y) - h_2(y)| / ‖u_1 - u_2‖` for LD families.
    /// Empty when the data coincide.
    pub ratios: Vec<f64>,
    /// `TV(w_{1,k}(T)) · δ` per family, the exact numerator for a pure
    /// translation.
    pub translation_numerators: Vec<f64>,
    /// The measured numerators.
    pub numerators: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityLevel {
    pub scale: usize,
    pub mean_tv0_units: f64,
    /// Largest ratio over the samples, per family.
    pub k_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub scenario_sha256: String,
    pub violations: usize,
    pub identical: bool,
    pub samples: Vec<StabilitySample>,
    pub levels: Vec<StabilityLevel>,
    /// `max / min` of each family's `K̂'` across the levels.
    pub variation: Vec<f64>,
}

fn stability_sample(scenario: &Scenario, model: &SystemModel, params: &StabilityParams, scale: usize, sample: usize) -> Result<(StabilitySample, usize)> {
    let grid = scenario.grid;
    let t = scenario.horizon;
    let d1 = scaled_data(scenario, model, scale, sample)?;
    let d2 = jittered(&d1, params.delta, params.translate, scenario.seed ^ (scale as u64) << 32 ^ sample as u64);
    let t1 = Tracker::simulate(model, &grid, &d1, t)?;
    let t2 = Tracker::simulate(model, &grid, &d2, t)?;
    let (p10, p20) = (t1.profile_at(0.0)?, t2.profile_at(0.0)?);
    let (a0, b0) = covering_window(&p10, &p20);
    let initial_distance = l1_between(model, &p10, &grid, &p20, &grid, a0, b0);
    let (p1, p2) = (t1.profile_at(t)?, t2.profile_at(t)?);
    let (a, b) = covering_window(&p1, &p2);
    let (ya, yb) = (d1.xs.first().copied().unwrap_or(0.0) - 0.25, d1.xs.last().copied().unwrap_or(0.0) + 0.25);
    let ys = uniform(ya, yb, params.probes);
    let mut numerators = Vec::new();
    let mut translation_numerators = Vec::new();
    for k in 0..model.dim() {
        let tv: f64 = p1.ids.iter().map(|id| &t1.fronts()[*id].wave).filter(|w| w.family == k).map(|w| w.strength().abs() as f64).sum::<f64>() * grid.unit();
        translation_numerators.push(tv * params.delta);
        numerators.push(if model.is_ld(k) {
            let h1 = h_map(&t1, k, t, &ys)?;
            let h2 = h_map(&t2, k, t, &ys)?;
            h1.hs.iter().zip(&h2.hs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        } else {
            p1.l1_distance_coord(&p2, &grid, k, a, b)
        });
    }
    let ratios = if initial_distance > 0.0 { numerators.iter().map(|n| n / initial_distance).collect() } else { Vec::new() };
    let violations = violations_of(&[&t1, &t2]);
    Ok((
        StabilitySample { scale, sample, tv0_units: t1.initial_monitors().tv, initial_distance, ratios, translation_numerators, numerators },
        violations,
    ))
}

/// Lipschitz ratios of the solution map over a TV sweep.
pub fn experiment_stability(scenario: &Scenario, params: &StabilityParams) -> Result<StabilityReport> {
    let model = scenario.model()?;
    let jobs: Vec<(usize, usize)> = params.scales.iter().flat_map(|s| (0..params.samples.max(1)).map(move |m| (*s, m))).collect();
    let results = jobs.par_iter().map(|(s, m)| stability_sample(scenario, &model, params, *s, *m)).collect::<Result<Vec<_>>>()?;
    let violations = results.iter().map(|r| r.1).sum();
    let samples: Vec<StabilitySample> = results.into_iter().map(|r| r.0).collect();
    let identical = samples.iter().all(|s| s.ratios.is_empty());
    let n = model.dim();
    let levels: Vec<StabilityLevel> = params
        .scales
        .iter()
        .map(|scale| {
            let mine: Vec<&StabilitySample> = samples.iter().filter(|s| s.scale == *scale).collect();
            let k_hat = (0..n).map(|k| mine.iter().filter_map(|s| s.ratios.get(k)).copied().fold(0.0, f64::max)).collect();
            let mean_tv0_units = mine.iter().map(|s| s.tv0_units as f64).sum::<f64>() / mine.len().max(1) as f64;
            StabilityLevel { scale: *scale, mean_tv0_units, k_hat }
        })
        .collect();
    let variation = (0..n)
        .map(|k| {
            let vals: Vec<f64> = levels.iter().map(|l| l.k_hat[k]).collect();
            spread(&vals)
        })
        .collect();
    Ok(StabilityReport { scenario_sha256: scenario.hash()?, violations, identical, samples, levels, variation })
}

/// Values at or below this are roundoff and count as zero in [`spread`].
pub const SPREAD_FLOOR: f64 = 1e-9;

/// `max / min` of positive values; 1 when all vanish, infinite when only
/// some do.
pub fn spread(vals: &[f64]) -> f64 {
    let max = vals.iter().copied().fold(0.0, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= SPREAD_FLOOR {
        1.0
    } else if min <= SPREAD_FLOOR {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayLevel {
    pub nu: u32,
    /// One entry per τ; `None` when no adjacent shards exist.
    pub measures: Vec<Option<DecayMeasure>>,
    pub kappa_min: Option<f64>,
    /// `TV{w_k(τ)}` never grows with τ.
    pub tv_nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub scenario_sha256: String,
    pub violations: usize,
    pub family: usize,
    pub taus: Vec<f64>,
    pub levels: Vec<DecayLevel>,
    /// No level found a shard pair.
    pub vacuous: bool,
    pub kappa_positive: bool,
    /// `max / min` of `κ̂` across the levels that measured one.
    pub kappa_spread: f64,
    /// Measured TV below the bound shape at every level and τ.
    pub bound_holds: bool,
}

pub fn experiment_decay(scenario: &Scenario, params: &DecayParams) -> Result<DecayReport> {
    let model = scenario.model()?;
    if model.kind(params.family) != FieldKind::GenuinelyNonlinear {
        return Err(Error::NotGenuinelyNonlinear(params.family));
    }
    let [a, b] = params.window;
    let t_end = params.taus.iter().copied().fold(0.0, f64::max);
    let runs = params
        .nus
        .par_iter()
        .map(|nu| simulate_on(scenario, &model, &grid_with_nu(&scenario.grid, *nu), t_end))
        .collect::<Result<Vec<_>>>()?;
    let mut levels = Vec::new();
    for (nu, traj) in params.nus.iter().zip(&runs) {
        let measures = params
            .taus
            .iter()
            .map(|tau| match decay_measure(traj, params.family, *tau, a, b) {
                Ok(m) => Ok(Some(m)),
                Err(Error::NoAdjacentShards(_)) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        let kappas: Vec<f64> = measures.iter().flatten().map(|m| m.kappa_hat).collect();
        let kappa_min = (!kappas.is_empty()).then(|| kappas.iter().copied().fold(f64::INFINITY, f64::min));
        let tvs: Vec<f64> = measures.iter().flatten().map(|m| m.tv_window).collect();
        let tv_nonincreasing = tvs.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        levels.push(DecayLevel { nu: *nu, measures, kappa_min, tv_nonincreasing });
    }
    let kappas: Vec<f64> = levels.iter().filter_map(|l| l.kappa_min).collect();
    let refs: Vec<&Trajectory> = runs.iter().collect();
    Ok(DecayReport {
        scenario_sha256: scenario.hash()?,
        violations: violations_of(&refs),
        family: params.family,
        taus: params.taus.clone(),
        vacuous: kappas.is_empty(),
        kappa_positive: !kappas.is_empty() && kappas.iter().all(|k| *k > 0.0),
        kappa_spread: if kappas.is_empty() { f64::NAN } else { spread(&kappas) },
        bound_holds: levels.iter().flat_map(|l| l.measures.iter().flatten()).all(|m| m.tv_window <= m.bound),
        levels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonLevel {
    pub refine: u32,
    /// Signed `ε`.
    pub epsilon: f64,
    /// `‖u(T) - u^ε(T)‖_{L¹} / ε`.
    pub l1_ratio: f64,
    /// `|x_i^ε(T, y_1) - x_i(T, y_1)| / (ε T)`.
    pub shift_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonShockReport {
    pub scenario_sha256: String,
    pub violations: usize,
    pub family: usize,
    pub levels: Vec<EpsilonLevel>,
    pub l_hat: f64,
    pub l_prime_hat: f64,
    /// Neither ratio exceeds twice its value at the largest `ε`.
    pub bounded: bool,
}

/// Adds `units` grid steps to coordinate `i` on `(y1, y2]`.
pub fn raise_on_window(data: &StepData, i: usize, y1: f64, y2: f64, units: i64) -> StepData {
    let mut xs = data.xs.clone();
    xs.extend([y1, y2]);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let state_at = |x: f64| data.states[data.xs.partition_point(|p| *p < x)].clone();
    let mut states = vec![data.states[0].clone()];
    for k in 0..xs.len() {
        // state on (xs[k], xs[k+1]); probe just right of xs[k]
        let hi = xs.get(k + 1).copied().unwrap_or(xs[k] + 2.0);
        let mut w = state_at(0.5 * (xs[k] + hi));
        if xs[k] >= y1 && hi <= y2 {
            w[i] += units;
        }
        states.push(w);
    }
    StepData::new(xs, states).compressed()
}

fn epsilon_level(scenario: &Scenario, model: &SystemModel, params: &EpsilonShockParams, refine: u32) -> Result<(EpsilonLevel, usize)> {
    let grid = GridSpec { nu: scenario.grid.nu, ld_refine: refine };
    let t = scenario.horizon;
    let base = scenario.initial_data_on(model, &grid)?;
    let fits = |d: &StepData| d.states.iter().all(|w| grid.check(model, w).is_ok());
    let (sign, pert) = [1i64, -1]
        .into_iter()
        .map(|s| (s, raise_on_window(&base, params.family, params.y1, params.y2, s)))
        .find(|(_, d)| fits(d))
        .ok_or_else(|| Error::Scenario("the ε-perturbation leaves the domain either way".into()))?;
    let epsilon = sign as f64 * grid.unit();
    let t0 = Tracker::simulate(model, &grid, &base, t)?;
    let t1 = Tracker::simulate(model, &grid, &pert, t)?;
    let (p0, p1) = (t0.profile_at(t)?, t1.profile_at(t)?);
    let (a, b) = covering_window(&p0, &p1);
    let l1_ratio = l1_between(model, &p0, &grid, &p1, &grid, a, b) / epsilon.abs();
    let shift_ratio = if t > 0.0 {
        let x0 = trace(&t0, params.family, params.y1, t)?.end().1;
        let x1 = trace(&t1, params.family, params.y1, t)?.end().1;
        (x1 - x0).abs() / (epsilon.abs() * t)
    } else {
        0.0
    };
    Ok((EpsilonLevel { refine, epsilon, l1_ratio, shift_ratio }, violations_of(&[&t0, &t1])))
}

/// Raises the LD coordinate by `ε` between `y1` and `y2` and measures the
/// response of the solution and of the characteristic from `y1`.
pub fn experiment_epsilon_shock(scenario: &Scenario, params: &EpsilonShockParams) -> Result<EpsilonShockReport> {
    let model = scenario.model()?;
    if !model.is_ld(params.family) {
        return Err(Error::NotLinearlyDegenerate(params.family));
    }
    let mut refines = params.refines.clone();
    refines.sort_unstable();
    let results = refines.par_iter().map(|r| epsilon_level(scenario, &model, params, *r)).collect::<Result<Vec<_>>>()?;
    let violations = results.iter().map(|r| r.1).sum();
    let levels: Vec<EpsilonLevel> = results.into_iter().map(|r| r.0).collect();
    let l_hat = levels.iter().map(|l| l.l1_ratio).fold(0.0, f64::max);
    let l_prime_hat = levels.iter().map(|l| l.shift_ratio).fold(0.0, f64::max);
    let bounded = levels.first().is_none_or(|first| {
        levels.iter().all(|l| l.l1_ratio <= 2.0 * first.l1_ratio + 1e-12 && l.shift_ratio <= 2.0 * first.shift_ratio + 1e-12)
    });
    Ok(EpsilonShockReport { scenario_sha256: scenario.hash()?, violations, family: params.family, levels, l_hat, l_prime_hat, bounded })
}

/// One uniform rate in `[-1, 1)` per initial breakpoint, shared by all
/// fronts leaving it.
pub fn breakpoint_assignment(traj: &Trajectory, seed: u64) -> ShiftAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ShiftAssignment::new();
    let mut last_x = f64::NAN;
    let mut rate = 0.0;
    for id in traj.initial_ids() {
        let x = traj.fronts()[*id].x0;
        if x != last_x {
            rate = rng.random_range(-1.0..1.0);
            last_x = x;
        }
        out = out.with(*id, rate);
    }
    out
}

pub fn build_assignment(traj: &Trajectory, spec: &AssignmentSpec) -> Result<ShiftAssignment> {
    let a = match spec {
        AssignmentSpec::Random { seed } => breakpoint_assignment(traj, *seed),
        AssignmentSpec::Explicit { rates } => {
            let mut a = ShiftAssignment::new();
            for (k, v) in rates {
                let id = k.parse::<usize>().map_err(|_| Error::Scenario(format!("front id `{k}` is not an integer")))?;
                a = a.with(id, *v);
            }
            a
        }
    };
    a.check(traj)?;
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTime {
    pub t: f64,
    /// `‖v - v_θ‖_{L¹}` with `v` from the projection formula.
    pub defects: Vec<f64>,
    pub slopes: Vec<Option<f64>>,
    /// Same against the shifts chained through the interaction log.
    pub chained_defects: Vec<f64>,
    pub chained_slopes: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub scenario_sha256: String,
    pub violations: usize,
    pub thetas: Vec<f64>,
    pub rates: std::collections::BTreeMap<usize, f64>,
    pub times: Vec<SensitivityTime>,
    pub max_defect: f64,
    /// Every slope of the projection formula lies in `[0.8, 1.2]`, or all
    /// its defects vanish.
    pub slopes_ok: bool,
    /// `max |x_i^θ(T, y) - x_i(T, y)| / (θ Σ |σ_α ξ_α|)` per LD family.
    pub d_hat: std::collections::BTreeMap<usize, f64>,
    #[serde(skip)]
    pub shifts: Vec<IntegralShift>,
}

fn slopes_in(slopes: &[Option<f64>], defects: &[f64]) -> bool {
    defects.iter().all(|d| *d == 0.0) || (!slopes.is_empty() && slopes.iter().all(|s| s.is_some_and(|s| (0.8..=1.2).contains(&s))))
}

/// Integral shift from the projection formula against tracker finite
/// differences, at each requested time.
pub fn experiment_sensitivity(scenario: &Scenario, params: &SensitivityParams) -> Result<SensitivityReport> {
    let model = scenario.model()?;
    let times = if params.times.is_empty() { vec![scenario.horizon] } else { params.times.clone() };
    let t_end = times.iter().copied().fold(scenario.horizon, f64::max);
    let traj = Tracker::simulate(&model, &scenario.grid, &scenario.initial_data(&model)?, t_end)?;
    let assignment = build_assignment(&traj, &params.assignment)?;
    let per_time = times
        .par_iter()
        .map(|t| {
            let v = integral_shift(&traj, *t, &assignment)?;
            let c = chained_integral_shift(&traj, *t, &assignment)?;
            let fds = params.thetas.iter().map(|th| fd_integral_shift_from(&traj, &assignment, *t, *th)).collect::<Result<Vec<_>>>()?;
            let defects: Vec<f64> = fds.iter().map(|f| v.l1_distance(f)).collect();
            let chained_defects: Vec<f64> = fds.iter().map(|f| c.l1_distance(f)).collect();
            Ok((
                SensitivityTime {
                    t: *t,
                    slopes: log_slopes(&params.thetas, &defects),
                    chained_slopes: log_slopes(&params.thetas, &chained_defects),
                    defects,
                    chained_defects,
                },
                v,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (times, shifts): (Vec<SensitivityTime>, Vec<IntegralShift>) = per_time.into_iter().unzip();
    let theta = params.thetas.last().copied().unwrap_or(1e-6);
    let (a, b) = data_hull(&traj);
    let mut d_hat = std::collections::BTreeMap::new();
    for i in (0..model.dim()).filter(|i| model.is_ld(*i)) {
        let ratios = uniform(a, b, params.probes)
            .par_iter()
            .map(|y| {
                let c = shift_ode_bound_check(&traj, i, *y, &assignment, t_end, theta, 1.0)?;
                Ok(if c.weight > 0.0 { c.measured / c.weight } else { 0.0 })
            })
            .collect::<Result<Vec<f64>>>()?;
        d_hat.insert(i, ratios.into_iter().fold(0.0, f64::max));
    }
    Ok(SensitivityReport {
        scenario_sha256: scenario.hash()?,
        violations: violations_of(&[&traj]),
        thetas: params.thetas.clone(),
        rates: assignment.rates.clone(),
        max_defect: times.iter().flat_map(|t| t.defects.iter()).copied().fold(0.0, f64::max),
        slopes_ok: times.iter().all(|t| slopes_in(&t.slopes, &t.defects)),
        times,
        d_hat,
        shifts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicsLevel {
    pub scale: usize,
    pub mean_tv0_units: f64,
    pub c_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicsReport {
    pub scenario_sha256: String,
    pub violations: usize,
    pub family: usize,
    pub t: f64,
    pub map: TransportMap,
    /// Samples whose transported LD value differs from the tracker state;
    /// `None` for a GNL family.
    pub transport_mismatches: Option<usize>,
    pub derivative_checks: Vec<(f64, DerivativeCheck)>,
    /// Probes skipped because the data or solution jumps there.
    pub derivative_skipped: usize,
    pub max_derivative_residual: Option<f64>,
    pub levels: Vec<CharacteristicsLevel>,
    /// `max / min` of `Ĉ` across the sweep.
    pub c_hat_variation: f64,
    #[serde(skip)]
    pub paths: Vec<(f64, CharacteristicPath)>,
}

fn sweep_c_hat(scenario: &Scenario, model: &SystemModel, params: &CharacteristicsParams) -> Result<Vec<CharacteristicsLevel>> {
    let random = matches!(scenario.data, DataSpec::Random(_));
    let scales = if random { params.scales.clone() } else { vec![1] };
    let per_sample = if random { params.sweep_samples.max(1) } else { 1 };
    let jobs: Vec<(usize, usize)> = scales.iter().flat_map(|s| (0..per_sample).map(move |m| (*s, m))).collect();
    let results = jobs
        .par_iter()
        .map(|(s, m)| {
            let data = scaled_data(scenario, model, *s, *m)?;
            let traj = Tracker::simulate(model, &scenario.grid, &data, scenario.horizon)?;
            let map = h_map(&traj, params.family, scenario.horizon, &uniform(params.y_min, params.y_max, params.samples))?;
            Ok((*s, traj.initial_monitors().tv, map.c_hat))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scales
        .iter()
        .map(|scale| {
            let mine: Vec<&(usize, i64, f64)> = results.iter().filter(|r| r.0 == *scale).collect();
            CharacteristicsLevel {
                scale: *scale,
                mean_tv0_units: mine.iter().map(|r| r.1 as f64).sum::<f64>() / mine.len() as f64,
                c_hat: mine.iter().map(|r| r.2).fold(0.0, f64::max),
            }
        })
        .collect())
}

/// Traces, the transport map `h_i^T`, broad-solution exactness and the
/// derivative formula on the scenario, plus a `Ĉ` sweep over TV.
pub fn experiment_characteristics(scenario: &Scenario, params: &CharacteristicsParams) -> Result<CharacteristicsReport> {
    let model = scenario.model()?;
    let (i, t) = (params.family, scenario.horizon);
    if i >= model.dim() {
        return Err(Error::Scenario(format!("family {i} out of range")));
    }
    let traj = Tracker::simulate(&model, &scenario.grid, &scenario.initial_data(&model)?, t)?;
    let ys = uniform(params.y_min, params.y_max, params.samples);
    let paths = ys.iter().map(|y| Ok((*y, trace(&traj, i, *y, t)?))).collect::<Result<Vec<_>>>()?;
    let map = h_map(&traj, i, t, &ys)?;
    let transport_mismatches = if model.is_ld(i) {
        let start = traj.profile_at(0.0)?;
        let samples: Vec<(f64, i64)> = ys.iter().map(|y| (*y, start.sample(*y, Side::Right)[i])).collect();
        let end = traj.profile_at(t)?;
        let moved = transport_ld(&traj, i, &samples, t)?;
        Some(moved.iter().filter(|(x, v)| end.sample(*x, Side::Right)[i] != *v).count())
    } else {
        None
    };
    let mut derivative_checks = Vec::new();
    let mut derivative_skipped = 0;
    if t > 0.0 {
        for y in ys.windows(2).map(|w| 0.5 * (w[0] + w[1])) {
            match derivative_formula_check(&traj, i, t, y, params.step) {
                Ok(c) => derivative_checks.push((y, c)),
                Err(Error::DiscontinuousAtProbe { .. }) => derivative_skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    let levels = sweep_c_hat(scenario, &model, params)?;
    let c_hats: Vec<f64> = levels.iter().map(|l| l.c_hat).collect();
    Ok(CharacteristicsReport {
        scenario_sha256: scenario.hash()?,
        violations: violations_of(&[&traj]),
        family: i,
        t,
        map,
        transport_mismatches,
        max_derivative_residual: derivative_checks.iter().map(|(_, c)| c.residual).reduce(f64::max),
        derivative_checks,
        derivative_skipped,
        c_hat_variation: spread(&c_hats),
        levels,
        paths,
    })
}
