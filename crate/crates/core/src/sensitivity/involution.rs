use serde::{Deserialize, Serialize};

use super::{perturbed_trajectory, ShiftAssignment};
use crate::characteristics::trace;
use crate::error::{Error, Result};
use crate::linalg::{lstsq, norm, scale, sub};
use crate::tracker::{Front, Trajectory};

/// Whether same-family contacts sum to zero in grid units.
pub fn check_involution(traj: &Trajectory, fronts: &[&Front]) -> Result<bool> {
    let Some(first) = fronts.first() else {
        return Ok(true);
    };
    let i = first.wave.family;
    if !traj.model().is_ld(i) || fronts.iter().any(|f| f.wave.family != i) {
        return Err(Error::MixedFamilies);
    }
    Ok(fronts.iter().map(|f| f.wave.strength()).sum::<i64>() == 0)
}

/// Shift rates that keep the integral shift inside the strip spanned by the
/// outermost of the initial contacts `ids` (all of LD family `i`, in
/// involution together with every family-`i` contact between them), with
/// rate one on the leftmost.
pub fn involution_shift_assignment(traj: &Trajectory, i: usize, ids: &[usize]) -> Result<ShiftAssignment> {
    let fronts = traj.fronts();
    let initial = traj.initial_ids();
    let mut slots = Vec::with_capacity(ids.len());
    for id in ids {
        let s = initial.iter().position(|x| x == id).ok_or(Error::UnknownFront(*id))?;
        if fronts[*id].wave.family != i {
            return Err(Error::MixedFamilies);
        }
        slots.push(s);
    }
    let (Some(&first), Some(&last)) = (slots.iter().min(), slots.iter().max()) else {
        return Ok(ShiftAssignment::new());
    };
    let inner: Vec<&Front> = initial[first..=last].iter().map(|id| &fronts[*id]).filter(|f| f.wave.family == i).collect();
    if !check_involution(traj, &inner)? {
        return Err(Error::Scenario("contacts are not in involution".into()));
    }
    let (model, grid) = (traj.model(), traj.grid());
    let w_bar = grid.to_real(&fronts[initial[first]].wave.left)[i];
    // u - ũ, with ũ the state whose i-th coordinate is reset to w̄_i
    let excess = |w: &[i64]| {
        let real = grid.to_real(w);
        let mut tilde = real.clone();
        tilde[i] = w_bar;
        sub(&model.to_conserved(&real), &model.to_conserved(&tilde))
    };
    let mut out = ShiftAssignment::new();
    let mut c = 0.0;
    for (slot, id) in initial.iter().enumerate().take(last + 1).skip(first) {
        let f = &fronts[*id];
        let xi = if f.wave.family == i {
            if slot == first {
                c = 1.0;
            }
            c
        } else {
            let dm = excess(&f.wave.left);
            let dp = excess(&f.wave.right);
            let sigma = f.wave.jump(model, grid);
            let scale_ref = norm(&sigma).max(norm(&dp));
            if norm(&dp) <= 1e-13 * scale_ref.max(1.0) {
                0.0
            } else {
                let target = scale(&dm, -c);
                let (coef, resid) = lstsq(&[sigma, scale(&dp, -1.0)], &target, 1e-10).ok_or(Error::DependentOutgoing)?;
                if resid > 1e-8 {
                    return Err(Error::ShiftResidual { residual: resid });
                }
                c = coef[1];
                coef[0]
            }
        };
        out.rates.insert(*id, xi);
    }
    Ok(out)
}

/// The front alive at `t` that continues front `id` within its family.
pub fn descendant(traj: &Trajectory, id: usize, t: f64) -> Result<usize> {
    let fronts = traj.fronts();
    let mut cur = id;
    while let Some(t1) = fronts[cur].t1.filter(|t1| *t1 <= t) {
        let e = traj
            .events()
            .iter()
            .find(|e| e.time == t1 && e.incoming.contains(&cur))
            .ok_or(Error::UnknownFront(cur))?;
        let fam = fronts[cur].wave.family;
        cur = *e.outgoing.iter().find(|o| fronts[**o].wave.family == fam).ok_or(Error::UnknownFront(cur))?;
    }
    Ok(cur)
}

/// Positions at time `t` of the descendants of the outermost contacts.
pub fn strip_at(traj: &Trajectory, first: usize, last: usize, t: f64) -> Result<(f64, f64)> {
    let a = traj.fronts()[descendant(traj, first, t)?].position(t);
    let b = traj.fronts()[descendant(traj, last, t)?].position(t);
    Ok((a.min(b), a.max(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftOdeCheck {
    /// `|x_i^θ(t, y) - x_i(t, y)| / θ`.
    pub measured: f64,
    /// `Σ |σ_α ξ_α|`.
    pub weight: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Displacement of the `i`-characteristic from `(0, y)` under the shift,
/// against `d_hat · Σ |σ_α ξ_α|`.
pub fn shift_ode_bound_check(traj: &Trajectory, i: usize, y: f64, assignment: &ShiftAssignment, t: f64, theta: f64, d_hat: f64) -> Result<ShiftOdeCheck> {
    let (model, grid) = (traj.model(), traj.grid());
    let weight: f64 = assignment.rates.iter().map(|(id, xi)| norm(&traj.fronts()[*id].wave.jump(model, grid)) * xi.abs()).sum();
    let measured = if assignment.is_zero() {
        0.0
    } else {
        let run = perturbed_trajectory(traj, assignment, theta, t)?;
        let x0 = trace(traj, i, y, t)?.end().1;
        let x1 = trace(&run.traj, i, y, t)?.end().1;
        (x1 - x0).abs() / theta
    };
    let bound = d_hat * weight;
    Ok(ShiftOdeCheck { measured, weight, bound, holds: measured <= bound * (1.0 + 1e-9) + 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin::ld_ld;
    use crate::riemann::GridSpec;
    use crate::sensitivity::fd_integral_shift_from;
    use crate::tracker::{StepData, Tracker};

    #[test]
    fn isolated_pair_moves_rigidly() {
        let m = ld_ld();
        let g = GridSpec::new(2);
        // family-1 contacts up and back down: w_0 stays, w_1 goes 1 -> 3 -> 1
        let data = StepData::new(vec![0.0, 1.0], vec![vec![10, 1], vec![10, 3], vec![10, 1]]);
        let tr = Tracker::simulate(&m, &g, &data, 1.0).unwrap();
        let a = involution_shift_assignment(&tr, 1, &[0, 1]).unwrap();
        assert_eq!(a.rate(0), 1.0);
        assert_eq!(a.rate(1), 1.0);
        let v = fd_integral_shift_from(&tr, &a, 1.0, 1e-6).unwrap();
        let (lo, hi) = strip_at(&tr, 0, 1, 1.0).unwrap();
        let outside = v.total_mass() - v.mass_in(lo, hi);
        assert!(outside <= 1e-5 * v.total_mass(), "{outside}");
    }

    #[test]
    fn involution_decision() {
        let m = ld_ld();
        let g = GridSpec::new(2);
        let data = StepData::new(vec![0.0, 1.0], vec![vec![10, 1], vec![10, 3], vec![10, 1]]);
        let tr = Tracker::simulate(&m, &g, &data, 0.0).unwrap();
        let f: Vec<&Front> = tr.fronts().iter().collect();
        assert!(check_involution(&tr, &f).unwrap());
        assert!(!check_involution(&tr, &f[..1]).unwrap());
        let s = shift_ode_bound_check(&tr, 0, 0.5, &ShiftAssignment::new(), 0.0, 1e-6, 1.0).unwrap();
        assert_eq!(s.measured, 0.0);
    }
}
