//! Numerical checks of the structural hypotheses on a model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SystemModel, DOMAIN_INFLATION};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Check {
    Biorthogonality,
    ChartRoundtrip,
    ChartGradient,
    EigenResidual,
    StrictHyperbolicity,
    GenuineNonlinearity,
    CurveCoordinateDrift,
    LinearDegeneracy,
    RankineHugoniot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationTolerances {
    pub biorthogonality: f64,
    pub roundtrip: f64,
    pub chart_gradient: f64,
    pub eigen_residual: f64,
    pub curve_drift: f64,
    pub ld_constancy: f64,
    pub rh_residual: f64,
    pub curve_steps: usize,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            biorthogonality: 1e-10,
            roundtrip: 1e-10,
            chart_gradient: 1e-6,
            eigen_residual: 1e-6,
            curve_drift: 1e-8,
            ld_constancy: 1e-8,
            rh_residual: 1e-7,
            curve_steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub model: String,
    pub samples: usize,
    pub outcomes: Vec<CheckOutcome>,
    /// Measured hyperbolicity gap `min λ_{i+1} - max λ_i` over the samples.
    pub gap_d: f64,
    /// Smallest `r_i · ∇λ_i` over genuinely nonlinear families, if any.
    pub gnl_c: Option<f64>,
    pub max_rh_residual: f64,
    /// Per family, the worst relative drift of the other coordinates along
    /// the integrated rarefaction curve.
    pub max_curve_drift: Vec<f64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.outcomes.iter().find(|o| !o.passed)
    }
}

/// Jump speed and residual from [`rankine_hugoniot_speed`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhSpeed {
    pub speed: f64,
    pub residual: f64,
    pub relative: f64,
}

fn rh_fit(model: &SystemModel, u_minus: &[f64], u_plus: &[f64]) -> Option<RhSpeed> {
    let du = sub(u_plus, u_minus);
    let dn = norm(&du);
    if dn < 1e-14 {
        return None;
    }
    let df = sub(&model.flux(u_plus), &model.flux(u_minus));
    let speed = dot(&df, &du) / (dn * dn);
    let residual = df.iter().zip(&du).map(|(a, b)| (a - speed * b).powi(2)).sum::<f64>().sqrt();
    let scale = norm(&df).max(dn);
    Some(RhSpeed { speed, residual, relative: residual / scale })
}

/// Least-squares jump speed `σ` between two conserved states.
pub fn rankine_hugoniot_speed(model: &SystemModel, u_minus: &[f64], u_plus: &[f64]) -> Result<RhSpeed> {
    for u in [u_minus, u_plus] {
        model.domain().check(&model.to_riemann(u))?;
    }
    let fit = rh_fit(model, u_minus, u_plus).ok_or(Error::NotAJump)?;
    if fit.relative > 1e-7 {
        return Err(Error::RhViolation { residual: fit.relative });
    }
    Ok(fit)
}

/// Runs every check and returns the report; fails with
/// [`Error::ValidationFailed`] naming the first check that did not pass.
pub fn validate_model(model: &SystemModel, sample_count: usize) -> Result<ValidationReport> {
    let report = validation_report(model, sample_count, &ValidationTolerances::default())?;
    match report.first_failure() {
        None => Ok(report),
        Some(o) => Err(Error::ValidationFailed {
            check: o.check,
            detail: format!("measured {:e} against tolerance {:e}", o.measured, o.tolerance),
        }),
    }
}

fn sample_points(model: &SystemModel, count: usize) -> Vec<Vec<f64>> {
    let dom = model.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut pts = dom.corners();
    let target = count.max(pts.len() + 1);
    while pts.len() < target {
        pts.push((0..dom.dim()).map(|k| rng.random_range(dom.lo[k]..=dom.hi[k])).collect());
    }
    pts
}

/// Full report; only a curve leaving the domain aborts early.
pub fn validation_report(model: &SystemModel, sample_count: usize, tol: &ValidationTolerances) -> Result<ValidationReport> {
    let n = model.dim();
    let pts = sample_points(model, sample_count);
    let mut bio: f64 = 0.0;
    let mut roundtrip: f64 = 0.0;
    let mut grad_err: f64 = 0.0;
    let mut eig_res: f64 = 0.0;
    let mut lam_min = vec![f64::INFINITY; n];
    let mut lam_max = vec![f64::NEG_INFINITY; n];
    let mut gnl_c: Option<f64> = None;

    for w in &pts {
        let u = model.to_conserved(w);
        let back = model.to_conserved(&model.to_riemann(&u));
        roundtrip = roundtrip.max(norm(&sub(&back, &u)) / norm(&u).max(1.0));
        let jac = flux_jacobian(model, &u);
        for i in 0..n {
            let l = model.left_eigvec(i, &u);
            let r = model.right_eigvec(i, &u);
            for j in 0..n {
                let rj = model.right_eigvec(j, &u);
                let want = if i == j { 1.0 } else { 0.0 };
                bio = bio.max((dot(&l, &rj) - want).abs());
            }
            let g = chart_gradient(model, i, &u);
            grad_err = grad_err.max(norm(&sub(&g, &l)) / norm(&l).max(1.0));
            let lam = model.eigenvalue(i, &u);
            lam_min[i] = lam_min[i].min(lam);
            lam_max[i] = lam_max[i].max(lam);
            let ar: Vec<f64> = (0..n).map(|row| (0..n).map(|c| jac[row][c] * r[c]).sum()).collect();
            let res = norm(&sub(&ar, &r.iter().map(|x| lam * x).collect::<Vec<_>>()));
            eig_res = eig_res.max(res / (norm(&r) * (1.0 + lam.abs())));
            if !model.is_ld(i) {
                let h = 1e-5;
                let up: Vec<f64> = u.iter().zip(&r).map(|(a, b)| a + h * b).collect();
                let um: Vec<f64> = u.iter().zip(&r).map(|(a, b)| a - h * b).collect();
                let dl = (model.eigenvalue(i, &up) - model.eigenvalue(i, &um)) / (2.0 * h);
                gnl_c = Some(gnl_c.map_or(dl, |c| c.min(dl)));
            }
        }
    }
    let gap_d = (0..n.saturating_sub(1)).map(|i| lam_min[i + 1] - lam_max[i]).fold(f64::INFINITY, f64::min);

    let mut max_rh: f64 = 0.0;
    let mut max_ld: f64 = 0.0;
    let mut drift = vec![0.0f64; n];
    for i in 0..n {
        for w in &pts {
            let stats = curve_stats(model, i, w, tol.curve_steps)?;
            drift[i] = drift[i].max(stats.drift);
            max_rh = max_rh.max(stats.rh);
            max_ld = max_ld.max(stats.ld_variation);
        }
    }

    let mut outcomes = vec![
        outcome(Check::Biorthogonality, bio, tol.biorthogonality),
        outcome(Check::ChartRoundtrip, roundtrip, tol.roundtrip),
        outcome(Check::ChartGradient, grad_err, tol.chart_gradient),
        outcome(Check::EigenResidual, eig_res, tol.eigen_residual),
        CheckOutcome { check: Check::StrictHyperbolicity, passed: gap_d > 0.0, measured: gap_d, tolerance: 0.0 },
    ];
    if let Some(c) = gnl_c {
        outcomes.push(CheckOutcome { check: Check::GenuineNonlinearity, passed: c > 0.0, measured: c, tolerance: 0.0 });
    }
    outcomes.push(outcome(Check::CurveCoordinateDrift, drift.iter().copied().fold(0.0, f64::max), tol.curve_drift));
    outcomes.push(outcome(Check::LinearDegeneracy, max_ld, tol.ld_constancy));
    outcomes.push(outcome(Check::RankineHugoniot, max_rh, tol.rh_residual));

    Ok(ValidationReport {
        model: model.name().to_string(),
        samples: pts.len(),
        outcomes,
        gap_d,
        gnl_c,
        max_rh_residual: max_rh,
        max_curve_drift: drift,
    })
}

fn outcome(check: Check, measured: f64, tolerance: f64) -> CheckOutcome {
    CheckOutcome { check, passed: measured <= tolerance, measured, tolerance }
}

fn flux_jacobian(model: &SystemModel, u: &[f64]) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut jac = vec![vec![0.0; n]; n];
    for c in 0..n {
        let h = 1e-6 * (1.0 + u[c].abs());
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[c] += h;
        um[c] -= h;
        let fp = model.flux(&up);
        let fm = model.flux(&um);
        for row in 0..n {
            jac[row][c] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    jac
}

fn chart_gradient(model: &SystemModel, i: usize, u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|k| {
            let h = 1e-6 * (1.0 + u[k].abs());
            let mut up = u.to_vec();
            let mut um = u.to_vec();
            up[k] += h;
            um[k] -= h;
            (model.to_riemann(&up)[i] - model.to_riemann(&um)[i]) / (2.0 * h)
        })
        .collect()
}

struct CurveStats {
    drift: f64,
    rh: f64,
    ld_variation: f64,
}

/// Integrates `du/ds = r_i(u)` with RK4 from `w` across the remaining range
/// of `w_i` (forward if there is room, else backward).
fn curve_stats(model: &SystemModel, i: usize, w0: &[f64], steps: usize) -> Result<CurveStats> {
    let dom = model.domain();
    let span_fwd = dom.hi[i] - w0[i];
    let span_bwd = dom.lo[i] - w0[i];
    let span = if span_fwd.abs() >= span_bwd.abs() { span_fwd } else { span_bwd };
    let mut stats = CurveStats { drift: 0.0, rh: 0.0, ld_variation: 0.0 };
    if span == 0.0 {
        return Ok(stats);
    }
    let ds = span / steps as f64;
    let u0 = model.to_conserved(w0);
    let lam0 = model.eigenvalue(i, &u0);
    let mut u = u0.clone();
    let field = |u: &[f64]| model.right_eigvec(i, u);
    for step in 1..=steps {
        let k1 = field(&u);
        let k2 = field(&offset(&u, &k1, 0.5 * ds));
        let k3 = field(&offset(&u, &k2, 0.5 * ds));
        let k4 = field(&offset(&u, &k3, ds));
        for c in 0..u.len() {
            u[c] += ds / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        let w = model.to_riemann(&u);
        let escaped = w
            .iter()
            .zip(dom.lo.iter().zip(&dom.hi))
            .any(|(x, (a, b))| !x.is_finite() || *x < a - 1e3 * DOMAIN_INFLATION || *x > b + 1e3 * DOMAIN_INFLATION);
        if escaped {
            return Err(Error::CurveEscapesDomain { family: i, at: w });
        }
        let s = ds * step as f64;
        for (j, (wj, w0j)) in w.iter().zip(w0).enumerate() {
            let expect = if j == i { w0j + s } else { *w0j };
            stats.drift = stats.drift.max((wj - expect).abs() / w0j.abs().max(1.0));
        }
        if let Some(fit) = rh_fit(model, &u0, &u) {
            stats.rh = stats.rh.max(fit.relative);
        }
        if model.is_ld(i) {
            stats.ld_variation = stats.ld_variation.max((model.eigenvalue(i, &u) - lam0).abs() / lam0.abs().max(1.0));
        }
    }
    Ok(stats)
}

fn offset(u: &[f64], k: &[f64], h: f64) -> Vec<f64> {
    u.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin::{aw_rascle, decoupled, ld_ld, twin_burgers};

    #[test]
    fn builtins_pass_validation() {
        for m in [decoupled(5.0), aw_rascle(), ld_ld()] {
            let rep = validate_model(&m, 100).unwrap_or_else(|e| panic!("{}: {e}", m.name()));
            assert!(rep.gap_d > 0.0);
        }
    }

    #[test]
    fn decoupled_gap_is_at_least_four() {
        let rep = validate_model(&decoupled(5.0), 100).unwrap();
        assert!(rep.gap_d >= 4.0 - 1e-12, "{}", rep.gap_d);
        assert!((rep.gnl_c.unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn twin_burgers_fails_strict_hyperbolicity() {
        match validate_model(&twin_burgers(), 50) {
            Err(Error::ValidationFailed { check, .. }) => assert_eq!(check, Check::StrictHyperbolicity),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn burgers_and_advection_speeds() {
        let m = decoupled(5.0);
        let s = rankine_hugoniot_speed(&m, &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((s.speed - 0.5).abs() < 1e-15);
        let s = rankine_hugoniot_speed(&m, &[0.3, 0.1], &[0.3, 0.9]).unwrap();
        assert!((s.speed - 5.0).abs() < 1e-14);
        assert_eq!(rankine_hugoniot_speed(&m, &[0.3, 0.1], &[0.3, 0.1]), Err(Error::NotAJump));
    }

    #[test]
    fn transversal_jump_is_rejected() {
        let m = decoupled(5.0);
        assert!(matches!(rankine_hugoniot_speed(&m, &[0.0, 0.0], &[1.0, 1.0]), Err(Error::RhViolation { .. })));
    }

    #[test]
    fn out_of_box_states_rejected() {
        let m = decoupled(5.0);
        assert!(matches!(rankine_hugoniot_speed(&m, &[1.5, 0.0], &[0.0, 0.0]), Err(Error::OutOfDomain(_))));
    }
}
