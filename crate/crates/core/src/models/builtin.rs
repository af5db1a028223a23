//! Closed-form 2x2 systems shipped with the crate.
//!
//! Families are numbered from 0 in code. Family `i` moves the Riemann
//! coordinate `w_i` and keeps the other one fixed.

use std::collections::BTreeMap;

use super::{DomainBox, FieldKind, ModelBuilder, SystemModel};
use crate::error::{Error, Result};

pub const BUILTIN_IDS: [&str; 3] = ["decoupled", "aw-rascle", "ld-ld"];

/// All built-in models with default parameters.
pub fn builtin_models() -> Vec<SystemModel> {
    let none = BTreeMap::new();
    BUILTIN_IDS.iter().map(|id| model_by_name(id, &none).expect("builtin id")).collect()
}

/// Looks up a model by id. Recognised parameters: `a` (advection speed of the
/// decoupled model) and `w1_lo`, `w1_hi`, `w2_lo`, `w2_hi` to override the
/// domain box.
pub fn model_by_name(id: &str, params: &BTreeMap<String, f64>) -> Result<SystemModel> {
    let model = match id {
        "decoupled" => decoupled(params.get("a").copied().unwrap_or(5.0)),
        "aw-rascle" => aw_rascle(),
        "ld-ld" => ld_ld(),
        "twin-burgers" => twin_burgers(),
        other => return Err(Error::CatalogMiss(other.to_string())),
    };
    let mut lo = model.domain().lo.clone();
    let mut hi = model.domain().hi.clone();
    let mut touched = false;
    for k in 0..model.dim() {
        if let Some(v) = params.get(&format!("w{}_lo", k + 1)) {
            lo[k] = *v;
            touched = true;
        }
        if let Some(v) = params.get(&format!("w{}_hi", k + 1)) {
            hi[k] = *v;
            touched = true;
        }
    }
    if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
        return Err(Error::Scenario(format!("empty domain box {lo:?} .. {hi:?}")));
    }
    Ok(if touched { model.with_domain(DomainBox::new(lo, hi)) } else { model })
}

/// Burgers in the first component, linear advection with speed `a` in the
/// second. Riemann coordinates are the conserved variables.
pub fn decoupled(a: f64) -> SystemModel {
    ModelBuilder::new(
        "decoupled",
        vec![FieldKind::GenuinelyNonlinear, FieldKind::LinearlyDegenerate],
        DomainBox::new(vec![0.0, 0.0], vec![1.0, 1.0]),
    )
    .param("a", a)
    .flux(move |u| vec![0.5 * u[0] * u[0], a * u[1]])
    .eigenvalue(move |i, u| if i == 0 { u[0] } else { a })
    .speed_in_w(move |i, w| if i == 0 { w[0] } else { a })
    .right_eigvec(|i, _| unit(i))
    .left_eigvec(|i, _| unit(i))
    .chart(|u| u.to_vec(), |w| w.to_vec())
    .build()
}

/// Aw-Rascle traffic model with pressure `p(ρ) = ρ`, conserved variables
/// `(ρ, y)` with `y = ρ (v + ρ)`. Riemann coordinates `w_0 = v`,
/// `w_1 = v + ρ`; family 0 is genuinely nonlinear with straight rarefaction
/// lines through the origin, family 1 is the contact `λ = v`.
pub fn aw_rascle() -> SystemModel {
    ModelBuilder::new(
        "aw-rascle",
        vec![FieldKind::GenuinelyNonlinear, FieldKind::LinearlyDegenerate],
        DomainBox::new(vec![1.0, 4.0], vec![2.0, 5.0]),
    )
    .flux(|u| {
        let v = u[1] / u[0] - u[0];
        vec![u[0] * v, u[1] * v]
    })
    .eigenvalue(|i, u| {
        let z = u[1] / u[0];
        if i == 0 {
            z - 2.0 * u[0]
        } else {
            z - u[0]
        }
    })
    .speed_in_w(|i, w| if i == 0 { 2.0 * w[0] - w[1] } else { w[0] })
    .right_eigvec(|i, u| {
        let z = u[1] / u[0];
        if i == 0 {
            vec![-1.0, -z]
        } else {
            let v = z - u[0];
            vec![1.0, 2.0 * z - v]
        }
    })
    .left_eigvec(|i, u| {
        let r2 = u[0] * u[0];
        if i == 0 {
            vec![-u[1] / r2 - 1.0, 1.0 / u[0]]
        } else {
            vec![-u[1] / r2, 1.0 / u[0]]
        }
    })
    .chart(
        |u| {
            let z = u[1] / u[0];
            vec![z - u[0], z]
        },
        |w| {
            let rho = w[1] - w[0];
            vec![rho, rho * w[1]]
        },
    )
    .build()
}

/// A chromatography-type system with both fields linearly degenerate:
/// `u = (w_0 + w_1, 1 / (w_0 - w_1))`, `f = (w_0 w_1, w_0 / (w_0 - w_1))`.
/// The family-0 contact travels with `λ_0 = w_1`, the family-1 contact with
/// `λ_1 = w_0`.
pub fn ld_ld() -> SystemModel {
    ModelBuilder::new(
        "ld-ld",
        vec![FieldKind::LinearlyDegenerate, FieldKind::LinearlyDegenerate],
        DomainBox::new(vec![2.0, 0.0], vec![3.0, 1.0]),
    )
    .flux(|u| {
        let inv = 1.0 / u[1];
        vec![0.25 * (u[0] * u[0] - inv * inv), 0.5 * (u[0] * u[1] + 1.0)]
    })
    .eigenvalue(|i, u| {
        let inv = 1.0 / u[1];
        if i == 0 {
            0.5 * (u[0] - inv)
        } else {
            0.5 * (u[0] + inv)
        }
    })
    .speed_in_w(|i, w| if i == 0 { w[1] } else { w[0] })
    .right_eigvec(|i, u| {
        let d2 = u[1] * u[1];
        if i == 0 {
            vec![1.0, -d2]
        } else {
            vec![1.0, d2]
        }
    })
    .left_eigvec(|i, u| {
        let inv2 = 1.0 / (u[1] * u[1]);
        if i == 0 {
            vec![0.5, -0.5 * inv2]
        } else {
            vec![0.5, 0.5 * inv2]
        }
    })
    .chart(
        |u| {
            let inv = 1.0 / u[1];
            vec![0.5 * (u[0] + inv), 0.5 * (u[0] - inv)]
        },
        |w| vec![w[0] + w[1], 1.0 / (w[0] - w[1])],
    )
    .build()
}

/// Two uncoupled Burgers equations on the same range. Not strictly
/// hyperbolic; kept as a negative example for validation.
pub fn twin_burgers() -> SystemModel {
    ModelBuilder::new(
        "twin-burgers",
        vec![FieldKind::GenuinelyNonlinear, FieldKind::GenuinelyNonlinear],
        DomainBox::new(vec![0.0, 0.0], vec![1.0, 1.0]),
    )
    .flux(|u| vec![0.5 * u[0] * u[0], 0.5 * u[1] * u[1]])
    .eigenvalue(|i, u| u[i])
    .right_eigvec(|i, _| unit(i))
    .left_eigvec(|i, _| unit(i))
    .chart(|u| u.to_vec(), |w| w.to_vec())
    .build()
}

fn unit(i: usize) -> Vec<f64> {
    let mut e = vec![0.0; 2];
    e[i] = 1.0;
    e
}
