//! Hyperbolic system models with a global chart of Riemann coordinates.
//!
//! A model is a bundle of closed-form callbacks: the flux, the spectral data
//! (eigenvalues, right and left eigenvectors) and the chart `u <-> w`. Each
//! family is either genuinely nonlinear or linearly degenerate, and the domain
//! box `E` is a product of intervals in Riemann coordinates.

pub mod builtin;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use builtin::{builtin_models, model_by_name, BUILTIN_IDS};
pub use validate::{rankine_hugoniot_speed, validate_model, validation_report, Check, CheckOutcome, RhSpeed, ValidationReport, ValidationTolerances};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    GenuinelyNonlinear,
    LinearlyDegenerate,
}

/// Intervals `[lo_i, hi_i]` on each Riemann coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// States may sit this far outside the box before they are rejected.
pub const DOMAIN_INFLATION: f64 = 1e-9;

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| *x >= a - DOMAIN_INFLATION && *x <= b + DOMAIN_INFLATION)
    }

    pub fn check(&self, w: &[f64]) -> Result<()> {
        if self.contains(w) {
            Ok(())
        } else {
            Err(Error::OutOfDomain(w.to_vec()))
        }
    }

    /// Corners of the box in lexicographic order.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..(1usize << n))
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] }).collect())
            .collect()
    }
}

type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type FamilyScalarFn = Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>;
type FamilyVecFn = Arc<dyn Fn(usize, &[f64]) -> Vec<f64> + Send + Sync>;

/// A hyperbolic system given by closed-form callbacks.
///
/// Cloning is cheap; all callbacks are shared.
#[derive(Clone)]
pub struct SystemModel {
    name: String,
    kinds: Vec<FieldKind>,
    domain: DomainBox,
    params: BTreeMap<String, f64>,
    flux: VecFn,
    eigenvalue: FamilyScalarFn,
    right_eigvec: FamilyVecFn,
    left_eigvec: FamilyVecFn,
    to_riemann: VecFn,
    to_conserved: VecFn,
    speed_in_w: Option<FamilyScalarFn>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("kinds", &self.kinds)
            .field("domain", &self.domain)
            .field("params", &self.params)
            .finish()
    }
}

/// Builder for [`SystemModel`]; every callback is mandatory except the
/// Riemann-coordinate form of the eigenvalues.
pub struct ModelBuilder {
    name: String,
    kinds: Vec<FieldKind>,
    domain: DomainBox,
    params: BTreeMap<String, f64>,
    flux: Option<VecFn>,
    eigenvalue: Option<FamilyScalarFn>,
    right_eigvec: Option<FamilyVecFn>,
    left_eigvec: Option<FamilyVecFn>,
    to_riemann: Option<VecFn>,
    to_conserved: Option<VecFn>,
    speed_in_w: Option<FamilyScalarFn>,
}

impl ModelBuilder {
    pub fn new(name: impl Into<String>, kinds: Vec<FieldKind>, domain: DomainBox) -> Self {
        assert_eq!(kinds.len(), domain.dim(), "one field kind per coordinate");
        Self {
            name: name.into(),
            kinds,
            domain,
            params: BTreeMap::new(),
            flux: None,
            eigenvalue: None,
            right_eigvec: None,
            left_eigvec: None,
            to_riemann: None,
            to_conserved: None,
            speed_in_w: None,
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn flux(mut self, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.flux = Some(Arc::new(f));
        self
    }

    pub fn eigenvalue(mut self, f: impl Fn(usize, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.eigenvalue = Some(Arc::new(f));
        self
    }

    pub fn right_eigvec(mut self, f: impl Fn(usize, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.right_eigvec = Some(Arc::new(f));
        self
    }

    pub fn left_eigvec(mut self, f: impl Fn(usize, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.left_eigvec = Some(Arc::new(f));
        self
    }

    pub fn chart(
        mut self,
        to_riemann: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        to_conserved: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.to_riemann = Some(Arc::new(to_riemann));
        self.to_conserved = Some(Arc::new(to_conserved));
        self
    }

    /// Eigenvalues written directly in Riemann coordinates. Used by the
    /// tracker so that linearly degenerate speeds are bit-exact on both sides
    /// of a contact.
    pub fn speed_in_w(mut self, f: impl Fn(usize, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.speed_in_w = Some(Arc::new(f));
        self
    }

    pub fn build(self) -> SystemModel {
        SystemModel {
            name: self.name,
            kinds: self.kinds,
            domain: self.domain,
            params: self.params,
            flux: self.flux.expect("flux callback"),
            eigenvalue: self.eigenvalue.expect("eigenvalue callback"),
            right_eigvec: self.right_eigvec.expect("right eigenvector callback"),
            left_eigvec: self.left_eigvec.expect("left eigenvector callback"),
            to_riemann: self.to_riemann.expect("chart"),
            to_conserved: self.to_conserved.expect("chart"),
            speed_in_w: self.speed_in_w,
        }
    }
}

impl SystemModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, family: usize) -> FieldKind {
        self.kinds[family]
    }

    pub fn kinds(&self) -> &[FieldKind] {
        &self.kinds
    }

    pub fn is_ld(&self, family: usize) -> bool {
        self.kinds[family] == FieldKind::LinearlyDegenerate
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Same model restricted to (or extended to) another box.
    pub fn with_domain(&self, domain: DomainBox) -> SystemModel {
        assert_eq!(domain.dim(), self.dim());
        let mut m = self.clone();
        m.domain = domain;
        m
    }

    pub fn flux(&self, u: &[f64]) -> Vec<f64> {
        (self.flux)(u)
    }

    pub fn eigenvalue(&self, family: usize, u: &[f64]) -> f64 {
        (self.eigenvalue)(family, u)
    }

    /// `λ_i` evaluated from Riemann coordinates.
    pub fn eigenvalue_w(&self, family: usize, w: &[f64]) -> f64 {
        match &self.speed_in_w {
            Some(f) => f(family, w),
            None => self.eigenvalue(family, &self.to_conserved(w)),
        }
    }

    pub fn right_eigvec(&self, family: usize, u: &[f64]) -> Vec<f64> {
        (self.right_eigvec)(family, u)
    }

    pub fn left_eigvec(&self, family: usize, u: &[f64]) -> Vec<f64> {
        (self.left_eigvec)(family, u)
    }

    pub fn to_riemann(&self, u: &[f64]) -> Vec<f64> {
        (self.to_riemann)(u)
    }

    pub fn to_conserved(&self, w: &[f64]) -> Vec<f64> {
        (self.to_conserved)(w)
    }

    /// `∂u/∂w_i` at `w`, by central differences of the chart.
    pub fn chart_column(&self, family: usize, w: &[f64]) -> Vec<f64> {
        let h = 1e-6 * (1.0 + w[family].abs());
        let mut wp = w.to_vec();
        let mut wm = w.to_vec();
        wp[family] += h;
        wm[family] -= h;
        let up = self.to_conserved(&wp);
        let um = self.to_conserved(&wm);
        up.iter().zip(&um).map(|(a, b)| (a - b) / (2.0 * h)).collect()
    }
}
