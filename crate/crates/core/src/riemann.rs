//! Grid Riemann solver: contacts, shocks and rarefaction shards between
//! states whose Riemann coordinates sit on a dyadic grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, dual_basis, norm, scale, sub};
use crate::models::{rankine_hugoniot_speed, SystemModel};

/// Grid state: Riemann coordinates as integer multiples of [`GridSpec::unit`].
pub type GridState = Vec<i64>;

/// Dyadic grid `2^-ν Z` on every coordinate.
///
/// `ld_refine > 0` lets linearly degenerate coordinates live on the finer grid
/// `2^-(ν + ld_refine) Z` while genuinely nonlinear coordinates stay on
/// `2^-ν Z`; integers are always counted in the finer unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nu: u32,
    #[serde(default)]
    pub ld_refine: u32,
}

impl GridSpec {
    pub fn new(nu: u32) -> Self {
        Self { nu, ld_refine: 0 }
    }

    /// Size of one integer step.
    pub fn unit(&self) -> f64 {
        (-((self.nu + self.ld_refine) as f64)).exp2()
    }

    /// The mesh `h = 2^-ν`.
    pub fn h(&self) -> f64 {
        (-(self.nu as f64)).exp2()
    }

    /// Integer steps per rarefaction shard.
    pub fn shard_units(&self) -> i64 {
        1i64 << self.ld_refine
    }

    pub fn to_real(&self, w: &[i64]) -> Vec<f64> {
        let u = self.unit();
        w.iter().map(|k| *k as f64 * u).collect()
    }

    /// Exact conversion; fails if a coordinate is off the grid.
    pub fn from_real(&self, model: &SystemModel, w: &[f64]) -> Result<GridState> {
        let u = self.unit();
        let mut out = Vec::with_capacity(w.len());
        for (i, x) in w.iter().enumerate() {
            let k = (x / u).round();
            if (k * u - x).abs() > 1e-12 * x.abs().max(1.0) {
                return Err(Error::NotOnGrid(w.to_vec()));
            }
            let k = k as i64;
            if !model.is_ld(i) && k.rem_euclid(self.shard_units()) != 0 {
                return Err(Error::NotOnGrid(w.to_vec()));
            }
            out.push(k);
        }
        Ok(out)
    }

    /// Rounds each coordinate to the nearest admissible grid value inside the
    /// box, ties toward the lower end of the interval.
    pub fn project(&self, model: &SystemModel, w: &[f64]) -> GridState {
        let dom = model.domain();
        w.iter()
            .enumerate()
            .map(|(i, x)| {
                let step = if model.is_ld(i) { 1 } else { self.shard_units() };
                let q = self.unit() * step as f64;
                let lo = (dom.lo[i] / q - 1e-9).ceil() as i64;
                let hi = (dom.hi[i] / q + 1e-9).floor() as i64;
                let t = x / q;
                let down = t.floor();
                let k = if t - down > 0.5 { down + 1.0 } else { down } as i64;
                k.clamp(lo, hi) * step
            })
            .collect()
    }

    /// Checks that a grid state is admissible for the model.
    pub fn check(&self, model: &SystemModel, w: &[i64]) -> Result<()> {
        if w.len() != model.dim() {
            return Err(Error::NotOnGrid(self.to_real(w)));
        }
        for (i, k) in w.iter().enumerate() {
            if !model.is_ld(i) && k.rem_euclid(self.shard_units()) != 0 {
                return Err(Error::NotOnGrid(self.to_real(w)));
            }
        }
        model.domain().check(&self.to_real(w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveKind {
    Contact,
    Shock,
    RarefactionShard,
}

/// One outgoing discontinuity; `left` and `right` differ only in coordinate
/// `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub family: usize,
    pub kind: WaveKind,
    pub left: GridState,
    pub right: GridState,
    pub speed: f64,
}

impl Wave {
    /// Signed jump of the family coordinate in grid units.
    pub fn strength(&self) -> i64 {
        self.right[self.family] - self.left[self.family]
    }

    /// Jump of the conserved variables.
    pub fn jump(&self, model: &SystemModel, grid: &GridSpec) -> Vec<f64> {
        sub(&model.to_conserved(&grid.to_real(&self.right)), &model.to_conserved(&grid.to_real(&self.left)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFan {
    pub waves: Vec<Wave>,
    /// `ω_0 .. ω_n`.
    pub states: Vec<GridState>,
    /// Largest `|λ_i(ω_{i-1}) - λ_i(ω_i)|` over emitted contacts.
    pub contact_side_gap: f64,
}

/// `ω_i` takes coordinates `0..i` from `w_plus` and the rest from `w_minus`.
pub fn intermediate_states<T: Clone>(w_minus: &[T], w_plus: &[T]) -> Vec<Vec<T>> {
    let n = w_minus.len();
    (0..=n)
        .map(|i| w_plus[..i].iter().chain(&w_minus[i..]).cloned().collect())
        .collect()
}

/// Secant frame `r_i(u⁻, u⁺)` and its dual basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameVectors {
    pub secants: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
    pub det: f64,
}

/// Frame vectors between two states given in Riemann coordinates.
pub fn frame_vectors_w(model: &SystemModel, w_minus: &[f64], w_plus: &[f64]) -> Result<FrameVectors> {
    let omegas = intermediate_states(w_minus, w_plus);
    let us: Vec<Vec<f64>> = omegas.iter().map(|w| model.to_conserved(w)).collect();
    let n = model.dim();
    let mut secants = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for i in 0..n {
        let v = sub(&us[i + 1], &us[i]);
        let dir = if w_minus[i] != w_plus[i] { v.clone() } else { model.right_eigvec(i, &us[i]) };
        let len = norm(&dir);
        secants.push(v);
        r.push(scale(&dir, 1.0 / len));
    }
    match dual_basis(&r) {
        Some((l, det)) if det.abs() >= 1e-8 => Ok(FrameVectors { secants, r, l, det }),
        Some((_, det)) => Err(Error::DegenerateFrame { det }),
        None => Err(Error::DegenerateFrame { det: 0.0 }),
    }
}

/// Frame vectors between two conserved states.
pub fn frame_vectors(model: &SystemModel, u_minus: &[f64], u_plus: &[f64]) -> Result<FrameVectors> {
    let wm = model.to_riemann(u_minus);
    let wp = model.to_riemann(u_plus);
    model.domain().check(&wm)?;
    model.domain().check(&wp)?;
    frame_vectors_w(model, &wm, &wp)
}

/// `Σ_{i<j} ⟨l^i, v⟩ r_i`: projection onto the first `j` frame directions.
pub fn projection_p(frame: &FrameVectors, j: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for i in 0..j.min(frame.r.len()) {
        let c = dot(&frame.l[i], v);
        for (o, r) in out.iter_mut().zip(&frame.r[i]) {
            *o += c * r;
        }
    }
    out
}

/// Solves the grid Riemann problem `[w⁻, w⁺]`.
pub fn solve_riemann_grid(model: &SystemModel, grid: &GridSpec, w_minus: &[i64], w_plus: &[i64]) -> Result<WaveFan> {
    grid.check(model, w_minus)?;
    grid.check(model, w_plus)?;
    let states = intermediate_states(w_minus, w_plus);
    for s in &states {
        model.domain().check(&grid.to_real(s))?;
    }
    let mut waves = Vec::new();
    let mut contact_side_gap: f64 = 0.0;
    for i in 0..model.dim() {
        let left = &states[i];
        let right = &states[i + 1];
        let delta = right[i] - left[i];
        if delta == 0 {
            continue;
        }
        if model.is_ld(i) {
            let speed = model.eigenvalue_w(i, &grid.to_real(right));
            let other = model.eigenvalue_w(i, &grid.to_real(left));
            contact_side_gap = contact_side_gap.max((speed - other).abs());
            waves.push(Wave { family: i, kind: WaveKind::Contact, left: left.clone(), right: right.clone(), speed });
        } else if delta < 0 {
            let speed = jump_speed(model, grid, left, right)?;
            waves.push(Wave { family: i, kind: WaveKind::Shock, left: left.clone(), right: right.clone(), speed });
        } else {
            let step = grid.shard_units();
            let mut lo = left.clone();
            for _ in 0..delta / step {
                let mut hi = lo.clone();
                hi[i] += step;
                let speed = jump_speed(model, grid, &lo, &hi)?;
                waves.push(Wave { family: i, kind: WaveKind::RarefactionShard, left: lo, right: hi.clone(), speed });
                lo = hi;
            }
        }
    }
    Ok(WaveFan { waves, states, contact_side_gap })
}

fn jump_speed(model: &SystemModel, grid: &GridSpec, left: &[i64], right: &[i64]) -> Result<f64> {
    let ul = model.to_conserved(&grid.to_real(left));
    let ur = model.to_conserved(&grid.to_real(right));
    Ok(rankine_hugoniot_speed(model, &ul, &ur)?.speed)
}
