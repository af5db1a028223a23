//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! model = "aw-rascle"       # decoupled | aw-rascle | ld-ld | twin-burgers
//! horizon = 1.5
//! seed = 7
//! output = "out/aw"         # optional, overridden by --out
//!
//! [params]                  # optional model parameters, e.g. a = 5.0
//!
//! [grid]
//! nu = 3
//! ld_refine = 0             # optional
//!
//! [domain]                  # optional box on the Riemann coordinates
//! lo = [1.0, 4.0]
//! hi = [2.0, 5.0]
//!
//! [data]                    # kind = "breakpoints" | "random" | "rarefaction"
//! kind = "breakpoints"
//! xs = [0.0, 1.0]
//! states = [[1.5, 4.5], [1.25, 4.75], [1.75, 4.5]]
//!
//! [experiment]              # kind = "run" | "converge" | "stability" | "decay"
//! kind = "converge"         #        "epsilon-shock" | "sensitivity" | "characteristics"
//! nus = [2, 3, 4, 5]
//! window = [-1.0, 3.0]
//! ```
//!
//! Breakpoint states are real Riemann coordinates rounded to the grid.
//! `random` takes `jumps`, `x_min`, `x_max` and optionally `max_step`;
//! `rarefaction` additionally takes `family`, whose coordinate then never
//! decreases across a breakpoint. Experiment parameters are listed on the
//! structs below; omitted ones take their defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::data::{rarefaction_step_data, random_step_data, RandomDataSpec};
use crate::error::{Error, Result};
use crate::models::{model_by_name, DomainBox, SystemModel};
use crate::riemann::GridSpec;
use crate::tracker::StepData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: String,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainBox>,
    pub data: DataSpec,
    #[serde(default)]
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSpec {
    Breakpoints { xs: Vec<f64>, states: Vec<Vec<f64>> },
    Random(RandomDataSpec),
    Rarefaction {
        family: usize,
        jumps: usize,
        x_min: f64,
        x_max: f64,
        #[serde(default = "one")]
        max_step: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum Experiment {
    #[default]
    Run,
    Converge(ConvergeParams),
    Stability(StabilityParams),
    Decay(DecayParams),
    EpsilonShock(EpsilonShockParams),
    Sensitivity(SensitivityParams),
    Characteristics(CharacteristicsParams),
}

fn one() -> f64 {
    1.0
}

impl DataSpec {
    fn random_spec(&self) -> Option<RandomDataSpec> {
        match self {
            DataSpec::Breakpoints { .. } => None,
            DataSpec::Random(spec) => Some(*spec),
            DataSpec::Rarefaction { jumps, x_min, x_max, max_step, .. } => {
                Some(RandomDataSpec { jumps: *jumps, x_min: *x_min, x_max: *x_max, max_step: *max_step })
            }
        }
    }
}


impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Run => "run",
            Experiment::Converge(_) => "converge",
            Experiment::Stability(_) => "stability",
            Experiment::Decay(_) => "decay",
            Experiment::EpsilonShock(_) => "epsilon-shock",
            Experiment::Sensitivity(_) => "sensitivity",
            Experiment::Characteristics(_) => "characteristics",
        }
    }
}

/// Refinement study over `nus`, distances measured on `window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeParams {
    pub nus: Vec<u32>,
    pub window: [f64; 2],
}

impl Default for ConvergeParams {
    fn default() -> Self {
        Self { nus: vec![2, 3, 4, 5], window: [-1.0, 3.0] }
    }
}

/// Pairs `u_1`, `u_2` where `u_2` moves every breakpoint of `u_1` by at most
/// `delta` (all by exactly `delta` when `translate`). `scales` multiply the
/// number of random jumps to raise TV(0); each scale runs `samples` seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityParams {
    pub scales: Vec<usize>,
    pub samples: usize,
    pub delta: f64,
    pub translate: bool,
    /// Number of characteristic feet sampled for LD families.
    pub probes: usize,
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self { scales: vec![1, 2, 4], samples: 4, delta: 1e-3, translate: false, probes: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayParams {
    pub family: usize,
    pub taus: Vec<f64>,
    pub window: [f64; 2],
    pub nus: Vec<u32>,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self { family: 0, taus: vec![0.25, 0.5, 1.0], window: [-1.0, 3.0], nus: vec![2, 3, 4] }
    }
}

/// Raises LD coordinate `family` by `ε = 2^-(ν + r)` on `(y1, y2]` for each
/// `r` in `refines`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonShockParams {
    pub family: usize,
    pub y1: f64,
    pub y2: f64,
    pub refines: Vec<u32>,
}

impl Default for EpsilonShockParams {
    fn default() -> Self {
        Self { family: 1, y1: 0.5, y2: 1.5, refines: vec![2, 4, 6, 8] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AssignmentSpec {
    /// One uniform rate in `[-1, 1)` per initial breakpoint.
    Random { seed: u64 },
    /// Rates by initial front id; missing ids get zero.
    Explicit { rates: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityParams {
    pub times: Vec<f64>,
    pub thetas: Vec<f64>,
    pub assignment: AssignmentSpec,
    /// Characteristic feet per LD family for the `D̂` estimate.
    pub probes: usize,
}

impl Default for SensitivityParams {
    fn default() -> Self {
        Self { times: Vec::new(), thetas: vec![1e-4, 1e-5, 1e-6], assignment: AssignmentSpec::Random { seed: 1 }, probes: 16 }
    }
}

/// Traces `samples` characteristics of `family` launched uniformly on
/// `[y_min, y_max]` up to the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharacteristicsParams {
    pub family: usize,
    pub samples: usize,
    pub y_min: f64,
    pub y_max: f64,
    /// Half-width of the centred difference in the derivative check.
    pub step: f64,
    /// TV sweep for `Ĉ`, as in [`StabilityParams`]; random data only.
    pub scales: Vec<usize>,
    pub sweep_samples: usize,
}

impl Default for CharacteristicsParams {
    fn default() -> Self {
        Self { family: 1, samples: 65, y_min: 0.0, y_max: 2.0, step: 1e-5, scales: vec![1, 2, 4], sweep_samples: 4 }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn check(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::Scenario(format!("horizon {} must be finite and nonnegative", self.horizon)));
        }
        let model = self.model()?;
        if let DataSpec::Breakpoints { xs, states } = &self.data {
            if states.len() != xs.len() + 1 || states.iter().any(|w| w.len() != model.dim()) {
                return Err(Error::Scenario("breakpoint data needs xs.len() + 1 states of the model dimension".into()));
            }
        }
        if let Some(spec) = self.data.random_spec() {
            if !(spec.x_min < spec.x_max) {
                return Err(Error::Scenario("random data needs x_min < x_max".into()));
            }
        }
        if let DataSpec::Rarefaction { family, .. } = &self.data {
            if *family >= model.dim() {
                return Err(Error::Scenario(format!("family {family} out of range")));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<SystemModel> {
        let model = model_by_name(&self.model, &self.params)?;
        Ok(match &self.domain {
            Some(d) if d.dim() == model.dim() => model.with_domain(d.clone()),
            Some(_) => return Err(Error::Scenario("domain dimension does not match the model".into())),
            None => model,
        })
    }

    /// Initial data on the scenario grid.
    pub fn initial_data(&self, model: &SystemModel) -> Result<StepData> {
        self.initial_data_on(model, &self.grid)
    }

    /// Initial data on `grid`. Generated data are drawn on the scenario grid
    /// and then rounded, so every grid sees the same profile.
    pub fn initial_data_on(&self, model: &SystemModel, grid: &GridSpec) -> Result<StepData> {
        let (xs, real) = self.real_profile(model)?;
        Ok(StepData::projected(model, grid, xs, &real).compressed())
    }

    /// Breakpoints and states in real Riemann coordinates.
    pub fn real_profile(&self, model: &SystemModel) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let on_grid = |d: StepData| (d.xs.clone(), d.states.iter().map(|w| self.grid.to_real(w)).collect());
        Ok(match &self.data {
            DataSpec::Breakpoints { xs, states } => (xs.clone(), states.clone()),
            DataSpec::Random(spec) => on_grid(random_step_data(model, &self.grid, spec, self.seed)),
            DataSpec::Rarefaction { family, .. } => {
                let spec = self.data.random_spec().unwrap();
                on_grid(rarefaction_step_data(model, &self.grid, &spec, *family, self.seed))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
model = "aw-rascle"
horizon = 1.5
seed = 7

[grid]
nu = 3

[data]
kind = "random"
jumps = 6
x_min = 0.0
x_max = 2.0

[experiment]
kind = "converge"
nus = [2, 3]
"#;

    #[test]
    fn round_trip() {
        let s = Scenario::from_toml(SAMPLE).unwrap();
        assert_eq!(s.experiment, Experiment::Converge(ConvergeParams { nus: vec![2, 3], ..Default::default() }));
        let back = Scenario::from_toml(&s.to_toml().unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash().unwrap(), s.hash().unwrap());
    }

    #[test]
    fn every_variant_round_trips() {
        let base = Scenario::from_toml(SAMPLE).unwrap();
        let kinds = [
            Experiment::Run,
            Experiment::Stability(Default::default()),
            Experiment::Decay(Default::default()),
            Experiment::EpsilonShock(Default::default()),
            Experiment::Sensitivity(SensitivityParams {
                assignment: AssignmentSpec::Explicit { rates: [("0".to_string(), 0.5)].into() },
                ..Default::default()
            }),
            Experiment::Characteristics(Default::default()),
        ];
        for e in kinds {
            let s = Scenario {
                experiment: e,
                data: DataSpec::Rarefaction { family: 0, jumps: 3, x_min: 0.0, x_max: 1.0, max_step: 0.5 },
                domain: Some(DomainBox::new(vec![1.0, 4.0], vec![2.0, 5.0])),
                output: Some("out".into()),
                ..base.clone()
            };
            assert_eq!(Scenario::from_toml(&s.to_toml().unwrap()).unwrap(), s);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Scenario::from_toml(&SAMPLE.replace("aw-rascle", "nope")).is_err());
        assert!(Scenario::from_toml(&SAMPLE.replace("jumps = 6", "jumps = 6\ncolour = 1")).is_err());
        assert!(Scenario::from_toml(&SAMPLE.replace("horizon = 1.5", "horizon = -1.0")).is_err());
    }

    #[test]
    fn generated_profile_is_shared_across_grids() {
        let s = Scenario::from_toml(SAMPLE).unwrap();
        let m = s.model().unwrap();
        let coarse = s.initial_data(&m).unwrap();
        let fine = s.initial_data_on(&m, &GridSpec::new(5)).unwrap();
        assert_eq!(coarse.xs, fine.xs);
        for (a, b) in coarse.states.iter().zip(&fine.states) {
            assert_eq!(GridSpec::new(3).to_real(a), GridSpec::new(5).to_real(b));
        }
    }
}
