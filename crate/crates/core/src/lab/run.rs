use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::characteristics::{decay_measure, h_map};
use crate::error::{Error, Result};
use crate::models::{validate_model, FieldKind};
use crate::sensitivity::transversal_relations;
use crate::tracker::{Tracker, Trajectory};

pub const MASS_TOL: f64 = 1e-10;
pub const RELATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorPoint {
    pub t: f64,
    pub tv_units: i64,
    pub q_units: i64,
    pub count: usize,
}

/// Invariant checks over one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSummary {
    pub max_mass_defect: f64,
    pub max_flux_defect: f64,
    /// Events per alternative label, `none` when no alternative holds.
    pub alternatives: BTreeMap<String, usize>,
    /// Events failing the alternatives with thresholds read in real units.
    pub literal_threshold_failures: usize,
    pub q_bound_units: i64,
    pub max_q_units: i64,
    pub q_increases_at_transversal: usize,
    pub transversal_events: usize,
    pub max_relation_residual: f64,
    pub violations: usize,
}

impl InvariantSummary {
    pub fn of(traj: &Trajectory) -> Self {
        let fronts = traj.fronts();
        let mut alternatives = BTreeMap::new();
        let (mut max_mass_defect, mut max_flux_defect) = (0.0f64, 0.0f64);
        let mut literal_threshold_failures = 0;
        let mut q_increases_at_transversal = 0;
        let mut violations = 0;
        let tv0 = traj.initial_monitors().tv;
        let q_bound_units = tv0 * tv0;
        let mut max_q_units = traj.initial_monitors().q;
        for e in traj.events() {
            *alternatives.entry(e.alternative.map_or("none", |a| a.label()).to_string()).or_insert(0) += 1;
            max_mass_defect = max_mass_defect.max(e.mass_defect);
            max_flux_defect = max_flux_defect.max(e.flux_defect);
            max_q_units = max_q_units.max(e.after.q);
            if !e.meets_real_thresholds {
                literal_threshold_failures += 1;
            }
            let q_up = e.is_transversal(fronts) && e.d_q > 0;
            q_increases_at_transversal += q_up as usize;
            if e.mass_defect > MASS_TOL || e.alternative.is_none() || e.after.q > q_bound_units || q_up {
                violations += 1;
            }
        }
        let relations = transversal_relations(traj);
        let mut max_relation_residual = 0.0f64;
        for r in &relations {
            let worst = r.residuals[0].max(r.residuals[1]);
            max_relation_residual = max_relation_residual.max(worst);
            if worst > RELATION_TOL || r.span_rank > traj.model().dim() {
                violations += 1;
            }
        }
        Self {
            max_mass_defect,
            max_flux_defect,
            alternatives,
            literal_threshold_failures,
            q_bound_units,
            max_q_units,
            q_increases_at_transversal,
            transversal_events: relations.len(),
            max_relation_residual,
            violations,
        }
    }
}

/// Empirical constants measured on a single run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConstants {
    /// Bi-Lipschitz ratio of `h_i^T` per LD family.
    pub c_hat: BTreeMap<usize, f64>,
    /// Shard spreading rate at `T` per GNL family with adjacent shards.
    pub kappa_hat: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scenario_sha256: String,
    pub model: String,
    pub nu: u32,
    pub horizon: f64,
    pub events: usize,
    pub fronts_initial: usize,
    pub fronts_final: usize,
    pub tv_unit: f64,
    pub monitors: Vec<MonitorPoint>,
    pub invariants: InvariantSummary,
    pub constants: RunConstants,
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub trajectory: Trajectory,
    pub metrics: RunMetrics,
}

impl RunArtifact {
    /// Writes `events.csv`, `trajectories.csv` and `metrics.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut events = Vec::new();
        self.trajectory.write_event_log(&mut events)?;
        fs::write(dir.join("events.csv"), events)?;
        let mut fronts = Vec::new();
        self.trajectory.write_trajectory_csv(&mut fronts)?;
        fs::write(dir.join("trajectories.csv"), fronts)?;
        write_json(&dir.join("metrics.json"), &self.metrics)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Breakpoint hull of the initial data, or `[0, 1]` for constant data.
pub fn data_hull(traj: &Trajectory) -> (f64, f64) {
    let xs = &traj.data().xs;
    match (xs.first(), xs.last()) {
        (Some(a), Some(b)) if b > a => (*a, *b),
        (Some(a), _) => (a - 0.5, a + 0.5),
        _ => (0.0, 1.0),
    }
}

pub fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn constants(traj: &Trajectory) -> RunConstants {
    let t = traj.end_time();
    let mut out = RunConstants::default();
    if t <= 0.0 {
        return out;
    }
    let (a, b) = data_hull(traj);
    let pad = 0.25 * (b - a);
    let ys = uniform(a - pad, b + pad, 65);
    for i in 0..traj.model().dim() {
        match traj.model().kind(i) {
            FieldKind::LinearlyDegenerate => {
                if let Ok(m) = h_map(traj, i, t, &ys) {
                    out.c_hat.insert(i, m.c_hat);
                }
            }
            FieldKind::GenuinelyNonlinear => {
                if let Ok(d) = decay_measure(traj, i, t, f64::NEG_INFINITY, f64::INFINITY) {
                    out.kappa_hat.insert(i, d.kappa_hat);
                }
            }
        }
    }
    out
}

pub fn metrics_of(traj: &Trajectory, scenario_sha256: String) -> RunMetrics {
    let invariants = InvariantSummary::of(traj);
    let monitors = traj
        .monitor_series()
        .into_iter()
        .map(|(t, m)| MonitorPoint { t, tv_units: m.tv, q_units: m.q, count: m.count })
        .collect::<Vec<_>>();
    RunMetrics {
        scenario_sha256,
        model: traj.model().name().to_string(),
        nu: traj.grid().nu,
        horizon: traj.end_time(),
        events: traj.events().len(),
        fronts_initial: traj.initial_ids().len(),
        fronts_final: monitors.last().map_or(0, |m| m.count),
        tv_unit: traj.grid().unit(),
        violations: invariants.violations,
        monitors,
        invariants,
        constants: constants(traj),
    }
}

/// Validates the model, tracks the scenario data up to the horizon and
/// collects metrics.
pub fn run(scenario: &Scenario) -> Result<RunArtifact> {
    let model = scenario.model()?;
    let report = validate_model(&model, 64)?;
    if let Some(f) = report.first_failure() {
        return Err(Error::ValidationFailed { check: f.check, detail: format!("measured {:e} > {:e}", f.measured, f.tolerance) });
    }
    let data = scenario.initial_data(&model)?;
    let trajectory = Tracker::simulate(&model, &scenario.grid, &data, scenario.horizon)?;
    let metrics = metrics_of(&trajectory, scenario.hash()?);
    Ok(RunArtifact { trajectory, metrics })
}
