//! Scenario configuration, experiment drivers and run artifacts.

pub mod data;
pub mod experiments;
pub mod run;
pub mod scenario;

pub use experiments::{
    experiment_characteristics, experiment_converge, experiment_decay, experiment_epsilon_shock, experiment_sensitivity, experiment_stability,
};
pub use run::{run, RunArtifact, RunMetrics};
pub use scenario::{DataSpec, Experiment, Scenario};
