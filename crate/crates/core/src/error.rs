use thiserror::Error;

use crate::models::Check;

/// Errors raised anywhere in the tracking engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model id `{0}`")]
    CatalogMiss(String),
    #[error("model validation failed: {check:?} ({detail})")]
    ValidationFailed { check: Check, detail: String },
    #[error("rarefaction curve of family {family} left the domain near {at:?}")]
    CurveEscapesDomain { family: usize, at: Vec<f64> },
    #[error("states coincide, no jump to measure")]
    NotAJump,
    #[error("Rankine-Hugoniot residual {residual:e} exceeds tolerance")]
    RhViolation { residual: f64 },
    #[error("state {0:?} lies outside the domain box")]
    OutOfDomain(Vec<f64>),
    #[error("frame vectors are degenerate (|det| = {det:e})")]
    DegenerateFrame { det: f64 },
    #[error("state {0:?} is not on the grid")]
    NotOnGrid(Vec<f64>),
    #[error("breakpoints must be finite and strictly increasing (index {0})")]
    NonMonotoneBreakpoints(usize),
    #[error("front ordering broken at t = {time}: {detail}")]
    CrossingOrderViolation { time: f64, detail: String },
    #[error("event budget of {budget} interactions exceeded")]
    EventBudgetExceeded { budget: usize },
    #[error("time {t} outside trajectory span [0, {end}]")]
    OutOfSpan { t: f64, end: f64 },
    #[error("family {family} characteristic meets a same-family shock at t = {time}")]
    GnlShockEncounter { family: usize, time: f64 },
    #[error("family {0} is not linearly degenerate")]
    NotLinearlyDegenerate(usize),
    #[error("family {0} is not genuinely nonlinear")]
    NotGenuinelyNonlinear(usize),
    #[error("solution is discontinuous at probe x = {x}")]
    DiscontinuousAtProbe { x: f64 },
    #[error("no adjacent rarefaction shards of family {0}")]
    NoAdjacentShards(usize),
    #[error("outgoing fronts are linearly dependent")]
    DependentOutgoing,
    #[error("outgoing fronts cannot carry the incoming shift (residual {residual:e})")]
    ShiftResidual { residual: f64 },
    #[error("sheaf and front travel with the same speed")]
    ParallelSpeeds,
    #[error("probe x = {x} sits on a front")]
    ProbeOnFront { x: f64 },
    #[error("probe time {0} coincides with an interaction")]
    ProbeAtInteractionTime(f64),
    #[error("perturbation changed the wave pattern ({0})")]
    EventReorder(String),
    #[error("fronts belong to different families or a non-LD family")]
    MixedFamilies,
    #[error("front {0} not found")]
    UnknownFront(usize),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
