//! End-to-end certification: JSON network in, certificate out, with an
//! optional simulation pass over the certified solution class.

mod certify;
mod region;
mod spec;
mod validate;

pub use certify::{
    run_pipeline, CheckEntry, Certificate, Composition, Constraint, IndexReport, LBound, ModeChoice, OmegaSummary,
    Outcome, Property, Provenance, Rates, RunOptions, Verdict,
};
pub use region::{dwell_region, window_for, DwellRegion};
pub use spec::{DwellChoice, InputSpec, NetworkSpec, SimulationSpec, SubsystemSpec};
pub use validate::{default_scheduler, simulate_outcome, validate_by_simulation, EmpiricalReport, TrajFailure, ValidateOptions};

use thiserror::Error;

use crate::lyapunov::LyapError;
use crate::system::{ModelError, SignalError, SimError};

/// Input errors; numerical outcomes are verdicts, not errors.
#[derive(Debug, Clone, Error)]
pub enum PipelineError {
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lyap(#[from] LyapError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("nothing to validate: verdict is {0:?}")]
    NotCertified(Verdict),
}
