//! Small-gain conditions on gain structures, Ω-paths, and composite
//! Lyapunov functions for networks.

mod compose;
mod gains;
mod omega;
mod spectral;

pub use compose::{compose_exponential, compose_lyapunov, exponential_rates, power_path_rates, ExponentialComposite};
pub use gains::{
    power_law, small_gain_check, small_gain_holds, GainForm, GainStructure, SmallGainMethod, SmallGainReport, SmallGainWitness,
    MAX_CYCLE_N, STRICT,
};
pub use omega::{linear_omega_path, power_law_omega_path, validate_omega_path, OmegaPath, OmegaReport, OmegaWitness};
pub use spectral::{components, dominant_vector, is_irreducible, perron_vector, spectral_detail, spectral_radius, Spectral};

use thiserror::Error;

use crate::lyapunov::LyapError;
use crate::scalarfn::FnError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmallGainError {
    #[error("gain row {row} has {got} entries, expected {want}")]
    Shape { row: usize, got: usize, want: usize },
    #[error("self-gain of subsystem {} must be zero", .0 + 1)]
    SelfGain(usize),
    #[error("cycle enumeration supports at most 12 subsystems, got {0}")]
    TooLarge(usize),
    #[error("path has {got} components, expected {want}")]
    PathLength { got: usize, want: usize },
    #[error("no Ω-path: {0}")]
    NoPath(String),
    #[error("gain {0} is not linear")]
    NotLinear(String),
    #[error("certificate {0} does not have exponential rates")]
    NotExponential(usize),
    #[error(transparent)]
    Fn(#[from] FnError),
    #[error(transparent)]
    Lyap(#[from] LyapError),
}
