//! Candidate ISS Lyapunov certificates and numerical falsifiers for them.

mod check;
mod estimate;
mod sample;

pub use check::{
    check_flow, check_jump, check_sandwich, check_subsystem_flow, check_subsystem_jump, CheckReport, Verdict,
    Witness, FLOW_TOL, JUMP_TOL,
};
pub use estimate::{
    build_iss_estimate, check_decay_chain, series, verify_iss_along, DecayReport, EstimateError, IssEstimate, TrajReport,
    TrajVerdict,
};
pub use sample::{halton, Mode, SampleBox, SamplePlan};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{BindError, Compiled, Expr};
use crate::scalarfn::ScalarFn;
use crate::system::CompiledSystem;

/// Flow rate: `V̇ ≤ −φ(V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowRate {
    /// `φ(r) = c·r`.
    Exponential(f64),
    General(ScalarFn),
}

/// Jump rate: `V(g) ≤ α(V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpRate {
    /// `α(r) = e^{−d}·r`.
    Exponential(f64),
    General(ScalarFn),
}

impl FlowRate {
    pub fn phi(&self) -> ScalarFn {
        match self {
            FlowRate::Exponential(c) => ScalarFn::linear(*c),
            FlowRate::General(f) => f.clone(),
        }
    }

    pub fn coefficient(&self) -> Option<f64> {
        match self {
            FlowRate::Exponential(c) => Some(*c),
            FlowRate::General(_) => None,
        }
    }
}

impl JumpRate {
    pub fn alpha(&self) -> ScalarFn {
        match self {
            JumpRate::Exponential(d) => ScalarFn::exp_scaled((-d).exp()),
            JumpRate::General(f) => f.clone(),
        }
    }

    pub fn coefficient(&self) -> Option<f64> {
        match self {
            JumpRate::Exponential(d) => Some(*d),
            JumpRate::General(_) => None,
        }
    }
}

fn zero_fn() -> ScalarFn {
    ScalarFn::zero()
}

/// A candidate ISS Lyapunov function with its comparison functions.
///
/// For a subsystem certificate the gain rows have one entry per subsystem
/// with a zero diagonal; an empty row means all zero. Jump gains default
/// to the flow gains when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapCert {
    pub v: Expr,
    pub psi1: ScalarFn,
    pub psi2: ScalarFn,
    pub flow_rate: FlowRate,
    pub jump_rate: JumpRate,
    #[serde(default = "zero_fn")]
    pub external_gain: ScalarFn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_external_gain: Option<ScalarFn>,
    #[serde(default)]
    pub internal_gains: Vec<ScalarFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_internal_gains: Option<Vec<ScalarFn>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LyapError {
    #[error("certificate {index}: V does not bind: {source}")]
    Bind { index: usize, source: BindError },
    #[error("certificate {index}: gain row has {got} entries, expected {want}")]
    GainRow { index: usize, got: usize, want: usize },
    #[error("certificate {index}: self-gain must be zero")]
    SelfGain { index: usize },
    #[error("expected {want} certificates, got {got}")]
    Count { got: usize, want: usize },
    #[error("sample box has {got} state bounds, expected {want}")]
    Box { got: usize, want: usize },
}

impl LyapCert {
    /// Exponential certificate with identity sandwich bounds and no gains.
    pub fn exponential(v: Expr, c: f64, d: f64) -> Self {
        LyapCert {
            v,
            psi1: ScalarFn::identity(),
            psi2: ScalarFn::identity(),
            flow_rate: FlowRate::Exponential(c),
            jump_rate: JumpRate::Exponential(d),
            external_gain: ScalarFn::zero(),
            jump_external_gain: None,
            internal_gains: Vec::new(),
            jump_internal_gains: None,
        }
    }

    pub fn rates(&self) -> Option<(f64, f64)> {
        Some((self.flow_rate.coefficient()?, self.jump_rate.coefficient()?))
    }

    pub fn jump_external(&self) -> &ScalarFn {
        self.jump_external_gain.as_ref().unwrap_or(&self.external_gain)
    }

    /// Flow gain toward subsystem `j` (zero when the row is empty).
    pub fn gain(&self, j: usize) -> ScalarFn {
        self.internal_gains.get(j).cloned().unwrap_or_else(ScalarFn::zero)
    }

    pub fn jump_gain(&self, j: usize) -> ScalarFn {
        match &self.jump_internal_gains {
            Some(row) => row.get(j).cloned().unwrap_or_else(ScalarFn::zero),
            None => self.gain(j),
        }
    }

    /// Full flow and jump gain rows of length `n`.
    pub fn gain_rows(&self, n: usize) -> (Vec<ScalarFn>, Vec<ScalarFn>) {
        ((0..n).map(|j| self.gain(j)).collect(), (0..n).map(|j| self.jump_gain(j)).collect())
    }

    pub fn validate_row(&self, index: usize, n: usize) -> Result<(), LyapError> {
        for row in std::iter::once(&self.internal_gains).chain(self.jump_internal_gains.as_ref()) {
            if !row.is_empty() && row.len() != n {
                return Err(LyapError::GainRow { index, got: row.len(), want: n });
            }
            if row.get(index).is_some_and(|g| !g.is_zero()) {
                return Err(LyapError::SelfGain { index });
            }
        }
        Ok(())
    }

    pub fn bind(&self, sys: &CompiledSystem, index: usize) -> Result<Compiled, LyapError> {
        Compiled::bind_real(&self.v, &sys.layout.vars).map_err(|source| LyapError::Bind { index, source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut c = LyapCert::exponential(crate::expr::parse("abs(x2)").unwrap(), 2.5, -1.0);
        c.internal_gains = vec![ScalarFn::power(0.2, 0.5), ScalarFn::zero()];
        c.jump_internal_gains = Some(vec![ScalarFn::zero(), ScalarFn::zero()]);
        let s = serde_json::to_string(&c).unwrap();
        let back: LyapCert = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(back.jump_gain(0).is_zero());
        assert!(!back.gain(0).is_zero());
        assert_eq!(back.rates(), Some((2.5, -1.0)));
        assert!((back.jump_rate.alpha().eval(1.0).unwrap() - 1f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn self_gain_rejected() {
        let mut c = LyapCert::exponential(crate::expr::parse("abs(x1)").unwrap(), 1.0, 1.0);
        c.internal_gains = vec![ScalarFn::linear(0.5), ScalarFn::zero()];
        assert_eq!(c.validate_row(0, 2), Err(LyapError::SelfGain { index: 0 }));
        assert!(c.validate_row(1, 2).is_ok());
        assert!(c.validate_row(1, 3).is_err());
    }
}
