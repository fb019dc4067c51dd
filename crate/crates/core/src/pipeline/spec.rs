//! The JSON network document read by the pipeline and the CLI.

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::augment::ClockSpec;
use crate::expr::Expr;
use crate::hybridtime::{AdtParams, RadtParams};
use crate::lyapunov::{LyapCert, SampleBox, SamplePlan};
use crate::scalarfn::ScalarFn;
use crate::smallgain::GainForm;
use crate::system::{Interconnection, JumpScheduler, SignalSpec, SimConfig, Subsystem};

fn yes() -> Expr {
    Expr::Bool(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSpec {
    pub id: usize,
    #[serde(default = "unit")]
    pub state_dim: usize,
    pub flow: Vec<Expr>,
    pub jump: Vec<Expr>,
    #[serde(default = "yes")]
    pub flow_set: Expr,
    #[serde(default = "yes")]
    pub jump_set: Expr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_distance: Option<Expr>,
    pub certificate: LyapCert,
}

fn unit() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    #[serde(default)]
    pub dim: usize,
    #[serde(default = "yes")]
    pub flow_set: Expr,
    #[serde(default = "yes")]
    pub jump_set: Expr,
    /// Input used by simulations.
    #[serde(default)]
    pub signal: SignalSpec,
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec { dim: 0, flow_set: yes(), jump_set: yes(), signal: SignalSpec::Zero }
    }
}

/// Dwell parameters picked inside the certified region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DwellChoice {
    Radt(RadtParams),
    Adt(AdtParams),
}

/// Box of initial states; clocks start inside their ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_traj")]
    pub trajectories: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_hi: Option<Vec<f64>>,
    #[serde(default)]
    pub config: SimConfig,
    /// Distance below which a trajectory counts as converged at the horizon.
    #[serde(default = "default_converge")]
    pub converge_tol: f64,
}

fn default_traj() -> usize {
    100
}
fn default_converge() -> f64 {
    1e-3
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            trajectories: default_traj(),
            seed: 0,
            x0_lo: None,
            x0_hi: None,
            config: SimConfig::default(),
            converge_tol: default_converge(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub subsystems: Vec<SubsystemSpec>,
    #[serde(default)]
    pub input: InputSpec,
    #[serde(default)]
    pub gain_form: GainForm,
    /// Falsifier sampling for the states (and inputs); every check uses it.
    pub sample_box: SampleBox,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<ClockSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_path: Option<Vec<ScalarFn>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell_choice: Option<DwellChoice>,
    /// Schedulers for `simulate`; the first one is used.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedulers: Vec<JumpScheduler>,
    #[serde(default)]
    pub simulation: SimulationSpec,
}

fn default_samples() -> usize {
    10_000
}

impl NetworkSpec {
    pub fn from_json(src: &str) -> Result<Self, PipelineError> {
        let spec: NetworkSpec = serde_json::from_str(src).map_err(|e| PipelineError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.subsystems.is_empty() {
            return Err(PipelineError::Spec("no subsystems".into()));
        }
        let n = self.subsystems.len();
        for (k, s) in self.subsystems.iter().enumerate() {
            if s.id != k + 1 {
                return Err(PipelineError::Spec(format!("subsystem ids must be 1..{n} in order")));
            }
            s.certificate.validate_row(k, n).map_err(|e| PipelineError::Spec(e.to_string()))?;
        }
        let nx: usize = self.subsystems.iter().map(|s| s.state_dim).sum();
        if self.sample_box.x_lo.len() != nx || self.sample_box.x_hi.len() != nx {
            return Err(PipelineError::Spec(format!("sample_box needs {nx} state bounds")));
        }
        if let Some(p) = &self.omega_path {
            if p.len() != n {
                return Err(PipelineError::Spec(format!("omega_path needs {n} components")));
            }
        }
        for s in &self.schedulers {
            s.validate().map_err(|e| PipelineError::Spec(e.to_string()))?;
        }
        Ok(())
    }

    pub fn interconnection(&self) -> Interconnection {
        Interconnection {
            subsystems: self
                .subsystems
                .iter()
                .map(|s| Subsystem {
                    id: s.id,
                    state_dim: s.state_dim,
                    flow: s.flow.clone(),
                    jump: s.jump.clone(),
                    flow_set: s.flow_set.clone(),
                    jump_set: s.jump_set.clone(),
                    target_distance: s.target_distance.clone(),
                })
                .collect(),
            input_dim: self.input.dim,
            input_flow_set: self.input.flow_set.clone(),
            input_jump_set: self.input.jump_set.clone(),
            clocks: Vec::new(),
        }
    }

    pub fn certificates(&self) -> Vec<LyapCert> {
        self.subsystems.iter().map(|s| s.certificate.clone()).collect()
    }

    pub fn plan(&self) -> SamplePlan {
        SamplePlan::new(self.sample_box.clone()).with_count(self.samples)
    }
}
