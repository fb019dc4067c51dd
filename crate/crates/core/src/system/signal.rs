use serde::{Deserialize, Serialize};

use crate::expr::{self, BindError, Compiled, EvalError, VarLayout};
use crate::hybridtime::HybridTimeDomain;

/// Input `u(t, j)` given as DSL strings in `t` and `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    #[default]
    Zero,
    Constant { value: Vec<f64> },
    /// One expression per component. `jump`, when given, is used at the
    /// instants just before a jump instead of `flow`.
    Expr {
        flow: Vec<String>,
        #[serde(default)]
        jump: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("input signal has {got} components, expected {want}")]
    Dimension { got: usize, want: usize },
    #[error("input signal: {0}")]
    Parse(#[from] expr::ParseError),
    #[error("input signal: {0}")]
    Bind(#[from] BindError),
}

#[derive(Debug, Clone)]
enum Repr {
    Constant(Vec<f64>),
    Expr { flow: Vec<Compiled>, jump: Option<Vec<Compiled>> },
}

/// A bound input signal of fixed dimension.
#[derive(Debug, Clone)]
pub struct Signal {
    dim: usize,
    repr: Repr,
}

fn time_layout() -> VarLayout {
    let mut l = VarLayout::new();
    l.push("t", 1);
    l.push("j", 1);
    l
}

impl Signal {
    pub fn zero(dim: usize) -> Self {
        Signal { dim, repr: Repr::Constant(vec![0.0; dim]) }
    }

    pub fn new(spec: &SignalSpec, dim: usize) -> Result<Self, SignalError> {
        let layout = time_layout();
        let compile = |src: &[String]| -> Result<Vec<Compiled>, SignalError> {
            if src.len() != dim {
                return Err(SignalError::Dimension { got: src.len(), want: dim });
            }
            src.iter().map(|s| Ok(Compiled::bind_real(&expr::parse(s)?, &layout)?)).collect()
        };
        let repr = match spec {
            SignalSpec::Zero => Repr::Constant(vec![0.0; dim]),
            SignalSpec::Constant { value } => {
                if value.len() != dim {
                    return Err(SignalError::Dimension { got: value.len(), want: dim });
                }
                Repr::Constant(value.clone())
            }
            SignalSpec::Expr { flow, jump } => Repr::Expr {
                flow: compile(flow)?,
                jump: jump.as_deref().map(compile).transpose()?,
            },
        };
        Ok(Signal { dim, repr })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value during flow at `(t, j)`.
    pub fn flow_value(&self, t: f64, j: usize, out: &mut [f64]) -> Result<(), EvalError> {
        self.value(t, j, false, out)
    }

    /// Value at the instant a jump is taken from `(t, j)`.
    pub fn jump_value(&self, t: f64, j: usize, out: &mut [f64]) -> Result<(), EvalError> {
        self.value(t, j, true, out)
    }

    fn value(&self, t: f64, j: usize, at_jump: bool, out: &mut [f64]) -> Result<(), EvalError> {
        match &self.repr {
            Repr::Constant(v) => out.copy_from_slice(v),
            Repr::Expr { flow, jump } => {
                let env = [t, j as f64];
                let list = match jump {
                    Some(g) if at_jump => g,
                    _ => flow,
                };
                for (o, c) in out.iter_mut().zip(list) {
                    *o = c.eval(&env)?;
                }
            }
        }
        Ok(())
    }

    fn norm_at(&self, t: f64, j: usize, at_jump: bool, buf: &mut [f64]) -> Result<f64, EvalError> {
        self.value(t, j, at_jump, buf)?;
        Ok(buf.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// `‖u‖_(t,j)` over a domain: the supremum of `|u|` on a grid of step `h`
    /// within each flow interval together with every jump instant.
    pub fn sup_norm(&self, domain: &HybridTimeDomain, h: f64) -> Result<f64, EvalError> {
        let mut buf = vec![0.0; self.dim];
        let mut sup = 0.0f64;
        let n_int = domain.intervals().len();
        for (k, iv) in domain.intervals().iter().enumerate() {
            let len = iv.t_end - iv.t_start;
            let steps = (len / h).ceil().max(0.0) as usize;
            for s in 0..=steps {
                let t = (iv.t_start + s as f64 * h).min(iv.t_end);
                sup = sup.max(self.norm_at(t, iv.j, false, &mut buf)?);
            }
            if k + 1 < n_int {
                sup = sup.max(self.norm_at(iv.t_end, iv.j, true, &mut buf)?);
            }
        }
        Ok(sup)
    }
}
