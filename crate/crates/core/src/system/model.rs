use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, BindError, Compiled, EvalError, Expr, VarLayout};
use crate::hybridtime::{AdtParams, RadtParams};

/// Tolerance on clock interval membership.
pub const CLOCK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("subsystem {id}: {what} has {got} components, expected {want}")]
    Dimension { id: usize, what: &'static str, got: usize, want: usize },
    #[error("subsystem {id}: {what}: {source}")]
    Bind { id: usize, what: String, source: BindError },
    #[error("input: {what}: {source}")]
    InputBind { what: &'static str, source: BindError },
    #[error("subsystem ids must be 1, 2, ..., n in order")]
    Ids,
    #[error("subsystem {0} has more than one clock")]
    DuplicateClock(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    /// 1-based; the state is named `x{id}` and its clock `tau{id}`.
    pub id: usize,
    pub state_dim: usize,
    pub flow: Vec<Expr>,
    pub jump: Vec<Expr>,
    pub flow_set: Expr,
    pub jump_set: Expr,
    /// `|x_i|_{A_i}`; `None` means the Euclidean norm of `x_i`.
    pub target_distance: Option<Expr>,
}

impl Subsystem {
    pub fn state_name(&self) -> String {
        format!("x{}", self.id)
    }

    pub fn clock_name(&self) -> String {
        format!("tau{}", self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ClockKind {
    /// `τ̇ ∈ [0, δ]` on `[0, N₀]`, `τ⁺ = τ − 1` on `[1, N₀]`.
    Adt(AdtParams),
    /// `τ̇ = 1` on `[0, N₀*δ*]`, `τ⁺ = max(0, τ − δ*)`.
    Radt(RadtParams),
}

impl ClockKind {
    /// Upper end of the clock's range.
    pub fn cap(&self) -> f64 {
        match self {
            ClockKind::Adt(p) => p.n0,
            ClockKind::Radt(p) => p.n0_star * p.delta_star,
        }
    }

    /// Extreme clock rates; flow conditions are affine in the rate, so
    /// checking these covers the whole inclusion.
    pub fn rate_extremes(&self) -> Vec<f64> {
        match self {
            ClockKind::Adt(p) => vec![0.0, p.delta],
            ClockKind::Radt(_) => vec![1.0],
        }
    }

    /// Range the clock is sampled from when checking jumps.
    pub fn jump_range(&self) -> (f64, f64) {
        match self {
            ClockKind::Adt(p) => (1.0, p.n0),
            ClockKind::Radt(p) => (0.0, p.n0_star * p.delta_star),
        }
    }

    pub fn reset(&self, tau: f64) -> f64 {
        match self {
            ClockKind::Adt(_) => (tau - 1.0).max(0.0),
            ClockKind::Radt(p) => (tau - p.delta_star).max(0.0),
        }
    }

    /// Canonical flow selection: rate `δ` saturating at `N₀` (ADT), unit
    /// rate (RADT). Exact over a step of length `dt`.
    pub fn advance(&self, tau: f64, dt: f64) -> f64 {
        match self {
            ClockKind::Adt(p) => (tau + p.delta * dt).min(p.n0),
            ClockKind::Radt(_) => tau + dt,
        }
    }

    pub fn in_range(&self, tau: f64) -> bool {
        tau >= -CLOCK_TOL && tau <= self.cap() + CLOCK_TOL
    }

    pub fn jump_allowed(&self, tau: f64) -> bool {
        let (lo, hi) = self.jump_range();
        tau >= lo - CLOCK_TOL && tau <= hi + CLOCK_TOL
    }

    /// Whether a flow of positive length is possible from `tau`.
    pub fn can_flow(&self, tau: f64) -> bool {
        match self {
            ClockKind::Adt(_) => self.in_range(tau),
            ClockKind::Radt(_) => tau >= -CLOCK_TOL && tau < self.cap() - CLOCK_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clock {
    /// Index into `Interconnection::subsystems`.
    pub owner: usize,
    pub kind: ClockKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interconnection {
    pub subsystems: Vec<Subsystem>,
    pub input_dim: usize,
    pub input_flow_set: Expr,
    pub input_jump_set: Expr,
    pub clocks: Vec<Clock>,
}

/// Slot assignment for the flat environment `[x_1, ..., x_n, clocks, u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    pub vars: VarLayout,
    pub x_ranges: Vec<Range<usize>>,
    pub clock_slots: Vec<usize>,
    pub u_range: Range<usize>,
}

impl StateLayout {
    /// Length of the state part `z` (everything but the input).
    pub fn state_len(&self) -> usize {
        self.u_range.start
    }

    pub fn env_len(&self) -> usize {
        self.u_range.end
    }

    pub fn input_dim(&self) -> usize {
        self.u_range.len()
    }
}

/// An interconnection with every expression bound to one layout.
#[derive(Debug, Clone)]
pub struct CompiledSystem {
    pub model: Interconnection,
    pub layout: StateLayout,
    flow: Vec<Compiled>,
    jump: Vec<Compiled>,
    flow_sets: Vec<Compiled>,
    jump_sets: Vec<Compiled>,
    distances: Vec<Option<Compiled>>,
    /// Clock index per subsystem.
    clock_of: Vec<Option<usize>>,
}

impl Interconnection {
    /// GAS-style interconnection with no input and all sets true.
    pub fn autonomous(subsystems: Vec<Subsystem>) -> Self {
        Interconnection {
            subsystems,
            input_dim: 0,
            input_flow_set: Expr::Bool(true),
            input_jump_set: Expr::Bool(true),
            clocks: Vec::new(),
        }
    }

    pub fn layout(&self) -> StateLayout {
        let mut vars = VarLayout::new();
        let mut x_ranges = Vec::new();
        for s in &self.subsystems {
            let base = vars.push(&s.state_name(), s.state_dim);
            x_ranges.push(base..base + s.state_dim);
        }
        let mut clock_slots = Vec::new();
        for c in &self.clocks {
            clock_slots.push(vars.push(&self.subsystems[c.owner].clock_name(), 1));
        }
        let start = vars.len();
        if self.input_dim > 0 {
            vars.push("u", self.input_dim);
        }
        StateLayout { vars, x_ranges, clock_slots, u_range: start..start + self.input_dim }
    }

    pub fn compile(&self) -> Result<CompiledSystem, ModelError> {
        for (k, s) in self.subsystems.iter().enumerate() {
            if s.id != k + 1 {
                return Err(ModelError::Ids);
            }
        }
        let mut clock_of = vec![None; self.subsystems.len()];
        for (ci, c) in self.clocks.iter().enumerate() {
            if clock_of[c.owner].replace(ci).is_some() {
                return Err(ModelError::DuplicateClock(self.subsystems[c.owner].id));
            }
        }
        let layout = self.layout();
        let vars = &layout.vars;
        let mut flow = Vec::new();
        let mut jump = Vec::new();
        let mut flow_sets = Vec::new();
        let mut jump_sets = Vec::new();
        let mut distances = Vec::new();
        for s in &self.subsystems {
            let bind = |what: String, e: &Expr, real: bool| {
                let r = if real { Compiled::bind_real(e, vars) } else { Compiled::bind_bool(e, vars) };
                r.map_err(|source| ModelError::Bind { id: s.id, what, source })
            };
            for (what, list) in [("flow map", &s.flow), ("jump map", &s.jump)] {
                if list.len() != s.state_dim {
                    return Err(ModelError::Dimension { id: s.id, what, got: list.len(), want: s.state_dim });
                }
            }
            for (k, e) in s.flow.iter().enumerate() {
                flow.push(bind(format!("flow[{k}]"), e, true)?);
            }
            for (k, e) in s.jump.iter().enumerate() {
                jump.push(bind(format!("jump[{k}]"), e, true)?);
            }
            flow_sets.push(bind("flow set".into(), &s.flow_set, false)?);
            jump_sets.push(bind("jump set".into(), &s.jump_set, false)?);
            distances.push(match &s.target_distance {
                Some(e) => Some(bind("target distance".into(), e, true)?),
                None => None,
            });
        }
        let input = |what, e: &Expr| {
            Compiled::bind_bool(e, vars).map_err(|source| ModelError::InputBind { what, source })
        };
        flow_sets.push(input("flow set", &self.input_flow_set)?);
        jump_sets.push(input("jump set", &self.input_jump_set)?);
        Ok(CompiledSystem { model: self.clone(), layout, flow, jump, flow_sets, jump_sets, distances, clock_of })
    }
}

impl CompiledSystem {
    pub fn n(&self) -> usize {
        self.model.subsystems.len()
    }

    pub fn clocks(&self) -> &[Clock] {
        &self.model.clocks
    }

    pub fn clock_of(&self, subsystem: usize) -> Option<usize> {
        self.clock_of[subsystem]
    }

    /// `ẋ` for the non-clock states, written into `out[..x_len]`.
    pub fn flow_x(&self, env: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (o, f) in out.iter_mut().zip(&self.flow) {
            *o = f.eval(env)?;
        }
        Ok(())
    }

    /// Number of non-clock state components.
    pub fn x_len(&self) -> usize {
        self.flow.len()
    }

    /// Full-environment flow direction with the given clock rates.
    pub fn flow_direction(&self, env: &[f64], clock_rates: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut dir = vec![0.0; env.len()];
        self.flow_x(env, &mut dir[..self.x_len()])?;
        for (&slot, &r) in self.layout.clock_slots.iter().zip(clock_rates) {
            dir[slot] = r;
        }
        Ok(dir)
    }

    /// Every combination of extreme clock rates.
    pub fn clock_rate_combinations(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for c in self.clocks() {
            let mut next = Vec::new();
            for prefix in &out {
                for r in c.kind.rate_extremes() {
                    let mut v = prefix.clone();
                    v.push(r);
                    next.push(v);
                }
            }
            out = next;
        }
        out
    }

    /// Post-jump state `z⁺` from the pre-jump environment.
    pub fn jump(&self, env: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut z = env[..self.layout.state_len()].to_vec();
        for (k, g) in self.jump.iter().enumerate() {
            z[k] = g.eval(env)?;
        }
        for (c, &slot) in self.clocks().iter().zip(&self.layout.clock_slots) {
            z[slot] = c.kind.reset(env[slot]);
        }
        Ok(z)
    }

    pub fn in_flow_set(&self, env: &[f64]) -> Result<bool, EvalError> {
        for p in &self.flow_sets {
            if !p.eval_bool(env)? {
                return Ok(false);
            }
        }
        Ok(self.clocks().iter().zip(&self.layout.clock_slots).all(|(c, &s)| c.kind.in_range(env[s])))
    }

    /// Flow set membership that also leaves room for a positive-length flow.
    pub fn can_flow(&self, env: &[f64]) -> Result<bool, EvalError> {
        Ok(self.in_flow_set(env)?
            && self.clocks().iter().zip(&self.layout.clock_slots).all(|(c, &s)| c.kind.can_flow(env[s])))
    }

    pub fn in_jump_set(&self, env: &[f64]) -> Result<bool, EvalError> {
        for p in &self.jump_sets {
            if !p.eval_bool(env)? {
                return Ok(false);
            }
        }
        Ok(self.clocks().iter().zip(&self.layout.clock_slots).all(|(c, &s)| c.kind.jump_allowed(env[s])))
    }

    /// `|x_i|_{A_i}`; clock components inside their range contribute zero.
    pub fn distance(&self, i: usize, env: &[f64]) -> Result<f64, EvalError> {
        let base = match &self.distances[i] {
            Some(d) => d.eval(env)?,
            None => env[self.layout.x_ranges[i].clone()].iter().map(|v| v * v).sum::<f64>().sqrt(),
        };
        Ok(match self.clock_of[i] {
            Some(ci) => {
                let tau = env[self.layout.clock_slots[ci]];
                let cap = self.clocks()[ci].kind.cap();
                let off = if tau < 0.0 { -tau } else { (tau - cap).max(0.0) };
                base.hypot(off)
            }
            None => base,
        })
    }

    /// Distance of the whole state to `A_1 × ... × A_n`.
    pub fn total_distance(&self, env: &[f64]) -> Result<f64, EvalError> {
        let mut acc = 0.0;
        for i in 0..self.n() {
            acc += self.distance(i, env)?.powi(2);
        }
        Ok(acc.sqrt())
    }

    pub fn input_norm(&self, env: &[f64]) -> f64 {
        env[self.layout.u_range.clone()].iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Parse a list of DSL strings.
pub fn parse_all(src: &[String]) -> Result<Vec<Expr>, expr::ParseError> {
    src.iter().map(|s| expr::parse(s)).collect()
}

/// The two-subsystem example network: `ẋ1 = x1 + x2²`, `ẋ2 = −3x2 + 0.1√|x1|`,
/// `x1⁺ = e⁻¹x1`, `x2⁺ = e·x2`, everything allowed to flow and jump.
pub fn example_network() -> Interconnection {
    let p = |s: &str| expr::parse(s).expect("static expression");
    let sub = |id, f: &str, g: &str| Subsystem {
        id,
        state_dim: 1,
        flow: vec![p(f)],
        jump: vec![p(g)],
        flow_set: Expr::Bool(true),
        jump_set: Expr::Bool(true),
        target_distance: None,
    };
    Interconnection::autonomous(vec![
        sub(1, "x1 + x2^2", "exp(-1)*x1"),
        sub(2, "-3*x2 + 0.1*sqrt(abs(x1))", "exp(1)*x2"),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_maps() {
        let mut net = example_network();
        net.clocks.push(Clock { owner: 1, kind: ClockKind::Adt(AdtParams::new(2.25, 1.0).unwrap()) });
        let sys = net.compile().unwrap();
        assert_eq!(sys.layout.state_len(), 3);
        assert_eq!(sys.layout.vars.get("tau2"), Some((2, 1)));
        let env = [1.0, 2.0, 1.0];
        let dir = sys.flow_direction(&env, &[2.25]).unwrap();
        assert_eq!(dir[0], 5.0);
        assert_eq!(dir[2], 2.25);
        let z = sys.jump(&env).unwrap();
        assert_eq!(z, vec![(-1f64).exp(), 2.0 * 1f64.exp(), 0.0]);
        assert!(sys.in_jump_set(&env).unwrap());
        assert!(!sys.in_jump_set(&[1.0, 2.0, 0.5]).unwrap());
        assert_eq!(sys.clock_rate_combinations(), vec![vec![0.0], vec![2.25]]);
        assert!((sys.total_distance(&env).unwrap() - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut net = example_network();
        net.subsystems[0].jump.push(Expr::num(0.0));
        assert!(matches!(net.compile(), Err(ModelError::Dimension { .. })));
    }

    #[test]
    fn unknown_variable_reported_with_subsystem() {
        let mut net = example_network();
        net.subsystems[1].flow[0] = expr::parse("x3").unwrap();
        match net.compile() {
            Err(ModelError::Bind { id: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
