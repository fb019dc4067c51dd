use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::CompiledSystem;
use super::scheduler::JumpScheduler;
use super::signal::Signal;
use crate::expr::EvalError;
use crate::hybridtime::{DomainError, HybridTimeDomain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub horizon_t: f64,
    pub horizon_j: usize,
    /// RK4 step.
    pub h: f64,
    /// States beyond this magnitude count as a blow-up.
    pub blowup: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { horizon_t: 10.0, horizon_j: 100_000, h: 1e-3, blowup: 1e12 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("initial state has {got} components, expected {want}")]
    Dimension { got: usize, want: usize },
    #[error("input signal has dimension {got}, system expects {want}")]
    InputDimension { got: usize, want: usize },
    #[error("initial condition lies in neither the flow set nor the jump set")]
    InitialCondition,
    #[error("state blew up at (t={t}, j={j})")]
    BlowUp { t: f64, j: usize },
    #[error("evaluation failed at (t={t}, j={j}): {source}")]
    Eval { t: f64, j: usize, source: EvalError },
    #[error("bad step or horizon")]
    Config,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Horizon,
    JumpLimit,
    /// Neither flow nor jump admissible.
    Death,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub t: f64,
    /// Jump counter before the jump.
    pub j: usize,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
    pub u: Vec<f64>,
    /// Taken because flowing was impossible, not because it was scheduled.
    pub forced: bool,
}

/// A simulated solution pair; samples are stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub domain: HybridTimeDomain,
    pub times: Vec<f64>,
    pub js: Vec<usize>,
    states: Vec<f64>,
    inputs: Vec<f64>,
    pub state_len: usize,
    pub input_len: usize,
    pub jumps: Vec<JumpRecord>,
    pub end: EndReason,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.state_len..(k + 1) * self.state_len]
    }

    pub fn input(&self, k: usize) -> &[f64] {
        &self.inputs[k * self.input_len..(k + 1) * self.input_len]
    }

    /// `[z, u]` at sample `k`, ready for compiled expressions.
    pub fn env(&self, k: usize) -> Vec<f64> {
        let mut e = self.state(k).to_vec();
        e.extend_from_slice(self.input(k));
        e
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// CSV with columns `t, j`, then the given state and input names.
    pub fn to_csv(&self, state_names: &[String], input_names: &[String]) -> String {
        let mut out = String::from("t,j");
        for n in state_names.iter().chain(input_names) {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for k in 0..self.len() {
            out.push_str(&format!("{},{}", self.times[k], self.js[k]));
            for v in self.state(k).iter().chain(self.input(k)) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Column names for [`Trajectory::to_csv`]: `x1, x2, ...` for scalar
/// states, `x1_0, x1_1, ...` for vector ones, `tau{i}` for clocks, `u1..uM`.
pub fn csv_columns(sys: &CompiledSystem) -> (Vec<String>, Vec<String>) {
    let mut states = Vec::new();
    for s in &sys.model.subsystems {
        if s.state_dim == 1 {
            states.push(s.state_name());
        } else {
            states.extend((0..s.state_dim).map(|k| format!("{}_{k}", s.state_name())));
        }
    }
    for c in sys.clocks() {
        states.push(sys.model.subsystems[c.owner].clock_name());
    }
    let inputs = (1..=sys.layout.input_dim()).map(|k| format!("u{k}")).collect();
    (states, inputs)
}

struct Recorder {
    times: Vec<f64>,
    js: Vec<usize>,
    states: Vec<f64>,
    inputs: Vec<f64>,
}

impl Recorder {
    fn push(&mut self, t: f64, j: usize, z: &[f64], u: &[f64]) {
        self.times.push(t);
        self.js.push(j);
        self.states.extend_from_slice(z);
        self.inputs.extend_from_slice(u);
    }
}

struct Stepper<'a> {
    sys: &'a CompiledSystem,
    input: &'a Signal,
    env: Vec<f64>,
    k: [Vec<f64>; 4],
    scratch: Vec<f64>,
}

impl Stepper<'_> {
    fn load(&mut self, z: &[f64], clocks_at: &[f64], t: f64, j: usize) -> Result<(), EvalError> {
        let n = z.len();
        self.env[..n].copy_from_slice(z);
        for (&slot, &tau) in self.sys.layout.clock_slots.iter().zip(clocks_at) {
            self.env[slot] = tau;
        }
        let (env, input) = (&mut self.env, self.input);
        input.flow_value(t, j, &mut env[n..])
    }

    /// One RK4 step of length `dt` on the non-clock states; clocks follow
    /// their canonical selection exactly.
    fn step(&mut self, z: &mut [f64], t: f64, j: usize, dt: f64) -> Result<(), EvalError> {
        let sys = self.sys;
        let nx = sys.x_len();
        let clocks = sys.clocks();
        let slots = &sys.layout.clock_slots;
        let tau_at = |z: &[f64], s: f64| -> Vec<f64> {
            clocks.iter().zip(slots).map(|(c, &slot)| c.kind.advance(z[slot], s)).collect()
        };
        let weights = [0.0, 0.5, 0.5, 1.0];
        for stage in 0..4 {
            let w = weights[stage];
            self.scratch.copy_from_slice(z);
            if stage > 0 {
                for i in 0..nx {
                    self.scratch[i] += w * dt * self.k[stage - 1][i];
                }
            }
            let taus = tau_at(z, w * dt);
            let zs = std::mem::take(&mut self.scratch);
            let r = self.load(&zs, &taus, t + w * dt, j);
            self.scratch = zs;
            r?;
            let (env, k) = (&self.env, &mut self.k[stage]);
            sys.flow_x(env, k)?;
        }
        let taus = tau_at(z, dt);
        for i in 0..nx {
            z[i] += dt / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
        for (&slot, tau) in slots.iter().zip(taus) {
            z[slot] = tau;
        }
        Ok(())
    }
}

fn env_of(z: &[f64], u: &[f64]) -> Vec<f64> {
    let mut e = z.to_vec();
    e.extend_from_slice(u);
    e
}

/// Simulate from `z0` (states then clocks), requesting jumps at
/// `jump_times`. A scheduled jump outside the jump set is skipped with a
/// warning; a state that cannot flow jumps if it may and dies otherwise.
pub fn simulate(
    sys: &CompiledSystem,
    z0: &[f64],
    input: &Signal,
    jump_times: &[f64],
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    let n = sys.layout.state_len();
    let m = sys.layout.input_dim();
    if z0.len() != n {
        return Err(SimError::Dimension { got: z0.len(), want: n });
    }
    if input.dim() != m {
        return Err(SimError::InputDimension { got: input.dim(), want: m });
    }
    if !(cfg.h > 0.0 && cfg.horizon_t >= 0.0 && cfg.horizon_t.is_finite()) {
        return Err(SimError::Config);
    }
    let mut t = 0.0;
    let mut j = 0usize;
    let mut z = z0.to_vec();
    let mut u = vec![0.0; m];
    let ev = |t: f64, j: usize| move |source| SimError::Eval { t, j, source };

    input.flow_value(0.0, 0, &mut u).map_err(ev(0.0, 0))?;
    let env0 = env_of(&z, &u);
    if !(sys.in_flow_set(&env0).map_err(ev(0.0, 0))? || sys.in_jump_set(&env0).map_err(ev(0.0, 0))?) {
        return Err(SimError::InitialCondition);
    }

    let mut rec = Recorder { times: Vec::new(), js: Vec::new(), states: Vec::new(), inputs: Vec::new() };
    rec.push(t, j, &z, &u);
    let mut jumps = Vec::new();
    let mut taken = Vec::new();
    let mut warnings = Vec::new();
    let mut left_flow_set = 0usize;
    let mut stepper = Stepper {
        sys,
        input,
        env: vec![0.0; n + m],
        k: std::array::from_fn(|_| vec![0.0; sys.x_len()]),
        scratch: vec![0.0; n],
    };
    let mut next = 0usize;
    let tol = |t: f64| 1e-12 * t.abs().max(1.0);

    let do_jump = |z: &mut Vec<f64>, t: f64, j: &mut usize, forced: bool, rec: &mut Recorder, jumps: &mut Vec<JumpRecord>, taken: &mut Vec<f64>| -> Result<(), SimError> {
        let mut uj = vec![0.0; m];
        input.jump_value(t, *j, &mut uj).map_err(ev(t, *j))?;
        let pre = env_of(z, &uj);
        let post = sys.jump(&pre).map_err(ev(t, *j))?;
        jumps.push(JumpRecord { t, j: *j, pre: z.clone(), post: post.clone(), u: uj, forced });
        taken.push(t);
        *z = post;
        *j += 1;
        let mut uf = vec![0.0; m];
        input.flow_value(t, *j, &mut uf).map_err(ev(t, *j))?;
        rec.push(t, *j, z, &uf);
        Ok(())
    };

    let end = 'sim: loop {
        while next < jump_times.len() && jump_times[next] <= t + tol(t) {
            next += 1;
            if j >= cfg.horizon_j {
                break 'sim EndReason::JumpLimit;
            }
            let mut uj = vec![0.0; m];
            input.jump_value(t, j, &mut uj).map_err(ev(t, j))?;
            if sys.in_jump_set(&env_of(&z, &uj)).map_err(ev(t, j))? {
                do_jump(&mut z, t, &mut j, false, &mut rec, &mut jumps, &mut taken)?;
                check_finite(&z, cfg.blowup, t, j)?;
            } else {
                warnings.push(format!("scheduled jump at t={t} skipped: state outside the jump set"));
            }
        }
        if t >= cfg.horizon_t - tol(cfg.horizon_t) {
            break EndReason::Horizon;
        }
        input.flow_value(t, j, &mut u).map_err(ev(t, j))?;
        if !sys.can_flow(&env_of(&z, &u)).map_err(ev(t, j))? {
            let mut uj = vec![0.0; m];
            input.jump_value(t, j, &mut uj).map_err(ev(t, j))?;
            if !sys.in_jump_set(&env_of(&z, &uj)).map_err(ev(t, j))? {
                break EndReason::Death;
            }
            if j >= cfg.horizon_j {
                break EndReason::JumpLimit;
            }
            do_jump(&mut z, t, &mut j, true, &mut rec, &mut jumps, &mut taken)?;
            check_finite(&z, cfg.blowup, t, j)?;
            continue;
        }
        let mut target = (t + cfg.h).min(cfg.horizon_t);
        if let Some(&tj) = jump_times.get(next) {
            target = target.min(tj);
        }
        // Land exactly on the cap of any unit-rate clock.
        for (c, &slot) in sys.clocks().iter().zip(&sys.layout.clock_slots) {
            if let crate::system::ClockKind::Radt(_) = c.kind {
                target = target.min(t + (c.kind.cap() - z[slot]));
            }
        }
        let dt = target - t;
        stepper.step(&mut z, t, j, dt).map_err(ev(t, j))?;
        t = target;
        check_finite(&z, cfg.blowup, t, j)?;
        input.flow_value(t, j, &mut u).map_err(ev(t, j))?;
        rec.push(t, j, &z, &u);
        if !sys.in_flow_set(&env_of(&z, &u)).map_err(ev(t, j))? {
            left_flow_set += 1;
            if left_flow_set == 1 {
                warnings.push(format!("flow set predicate flipped between grid points near t={t}, j={j}"));
            }
        }
    };
    if left_flow_set > 1 {
        warnings.push(format!("flow set left {left_flow_set} times in total"));
    }
    let domain = HybridTimeDomain::from_jump_times(&taken, t)?;
    Ok(Trajectory {
        domain,
        times: rec.times,
        js: rec.js,
        states: rec.states,
        inputs: rec.inputs,
        state_len: n,
        input_len: m,
        jumps,
        end,
        warnings,
    })
}

fn check_finite(z: &[f64], limit: f64, t: f64, j: usize) -> Result<(), SimError> {
    if z.iter().all(|v| v.is_finite() && v.abs() <= limit) {
        Ok(())
    } else {
        Err(SimError::BlowUp { t, j })
    }
}

/// Draw jump times from `scheduler` and simulate.
pub fn simulate_scheduled(
    sys: &CompiledSystem,
    z0: &[f64],
    input: &Signal,
    scheduler: &JumpScheduler,
    rng: &mut ChaCha8Rng,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    let times = scheduler.jump_times(cfg.horizon_t, cfg.horizon_j, rng);
    simulate(sys, z0, input, &times, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybridtime::{check_adt, AdtParams};
    use crate::system::scheduler::trajectory_rng;
    use crate::system::{example_network, Clock, ClockKind};

    fn cfg(t: f64, h: f64) -> SimConfig {
        SimConfig { horizon_t: t, h, ..SimConfig::default() }
    }

    fn flow_only(h: f64) -> f64 {
        let sys = example_network().compile().unwrap();
        let tr = simulate(&sys, &[1.0, 1.0], &Signal::zero(0), &[], &cfg(0.1, h)).unwrap();
        assert_eq!(tr.end, EndReason::Horizon);
        assert!((tr.times.last().unwrap() - 0.1).abs() < 1e-12);
        tr.last_state()[0]
    }

    #[test]
    fn flow_matches_fine_reference() {
        // Independent high-accuracy integration gives x1(0.1) = 1.185452.
        let reference = flow_only(1e-6);
        assert!((reference - 1.185_452).abs() < 1e-5, "{reference}");
        assert!((flow_only(1e-3) - reference).abs() < 1e-9);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let reference = flow_only(1e-5);
        let e1 = (flow_only(0.05) - reference).abs();
        let e2 = (flow_only(0.025) - reference).abs();
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn three_jumps_at_zero() {
        let sys = example_network().compile().unwrap();
        let tr = simulate(&sys, &[1.0, 1.0], &Signal::zero(0), &[0.0, 0.0, 0.0], &cfg(0.0, 1e-3)).unwrap();
        assert_eq!(tr.jumps.len(), 3);
        let z = tr.last_state();
        assert!((z[0] - (-3f64).exp()).abs() < 1e-15);
        assert!((z[1] - 3f64.exp()).abs() < 1e-12);
        assert_eq!(tr.domain.end().j, 3);
    }

    #[test]
    fn origin_stays_put() {
        let sys = example_network().compile().unwrap();
        let tr = simulate(&sys, &[0.0, 0.0], &Signal::zero(0), &[0.3, 0.7], &cfg(1.0, 1e-2)).unwrap();
        assert!((0..tr.len()).all(|k| tr.state(k).iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn jumps_are_exact_and_runs_deterministic() {
        let mut net = example_network();
        let adt = AdtParams::new(2.25, 1.0).unwrap();
        net.clocks.push(Clock { owner: 1, kind: ClockKind::Adt(adt) });
        let sys = net.compile().unwrap();
        let sched = JumpScheduler::AdtBudget { params: adt, base_rate: 4.0 };
        let run = || {
            simulate_scheduled(&sys, &[0.5, -0.2, 1.0], &Signal::zero(0), &sched, &mut trajectory_rng(11, 0), &cfg(3.0, 1e-3))
                .unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(!a.jumps.is_empty());
        for jr in &a.jumps {
            assert_eq!(sys.jump(&jr.pre).unwrap(), jr.post);
            assert!(sys.in_jump_set(&jr.pre).unwrap());
        }
        assert!(check_adt(&a.domain, &adt).pass);
    }

    #[test]
    fn inadmissible_jump_skipped_and_blowup_reported() {
        let mut net = example_network();
        net.subsystems[0].jump_set = crate::expr::parse("x1 > 5").unwrap();
        let sys = net.compile().unwrap();
        let tr = simulate(&sys, &[1.0, 0.0], &Signal::zero(0), &[0.5], &cfg(1.0, 1e-2)).unwrap();
        assert!(tr.jumps.is_empty());
        assert_eq!(tr.warnings.len(), 1);
        let long = SimConfig { horizon_t: 100.0, h: 1e-2, blowup: 1e6, ..SimConfig::default() };
        assert!(matches!(simulate(&sys, &[1.0, 0.0], &Signal::zero(0), &[], &long), Err(SimError::BlowUp { .. })));
    }

    #[test]
    fn death_when_nothing_admissible() {
        let mut net = example_network();
        net.subsystems[0].flow_set = crate::expr::parse("x1 <= 1.5").unwrap();
        net.subsystems[0].jump_set = crate::expr::parse("x1 < 0").unwrap();
        let sys = net.compile().unwrap();
        let tr = simulate(&sys, &[1.0, 0.0], &Signal::zero(0), &[], &cfg(5.0, 1e-2)).unwrap();
        assert_eq!(tr.end, EndReason::Death);
        assert!(!tr.warnings.is_empty());
        assert!(matches!(
            simulate(&sys, &[2.0, 0.0], &Signal::zero(0), &[], &cfg(5.0, 1e-2)),
            Err(SimError::InitialCondition)
        ));
    }
}
