use serde::Serialize;

use super::sample::{Mode, SamplePlan};
use super::{LyapCert, LyapError};
use crate::expr::{directional_derivative, Compiled, DiniEstimate};
use crate::scalarfn::ScalarFn;
use crate::system::CompiledSystem;

/// Absolute slack on `V̇ ≤ −φ(V)`.
pub const FLOW_TOL: f64 = 1e-6;
/// Relative slack on the jump inequality.
pub const JUMP_TOL: f64 = 1e-9;
/// Samples this close to the target set are skipped on flows.
const TARGET_EXCLUSION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    /// Position in the sample sequence (base samples first, then refined).
    pub index: usize,
    pub env: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub clock_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub sample_count: usize,
    /// Samples where the condition was actually tested.
    pub checked: usize,
    pub refined: usize,
    pub inconclusive: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inconclusive_at: Option<(Vec<f64>, String)>,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    fn new(tolerance: f64) -> Self {
        CheckReport {
            verdict: Verdict::Pass,
            witness: None,
            sample_count: 0,
            checked: 0,
            refined: 0,
            inconclusive: 0,
            inconclusive_at: None,
            tolerance,
        }
    }

    fn unsure(&mut self, env: &[f64], why: String) {
        self.inconclusive += 1;
        if self.inconclusive_at.is_none() {
            self.inconclusive_at = Some((env.to_vec(), why));
        }
    }

    fn finish(mut self) -> Self {
        self.verdict = if self.witness.is_some() {
            Verdict::Fail
        } else if self.inconclusive > 0 {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        self
    }
}

type EnvFn<'a> = Box<dyn Fn(&[f64]) -> Result<f64, String> + 'a>;

struct FlowProblem<'a> {
    sys: &'a CompiledSystem,
    v: Compiled,
    phi: ScalarFn,
    /// Gain threshold; the implication is tested where `V ≥ threshold`.
    threshold: EnvFn<'a>,
    dist: EnvFn<'a>,
}

enum Outcome {
    Skipped,
    Ok { near: bool },
    Violation(Witness),
}

fn jittered(env: &[f64], nx: usize, k: usize) -> Vec<f64> {
    // Growing offsets: the last one clears near-ties of max-type V whose
    // switch falls between the difference steps.
    // Weights differ per component, otherwise a common relative shift
    // keeps ratio ties like |x1| = |x2| intact.
    let s = [1e-7, -1e-5, 1e-3][k];
    let mut e = env.to_vec();
    for (j, v) in e[..nx].iter_mut().enumerate() {
        let w = ((j as f64 + 1.0) * 0.618_033_988_75).fract() * 2.0 - 1.0;
        *v += s * w * v.abs().max(1e-3);
    }
    e
}

impl FlowProblem<'_> {
    fn estimate(&self, env: &[f64], rates: &[f64]) -> Result<(DiniEstimate, f64), String> {
        let dir = self.sys.flow_direction(env, rates).map_err(|e| e.to_string())?;
        let est = directional_derivative(&self.v, env, &dir).map_err(|e| e.to_string())?;
        let vx = self.v.eval(env).map_err(|e| e.to_string())?;
        // Cancellation in V(x + hy) − V(x) costs about eps·|V|/h.
        let roundoff = 64.0 * f64::EPSILON * vx.abs() / est.steps[3];
        let rhs = -self.phi.eval(vx).map_err(|e| e.to_string())? + FLOW_TOL + roundoff;
        Ok((est, rhs))
    }

    fn sample(&self, index: usize, env: &[f64], rep: &mut CheckReport, band: f64) -> Outcome {
        let sys = self.sys;
        // Screening: set membership, target exclusion and the gain gate.
        let screen = || -> Result<Option<(bool, bool)>, String> {
            if !sys.in_flow_set(env).map_err(|e| e.to_string())? {
                return Ok(None);
            }
            if (self.dist)(env)? <= TARGET_EXCLUSION {
                return Ok(None);
            }
            let vx = self.v.eval(env).map_err(|e| e.to_string())?;
            let thr = (self.threshold)(env)?;
            Ok(Some(((vx - thr).abs() <= band * vx.max(thr), vx >= thr)))
        };
        let near = match screen() {
            Ok(None) => return Outcome::Skipped,
            Ok(Some((near, false))) => return Outcome::Ok { near },
            Ok(Some((near, true))) => near,
            Err(why) => {
                rep.unsure(env, why);
                return Outcome::Skipped;
            }
        };
        rep.checked += 1;
        for rates in sys.clock_rate_combinations() {
            let mut found = None;
            for attempt in 0..4 {
                let at = if attempt == 0 { env.to_vec() } else { jittered(env, sys.x_len(), attempt - 1) };
                match self.estimate(&at, &rates) {
                    Ok((est, rhs)) if est.converged => {
                        found = Some((est, rhs));
                        break;
                    }
                    Ok(_) => {}
                    Err(why) => {
                        rep.unsure(env, why);
                        return Outcome::Ok { near };
                    }
                }
            }
            let Some((est, rhs)) = found else {
                rep.unsure(env, "difference quotients did not converge".into());
                continue;
            };
            let lhs = est.value - est.truncation_allowance();
            if lhs > rhs {
                return Outcome::Violation(Witness { index, env: env.to_vec(), lhs, rhs, clock_rates: rates });
            }
        }
        Outcome::Ok { near }
    }

    fn run(&self, plan: &SamplePlan) -> Result<CheckReport, LyapError> {
        let mut rep = CheckReport::new(FLOW_TOL);
        let base = plan.points(self.sys, Mode::Flow)?;
        let mut extra = Vec::new();
        for (i, env) in base.iter().enumerate() {
            rep.sample_count += 1;
            match self.sample(i, env, &mut rep, plan.band) {
                Outcome::Violation(w) => {
                    rep.witness = Some(w);
                    return Ok(rep.finish());
                }
                Outcome::Ok { near: true } => extra.extend(plan.neighbours(self.sys, Mode::Flow, env, i)),
                _ => {}
            }
        }
        let cap = 10 * plan.count;
        extra.truncate(cap);
        for (k, env) in extra.iter().enumerate() {
            rep.sample_count += 1;
            rep.refined += 1;
            if let Outcome::Violation(w) = self.sample(base.len() + k, env, &mut rep, plan.band) {
                rep.witness = Some(w);
                break;
            }
        }
        Ok(rep.finish())
    }
}

fn eval_str(c: &Compiled, env: &[f64]) -> Result<f64, String> {
    c.eval(env).map_err(|e| e.to_string())
}

fn apply(f: &ScalarFn, r: f64) -> Result<f64, String> {
    f.eval(r).map_err(|e| e.to_string())
}

fn bind_all(sys: &CompiledSystem, certs: &[LyapCert]) -> Result<Vec<Compiled>, LyapError> {
    if certs.len() != sys.n() {
        return Err(LyapError::Count { got: certs.len(), want: sys.n() });
    }
    certs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.validate_row(i, sys.n())?;
            c.bind(sys, i)
        })
        .collect()
}

/// Flow condition for subsystem `i` in gain-row form:
/// `V_i ≥ max{max_j χ_ij(V_j), χ_i(|u|)} ⟹ V̇_i ≤ −φ_i(V_i)`.
pub fn check_subsystem_flow(
    sys: &CompiledSystem,
    certs: &[LyapCert],
    i: usize,
    plan: &SamplePlan,
) -> Result<CheckReport, LyapError> {
    let vs = bind_all(sys, certs)?;
    let (row, _) = certs[i].gain_rows(sys.n());
    let chi = certs[i].external_gain.clone();
    let others = vs.clone();
    let threshold: EnvFn = Box::new(move |env| {
        let mut thr = apply(&chi, sys.input_norm(env))?;
        for (j, g) in row.iter().enumerate() {
            if j != i && !g.is_zero() {
                thr = thr.max(apply(g, eval_str(&others[j], env)?)?);
            }
        }
        Ok(thr)
    });
    let p = FlowProblem {
        sys,
        v: vs[i].clone(),
        phi: certs[i].flow_rate.phi(),
        threshold,
        dist: Box::new(move |env| sys.distance(i, env).map_err(|e| e.to_string())),
    };
    p.run(plan)
}

/// Flow condition for a certificate of the whole interconnection:
/// `V ≥ χ(|u|) ⟹ V̇ ≤ −φ(V)`.
pub fn check_flow(sys: &CompiledSystem, cert: &LyapCert, plan: &SamplePlan) -> Result<CheckReport, LyapError> {
    let chi = cert.external_gain.clone();
    let p = FlowProblem {
        sys,
        v: cert.bind(sys, 0)?,
        phi: cert.flow_rate.phi(),
        threshold: Box::new(move |env| apply(&chi, sys.input_norm(env))),
        dist: Box::new(move |env| sys.total_distance(env).map_err(|e| e.to_string())),
    };
    p.run(plan)
}

fn jump_core(
    sys: &CompiledSystem,
    v: &Compiled,
    bound: &dyn Fn(&[f64]) -> Result<f64, String>,
    plan: &SamplePlan,
) -> Result<CheckReport, LyapError> {
    let mut rep = CheckReport::new(JUMP_TOL);
    let m_start = sys.layout.u_range.start;
    for (index, env) in plan.points(sys, Mode::Jump)?.into_iter().enumerate() {
        rep.sample_count += 1;
        let run = || -> Result<Option<(f64, f64)>, String> {
            if !sys.in_jump_set(&env).map_err(|e| e.to_string())? {
                return Ok(None);
            }
            let mut post = sys.jump(&env).map_err(|e| e.to_string())?;
            post.extend_from_slice(&env[m_start..]);
            Ok(Some((eval_str(v, &post)?, bound(&env)?)))
        };
        match run() {
            Ok(None) => {}
            Ok(Some((lhs, rhs))) => {
                rep.checked += 1;
                if lhs > rhs + JUMP_TOL * rhs.max(lhs).max(0.0) + 1e-15 {
                    rep.witness = Some(Witness { index, env, lhs, rhs, clock_rates: Vec::new() });
                    break;
                }
            }
            Err(why) => rep.unsure(&env, why),
        }
    }
    Ok(rep.finish())
}

/// Jump condition for subsystem `i` in three-way max form:
/// `V_i(g_i) ≤ max{α_i(V_i), max_j χ_ij(V_j), χ̄_i(|u|)}`.
pub fn check_subsystem_jump(
    sys: &CompiledSystem,
    certs: &[LyapCert],
    i: usize,
    plan: &SamplePlan,
) -> Result<CheckReport, LyapError> {
    let vs = bind_all(sys, certs)?;
    let (_, row) = certs[i].gain_rows(sys.n());
    let alpha = certs[i].jump_rate.alpha();
    let chi = certs[i].jump_external().clone();
    let bound = |env: &[f64]| -> Result<f64, String> {
        let mut b = apply(&alpha, eval_str(&vs[i], env)?)?.max(apply(&chi, sys.input_norm(env))?);
        for (j, g) in row.iter().enumerate() {
            if j != i && !g.is_zero() {
                b = b.max(apply(g, eval_str(&vs[j], env)?)?);
            }
        }
        Ok(b)
    };
    jump_core(sys, &vs[i], &bound, plan)
}

/// Jump condition for a whole-system certificate: `V(g) ≤ max{α(V), χ̄(|u|)}`.
pub fn check_jump(sys: &CompiledSystem, cert: &LyapCert, plan: &SamplePlan) -> Result<CheckReport, LyapError> {
    let v = cert.bind(sys, 0)?;
    let alpha = cert.jump_rate.alpha();
    let chi = cert.jump_external().clone();
    let bound = |env: &[f64]| -> Result<f64, String> {
        Ok(apply(&alpha, eval_str(&v, env)?)?.max(apply(&chi, sys.input_norm(env))?))
    };
    jump_core(sys, &v, &bound, plan)
}

/// `ψ1(|x|_A) ≤ V(x) ≤ ψ2(|x|_A)` on flow and jump samples; `subsystem`
/// selects the distance `|x_i|_{A_i}`, `None` the whole-state distance.
pub fn check_sandwich(
    sys: &CompiledSystem,
    cert: &LyapCert,
    subsystem: Option<usize>,
    plan: &SamplePlan,
) -> Result<CheckReport, LyapError> {
    let v = cert.bind(sys, subsystem.unwrap_or(0))?;
    let mut rep = CheckReport::new(JUMP_TOL);
    let mut pts = plan.points(sys, Mode::Flow)?;
    pts.extend(plan.points(sys, Mode::Jump)?);
    for (index, env) in pts.into_iter().enumerate() {
        rep.sample_count += 1;
        let run = || -> Result<Option<(f64, f64)>, String> {
            let r = match subsystem {
                Some(i) => sys.distance(i, &env),
                None => sys.total_distance(&env),
            }
            .map_err(|e| e.to_string())?;
            if r < 0.0 {
                return Ok(Some((r, 0.0)));
            }
            let vx = eval_str(&v, &env)?;
            let (lo, hi) = (apply(&cert.psi1, r)?, apply(&cert.psi2, r)?);
            let slack = |b: f64| JUMP_TOL * b.abs().max(vx.abs()) + 1e-15;
            if vx < lo - slack(lo) {
                return Ok(Some((lo, vx)));
            }
            if vx > hi + slack(hi) {
                return Ok(Some((vx, hi)));
            }
            Ok(None)
        };
        rep.checked += 1;
        match run() {
            Ok(None) => {}
            Ok(Some((lhs, rhs))) => {
                rep.witness = Some(Witness { index, env, lhs, rhs, clock_rates: Vec::new() });
                break;
            }
            Err(why) => rep.unsure(&env, why),
        }
    }
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::lyapunov::SampleBox;
    use crate::system::{example_network, Interconnection, Subsystem};

    fn example_certs(c1: f64, d1: f64, c2: f64, d2: f64) -> Vec<LyapCert> {
        let mut v1 = LyapCert::exponential(parse("abs(x1)").unwrap(), c1, d1);
        v1.internal_gains = vec![ScalarFn::zero(), ScalarFn::power(1.0, 2.0)];
        v1.jump_internal_gains = Some(vec![]);
        let mut v2 = LyapCert::exponential(parse("abs(x2)").unwrap(), c2, d2);
        v2.internal_gains = vec![ScalarFn::power(0.2, 0.5), ScalarFn::zero()];
        v2.jump_internal_gains = Some(vec![]);
        vec![v1, v2]
    }

    fn plan() -> SamplePlan {
        SamplePlan::new(SampleBox::symmetric(2, 2.0, 0, 0.0)).with_count(4000)
    }

    #[test]
    fn example_subsystem_flow_rates() {
        let sys = example_network().compile().unwrap();
        let good = example_certs(-2.0, 1.0, 2.5, -1.0);
        assert!(check_subsystem_flow(&sys, &good, 1, &plan()).unwrap().passed());
        assert!(check_subsystem_flow(&sys, &good, 0, &plan()).unwrap().passed());
        let bad = example_certs(1.0, 1.0, 2.5, -1.0);
        let rep = check_subsystem_flow(&sys, &bad, 0, &plan()).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        assert!(rep.witness.unwrap().lhs > 0.0);
        // Inflating the tight rate by 0.1 is caught.
        let inflated = example_certs(-2.0, 1.0, 2.6, -1.0);
        assert_eq!(check_subsystem_flow(&sys, &inflated, 1, &plan()).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn example_subsystem_jump_rates() {
        let sys = example_network().compile().unwrap();
        let good = example_certs(-2.0, 1.0, 2.5, -1.0);
        assert!(check_subsystem_jump(&sys, &good, 0, &plan()).unwrap().passed());
        assert!(check_subsystem_jump(&sys, &good, 1, &plan()).unwrap().passed());
        let bad = example_certs(-2.0, 1.0, 2.5, 0.0);
        let w = check_subsystem_jump(&sys, &bad, 1, &plan()).unwrap().witness.unwrap();
        assert!(w.env[1] != 0.0);
    }

    #[test]
    fn scalar_linear_system() {
        let sub = Subsystem {
            id: 1,
            state_dim: 1,
            flow: vec![parse("-x1").unwrap()],
            jump: vec![parse("0").unwrap()],
            flow_set: parse("true").unwrap(),
            jump_set: parse("false").unwrap(),
            target_distance: None,
        };
        let sys = Interconnection::autonomous(vec![sub]).compile().unwrap();
        let mut cert = LyapCert::exponential(parse("x1^2").unwrap(), 2.0, 1.0);
        cert.psi1 = ScalarFn::power(1.0, 2.0);
        cert.psi2 = ScalarFn::power(1.0, 2.0);
        let plan = SamplePlan::new(SampleBox::symmetric(1, 3.0, 0, 0.0)).with_count(2000);
        assert!(check_flow(&sys, &cert, &plan).unwrap().passed());
        assert!(check_sandwich(&sys, &cert, None, &plan).unwrap().passed());
        cert.flow_rate = super::super::FlowRate::Exponential(2.1);
        assert_eq!(check_flow(&sys, &cert, &plan).unwrap().verdict, Verdict::Fail);
        cert.psi2 = ScalarFn::power(0.9, 2.0);
        assert_eq!(check_sandwich(&sys, &cert, None, &plan).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn evaluation_failures_are_inconclusive() {
        let sys = example_network().compile().unwrap();
        let mut certs = example_certs(-2.0, 1.0, 2.5, -1.0);
        certs[0].v = parse("ln(x1 + 1.5)").unwrap();
        let rep = check_subsystem_flow(&sys, &certs, 0, &plan()).unwrap();
        assert_ne!(rep.verdict, Verdict::Pass);
        assert!(rep.inconclusive > 0);
    }
}
