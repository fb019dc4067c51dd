use serde::Serialize;
use thiserror::Error;

use crate::expr::Compiled;
use crate::hybridtime::{check_gen_dwell, DwellWindow, Marginal, PairWitness};
use crate::scalarfn::{FnError, KlFn, ScalarFn};
use crate::system::{CompiledSystem, Trajectory};

/// `|x(t,j)|_A ≤ max{β(|x(0,0)|_A, t + j), γ(‖u‖)}` for solutions whose
/// domain satisfies the window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IssEstimate {
    pub beta: KlFn,
    pub gamma: ScalarFn,
    pub window: DwellWindow,
    pub c: f64,
    pub d: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal: Option<Marginal>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Fn(#[from] FnError),
    #[error("window {0:?} gives no decay for rates c={1}, d={2}")]
    NoDecay(DwellWindow, f64, f64),
}

/// Decay rate and exponent offset of `β`, including the marginal windows
/// where one of `η, λ` is zero.
fn decay_and_offset(c: f64, d: f64, w: &DwellWindow) -> Result<(f64, f64), EstimateError> {
    let (eta, lambda, mu) = (w.eta, w.lambda, w.mu);
    match w.marginal() {
        None => Ok((eta.min(lambda), mu)),
        Some(Marginal::EtaZero) if c > 0.0 && d < 0.0 => {
            Ok(((-lambda * d / c).min(lambda * lambda / c), (1.0 + lambda / c) * mu))
        }
        Some(Marginal::LambdaZero) if d > 0.0 && c < 0.0 => {
            Ok(((-eta * c / d).min(eta * eta / d), (1.0 + eta / d) * mu))
        }
        Some(_) => Err(EstimateError::NoDecay(*w, c, d)),
    }
}

pub fn build_iss_estimate(
    c: f64,
    d: f64,
    w: DwellWindow,
    psi1: &ScalarFn,
    psi2: &ScalarFn,
    chi: &ScalarFn,
) -> Result<IssEstimate, EstimateError> {
    let psi1_inverse = psi1.inverse()?;
    let (decay, offset) = decay_and_offset(c, d, &w)?;
    let gamma = if chi.is_zero() {
        ScalarFn::zero()
    } else {
        let k = w.mu.exp() * 1f64.max((-d).exp());
        ScalarFn::chain(vec![chi.clone(), ScalarFn::linear(k), psi1_inverse.clone()])
    };
    Ok(IssEstimate {
        beta: KlFn { psi1_inverse, psi2: psi2.clone(), decay, offset },
        gamma,
        window: w,
        c,
        d,
        marginal: w.marginal(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum TrajVerdict {
    Pass,
    Fail,
    /// The domain lies outside the estimate's solution class.
    NotApplicable { worst_pair: PairWitness },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajReport {
    #[serde(flatten)]
    pub verdict: TrajVerdict,
    /// Up to 20 violating samples `(t, j, |x|_A, bound)`.
    pub violations: Vec<(f64, usize, f64, f64)>,
    pub violation_count: usize,
    /// Largest `|x|_A / bound` over samples with a positive bound.
    pub max_ratio: f64,
    pub tolerance: f64,
}

/// Check the estimate at every sample, with tolerance `1e-3 + 10·h`.
pub fn verify_iss_along(
    sys: &CompiledSystem,
    traj: &Trajectory,
    est: &IssEstimate,
    h: f64,
) -> Result<TrajReport, FnError> {
    let tolerance = 1e-3 + 10.0 * h;
    let dwell = check_gen_dwell(&traj.domain, est.c, est.d, &est.window);
    let mut rep = TrajReport {
        verdict: TrajVerdict::Pass,
        violations: Vec::new(),
        violation_count: 0,
        max_ratio: 0.0,
        tolerance,
    };
    if !dwell.pass {
        rep.verdict = TrajVerdict::NotApplicable { worst_pair: dwell.worst };
        return Ok(rep);
    }
    let dist = |k: usize| sys.total_distance(&traj.env(k)).map_err(FnError::from);
    let r0 = dist(0)?;
    let mut u_sup = 0.0f64;
    let mut next_jump = 0;
    for k in 0..traj.len() {
        let (t, j) = (traj.times[k], traj.js[k]);
        while next_jump < traj.jumps.len() && traj.jumps[next_jump].j < j {
            let u = &traj.jumps[next_jump].u;
            u_sup = u_sup.max(u.iter().map(|v| v * v).sum::<f64>().sqrt());
            next_jump += 1;
        }
        u_sup = u_sup.max(traj.input(k).iter().map(|v| v * v).sum::<f64>().sqrt());
        let lhs = dist(k)?;
        let bound = est.beta.eval(r0, t + j as f64)?.max(est.gamma.eval(u_sup)?);
        if bound > 0.0 {
            rep.max_ratio = rep.max_ratio.max(lhs / bound);
        }
        if lhs > bound + tolerance {
            rep.violation_count += 1;
            if rep.violations.len() < 20 {
                rep.violations.push((t, j, lhs, bound));
            }
        }
    }
    if rep.violation_count > 0 {
        rep.verdict = TrajVerdict::Fail;
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub pass: bool,
    pub anchors: usize,
    /// `(anchor sample, sample, V, bound)` of the worst excess.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Values of `v` at every sample of `traj`.
pub fn series(traj: &Trajectory, v: &Compiled) -> Result<Vec<f64>, FnError> {
    (0..traj.len()).map(|k| v.eval(&traj.env(k)).map_err(FnError::from)).collect()
}

/// `V(t1,j1) ≤ e^{−η(j1−j0) − λ(t1−t0) + μ}·V(t0,j0) + tol`, anchored at
/// the first sample and after every jump, over stretches where `gated`
/// (the gain condition) holds throughout.
pub fn check_decay_chain(
    values: &[f64],
    traj: &Trajectory,
    gated: &[bool],
    w: &DwellWindow,
    tol: f64,
) -> DecayReport {
    let phase: Vec<f64> = (0..traj.len()).map(|k| w.eta * traj.js[k] as f64 + w.lambda * traj.times[k]).collect();
    let mut rep = DecayReport { pass: true, anchors: 0, worst: None };
    let mut worst_excess = 0.0;
    for a in 0..values.len() {
        let is_anchor = a == 0 || traj.js[a] != traj.js[a - 1];
        if !is_anchor || !gated[a] {
            continue;
        }
        rep.anchors += 1;
        for k in a..values.len() {
            if !gated[k] {
                break;
            }
            if values[k] <= tol {
                continue;
            }
            let bound = (phase[a] - phase[k] + w.mu).exp() * values[a];
            let excess = values[k] - bound - tol;
            if excess > worst_excess {
                worst_excess = excess;
                rep.pass = false;
                rep.worst = Some((a, k, values[k], bound));
            }
        }
    }
    rep
}
