use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::certify::{Constraint, Outcome};
use super::spec::NetworkSpec;
use super::PipelineError;
use crate::hybridtime::{check_adt, check_radt, AdtParams, RadtParams};
use crate::lyapunov::{check_decay_chain, series, verify_iss_along, TrajVerdict};
use crate::scalarfn::ScalarFn;
use crate::system::{
    simulate_scheduled, trajectory_rng, ClockKind, CompiledSystem, JumpScheduler, Signal, SimConfig, SimError, Trajectory,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateOptions {
    pub trajectories: usize,
    pub seed: u64,
    /// Overrides the scheduler derived from the certified class.
    pub scheduler: Option<JumpScheduler>,
    pub config: SimConfig,
}

impl ValidateOptions {
    pub fn from_spec(spec: &NetworkSpec) -> Self {
        ValidateOptions {
            trajectories: spec.simulation.trajectories,
            seed: spec.simulation.seed,
            scheduler: spec.schedulers.first().cloned(),
            config: spec.simulation.config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajFailure {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub trajectories: usize,
    /// Trajectories whose domain satisfies every class constraint.
    pub in_class: usize,
    /// In-class trajectories meeting both the estimate and the decay chain.
    pub passed: usize,
    pub pass_rate: f64,
    /// Every in-class trajectory passed and there was at least one.
    pub confirmed: bool,
    /// Largest `|x| / bound` seen.
    pub max_ratio: f64,
    pub max_final_distance: f64,
    /// In-class trajectories ending within the convergence tolerance.
    pub converged: usize,
    pub outside_class: usize,
    /// In-class failures and blow-ups: evidence against the certificate.
    pub red_flags: usize,
    pub failures: Vec<TrajFailure>,
    pub scheduler: JumpScheduler,
    pub config: SimConfig,
}

fn tightest(class: &[Constraint]) -> (Option<AdtParams>, Option<RadtParams>) {
    let mut adt: Option<AdtParams> = None;
    let mut radt: Option<RadtParams> = None;
    for k in class {
        match *k {
            Constraint::Adt { delta, n0, .. } => {
                let p = adt.get_or_insert(AdtParams { delta, n0 });
                p.delta = p.delta.min(delta);
                p.n0 = p.n0.min(n0);
            }
            Constraint::Radt { delta_star, n0_star, .. } => {
                let p = radt.get_or_insert(RadtParams { delta_star, n0_star });
                p.delta_star = p.delta_star.min(delta_star);
                p.n0_star = p.n0_star.min(n0_star);
            }
        }
    }
    (adt, radt)
}

/// A scheduler whose domains lie in the certified class.
pub fn default_scheduler(class: &[Constraint]) -> JumpScheduler {
    match tightest(class) {
        (Some(adt), Some(radt)) if adt.delta * radt.delta_star >= 1.0 => JumpScheduler::Window { adt, radt },
        (Some(adt), Some(radt)) => JumpScheduler::RadtBudget { params: radt, extra_rate: adt.delta },
        (Some(adt), None) => JumpScheduler::AdtBudget { params: adt, base_rate: adt.delta },
        (None, Some(radt)) => JumpScheduler::RadtBudget { params: radt, extra_rate: 0.0 },
        (None, None) => JumpScheduler::Periodic { period: 1.0, phase: None },
    }
}

fn initial_box(sys: &CompiledSystem, spec: &NetworkSpec) -> Result<(Vec<f64>, Vec<f64>), PipelineError> {
    let nx = sys.x_len();
    let lo = spec.simulation.x0_lo.clone().unwrap_or_else(|| spec.sample_box.x_lo.clone());
    let hi = spec.simulation.x0_hi.clone().unwrap_or_else(|| spec.sample_box.x_hi.clone());
    if lo.len() != nx || hi.len() != nx {
        return Err(PipelineError::Spec(format!("initial-state box needs {nx} bounds")));
    }
    Ok((lo, hi))
}

/// States uniform in the box. ADT clocks start full, except under the
/// window scheduler whose gaps refill any start; RADT clocks start empty.
fn initial_state(sys: &CompiledSystem, lo: &[f64], hi: &[f64], window: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut z0: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| if a < b { rng.random_range(*a..*b) } else { *a }).collect();
    for clock in sys.clocks() {
        z0.push(match clock.kind {
            ClockKind::Adt(p) if window => rng.random_range(0.0..=p.n0),
            ClockKind::Adt(p) => p.n0,
            ClockKind::Radt(_) => 0.0,
        });
    }
    z0
}

/// Plain simulation of the outcome's network under `opts`, one result
/// per trajectory.
pub fn simulate_outcome(
    outcome: &Outcome,
    spec: &NetworkSpec,
    opts: &ValidateOptions,
) -> Result<(CompiledSystem, Vec<Result<Trajectory, SimError>>), PipelineError> {
    let sys = outcome.network.compile()?;
    let signal = Signal::new(&spec.input.signal, spec.input.dim)?;
    let scheduler = opts.scheduler.clone().unwrap_or_else(|| default_scheduler(&outcome.certificate.solution_class));
    scheduler.validate().map_err(|e| PipelineError::Spec(e.to_string()))?;
    let window = matches!(scheduler, JumpScheduler::Window { .. });
    let (lo, hi) = initial_box(&sys, spec)?;
    let trajs = (0..opts.trajectories)
        .map(|i| {
            let mut rng = trajectory_rng(opts.seed, i as u64);
            let z0 = initial_state(&sys, &lo, &hi, window, &mut rng);
            simulate_scheduled(&sys, &z0, &signal, &scheduler, &mut rng, &opts.config)
        })
        .collect();
    Ok((sys, trajs))
}

enum One {
    Outside,
    Pass { ratio: f64, final_distance: f64 },
    Fail { ratio: f64, final_distance: f64, reason: String },
    BlowUp(String),
}

/// Simulate trajectories of the certified network and test the ISS
/// estimate and the composite decay along each one.
pub fn validate_by_simulation(
    outcome: &Outcome,
    spec: &NetworkSpec,
    opts: &ValidateOptions,
) -> Result<EmpiricalReport, PipelineError> {
    let cert = &outcome.certificate;
    let (Some(est), Some(comp), Some(window)) = (&cert.estimate, &cert.composite, cert.window) else {
        return Err(PipelineError::NotCertified(cert.verdict));
    };
    let sys = outcome.network.compile().map_err(PipelineError::Model)?;
    let w = comp.bind(&sys, 0).map_err(PipelineError::Lyap)?;
    let chi = ScalarFn::max_of(vec![comp.external_gain.clone(), comp.jump_external().clone()]);
    let chi = if chi.is_zero() { ScalarFn::zero() } else { chi };
    let signal = Signal::new(&spec.input.signal, spec.input.dim).map_err(PipelineError::Signal)?;
    let scheduler = opts.scheduler.clone().unwrap_or_else(|| default_scheduler(&cert.solution_class));
    scheduler.validate().map_err(|e| PipelineError::Spec(e.to_string()))?;
    let window_scheduler = matches!(scheduler, JumpScheduler::Window { .. });

    let (lo, hi) = initial_box(&sys, spec)?;
    let cfg = opts.config;
    let tol = spec.simulation.converge_tol;

    let run_one = |index: usize| -> Result<One, PipelineError> {
        let mut rng = trajectory_rng(opts.seed, index as u64);
        let z0 = initial_state(&sys, &lo, &hi, window_scheduler, &mut rng);
        let traj = match simulate_scheduled(&sys, &z0, &signal, &scheduler, &mut rng, &cfg) {
            Ok(t) => t,
            Err(SimError::BlowUp { t, j }) => return Ok(One::BlowUp(format!("blow-up at (t={t}, j={j})"))),
            Err(e) => return Err(PipelineError::Sim(e)),
        };
        let in_class = cert.solution_class.iter().all(|k| match *k {
                Constraint::Adt { delta, n0, .. } => check_adt(&traj.domain, &AdtParams { delta, n0 }).pass,
                Constraint::Radt { delta_star, n0_star, .. } => {
                    check_radt(&traj.domain, &RadtParams { delta_star, n0_star }).pass
                }
            });
        if !in_class {
            return Ok(One::Outside);
        }
        let rep = verify_iss_along(&sys, &traj, est, cfg.h).map_err(|e| PipelineError::Spec(e.to_string()))?;
        let final_distance = sys.total_distance(&traj.env(traj.len() - 1)).map_err(|e| PipelineError::Spec(e.to_string()))?;
        let values = series(&traj, &w).map_err(|e| PipelineError::Spec(e.to_string()))?;
        let gated: Vec<bool> = (0..traj.len())
            .map(|k| {
                let u = traj.input(k).iter().map(|v| v * v).sum::<f64>().sqrt();
                chi.is_zero() || chi.eval(u).is_ok_and(|g| values[k] >= g)
            })
            .collect();
        let decay = check_decay_chain(&values, &traj, &gated, &window, 1e-3 + 10.0 * cfg.h);
        let ratio = rep.max_ratio;
        let reason = match (&rep.verdict, decay.pass) {
            (TrajVerdict::Pass, true) => return Ok(One::Pass { ratio, final_distance }),
            (TrajVerdict::NotApplicable { .. }, _) => "domain violates the estimate's dwell window".to_string(),
            (TrajVerdict::Fail, _) => format!("estimate violated at {} samples", rep.violation_count),
            (TrajVerdict::Pass, false) => format!("composite decay violated: {:?}", decay.worst),
        };
        Ok(One::Fail { ratio, final_distance, reason })
    };

    let n = opts.trajectories;
    let threads = std::thread::available_parallelism().map_or(1, |t| t.get()).min(n.max(1));
    let results: Vec<Result<One, PipelineError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let run_one = &run_one;
                s.spawn(move || (t..n).step_by(threads).map(|i| (i, run_one(i))).collect::<Vec<_>>())
            })
            .collect();
        let mut all: Vec<(usize, Result<One, PipelineError>)> =
            handles.into_iter().flat_map(|h| h.join().expect("validation thread panicked")).collect();
        all.sort_by_key(|(i, _)| *i);
        all.into_iter().map(|(_, r)| r).collect()
    });

    let mut rep = EmpiricalReport {
        trajectories: n,
        in_class: 0,
        passed: 0,
        pass_rate: 0.0,
        confirmed: false,
        max_ratio: 0.0,
        max_final_distance: 0.0,
        converged: 0,
        outside_class: 0,
        red_flags: 0,
        failures: Vec::new(),
        scheduler,
        config: cfg,
    };
    for (index, r) in results.into_iter().enumerate() {
        let fail = |rep: &mut EmpiricalReport, reason: String| {
            rep.red_flags += 1;
            if rep.failures.len() < 20 {
                rep.failures.push(TrajFailure { index, reason });
            }
        };
        match r? {
            One::Outside => rep.outside_class += 1,
            One::BlowUp(reason) => {
                rep.in_class += 1;
                fail(&mut rep, reason);
            }
            One::Pass { ratio, final_distance } => {
                rep.in_class += 1;
                rep.passed += 1;
                rep.max_ratio = rep.max_ratio.max(ratio);
                rep.max_final_distance = rep.max_final_distance.max(final_distance);
                rep.converged += usize::from(final_distance <= tol);
            }
            One::Fail { ratio, final_distance, reason } => {
                rep.in_class += 1;
                rep.max_ratio = rep.max_ratio.max(ratio);
                rep.max_final_distance = rep.max_final_distance.max(final_distance);
                rep.converged += usize::from(final_distance <= tol);
                fail(&mut rep, reason);
            }
        }
    }
    rep.pass_rate = if rep.in_class > 0 { rep.passed as f64 / rep.in_class as f64 } else { 0.0 };
    rep.confirmed = rep.in_class > 0 && rep.passed == rep.in_class;
    Ok(rep)
}
