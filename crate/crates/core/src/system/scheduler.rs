use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hybridtime::{AdtParams, RadtParams};

/// Slack kept inside dwell budgets so round-off never breaks them.
const BUDGET_SLACK: f64 = 1e-9;

/// Decides when jumps are requested. Jump times are generated up front;
/// the simulator drops any that land outside the jump set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpScheduler {
    /// Flow only (forced jumps still happen where flow is impossible).
    None,
    /// Jumps at `phase + k·period`, `k ≥ 0`; `phase` defaults to `period`.
    Periodic {
        period: f64,
        #[serde(default)]
        phase: Option<f64>,
    },
    Explicit { times: Vec<f64> },
    /// Poisson requests at `base_rate`, admitted by a token bucket that
    /// starts with `N₀` tokens and refills at rate `δ` up to `N₀`.
    AdtBudget { params: AdtParams, base_rate: f64 },
    /// Gaps drawn uniformly in `(0, δ*]`, with extra requested jumps at
    /// `extra_rate`; every window of length `N₀*δ*` holds a jump.
    RadtBudget {
        params: RadtParams,
        #[serde(default)]
        extra_rate: f64,
    },
    /// Gaps uniform in `[1/δ, δ*]`, satisfying both dwell conditions.
    Window { adt: AdtParams, radt: RadtParams },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchedulerError {
    #[error("period must be positive, got {0}")]
    Period(f64),
    #[error("rates must be nonnegative and finite")]
    Rate,
    #[error("explicit jump times must be finite, nonnegative and nondecreasing")]
    Explicit,
    #[error("window scheduler needs 1/delta <= delta_star, got {min_gap} > {max_gap}")]
    EmptyWindow { min_gap: f64, max_gap: f64 },
}

/// Per-trajectory RNG derived from a master seed and a trajectory index.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

impl JumpScheduler {
    pub fn validate(&self) -> Result<(), SchedulerError> {
        match self {
            JumpScheduler::Periodic { period, phase } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(SchedulerError::Period(*period));
                }
                if phase.is_some_and(|p| !(p.is_finite() && p >= 0.0)) {
                    return Err(SchedulerError::Explicit);
                }
            }
            JumpScheduler::Explicit { times } => {
                let ok = times.iter().all(|t| t.is_finite() && *t >= 0.0) && times.windows(2).all(|w| w[0] <= w[1]);
                if !ok {
                    return Err(SchedulerError::Explicit);
                }
            }
            JumpScheduler::AdtBudget { base_rate, .. } => {
                if !(base_rate.is_finite() && *base_rate >= 0.0) {
                    return Err(SchedulerError::Rate);
                }
            }
            JumpScheduler::RadtBudget { extra_rate, .. } => {
                if !(extra_rate.is_finite() && *extra_rate >= 0.0) {
                    return Err(SchedulerError::Rate);
                }
            }
            JumpScheduler::Window { adt, radt } => {
                let (min_gap, max_gap) = (1.0 / adt.delta, radt.delta_star);
                if min_gap > max_gap {
                    return Err(SchedulerError::EmptyWindow { min_gap, max_gap });
                }
            }
            JumpScheduler::None => {}
        }
        Ok(())
    }

    /// Requested jump times in `[0, horizon]`, at most `max_jumps` of them.
    pub fn jump_times(&self, horizon: f64, max_jumps: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = Vec::new();
        let push = |t: f64, out: &mut Vec<f64>| {
            if t <= horizon && out.len() < max_jumps {
                out.push(t);
                true
            } else {
                false
            }
        };
        match self {
            JumpScheduler::None => {}
            JumpScheduler::Periodic { period, phase } => {
                let start = phase.unwrap_or(*period);
                let mut k = 0u64;
                while push(start + k as f64 * period, &mut out) {
                    k += 1;
                }
            }
            JumpScheduler::Explicit { times } => {
                for &t in times {
                    if !push(t, &mut out) {
                        break;
                    }
                }
            }
            JumpScheduler::AdtBudget { params, base_rate } => {
                if *base_rate == 0.0 {
                    return out;
                }
                // Each token is one jump; keeping tokens ≤ δ(t−s) + N₀ between
                // any two times is exactly the average dwell-time condition.
                let (delta, cap) = (params.delta * (1.0 - BUDGET_SLACK), params.n0);
                let mut tokens = cap;
                let mut t = 0.0;
                loop {
                    let next = t + exp_sample(rng, *base_rate);
                    if next > horizon {
                        break;
                    }
                    tokens = (tokens + delta * (next - t)).min(cap);
                    t = next;
                    if tokens >= 1.0 {
                        tokens -= 1.0;
                        if !push(t, &mut out) {
                            break;
                        }
                    }
                }
            }
            JumpScheduler::RadtBudget { params, extra_rate } => {
                let max_gap = params.delta_star;
                let mut t = 0.0;
                let mut next_extra = if *extra_rate > 0.0 { exp_sample(rng, *extra_rate) } else { f64::INFINITY };
                loop {
                    let gap = max_gap * (1.0 - rng.random::<f64>());
                    let forced = t + gap;
                    let next = if next_extra < forced {
                        let e = next_extra;
                        next_extra = e + exp_sample(rng, *extra_rate);
                        e
                    } else {
                        forced
                    };
                    t = next;
                    if !push(t, &mut out) {
                        break;
                    }
                }
            }
            JumpScheduler::Window { adt, radt } => {
                let lo = 1.0 / adt.delta;
                let hi = radt.delta_star;
                let mut t = 0.0;
                loop {
                    t += rng.random_range(lo..=hi);
                    if !push(t, &mut out) {
                        break;
                    }
                }
            }
        }
        out
    }
}
