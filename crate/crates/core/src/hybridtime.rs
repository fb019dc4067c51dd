//! Hybrid time domains and dwell-time conditions.
//!
//! Every dwell condition here has the shape `a·(j − k) + b·(t − s) ≤ bound`
//! over ordered pairs `(s, k) ⪯ (t, j)`. The left side is affine in the
//! times inside each flow interval, so the maximum over all pairs is
//! attained at interval endpoints and [`max_affine_pair`] finds it exactly
//! in `O(J²)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute slack allowed on dwell inequalities to absorb rounding in
/// accumulated jump times.
pub const DWELL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridTime {
    pub t: f64,
    pub j: usize,
}

impl HybridTime {
    pub fn new(t: f64, j: usize) -> Self {
        HybridTime { t, j }
    }

    /// `(s, k) ⪯ (t, j)` iff `s + k ≤ t + j`.
    pub fn precedes(&self, other: &HybridTime) -> bool {
        self.t + self.j as f64 <= other.t + other.j as f64
    }
}

/// `[t_start, t_end] × {j}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowInterval {
    pub j: usize,
    pub t_start: f64,
    pub t_end: f64,
}

impl FlowInterval {
    pub fn len(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("a hybrid time domain needs at least one interval")]
    Empty,
    #[error("first interval must start at t = 0 with j = 0")]
    BadStart,
    #[error("interval {0} is not contiguous with its predecessor")]
    NotContiguous(usize),
    #[error("interval {0} ends before it starts")]
    Reversed(usize),
}

/// A compact hybrid time domain, the union of `[t_j, t_{j+1}] × {j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FlowInterval>", into = "Vec<FlowInterval>")]
pub struct HybridTimeDomain {
    intervals: Vec<FlowInterval>,
}

impl TryFrom<Vec<FlowInterval>> for HybridTimeDomain {
    type Error = DomainError;

    fn try_from(v: Vec<FlowInterval>) -> Result<Self, DomainError> {
        HybridTimeDomain::new(v)
    }
}

impl From<HybridTimeDomain> for Vec<FlowInterval> {
    fn from(d: HybridTimeDomain) -> Self {
        d.intervals
    }
}

impl HybridTimeDomain {
    pub fn new(intervals: Vec<FlowInterval>) -> Result<Self, DomainError> {
        let first = intervals.first().ok_or(DomainError::Empty)?;
        if first.j != 0 || first.t_start != 0.0 {
            return Err(DomainError::BadStart);
        }
        for (i, iv) in intervals.iter().enumerate() {
            if !(iv.t_end >= iv.t_start) {
                return Err(DomainError::Reversed(i));
            }
            if i > 0 {
                let prev = &intervals[i - 1];
                if iv.j != prev.j + 1 || iv.t_start != prev.t_end {
                    return Err(DomainError::NotContiguous(i));
                }
            }
        }
        Ok(HybridTimeDomain { intervals })
    }

    /// The single point `(0, 0)`.
    pub fn point() -> Self {
        HybridTimeDomain { intervals: vec![FlowInterval { j: 0, t_start: 0.0, t_end: 0.0 }] }
    }

    /// Domain on `[0, horizon]` with the given nondecreasing jump times.
    pub fn from_jump_times(jump_times: &[f64], horizon: f64) -> Result<Self, DomainError> {
        let mut intervals = Vec::with_capacity(jump_times.len() + 1);
        let mut start = 0.0;
        for (j, &t) in jump_times.iter().enumerate() {
            intervals.push(FlowInterval { j, t_start: start, t_end: t });
            start = t;
        }
        intervals.push(FlowInterval { j: jump_times.len(), t_start: start, t_end: horizon.max(start) });
        Self::new(intervals)
    }

    pub fn intervals(&self) -> &[FlowInterval] {
        &self.intervals
    }

    pub fn jump_count(&self) -> usize {
        self.intervals.len() - 1
    }

    pub fn jump_times(&self) -> Vec<f64> {
        self.intervals[..self.intervals.len() - 1].iter().map(|iv| iv.t_end).collect()
    }

    pub fn end(&self) -> HybridTime {
        let last = self.intervals.last().unwrap();
        HybridTime::new(last.t_end, last.j)
    }

    pub fn contains(&self, p: &HybridTime) -> bool {
        self.intervals.get(p.j).is_some_and(|iv| iv.t_start <= p.t && p.t <= iv.t_end)
    }

    /// CSV rows `j,t_start,t_end` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,t_start,t_end\n");
        for iv in &self.intervals {
            out.push_str(&format!("{},{},{}\n", iv.j, iv.t_start, iv.t_end));
        }
        out
    }
}

/// Worst pair found by a dwell check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairWitness {
    pub from: HybridTime,
    pub to: HybridTime,
    /// Left side of the inequality at this pair.
    pub value: f64,
    /// `bound − value`; negative on failure.
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DwellCheck {
    pub pass: bool,
    pub worst: PairWitness,
}

/// Maximize `a·(j − k) + b·(t − s)` over ordered pairs of `dom`.
/// Ties keep the first pair in `(k, j)` order.
pub fn max_affine_pair(dom: &HybridTimeDomain, a: f64, b: f64) -> (HybridTime, HybridTime, f64) {
    let iv = dom.intervals();
    let mut best: Option<(HybridTime, HybridTime, f64)> = None;
    for k in 0..iv.len() {
        for j in k..iv.len() {
            let (s, t) = if j == k {
                if b > 0.0 {
                    (iv[k].t_start, iv[k].t_end)
                } else {
                    (iv[k].t_start, iv[k].t_start)
                }
            } else if b > 0.0 {
                (iv[k].t_start, iv[j].t_end)
            } else {
                (iv[k].t_end, iv[j].t_start)
            };
            let value = a * (j - k) as f64 + b * (t - s);
            if best.as_ref().is_none_or(|(_, _, v)| value > *v) {
                best = Some((HybridTime::new(s, k), HybridTime::new(t, j), value));
            }
        }
    }
    best.unwrap()
}

fn check_affine(dom: &HybridTimeDomain, a: f64, b: f64, bound: f64) -> DwellCheck {
    let (from, to, value) = max_affine_pair(dom, a, b);
    let slack = bound - value;
    DwellCheck { pass: slack >= -DWELL_TOL, worst: PairWitness { from, to, value, slack } }
}

/// Generalized dwell window `(η, λ, μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellWindow {
    pub eta: f64,
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowError {
    #[error("window components must be finite and nonnegative (eta={eta}, lambda={lambda}, mu={mu})")]
    Negative { eta: f64, lambda: f64, mu: f64 },
    #[error("eta and lambda cannot both be zero")]
    BothZero,
}

/// Which window component is zero, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    EtaZero,
    LambdaZero,
}

impl DwellWindow {
    pub fn new(eta: f64, lambda: f64, mu: f64) -> Result<Self, WindowError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(eta) && ok(lambda) && ok(mu)) {
            return Err(WindowError::Negative { eta, lambda, mu });
        }
        if eta == 0.0 && lambda == 0.0 {
            return Err(WindowError::BothZero);
        }
        Ok(DwellWindow { eta, lambda, mu })
    }

    pub fn marginal(&self) -> Option<Marginal> {
        if self.eta == 0.0 {
            Some(Marginal::EtaZero)
        } else if self.lambda == 0.0 {
            Some(Marginal::LambdaZero)
        } else {
            None
        }
    }
}

/// `j − k ≤ δ(t − s) + N₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdtParams {
    pub delta: f64,
    pub n0: f64,
}

/// `t − s ≤ δ*(j − k) + N₀*·δ*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadtParams {
    pub delta_star: f64,
    pub n0_star: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("dwell parameter must be positive, got {0}")]
    NonPositive(f64),
    #[error("budget must be at least 1, got {0}")]
    SmallBudget(f64),
}

impl AdtParams {
    pub fn new(delta: f64, n0: f64) -> Result<Self, ParamError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(ParamError::NonPositive(delta));
        }
        if !(n0 >= 1.0 && n0.is_finite()) {
            return Err(ParamError::SmallBudget(n0));
        }
        Ok(AdtParams { delta, n0 })
    }
}

impl RadtParams {
    pub fn new(delta_star: f64, n0_star: f64) -> Result<Self, ParamError> {
        if !(delta_star > 0.0 && delta_star.is_finite()) {
            return Err(ParamError::NonPositive(delta_star));
        }
        if !(n0_star >= 1.0 && n0_star.is_finite()) {
            return Err(ParamError::SmallBudget(n0_star));
        }
        Ok(RadtParams { delta_star, n0_star })
    }
}

/// `−(d − η)(j − k) − (c − λ)(t − s) ≤ μ` for all ordered pairs.
pub fn check_gen_dwell(dom: &HybridTimeDomain, c: f64, d: f64, w: &DwellWindow) -> DwellCheck {
    check_affine(dom, -(d - w.eta), -(c - w.lambda), w.mu)
}

pub fn check_adt(dom: &HybridTimeDomain, p: &AdtParams) -> DwellCheck {
    check_affine(dom, 1.0, -p.delta, p.n0)
}

pub fn check_radt(dom: &HybridTimeDomain, p: &RadtParams) -> DwellCheck {
    check_affine(dom, -p.delta_star, 1.0, p.n0_star * p.delta_star)
}

/// What a generalized window means in ADT/RADT terms for given rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum DwellClass {
    /// Both rates positive: every domain satisfies a small enough window.
    Unrestricted,
    Adt { delta: f64, n0: f64 },
    Radt { delta_star: f64, n0_star: f64 },
    /// ADT reading with `η = 0`; needs the refined `β`.
    MarginalEtaZero { delta: f64, n0: f64 },
    /// RADT reading with `λ = 0`; needs the refined `β`.
    MarginalLambdaZero { delta_star: f64, n0_star: f64 },
    /// No complete solution can satisfy the window.
    InfeasibleForComplete,
    /// The division is undefined (e.g. `η = d = 0`).
    Degenerate,
}

/// Rewrite the window condition as an ADT or RADT condition.
pub fn reduce_to_adt_radt(c: f64, d: f64, w: &DwellWindow) -> DwellClass {
    if c > 0.0 && d > 0.0 {
        return DwellClass::Unrestricted;
    }
    if c <= 0.0 && d <= 0.0 {
        return DwellClass::InfeasibleForComplete;
    }
    if c > 0.0 {
        let denom = w.eta - d;
        if denom <= 0.0 {
            return DwellClass::Degenerate;
        }
        let (delta, n0) = ((c - w.lambda) / denom, w.mu / denom);
        if w.eta == 0.0 {
            DwellClass::MarginalEtaZero { delta, n0 }
        } else {
            DwellClass::Adt { delta, n0 }
        }
    } else {
        let denom = w.lambda - c;
        if denom <= 0.0 || d - w.eta <= 0.0 {
            return DwellClass::Degenerate;
        }
        let delta_star = (d - w.eta) / denom;
        let n0_star = w.mu / (d - w.eta);
        if w.lambda == 0.0 {
            DwellClass::MarginalLambdaZero { delta_star, n0_star }
        } else {
            DwellClass::Radt { delta_star, n0_star }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_piece() -> HybridTimeDomain {
        HybridTimeDomain::new(vec![
            FlowInterval { j: 0, t_start: 0.0, t_end: 1.0 },
            FlowInterval { j: 1, t_start: 1.0, t_end: 1.0 },
        ])
        .unwrap()
    }

    #[test]
    fn domain_validation() {
        assert!(HybridTimeDomain::new(vec![]).is_err());
        assert_eq!(
            HybridTimeDomain::new(vec![
                FlowInterval { j: 0, t_start: 0.0, t_end: 1.0 },
                FlowInterval { j: 1, t_start: 1.5, t_end: 2.0 },
            ]),
            Err(DomainError::NotContiguous(1))
        );
        let d = HybridTimeDomain::from_jump_times(&[0.5, 0.5, 2.0], 3.0).unwrap();
        assert_eq!(d.jump_count(), 3);
        assert_eq!(d.end(), HybridTime::new(3.0, 3));
        assert!(d.contains(&HybridTime::new(0.5, 2)));
        assert!(!d.contains(&HybridTime::new(1.0, 1)));
        assert_eq!(d.to_csv().lines().nth(2), Some("1,0.5,0.5"));
    }

    #[test]
    fn single_point_always_passes() {
        let dom = HybridTimeDomain::point();
        for (c, d) in [(-3.0, -3.0), (1.0, 1.0)] {
            let w = DwellWindow::new(0.5, 0.5, 1e-3).unwrap();
            let r = check_gen_dwell(&dom, c, d, &w);
            assert!(r.pass);
            assert_eq!(r.worst.value, 0.0);
        }
    }

    #[test]
    fn gen_dwell_worst_pair() {
        let dom = two_piece();
        let w = DwellWindow::new(0.1, 0.5, 1.0).unwrap();
        let r = check_gen_dwell(&dom, 1.0, -0.5, &w);
        assert!(r.pass);
        // The jump taken alone, with no flow to pay for it, is the worst pair.
        assert_eq!(r.worst.from, HybridTime::new(1.0, 0));
        assert_eq!(r.worst.to, HybridTime::new(1.0, 1));
        assert!((r.worst.value - 0.6).abs() < 1e-15);
        // The pair across the whole domain evaluates to 0.1.
        let across: f64 = -(-0.5 - 0.1) * 1.0 - (1.0 - 0.5) * 1.0;
        assert!((across - 0.1).abs() < 1e-15);

        let tight = DwellWindow::new(0.1, 0.5, 0.05).unwrap();
        let r = check_gen_dwell(&dom, 1.0, -0.5, &tight);
        assert!(!r.pass);
        assert!((r.worst.slack + 0.55).abs() < 1e-12);
    }

    #[test]
    fn adt_examples() {
        let flow_only = HybridTimeDomain::from_jump_times(&[], 10.0).unwrap();
        assert!(check_adt(&flow_only, &AdtParams::new(0.01, 1.0).unwrap()).pass);

        let times: Vec<f64> = (1..=10).map(|k| 0.5 * k as f64).collect();
        let periodic = HybridTimeDomain::from_jump_times(&times, 5.25).unwrap();
        assert!(check_adt(&periodic, &AdtParams::new(2.25, 1.0).unwrap()).pass);

        let burst = HybridTimeDomain::from_jump_times(&[0.0, 0.0], 1.0).unwrap();
        let r = check_adt(&burst, &AdtParams::new(2.25, 1.0).unwrap());
        assert!(!r.pass);
        assert_eq!(r.worst.value, 2.0);
    }

    #[test]
    fn radt_examples() {
        let p = RadtParams::new(0.45, 1.0).unwrap();
        let long_flow = HybridTimeDomain::from_jump_times(&[1.0], 1.2).unwrap();
        let r = check_radt(&long_flow, &p);
        assert!(!r.pass);
        assert_eq!((r.worst.from.j, r.worst.to.j), (0, 0));
        assert!((r.worst.value - 1.0).abs() < 1e-15);

        let times: Vec<f64> = (1..=20).map(|k| 0.4 * k as f64).collect();
        let frequent = HybridTimeDomain::from_jump_times(&times, 8.2).unwrap();
        assert!(check_radt(&frequent, &p).pass);

        let jumps_only = HybridTimeDomain::from_jump_times(&[0.0, 0.0, 0.0], 0.0).unwrap();
        assert!(check_radt(&jumps_only, &RadtParams::new(1e-3, 1.0).unwrap()).pass);
    }

    #[test]
    fn reductions() {
        let w = DwellWindow::new(0.05, 0.1, 0.9).unwrap();
        assert!(matches!(reduce_to_adt_radt(-2.0, 1.0, &w), DwellClass::Radt { .. }));
        let w = DwellWindow::new(0.1, 0.5, 1.0).unwrap();
        match reduce_to_adt_radt(1.0, -0.5, &w) {
            DwellClass::Adt { delta, n0 } => {
                assert!((delta - 5.0 / 6.0).abs() < 1e-15);
                assert!((n0 - 1.0 / 0.6).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(reduce_to_adt_radt(-1.0, -1.0, &w), DwellClass::InfeasibleForComplete);
        assert_eq!(reduce_to_adt_radt(1.0, 1.0, &w), DwellClass::Unrestricted);
        let w0 = DwellWindow::new(0.0, 0.5, 1.0).unwrap();
        assert!(matches!(reduce_to_adt_radt(1.0, -0.5, &w0), DwellClass::MarginalEtaZero { .. }));
        assert_eq!(w0.marginal(), Some(Marginal::EtaZero));
        assert!(DwellWindow::new(0.0, 0.0, 1.0).is_err());
    }

    fn domain() -> impl Strategy<Value = HybridTimeDomain> {
        prop::collection::vec(0.0f64..1.0, 0..12).prop_map(|gaps| {
            let mut t = 0.0;
            let times: Vec<f64> = gaps[..gaps.len().saturating_sub(1)]
                .iter()
                .map(|g| {
                    t += g;
                    t
                })
                .collect();
            let tail = gaps.last().copied().unwrap_or(0.0);
            HybridTimeDomain::from_jump_times(&times, t + tail).unwrap()
        })
    }

    proptest! {
        #[test]
        fn ordering_matches_sum(dom in domain(), picks in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 8)) {
            let pts: Vec<HybridTime> = picks.iter().map(|&(a, f)| {
                let iv = dom.intervals()[((a * dom.intervals().len() as f64) as usize).min(dom.intervals().len() - 1)];
                HybridTime::new(iv.t_start + f * iv.len(), iv.j)
            }).collect();
            for p in &pts {
                for q in &pts {
                    prop_assert_eq!(p.precedes(q), p.t + p.j as f64 <= q.t + q.j as f64);
                    // Within a domain the order is consistent with (j, t) order.
                    if p.j < q.j { prop_assert!(p.precedes(q)); }
                }
            }
        }

        #[test]
        fn larger_mu_never_hurts(dom in domain(), c in -3.0f64..3.0, d in -3.0f64..3.0,
                                 eta in 0.01f64..1.0, lambda in 0.01f64..1.0, mu in 0.0f64..2.0, extra in 0.0f64..2.0) {
            let w = DwellWindow::new(eta, lambda, mu).unwrap();
            let w2 = DwellWindow::new(eta, lambda, mu + extra).unwrap();
            if check_gen_dwell(&dom, c, d, &w).pass {
                prop_assert!(check_gen_dwell(&dom, c, d, &w2).pass);
            }
        }
    }
}
