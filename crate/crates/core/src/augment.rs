//! Clock augmentation of subsystems whose flows or jumps are not
//! stabilizing, trading convergence rate for gain.
//!
//! An ADT clock (jumps not too frequent) makes unstable jumps stable:
//! `W = e^{Lτ}V`, `c̃ = c − Lδ`, `d̃ = d + L`, and the subsystem's own gain
//! row grows by `e^{L·N₀}`. An RADT clock (jumps frequent enough) makes
//! unstable flows stable: `W = e^{−Lτ}V`, `c̃ = c + L`, `d̃ = d − Lδ*`, and
//! every gain into the subsystem grows by `e^{L·N₀*·δ*}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{BinOp, Expr, Func};
use crate::hybridtime::{AdtParams, ParamError, RadtParams};
use crate::lyapunov::{FlowRate, JumpRate, LyapCert};
use crate::scalarfn::{LogGrid, ScalarFn};
use crate::smallgain::{small_gain_holds, GainForm, GainStructure, SmallGainError};
use crate::system::{Clock, ClockKind, Interconnection};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("certificate {0} does not have exponential rates")]
    NotExponential(usize),
    #[error("entry for subsystem {0}: no such subsystem")]
    NoSubsystem(usize),
    #[error("entry for subsystem {i}: {why}")]
    Entry { i: usize, why: String },
    #[error("augmentation mixes clock modes; augment either the jump-unstable or the flow-unstable subsystems, not both")]
    Mixed,
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    SmallGain(#[from] SmallGainError),
}

/// Subsystems with `d_i < 0` (jump-unstable) and `c_i < 0`
/// (flow-unstable), 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct IndexSets {
    pub jump_unstable: Vec<usize>,
    pub flow_unstable: Vec<usize>,
}

pub fn classify(certs: &[LyapCert]) -> Result<IndexSets, AugmentError> {
    let mut out = IndexSets::default();
    for (i, c) in certs.iter().enumerate() {
        let (ci, di) = c.rates().ok_or(AugmentError::NotExponential(i + 1))?;
        if di < 0.0 {
            out.jump_unstable.push(i);
        }
        if ci < 0.0 {
            out.flow_unstable.push(i);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    Adt,
    Radt,
}

/// One augmented subsystem. `n0` is `N₀` in ADT mode and `N₀*` in RADT mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockEntry {
    /// 1-based subsystem index.
    pub i: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_star: Option<f64>,
    #[serde(default = "one")]
    pub n0: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockSpec {
    pub mode: ClockMode,
    #[serde(default)]
    pub entries: Vec<ClockEntry>,
}

impl ClockEntry {
    pub fn kind(&self, mode: ClockMode) -> Result<ClockKind, AugmentError> {
        let bad = |why: &str| AugmentError::Entry { i: self.i, why: why.into() };
        match mode {
            ClockMode::Adt => {
                let delta = self.delta.ok_or_else(|| bad("ADT entries need delta"))?;
                if self.delta_star.is_some() {
                    return Err(AugmentError::Mixed);
                }
                Ok(ClockKind::Adt(AdtParams::new(delta, self.n0)?))
            }
            ClockMode::Radt => {
                let ds = self.delta_star.ok_or_else(|| bad("RADT entries need delta_star"))?;
                if self.delta.is_some() {
                    return Err(AugmentError::Mixed);
                }
                Ok(ClockKind::Radt(RadtParams::new(ds, self.n0)?))
            }
        }
    }
}

fn scale_after(g: &ScalarFn, k: f64) -> ScalarFn {
    if g.is_zero() || k == 1.0 {
        g.clone()
    } else {
        ScalarFn::chain(vec![g.clone(), ScalarFn::linear(k)])
    }
}

fn scale_before(g: &ScalarFn, k: f64) -> ScalarFn {
    if g.is_zero() || k == 1.0 {
        g.clone()
    } else {
        ScalarFn::chain(vec![ScalarFn::linear(k), g.clone()])
    }
}

/// `exp(k·τ)·V`.
fn weighted(v: &Expr, k: f64, clock: &str) -> Expr {
    let arg = Expr::binary(BinOp::Mul, Expr::num(k), Expr::var(clock));
    Expr::binary(BinOp::Mul, Expr::call(Func::Exp, vec![arg]), v.clone())
}

fn exponential_rates(cert: &LyapCert, i: usize) -> Result<(f64, f64), AugmentError> {
    cert.rates().ok_or(AugmentError::NotExponential(i + 1))
}

/// ADT transform of subsystem `i`'s certificate; identity when `L = 0`.
pub fn adt_augment(cert: &LyapCert, i: usize, clock: &str, l: f64, p: &AdtParams) -> Result<LyapCert, AugmentError> {
    if l == 0.0 {
        return Ok(cert.clone());
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(AugmentError::Entry { i: i + 1, why: format!("L must be positive, got {l}") });
    }
    let (c, d) = exponential_rates(cert, i)?;
    let k = (l * p.n0).exp();
    let mut out = cert.clone();
    out.v = weighted(&cert.v, l, clock);
    out.psi2 = scale_after(&cert.psi2, k);
    out.flow_rate = FlowRate::Exponential(c - l * p.delta);
    out.jump_rate = JumpRate::Exponential(d + l);
    out.external_gain = scale_after(&cert.external_gain, k);
    out.jump_external_gain = cert.jump_external_gain.as_ref().map(|g| scale_after(g, k));
    out.internal_gains = cert.internal_gains.iter().map(|g| scale_after(g, k)).collect();
    out.jump_internal_gains = cert.jump_internal_gains.as_ref().map(|row| row.iter().map(|g| scale_after(g, k)).collect());
    Ok(out)
}

/// RADT transform of subsystem `i`'s own certificate. Gains into `i` from
/// other certificates are scaled separately by [`scale_column`].
pub fn radt_augment(cert: &LyapCert, i: usize, clock: &str, l: f64, p: &RadtParams) -> Result<LyapCert, AugmentError> {
    if l == 0.0 {
        return Ok(cert.clone());
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(AugmentError::Entry { i: i + 1, why: format!("L must be positive, got {l}") });
    }
    let (c, d) = exponential_rates(cert, i)?;
    let mut out = cert.clone();
    out.v = weighted(&cert.v, -l, clock);
    out.psi1 = scale_after(&cert.psi1, (-l * p.n0_star * p.delta_star).exp());
    out.flow_rate = FlowRate::Exponential(c + l);
    out.jump_rate = JumpRate::Exponential(d - l * p.delta_star);
    Ok(out)
}

/// `χ_ij ↦ χ_ij(k·r)` in both gain rows of `cert`.
pub fn scale_column(cert: &mut LyapCert, j: usize, k: f64) {
    if let Some(g) = cert.internal_gains.get_mut(j) {
        *g = scale_before(g, k);
    }
    if let Some(g) = cert.jump_internal_gains.as_mut().and_then(|row| row.get_mut(j)) {
        *g = scale_before(g, k);
    }
}

fn check_entries(n: usize, spec: &ClockSpec, sets: &IndexSets) -> Result<Vec<(usize, ClockEntry, ClockKind)>, AugmentError> {
    let target = match spec.mode {
        ClockMode::Adt => &sets.jump_unstable,
        ClockMode::Radt => &sets.flow_unstable,
    };
    let mut out: Vec<(usize, ClockEntry, ClockKind)> = Vec::new();
    for e in &spec.entries {
        if e.i == 0 || e.i > n {
            return Err(AugmentError::NoSubsystem(e.i));
        }
        let idx = e.i - 1;
        if out.iter().any(|(k, _, _)| *k == idx) {
            return Err(AugmentError::Entry { i: e.i, why: "duplicate entry".into() });
        }
        let kind = e.kind(spec.mode)?;
        if e.l == 0.0 {
            continue;
        }
        if !target.contains(&idx) {
            let set = match spec.mode {
                ClockMode::Adt => "jump-unstable (d < 0)",
                ClockMode::Radt => "flow-unstable (c < 0)",
            };
            return Err(AugmentError::Entry { i: e.i, why: format!("only {set} subsystems take this clock") });
        }
        out.push((idx, *e, kind));
    }
    out.sort_by_key(|(k, _, _)| *k);
    Ok(out)
}

/// Transformed certificates for every subsystem of the network.
pub fn augment_certs(certs: &[LyapCert], spec: &ClockSpec) -> Result<Vec<LyapCert>, AugmentError> {
    let sets = classify(certs)?;
    let entries = check_entries(certs.len(), spec, &sets)?;
    let mut out = certs.to_vec();
    for (idx, e, kind) in &entries {
        let clock = format!("tau{}", idx + 1);
        out[*idx] = match kind {
            ClockKind::Adt(p) => adt_augment(&certs[*idx], *idx, &clock, e.l, p)?,
            ClockKind::Radt(p) => radt_augment(&certs[*idx], *idx, &clock, e.l, p)?,
        };
        if let ClockKind::Radt(p) = kind {
            let k = (e.l * p.n0_star * p.delta_star).exp();
            for (i, c) in out.iter_mut().enumerate() {
                if i != *idx {
                    scale_column(c, *idx, k);
                }
            }
        }
    }
    Ok(out)
}

/// Network with clock states appended to the augmented subsystems, and
/// the transformed certificates. Subsystem `i`'s clock is named `tau{i}`.
pub fn build_augmented_network(
    net: &Interconnection,
    certs: &[LyapCert],
    spec: &ClockSpec,
) -> Result<(Interconnection, Vec<LyapCert>), AugmentError> {
    if certs.len() != net.subsystems.len() {
        return Err(AugmentError::Entry { i: certs.len(), why: "certificate count differs from subsystem count".into() });
    }
    let sets = classify(certs)?;
    let entries = check_entries(certs.len(), spec, &sets)?;
    let mut out = net.clone();
    for (idx, _, kind) in &entries {
        if net.clocks.iter().any(|c| c.owner == *idx) {
            return Err(AugmentError::Entry { i: idx + 1, why: "subsystem already has a clock".into() });
        }
        out.clocks.push(Clock { owner: *idx, kind: *kind });
    }
    out.clocks.sort_by_key(|c| c.owner);
    Ok((out, augment_certs(certs, spec)?))
}

/// Default `L` that makes the unstable rate positive by `margin`:
/// `−d + margin` (ADT) or `−c + margin` (RADT).
pub fn default_l(cert: &LyapCert, mode: ClockMode, margin: f64) -> Option<f64> {
    let (c, d) = cert.rates()?;
    Some(match mode {
        ClockMode::Adt => -d + margin,
        ClockMode::Radt => -c + margin,
    })
}

/// Supremum of `L` for entry `entry` (others fixed) under which the
/// augmented flow gains satisfy the small-gain condition. `None` when the
/// condition fails even at `L = 0`; infinite when it never fails.
pub fn l_bound(
    certs: &[LyapCert],
    spec: &ClockSpec,
    entry: usize,
    form: GainForm,
    grid: &LogGrid,
) -> Result<Option<f64>, AugmentError> {
    let holds = |l: f64| -> Result<bool, AugmentError> {
        let mut s = spec.clone();
        s.entries[entry].l = l;
        let aug = augment_certs(certs, &s)?;
        Ok(small_gain_holds(&GainStructure::from_certs(&aug, form)?, grid)?)
    };
    if !holds(0.0)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while holds(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Ok(Some(f64::INFINITY));
        }
    }
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    pub(crate) fn example_certs() -> Vec<LyapCert> {
        let mut a = LyapCert::exponential(parse("abs(x1)").unwrap(), -2.0, 1.0);
        a.internal_gains = vec![ScalarFn::zero(), ScalarFn::power(1.0, 2.0)];
        a.jump_internal_gains = Some(vec![ScalarFn::zero(), ScalarFn::zero()]);
        let mut b = LyapCert::exponential(parse("abs(x2)").unwrap(), 2.5, -1.0);
        b.internal_gains = vec![ScalarFn::power(0.2, 0.5), ScalarFn::zero()];
        b.jump_internal_gains = Some(vec![ScalarFn::zero(), ScalarFn::zero()]);
        vec![a, b]
    }

    fn adt_spec(l: f64) -> ClockSpec {
        ClockSpec { mode: ClockMode::Adt, entries: vec![ClockEntry { i: 2, l, delta: Some(2.25), delta_star: None, n0: 1.0 }] }
    }

    #[test]
    fn classify_example() {
        let s = classify(&example_certs()).unwrap();
        assert_eq!(s.flow_unstable, vec![0]);
        assert_eq!(s.jump_unstable, vec![1]);
        let mut g = example_certs();
        g[0].flow_rate = FlowRate::General(ScalarFn::identity());
        assert_eq!(classify(&g), Err(AugmentError::NotExponential(1)));
    }

    #[test]
    fn adt_on_example() {
        let aug = augment_certs(&example_certs(), &adt_spec(1.5)).unwrap();
        assert_eq!(aug[1].rates(), Some((2.5 - 3.375, 0.5)));
        assert_eq!(aug[1].v.to_string(), "exp(1.5 * tau2) * abs(x2)");
        let chi = aug[1].gain(0);
        for r in [0.01f64, 1.0, 7.0] {
            assert!((chi.eval(r).unwrap() - 1.5f64.exp() * r.sqrt() / 5.0).abs() < 1e-14);
        }
        assert!((aug[1].psi2.eval(1.0).unwrap() - 1.5f64.exp()).abs() < 1e-15);
        assert_eq!(aug[0], example_certs()[0]);
        let (net, _) = build_augmented_network(&crate::system::example_network(), &example_certs(), &adt_spec(1.5)).unwrap();
        assert_eq!(net.clocks, vec![Clock { owner: 1, kind: ClockKind::Adt(AdtParams { delta: 2.25, n0: 1.0 }) }]);
    }

    #[test]
    fn rate_algebra_and_identity() {
        let c = LyapCert::exponential(parse("abs(x1)").unwrap(), 3.0, -2.0);
        let a = adt_augment(&c, 0, "tau1", 2.5, &AdtParams::new(0.4, 2.0).unwrap()).unwrap();
        assert_eq!(a.rates(), Some((2.0, 0.5)));
        assert_eq!(adt_augment(&c, 0, "tau1", 0.0, &AdtParams::new(0.4, 2.0).unwrap()).unwrap(), c);
        let c = LyapCert::exponential(parse("abs(x1)").unwrap(), -2.0, 1.0);
        let r = radt_augment(&c, 0, "tau1", 2.5, &RadtParams::new(0.2, 1.0).unwrap()).unwrap();
        assert_eq!(r.rates(), Some((0.5, 0.5)));
        assert!((r.psi1.eval(1.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn radt_scales_columns() {
        let p = |s: &str| parse(s).unwrap();
        let mk = |v: &str, c: f64, row: Vec<f64>| {
            let mut k = LyapCert::exponential(p(v), c, 1.0);
            k.internal_gains = row.into_iter().map(ScalarFn::linear).collect();
            k
        };
        let certs = vec![mk("abs(x1)", -1.0, vec![0.0, 0.1, 0.2]), mk("abs(x2)", 1.0, vec![0.3, 0.0, 0.1]), mk("abs(x3)", -1.0, vec![0.1, 0.1, 0.0])];
        let entry = |i| ClockEntry { i, l: 2.0, delta: None, delta_star: Some(0.25), n0: 2.0 };
        let spec = ClockSpec { mode: ClockMode::Radt, entries: vec![entry(1), entry(3)] };
        let aug = augment_certs(&certs, &spec).unwrap();
        let k = 1f64.exp();
        assert!((aug[1].gain(0).linear_coefficient().unwrap() - 0.3 * k).abs() < 1e-15);
        assert!((aug[0].gain(2).linear_coefficient().unwrap() - 0.2 * k).abs() < 1e-15);
        assert_eq!(aug[0].gain(1), certs[0].gain(1));
        assert_eq!(aug[1].v, certs[1].v);
        assert_eq!(aug[2].rates(), Some((1.0, 0.5)));
        let bad = ClockSpec { mode: ClockMode::Radt, entries: vec![entry(2)] };
        assert!(augment_certs(&certs, &bad).is_err());
    }

    #[test]
    fn l_bound_of_example() {
        let b = l_bound(&example_certs(), &adt_spec(1.5), 0, GainForm::Max, &LogGrid::default()).unwrap().unwrap();
        assert!((b - 25f64.ln() / 2.0).abs() < 1e-9, "{b}");
        assert_eq!(default_l(&example_certs()[1], ClockMode::Adt, 0.5), Some(1.5));
    }

    #[test]
    fn mixed_entries_rejected() {
        let mut s = adt_spec(1.5);
        s.entries[0].delta_star = Some(0.3);
        assert_eq!(augment_certs(&example_certs(), &s), Err(AugmentError::Mixed));
        let empty = ClockSpec { mode: ClockMode::Adt, entries: vec![] };
        assert_eq!(augment_certs(&example_certs(), &empty).unwrap(), example_certs());
    }
}
