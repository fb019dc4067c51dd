use serde::Serialize;

use super::gains::{matvec, power_law, STRICT};
use super::omega::OmegaPath;
use super::spectral::{is_irreducible, spectral_radius};
use super::SmallGainError;
use crate::expr::{Expr, Func};
use crate::lyapunov::{FlowRate, JumpRate, LyapCert};
use crate::scalarfn::{LogGrid, ScalarFn};

fn max_expr(mut parts: Vec<Expr>) -> Expr {
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Expr::call(Func::Max, parts)
    }
}

fn max_fn(mut parts: Vec<ScalarFn>) -> ScalarFn {
    parts.retain(|f| !f.is_zero());
    match parts.len() {
        0 => ScalarFn::zero(),
        1 => parts.pop().unwrap(),
        _ => ScalarFn::max_of(parts),
    }
}

fn min_fn(mut parts: Vec<ScalarFn>) -> ScalarFn {
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        ScalarFn::min_of(parts)
    }
}

fn check_count(certs: &[LyapCert], n: usize) -> Result<(), SmallGainError> {
    if certs.len() != n || n == 0 {
        return Err(SmallGainError::PathLength { got: n, want: certs.len() });
    }
    for (i, c) in certs.iter().enumerate() {
        c.validate_row(i, n)?;
    }
    Ok(())
}

/// Sandwich bounds and external gains shared by both compositions, given
/// `σ_i⁻¹`.
fn common(certs: &[LyapCert], inv: &[ScalarFn]) -> (ScalarFn, ScalarFn, ScalarFn, Option<ScalarFn>) {
    let n = certs.len();
    let spread = ScalarFn::linear(1.0 / (n as f64).sqrt());
    let psi1 = min_fn(
        certs
            .iter()
            .zip(inv)
            .map(|(c, s)| {
                if n == 1 {
                    ScalarFn::chain(vec![c.psi1.clone(), s.clone()])
                } else {
                    ScalarFn::chain(vec![spread.clone(), c.psi1.clone(), s.clone()])
                }
            })
            .collect(),
    );
    let psi2 = max_fn(certs.iter().zip(inv).map(|(c, s)| ScalarFn::chain(vec![c.psi2.clone(), s.clone()])).collect());
    let ext = max_fn(
        certs.iter().zip(inv).map(|(c, s)| ScalarFn::chain(vec![c.external_gain.clone(), s.clone()])).collect(),
    );
    let jump_ext = certs.iter().any(|c| c.jump_external_gain.is_some()).then(|| {
        max_fn(certs.iter().zip(inv).map(|(c, s)| ScalarFn::chain(vec![c.jump_external().clone(), s.clone()])).collect())
    });
    (psi1, psi2, ext, jump_ext)
}

/// Composite certificate `V = max_i σ_i⁻¹(V_i)` for a nonlinear network.
pub fn compose_lyapunov(certs: &[LyapCert], path: &OmegaPath) -> Result<LyapCert, SmallGainError> {
    let n = path.n();
    check_count(certs, n)?;
    let sigma = &path.components;
    let inv = sigma.iter().map(ScalarFn::inverse).collect::<Result<Vec<_>, _>>()?;
    let v = max_expr(certs.iter().zip(&inv).map(|(c, s)| s.to_expr(&c.v)).collect::<Result<_, _>>()?);
    let (psi1, psi2, external_gain, jump_external_gain) = common(certs, &inv);
    // φ(r) = min_i (σ_i⁻¹)'(σ_i(r))·φ_i(σ_i(r)).
    let phi = min_fn(
        (0..n)
            .map(|i| {
                ScalarFn::product(vec![
                    ScalarFn::chain(vec![sigma[i].clone(), ScalarFn::derivative_of(&inv[i])]),
                    ScalarFn::chain(vec![sigma[i].clone(), certs[i].flow_rate.phi()]),
                ])
            })
            .collect(),
    );
    // α(r) = max over σ_i⁻¹∘α_i∘σ_i and σ_i⁻¹∘χ_ij∘σ_j (jump gains).
    let mut alpha = Vec::new();
    for i in 0..n {
        alpha.push(ScalarFn::chain(vec![sigma[i].clone(), certs[i].jump_rate.alpha(), inv[i].clone()]));
        for j in 0..n {
            let g = certs[i].jump_gain(j);
            if i != j && !g.is_zero() {
                alpha.push(ScalarFn::chain(vec![sigma[j].clone(), g, inv[i].clone()]));
            }
        }
    }
    Ok(LyapCert {
        v,
        psi1,
        psi2,
        flow_rate: FlowRate::General(phi),
        jump_rate: JumpRate::General(max_fn(alpha)),
        external_gain,
        jump_external_gain,
        internal_gains: Vec::new(),
        jump_internal_gains: None,
    })
}

/// `(c, d)` when `φ(r)/r` and `α(r)/r` are constant on the grid up to a
/// relative spread of `1e-12`.
pub fn exponential_rates(cert: &LyapCert, grid: &LogGrid) -> Option<(f64, f64)> {
    fn slope(f: &ScalarFn, grid: &LogGrid) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in grid.points() {
            let k = f.eval(r).ok()? / r;
            lo = lo.min(k);
            hi = hi.max(k);
        }
        ((hi - lo).abs() <= 1e-12 * hi.abs().max(lo.abs()).max(1e-300) && lo.is_finite()).then_some((lo, hi))
    }
    let c = match &cert.flow_rate {
        FlowRate::Exponential(c) => *c,
        FlowRate::General(f) => slope(f, grid)?.0,
    };
    let d = match &cert.jump_rate {
        JumpRate::Exponential(d) => *d,
        JumpRate::General(f) => {
            // The largest slope gives the conservative rate.
            let k = slope(f, grid)?.1;
            if k > 0.0 {
                -k.ln()
            } else {
                return None;
            }
        }
    };
    Some((c, d))
}

/// Closed-form `(c, d)` of [`compose_lyapunov`] when every `σ_i` is a power
/// law `k_i·r^{p_i}` and the certificates are exponential: `c = min c_i/p_i`
/// and `d = min{d_i/p_i, −ln κ_ij}`, where `κ_ij·r = σ_i⁻¹∘χ^J_ij∘σ_j(r)`
/// must be linear for every nonzero jump gain.
pub fn power_path_rates(certs: &[LyapCert], path: &OmegaPath) -> Option<(f64, f64)> {
    let n = certs.len();
    let laws: Vec<(f64, f64)> = path.components.iter().map(power_law).collect::<Option<_>>()?;
    if laws.len() != n {
        return None;
    }
    let mut c = f64::INFINITY;
    let mut d = f64::INFINITY;
    for (i, cert) in certs.iter().enumerate() {
        let (ci, di) = cert.rates()?;
        let p = laws[i].1;
        c = c.min(ci / p);
        d = d.min(di / p);
        let inv = path.components[i].inverse().ok()?;
        for j in 0..n {
            let g = cert.jump_gain(j);
            if j == i || g.is_zero() {
                continue;
            }
            let (k, q) = power_law(&ScalarFn::chain(vec![path.components[j].clone(), g, inv.clone()]))?;
            if (q - 1.0).abs() > 1e-12 || !(k > 0.0) {
                return None;
            }
            d = d.min(-k.ln());
        }
    }
    Some((c, d))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentialComposite {
    pub cert: LyapCert,
    pub c: f64,
    pub d: f64,
    pub scales: Vec<f64>,
    /// Spectral radius of the flow gain matrix.
    pub rho: f64,
    /// `min{min_i d_i, −ln ρ}`, a lower bound on `d` for the Perron scales.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pf_bound: Option<f64>,
}

fn linear_row(c: &LyapCert, n: usize, jump: bool) -> Result<Vec<f64>, SmallGainError> {
    (0..n)
        .map(|j| {
            let g = if jump { c.jump_gain(j) } else { c.gain(j) };
            g.linear_coefficient().ok_or_else(|| SmallGainError::NotLinear(g.to_string()))
        })
        .collect()
}

/// Composite `V = max_i V_i / s_i` for exponential certificates with
/// linear gains: `c = min c_i`, `d = min{d_i, −ln((s_j/s_i)·χ_ij)}` over
/// the jump gains.
pub fn compose_exponential(certs: &[LyapCert], s: &[f64]) -> Result<ExponentialComposite, SmallGainError> {
    let n = s.len();
    check_count(certs, n)?;
    if s.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(SmallGainError::NoPath("scales must be positive".into()));
    }
    let mut flow = Vec::with_capacity(n);
    let mut jump = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    for (i, c) in certs.iter().enumerate() {
        flow.push(linear_row(c, n, false)?);
        jump.push(linear_row(c, n, true)?);
        rates.push(c.rates().ok_or(SmallGainError::NotExponential(i + 1))?);
    }
    let gs = matvec(&flow, s);
    if let Some(i) = (0..n).find(|&i| !(gs[i] < s[i] * (1.0 - STRICT)) && gs[i] > 0.0) {
        return Err(SmallGainError::NoPath(format!("Γs < s fails in component {}", i + 1)));
    }
    let c = rates.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let mut d = rates.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    for i in 0..n {
        for j in 0..n {
            if i != j && jump[i][j] > 0.0 {
                d = d.min(-((s[j] / s[i]) * jump[i][j]).ln());
            }
        }
    }
    let inv: Vec<ScalarFn> = s.iter().map(|x| ScalarFn::linear(1.0 / x)).collect();
    let v = max_expr(certs.iter().zip(&inv).map(|(c, k)| k.to_expr(&c.v)).collect::<Result<_, _>>()?);
    let (psi1, psi2, external_gain, jump_external_gain) = common(certs, &inv);
    let rho = spectral_radius(&flow);
    let min_d = rates.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let pf_bound = (rho > 0.0 && is_irreducible(&jump)).then(|| min_d.min(-spectral_radius(&jump).ln()));
    Ok(ExponentialComposite {
        cert: LyapCert {
            v,
            psi1,
            psi2,
            flow_rate: FlowRate::Exponential(c),
            jump_rate: JumpRate::Exponential(d),
            external_gain,
            jump_external_gain,
            internal_gains: Vec::new(),
            jump_internal_gains: None,
        },
        c,
        d,
        scales: s.to_vec(),
        rho,
        pf_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn lin(k: f64) -> ScalarFn {
        ScalarFn::linear(k)
    }

    #[test]
    fn exponential_example() {
        // d = min{ln 2, ln 2, −ln(0.5·1), −ln(2·0.25)} = ln 2.
        let mut a = LyapCert::exponential(parse("abs(x1)").unwrap(), 1.0, 2f64.ln());
        a.internal_gains = vec![lin(0.0), lin(0.5)];
        let mut b = LyapCert::exponential(parse("abs(x2)").unwrap(), 0.5, 2f64.ln());
        b.internal_gains = vec![lin(0.5), lin(0.0)];
        let comp = compose_exponential(&[a, b], &[1.0, 1.0]).unwrap();
        assert_eq!(comp.c, 0.5);
        assert!((comp.d - 2f64.ln()).abs() < 1e-15);
        assert!((comp.rho - 0.5).abs() < 1e-12);
        assert!((comp.pf_bound.unwrap() - 2f64.ln()).abs() < 1e-12);
        let mut vars = crate::expr::VarLayout::new();
        for name in ["x1", "x2", "x3"] {
            vars.push(name, 1);
        }
        let e = crate::expr::Compiled::bind_real(&comp.cert.v, &vars).unwrap();
        assert_eq!(e.eval(&[4.0, 1.0, 0.0]).unwrap(), 4.0);
    }

    #[test]
    fn scales_enter_jump_rate() {
        let mut a = LyapCert::exponential(parse("abs(x1)").unwrap(), 1.0, 5.0);
        a.internal_gains = vec![lin(0.0), lin(2.0)];
        let mut b = LyapCert::exponential(parse("abs(x2)").unwrap(), 1.0, 5.0);
        b.internal_gains = vec![lin(0.125), lin(0.0)];
        let comp = compose_exponential(&[a.clone(), b.clone()], &[1.0, 0.25]).unwrap();
        // −ln((0.25/1)·2) = ln 2 and −ln((1/0.25)·0.125) = ln 2.
        assert!((comp.d - 2f64.ln()).abs() < 1e-15);
        assert!(compose_exponential(&[a, b], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn nonlinear_composite_of_example() {
        let mut a = LyapCert::exponential(parse("abs(x1)").unwrap(), -2.0, 1.0);
        a.internal_gains = vec![ScalarFn::zero(), ScalarFn::power(1.0, 2.0)];
        a.jump_internal_gains = Some(vec![ScalarFn::zero(), ScalarFn::zero()]);
        let mut b = LyapCert::exponential(parse("exp(1.5*tau2)*abs(x2)").unwrap(), -0.875, 0.5);
        b.psi2 = lin(1.5f64.exp());
        b.internal_gains = vec![ScalarFn::chain(vec![ScalarFn::power(0.2, 0.5), lin(1.5f64.exp())]), ScalarFn::zero()];
        b.jump_internal_gains = Some(vec![ScalarFn::zero(), ScalarFn::zero()]);
        let path = OmegaPath { components: vec![ScalarFn::identity(), ScalarFn::power(1.0 / 1.05, 0.5)] };
        let comp = compose_lyapunov(&[a, b], &path).unwrap();
        let (c, d) = exponential_rates(&comp, &LogGrid::default()).unwrap();
        assert!((c + 2.0).abs() < 1e-12, "{c}");
        assert!((d - 1.0).abs() < 1e-12, "{d}");
        assert_eq!(comp.v.to_string(), "max(abs(x1), 1.1025 * (exp(1.5 * tau2) * abs(x2))^2)");
    }
}
