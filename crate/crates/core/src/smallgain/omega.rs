use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gains::{power_law, GainStructure, STRICT};
use super::spectral::{is_irreducible, perron_vector, spectral_radius};
use super::SmallGainError;
use crate::scalarfn::{FnClass, FnError, Kind, LogGrid, ScalarFn};

/// `σ : r ↦ (σ_1(r), …, σ_n(r))` with `Γ(σ(r)) < σ(r)` for `r > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaPath {
    pub components: Vec<ScalarFn>,
}

fn has_expr(f: &ScalarFn) -> bool {
    match &f.kind {
        Kind::Expr(_) => true,
        Kind::Composition(ps) | Kind::Max(ps) | Kind::Min(ps) | Kind::Product(ps) => ps.iter().any(has_expr),
        Kind::Derivative(g) => has_expr(g),
        _ => false,
    }
}

impl OmegaPath {
    /// `σ_i(r) = s_i·r`.
    pub fn linear(s: &[f64]) -> Self {
        OmegaPath { components: s.iter().map(|&k| ScalarFn::linear(k)).collect() }
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    /// Slopes when every component is linear.
    pub fn scales(&self) -> Option<Vec<f64>> {
        self.components.iter().map(ScalarFn::linear_coefficient).collect()
    }

    /// DSL components: their derivative bounds are taken on trust.
    pub fn assumed(&self) -> bool {
        self.components.iter().any(has_expr)
    }

    pub fn eval(&self, r: f64) -> Result<Vec<f64>, FnError> {
        self.components.iter().map(|f| f.eval(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaWitness {
    pub r: f64,
    /// 0-based component where `Γ(σ(r))_i ≥ σ_i(r)`, or which is not `K∞`.
    pub component: usize,
    pub sigma: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaReport {
    pub pass: bool,
    /// `min_{r,i} (σ_i(r) − Γ(σ(r))_i) / σ_i(r)` over the grid.
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<OmegaWitness>,
    pub assumed: bool,
}

/// Grid check of `Γ(σ(r)) < σ(r)` and of each component being `K∞`.
pub fn validate_omega_path(path: &OmegaPath, g: &GainStructure, grid: &LogGrid) -> Result<OmegaReport, SmallGainError> {
    if path.n() != g.n() {
        return Err(SmallGainError::PathLength { got: path.n(), want: g.n() });
    }
    let mut rep = OmegaReport { pass: true, margin: f64::INFINITY, witness: None, assumed: path.assumed() };
    for (i, f) in path.components.iter().enumerate() {
        let class = f.verify_class(FnClass::Kinf, grid);
        if !class.pass {
            rep.pass = false;
            rep.margin = f64::NEG_INFINITY;
            rep.witness = Some(OmegaWitness { r: f64::NAN, component: i, sigma: f64::NAN, gamma: f64::NAN });
            return Ok(rep);
        }
    }
    for r in grid.points() {
        let sigma = path.eval(r)?;
        let gamma = g.apply(&sigma)?;
        for i in 0..g.n() {
            let m = (sigma[i] - gamma[i]) / sigma[i];
            if m < rep.margin {
                rep.margin = m;
                if !(m > STRICT) {
                    rep.pass = false;
                    rep.witness = Some(OmegaWitness { r, component: i, sigma: sigma[i], gamma: gamma[i] });
                }
            }
        }
    }
    Ok(rep)
}

/// Scales `s > 0` with `Γs < s` for a linear gain matrix with `ρ < 1`:
/// the Perron vector (max entry 1) when irreducible, else `(I − Γ)⁻¹·1`.
pub fn linear_omega_path(m: &[Vec<f64>]) -> Result<Vec<f64>, SmallGainError> {
    let n = m.len();
    let rho = spectral_radius(m);
    if !(rho < 1.0 - STRICT) {
        return Err(SmallGainError::NoPath(format!("spectral radius {rho} is not below 1")));
    }
    if n > 1 && rho > 0.0 && is_irreducible(m) {
        if let Some((_, v)) = perron_vector(m) {
            if v.iter().all(|x| *x > 0.0) {
                return Ok(v);
            }
        }
    }
    let a = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - m[i][j]);
    let s = a
        .lu()
        .solve(&DVector::from_element(n, 1.0))
        .ok_or_else(|| SmallGainError::NoPath("I − Γ is singular".into()))?;
    let top = s.iter().cloned().fold(0.0, f64::max);
    Ok(s.iter().map(|x| x / top).collect())
}

/// Path `σ_i(r) = a_i·r^{q_i}` for gains of the form `k·r^p`. Exponents
/// must satisfy `q_i = p_ij·q_j` along every edge.
pub fn power_law_omega_path(g: &GainStructure, grid: &LogGrid) -> Result<OmegaPath, SmallGainError> {
    let n = g.n();
    let mut law = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if g.edge(i, j) {
                let (k, p) = power_law(&g.gains[i][j])
                    .ok_or_else(|| SmallGainError::NoPath(format!("gain ({}, {}) is not a power law", i + 1, j + 1)))?;
                if !(k > 0.0 && p > 0.0) {
                    return Err(SmallGainError::NoPath(format!("gain ({}, {}) is not K∞", i + 1, j + 1)));
                }
                law[i][j] = Some((k, p));
            }
        }
    }
    // Propagate exponents over the undirected gain graph.
    let mut q: Vec<Option<f64>> = vec![None; n];
    for root in 0..n {
        if q[root].is_some() {
            continue;
        }
        q[root] = Some(1.0);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            let qv = q[v].unwrap();
            for w in 0..n {
                let implied = match (law[v][w], law[w][v]) {
                    (Some((_, p)), _) => Some(qv / p),
                    (None, Some((_, p))) => Some(qv * p),
                    _ => None,
                };
                let Some(want) = implied else { continue };
                match q[w] {
                    None => {
                        q[w] = Some(want);
                        stack.push(w);
                    }
                    Some(have) if (have - want).abs() > 1e-12 * have.abs().max(want.abs()) => {
                        return Err(SmallGainError::NoPath("gain exponents admit no common power-law path".into()));
                    }
                    _ => {}
                }
            }
        }
    }
    let q: Vec<f64> = q.into_iter().map(Option::unwrap).collect();
    for i in 0..n {
        for j in 0..n {
            if let Some((_, p)) = law[i][j] {
                if (q[i] - p * q[j]).abs() > 1e-12 * q[i].abs() {
                    return Err(SmallGainError::NoPath("gain exponents admit no common power-law path".into()));
                }
            }
        }
    }
    // Log-scales with b_i ≥ ln k_ij + p_ij·b_j + margin, by fixed-point iteration.
    let worst_cycle = g
        .cycles()
        .iter()
        .map(|c| g.cycle_value(c, 1.0).map(|v| v.ln()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if worst_cycle >= 0.0 {
        return Err(SmallGainError::NoPath("a gain cycle is not contracting".into()));
    }
    let base = if worst_cycle.is_finite() { -worst_cycle } else { 1.0 };
    for kappa in [0.25, 1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0] {
        let margin = kappa * base / n as f64;
        let mut b = vec![0.0f64; n];
        let mut settled = false;
        for _ in 0..10_000 {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    if let Some((k, p)) = law[i][j] {
                        let need = k.ln() + p * b[j] + margin;
                        if need > b[i] + 1e-15 {
                            b[i] = need;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                settled = true;
                break;
            }
        }
        if !settled {
            continue;
        }
        let path = OmegaPath { components: (0..n).map(|i| ScalarFn::power(b[i].exp(), q[i])).collect() };
        if validate_omega_path(&path, g, grid)?.pass {
            return Ok(path);
        }
    }
    Err(SmallGainError::NoPath("power-law construction did not converge".into()))
}
