use serde::{Deserialize, Serialize};

use super::spectral::{dominant_vector, spectral_detail, Matrix};
use super::SmallGainError;
use crate::lyapunov::halton;
use crate::scalarfn::{FnError, Kind, LogGrid, ScalarFn};

/// How the neighbours' contributions combine in the gain condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GainForm {
    #[default]
    Max,
    Sum,
}

/// Square array of internal gains `χ_ij` (zero diagonal).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainStructure {
    pub gains: Vec<Vec<ScalarFn>>,
    pub form: GainForm,
}

/// Largest number of subsystems for which simple cycles are enumerated.
pub const MAX_CYCLE_N: usize = 12;
/// Relative strictness required of `Γ(v) < v`-type comparisons.
pub const STRICT: f64 = 1e-12;

impl GainStructure {
    pub fn new(gains: Vec<Vec<ScalarFn>>, form: GainForm) -> Result<Self, SmallGainError> {
        let n = gains.len();
        for (i, row) in gains.iter().enumerate() {
            if row.len() != n {
                return Err(SmallGainError::Shape { row: i, got: row.len(), want: n });
            }
            if !row[i].is_zero() {
                return Err(SmallGainError::SelfGain(i));
            }
        }
        Ok(GainStructure { gains, form })
    }

    /// Flow gains of subsystem certificates.
    pub fn from_certs(certs: &[crate::lyapunov::LyapCert], form: GainForm) -> Result<Self, SmallGainError> {
        let n = certs.len();
        Self::new(certs.iter().map(|c| c.gain_rows(n).0).collect(), form)
    }

    /// Jump gains of subsystem certificates.
    pub fn jump_from_certs(certs: &[crate::lyapunov::LyapCert], form: GainForm) -> Result<Self, SmallGainError> {
        let n = certs.len();
        Self::new(certs.iter().map(|c| c.gain_rows(n).1).collect(), form)
    }

    pub fn n(&self) -> usize {
        self.gains.len()
    }

    /// Gain matrix when every gain is linear.
    pub fn linear_matrix(&self) -> Option<Matrix> {
        self.gains.iter().map(|row| row.iter().map(ScalarFn::linear_coefficient).collect()).collect()
    }

    pub fn edge(&self, i: usize, j: usize) -> bool {
        i != j && !self.gains[i][j].is_zero()
    }

    /// `Γ(v)_i = max_j χ_ij(v_j)`, or the sum in the sum form.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, FnError> {
        let mut out = vec![0.0f64; self.n()];
        for (i, row) in self.gains.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                if i == j || g.is_zero() {
                    continue;
                }
                let x = g.eval(v[j])?;
                out[i] = match self.form {
                    GainForm::Max => out[i].max(x),
                    GainForm::Sum => out[i] + x,
                };
            }
        }
        Ok(out)
    }

    /// Simple cycles, each listed once starting from its smallest node.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut out = Vec::new();
        let mut path = Vec::new();
        let mut used = vec![false; n];
        fn walk(g: &GainStructure, start: usize, v: usize, path: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
            for w in start..g.n() {
                if !g.edge(v, w) {
                    continue;
                }
                if w == start {
                    out.push(path.clone());
                } else if !used[w] {
                    used[w] = true;
                    path.push(w);
                    walk(g, start, w, path, used, out);
                    path.pop();
                    used[w] = false;
                }
            }
        }
        for s in 0..n {
            path.push(s);
            used[s] = true;
            walk(self, s, s, &mut path, &mut used, &mut out);
            used[s] = false;
            path.pop();
        }
        out
    }

    /// `χ_{i1 i2} ∘ χ_{i2 i3} ∘ ⋯ ∘ χ_{ik i1}` at `r`.
    pub fn cycle_value(&self, cycle: &[usize], r: f64) -> Result<f64, FnError> {
        let k = cycle.len();
        let mut v = r;
        for q in (0..k).rev() {
            v = self.gains[cycle[q]][cycle[(q + 1) % k]].eval(v)?;
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SmallGainMethod {
    /// Exact test on the gain matrix.
    Spectral { rho: f64 },
    Cycles { cycles: usize, grid_points: usize, samples: usize },
    /// No counterexample among the samples; not a proof.
    Sampling { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmallGainWitness {
    /// A cycle (0-based nodes) whose composition is not below the identity at `r`.
    Cycle { cycle: Vec<usize>, r: f64, value: f64 },
    /// `Γ(v) ≥ v` componentwise.
    Vector { v: Vec<f64>, gamma_v: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallGainReport {
    pub pass: bool,
    #[serde(flatten)]
    pub method: SmallGainMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<SmallGainWitness>,
}

const SIMPLEX_SAMPLES: usize = 10_000;

/// Look for `v` on scaled simplices with `Γ(v) ≥ v`.
fn simplex_search(g: &GainStructure, grid: &LogGrid, samples: usize) -> Result<Option<SmallGainWitness>, FnError> {
    let n = g.n();
    if n == 0 {
        return Ok(None);
    }
    let primes = [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];
    let (a, b) = (grid.lo.ln(), grid.hi.ln());
    for idx in 1..=samples as u64 {
        // Normalized exponential spacings give a point on the simplex.
        let mut w: Vec<f64> = (0..n).map(|k| -(1.0 - halton(idx, primes[k % primes.len()])).max(1e-300).ln()).collect();
        let total: f64 = w.iter().sum();
        let scale = (a + (b - a) * halton(idx, primes[n % primes.len()])).exp();
        for x in &mut w {
            *x = *x / total * scale;
        }
        let gv = g.apply(&w)?;
        if gv.iter().zip(&w).all(|(y, x)| *y >= *x * (1.0 - STRICT)) {
            return Ok(Some(SmallGainWitness::Vector { v: w, gamma_v: gv }));
        }
    }
    Ok(None)
}

/// Small-gain test. Linear gains use `ρ(Γ) < 1`; the max form otherwise
/// checks every simple cycle on the grid and then samples the simplex;
/// the sum form is only sampled.
pub fn small_gain_check(g: &GainStructure, grid: &LogGrid) -> Result<SmallGainReport, SmallGainError> {
    if let Some(m) = g.linear_matrix() {
        let s = spectral_detail(&m);
        let pass = s.rho < 1.0 - STRICT;
        let witness = if pass {
            None
        } else {
            dominant_vector(&m).map(|(_, v)| {
                let gamma_v = matvec(&m, &v);
                SmallGainWitness::Vector { v, gamma_v }
            })
        };
        return Ok(SmallGainReport { pass, method: SmallGainMethod::Spectral { rho: s.rho }, witness });
    }
    match g.form {
        GainForm::Sum => {
            let witness = simplex_search(g, grid, SIMPLEX_SAMPLES)?;
            Ok(SmallGainReport {
                pass: witness.is_none(),
                method: SmallGainMethod::Sampling { samples: SIMPLEX_SAMPLES },
                witness,
            })
        }
        GainForm::Max => {
            if g.n() > MAX_CYCLE_N {
                return Err(SmallGainError::TooLarge(g.n()));
            }
            let cycles = g.cycles();
            let method = SmallGainMethod::Cycles { cycles: cycles.len(), grid_points: grid.n, samples: SIMPLEX_SAMPLES };
            for cycle in &cycles {
                for r in grid.points() {
                    let value = g.cycle_value(cycle, r)?;
                    if !(value < r * (1.0 - STRICT)) {
                        let witness = Some(SmallGainWitness::Cycle { cycle: cycle.clone(), r, value });
                        return Ok(SmallGainReport { pass: false, method, witness });
                    }
                }
            }
            let witness = simplex_search(g, grid, SIMPLEX_SAMPLES)?;
            Ok(SmallGainReport { pass: witness.is_none(), method, witness })
        }
    }
}

/// The same test without the confirming simplex samples, for use inside
/// searches.
pub fn small_gain_holds(g: &GainStructure, grid: &LogGrid) -> Result<bool, SmallGainError> {
    if let Some(m) = g.linear_matrix() {
        return Ok(spectral_detail(&m).rho < 1.0 - STRICT);
    }
    match g.form {
        GainForm::Sum => Ok(simplex_search(g, grid, SIMPLEX_SAMPLES)?.is_none()),
        GainForm::Max => {
            if g.n() > MAX_CYCLE_N {
                return Err(SmallGainError::TooLarge(g.n()));
            }
            for cycle in g.cycles() {
                for r in grid.points() {
                    if !(g.cycle_value(&cycle, r)? < r * (1.0 - STRICT)) {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
    }
}

pub(crate) fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `(k, p)` with `f(r) = k·r^p`, when `f` is built only from linear and
/// power pieces.
pub fn power_law(f: &ScalarFn) -> Option<(f64, f64)> {
    match &f.kind {
        Kind::Linear(k) | Kind::ExpScaled(k) => Some((*k, 1.0)),
        Kind::Power { k, p } => Some((*k, *p)),
        Kind::Composition(parts) => {
            let mut acc = (1.0f64, 1.0f64);
            for part in parts {
                let (k, p) = power_law(part)?;
                acc = (k * acc.0.powf(p), acc.1 * p);
            }
            Some(acc)
        }
        _ => None,
    }
}
