//! Spectral radius and Perron vectors of small nonnegative matrices.

use serde::Serialize;

/// Iteration cap for one strongly connected block.
pub const MAX_ITER: usize = 10_000;
/// Relative gap between the Collatz–Wielandt bounds at which to stop.
pub const REL_TOL: f64 = 1e-12;

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectral {
    pub rho: f64,
    /// Lower and upper Collatz–Wielandt bounds of the dominant block.
    pub bounds: (f64, f64),
    pub iterations: usize,
    pub converged: bool,
}

/// Strongly connected components of the graph with an edge `i → j`
/// whenever `m[i][j] > 0` (Tarjan).
pub fn components(m: &[Vec<f64>]) -> Vec<Vec<usize>> {
    struct St<'a> {
        m: &'a [Vec<f64>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(s: &mut St, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on[v] = true;
        for w in 0..s.m.len() {
            if s.m[v][w] <= 0.0 {
                continue;
            }
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on[w] => s.low[v] = s.low[v].min(iw),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = s.stack.pop() {
                s.on[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            s.out.push(comp);
        }
    }
    let n = m.len();
    let mut s = St { m, index: vec![None; n], low: vec![0; n], on: vec![false; n], stack: Vec::new(), next: 0, out: Vec::new() };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

pub fn is_irreducible(m: &[Vec<f64>]) -> bool {
    m.len() <= 1 || components(m).len() == 1
}

/// Power iteration on `A + sI` for an irreducible block, with the shift
/// tracking the current estimate so that periodic blocks converge.
/// Returns the estimate and the normalized positive eigenvector.
fn block(a: &[Vec<f64>]) -> (Spectral, Vec<f64>) {
    let n = a.len();
    if n == 1 {
        let rho = a[0][0].max(0.0);
        return (Spectral { rho, bounds: (rho, rho), iterations: 0, converged: true }, vec![1.0]);
    }
    let mut x = vec![1.0; n];
    let mut shift = a.iter().map(|row| row.iter().sum::<f64>()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut y = vec![0.0; n];
    let mut bounds = (0.0, f64::INFINITY);
    for it in 1..=MAX_ITER {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..n {
            let ax: f64 = a[i].iter().zip(&x).map(|(g, v)| g * v).sum();
            let r = ax / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
            y[i] = ax + shift * x[i];
        }
        bounds = (lo, hi);
        if hi - lo <= REL_TOL * hi {
            let rho = 0.5 * (lo + hi);
            return (Spectral { rho, bounds, iterations: it, converged: true }, normalized(&x));
        }
        let top = y.iter().cloned().fold(0.0, f64::max);
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / top;
        }
        shift = 0.5 * (lo + hi);
    }
    let rho = 0.5 * (bounds.0 + bounds.1);
    (Spectral { rho, bounds, iterations: MAX_ITER, converged: false }, normalized(&x))
}

fn normalized(x: &[f64]) -> Vec<f64> {
    let top = x.iter().cloned().fold(0.0, f64::max);
    x.iter().map(|v| v / top).collect()
}

fn sub(m: &[Vec<f64>], idx: &[usize]) -> Matrix {
    idx.iter().map(|&i| idx.iter().map(|&j| m[i][j]).collect()).collect()
}

/// `ρ(G)` for a nonnegative matrix: the largest block radius over the
/// strongly connected components.
pub fn spectral_detail(m: &[Vec<f64>]) -> Spectral {
    let mut best = Spectral { rho: 0.0, bounds: (0.0, 0.0), iterations: 0, converged: true };
    for comp in components(m) {
        let (s, _) = block(&sub(m, &comp));
        if s.rho > best.rho || !s.converged {
            let converged = best.converged && s.converged;
            if s.rho > best.rho {
                best = s;
            }
            best.converged = converged;
        }
    }
    best
}

pub fn spectral_radius(m: &[Vec<f64>]) -> f64 {
    spectral_detail(m).rho
}

/// Perron vector with maximum entry 1, for irreducible matrices.
pub fn perron_vector(m: &[Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    if m.is_empty() || !is_irreducible(m) {
        return None;
    }
    let (s, v) = block(m);
    Some((s.rho, v))
}

/// Nonnegative eigenvector for `ρ(G)`: the Perron vector of the dominant
/// block, zero elsewhere. Satisfies `Gv ≥ ρv`.
pub fn dominant_vector(m: &[Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for comp in components(m) {
        let (s, v) = block(&sub(m, &comp));
        if best.as_ref().is_none_or(|b| s.rho > b.0) {
            best = Some((s.rho, comp, v));
        }
    }
    let (rho, comp, v) = best?;
    let mut out = vec![0.0; m.len()];
    for (k, i) in comp.into_iter().enumerate() {
        out[i] = v[k];
    }
    Some((rho, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        assert_eq!(spectral_radius(&[vec![0.0, 0.0], vec![0.0, 0.0]]), 0.0);
        let m = vec![vec![0.0, 2.0], vec![0.125, 0.0]];
        assert!((spectral_radius(&m) - 0.5).abs() < 1e-12);
        let (rho, v) = perron_vector(&m).unwrap();
        assert!((rho - 0.5).abs() < 1e-12);
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 0.25).abs() < 1e-12);
        let sym = vec![vec![0.0, 0.5], vec![0.5, 0.0]];
        let (_, v) = perron_vector(&sym).unwrap();
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn reducible_and_periodic() {
        // Upper triangular: the radius is the largest diagonal entry.
        let tri = vec![vec![0.3, 5.0, 1.0], vec![0.0, 0.7, 2.0], vec![0.0, 0.0, 0.1]];
        assert!((spectral_radius(&tri) - 0.7).abs() < 1e-12);
        assert!(!is_irreducible(&tri));
        assert!(perron_vector(&tri).is_none());
        // A 3-cycle with tiny weights has eigenvalues on a circle.
        let cyc = vec![vec![0.0, 1e-3, 0.0], vec![0.0, 0.0, 1e-3], vec![1e-3, 0.0, 0.0]];
        let s = spectral_detail(&cyc);
        assert!(s.converged);
        assert!((s.rho - 1e-3).abs() < 1e-15);
        assert_eq!(components(&cyc).len(), 1);
    }
}
