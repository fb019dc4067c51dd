use serde::Serialize;

use super::spec::DwellChoice;
use crate::hybridtime::{AdtParams, DwellWindow, RadtParams};

/// Dwell-time conditions under which composite rates `(c, d)` give decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum DwellRegion {
    /// Every hybrid time domain works.
    Unrestricted,
    /// ADT domains with `δ < delta_bound` jumps per unit time, any `N₀`.
    Adt { delta_bound: f64 },
    /// RADT domains with `δ* < delta_star_bound`, any `N₀*`.
    Radt { delta_star_bound: f64 },
    /// Only solutions with bounded domains.
    EmptyForComplete,
}

pub fn dwell_region(c: f64, d: f64) -> DwellRegion {
    if c > 0.0 && d > 0.0 {
        DwellRegion::Unrestricted
    } else if c > 0.0 {
        DwellRegion::Adt { delta_bound: if d == 0.0 { f64::INFINITY } else { c / -d } }
    } else if d > 0.0 {
        DwellRegion::Radt { delta_star_bound: if c == 0.0 { f64::INFINITY } else { d / -c } }
    } else {
        DwellRegion::EmptyForComplete
    }
}

impl DwellRegion {
    pub fn contains(&self, choice: &DwellChoice) -> bool {
        match (self, choice) {
            (DwellRegion::Unrestricted, _) => true,
            (DwellRegion::Adt { delta_bound }, DwellChoice::Adt(p)) => p.delta < *delta_bound,
            (DwellRegion::Radt { delta_star_bound }, DwellChoice::Radt(p)) => p.delta_star < *delta_star_bound,
            _ => false,
        }
    }

    /// `0.9 × bound` with a unit budget; unit parameters for infinite bounds.
    pub fn default_choice(&self) -> Option<DwellChoice> {
        let pick = |b: f64| if b.is_finite() { 0.9 * b } else { 1.0 };
        match self {
            DwellRegion::Adt { delta_bound } => Some(DwellChoice::Adt(AdtParams { delta: pick(*delta_bound), n0: 1.0 })),
            DwellRegion::Radt { delta_star_bound } => {
                Some(DwellChoice::Radt(RadtParams { delta_star: pick(*delta_star_bound), n0_star: 1.0 }))
            }
            _ => None,
        }
    }
}

/// Window `(η, λ, μ)` realizing a choice inside the region of `(c, d)`,
/// splitting the rate slack evenly between `η` and `λ`.
pub fn window_for(c: f64, d: f64, choice: Option<&DwellChoice>) -> Option<DwellWindow> {
    match (dwell_region(c, d), choice) {
        (DwellRegion::Unrestricted, _) => DwellWindow::new(d / 2.0, c / 2.0, 0.0).ok(),
        (DwellRegion::Adt { .. }, Some(DwellChoice::Adt(p))) => {
            // (η − d)δ ≤ c − λ: slack = c + dδ.
            let slack = c + d * p.delta;
            if !(slack > 0.0) {
                return None;
            }
            let (eta, lambda) = (slack / (2.0 * p.delta), slack / 2.0);
            DwellWindow::new(eta, lambda, (eta - d) * p.n0).ok()
        }
        (DwellRegion::Radt { .. }, Some(DwellChoice::Radt(p))) => {
            // d − η ≥ (λ − c)δ*: slack = d + cδ*.
            let slack = d + c * p.delta_star;
            if !(slack > 0.0) {
                return None;
            }
            let (eta, lambda) = (slack / 2.0, slack / (2.0 * p.delta_star));
            DwellWindow::new(eta, lambda, (lambda - c) * p.n0_star * p.delta_star).ok()
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybridtime::{check_gen_dwell, check_radt, HybridTimeDomain};

    #[test]
    fn regions() {
        assert_eq!(dwell_region(-2.0, 1.0), DwellRegion::Radt { delta_star_bound: 0.5 });
        assert_eq!(dwell_region(1.0, 1.0), DwellRegion::Unrestricted);
        assert_eq!(dwell_region(2.0, -1.0), DwellRegion::Adt { delta_bound: 2.0 });
        assert_eq!(dwell_region(-1.0, -1.0), DwellRegion::EmptyForComplete);
        assert_eq!(dwell_region(2.0, 0.0), DwellRegion::Adt { delta_bound: f64::INFINITY });
    }

    #[test]
    fn example_window() {
        let choice = dwell_region(-2.0, 1.0).default_choice().unwrap();
        let DwellChoice::Radt(p) = choice else { panic!() };
        assert!((p.delta_star - 0.45).abs() < 1e-15);
        let w = window_for(-2.0, 1.0, Some(&choice)).unwrap();
        assert!((w.eta - 0.05).abs() < 1e-12);
        assert!((w.lambda - 0.05 / 0.45).abs() < 1e-12);
        assert!((w.mu - (w.lambda + 2.0) * 0.45).abs() < 1e-15);
        // Any RADT(0.45, 1) domain satisfies the window.
        let dom = HybridTimeDomain::from_jump_times(&[0.45, 0.9, 1.3, 1.75, 2.2], 2.65).unwrap();
        assert!(check_radt(&dom, &p).pass);
        assert!(check_gen_dwell(&dom, -2.0, 1.0, &w).pass);
    }

    #[test]
    fn region_shrinks_with_rates() {
        let rates = [-3.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let measure = |r: DwellRegion| match r {
            DwellRegion::Unrestricted => (3, f64::INFINITY),
            DwellRegion::Adt { delta_bound } => (1, delta_bound),
            DwellRegion::Radt { delta_star_bound } => (1, 1.0 / delta_star_bound),
            DwellRegion::EmptyForComplete => (0, 0.0),
        };
        for &c in &rates {
            for &d in &rates {
                let base = dwell_region(c, d);
                for (c2, d2) in [(c - 0.25, d), (c, d - 0.25)] {
                    let smaller = dwell_region(c2, d2);
                    let (kb, vb) = measure(base);
                    let (ks, vs) = measure(smaller);
                    match (base, smaller) {
                        (DwellRegion::Adt { .. }, DwellRegion::Adt { .. }) => assert!(vs <= vb),
                        // A smaller δ* bound admits fewer domains.
                        (DwellRegion::Radt { .. }, DwellRegion::Radt { .. }) => assert!(vs >= vb),
                        _ => assert!(ks <= kb, "{base:?} -> {smaller:?}"),
                    }
                }
            }
        }
    }
}
