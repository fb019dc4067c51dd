use serde::{Deserialize, Serialize};

use super::LyapError;
use crate::system::CompiledSystem;

/// Radical inverse of `index` in base `base`.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

fn primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut k = 2u64;
    while out.len() < n {
        if out.iter().take_while(|&&p| p * p <= k).all(|p| k % p != 0) {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// Which set the samples are meant for; decides the clock ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Flow,
    Jump,
}

/// Box bounds for the non-clock states and the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    #[serde(default)]
    pub u_lo: Vec<f64>,
    #[serde(default)]
    pub u_hi: Vec<f64>,
}

impl SampleBox {
    /// `[−rx, rx]^nx × [−ru, ru]^nu`.
    pub fn symmetric(nx: usize, rx: f64, nu: usize, ru: f64) -> Self {
        SampleBox { x_lo: vec![-rx; nx], x_hi: vec![rx; nx], u_lo: vec![-ru; nu], u_hi: vec![ru; nu] }
    }
}

/// Low-discrepancy sampling over a box, with extra points near the
/// boundary of the gain condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub bounds: SampleBox,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Extra points per near-boundary sample.
    #[serde(default = "default_refine")]
    pub refine: usize,
    /// Relative distance to the gain boundary that triggers refinement.
    #[serde(default = "default_band")]
    pub band: f64,
}

fn default_count() -> usize {
    10_000
}
fn default_refine() -> usize {
    10
}
fn default_band() -> f64 {
    0.05
}

impl SamplePlan {
    pub fn new(bounds: SampleBox) -> Self {
        SamplePlan { bounds, count: default_count(), refine: default_refine(), band: default_band() }
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    fn ranges(&self, sys: &CompiledSystem, mode: Mode) -> Result<Vec<(usize, f64, f64)>, LyapError> {
        let nx = sys.x_len();
        let m = sys.layout.input_dim();
        let b = &self.bounds;
        if b.x_lo.len() != nx || b.x_hi.len() != nx {
            return Err(LyapError::Box { got: b.x_lo.len().min(b.x_hi.len()), want: nx });
        }
        let mut out: Vec<(usize, f64, f64)> = (0..nx).map(|k| (k, b.x_lo[k], b.x_hi[k])).collect();
        for (c, &slot) in sys.clocks().iter().zip(&sys.layout.clock_slots) {
            let (lo, hi) = match mode {
                Mode::Flow => (0.0, c.kind.cap()),
                Mode::Jump => c.kind.jump_range(),
            };
            out.push((slot, lo, hi));
        }
        let start = sys.layout.u_range.start;
        for k in 0..m {
            let lo = b.u_lo.get(k).copied().unwrap_or(0.0);
            let hi = b.u_hi.get(k).copied().unwrap_or(0.0);
            out.push((start + k, lo, hi));
        }
        Ok(out)
    }

    /// Base sample environments `[z, u]`.
    pub fn points(&self, sys: &CompiledSystem, mode: Mode) -> Result<Vec<Vec<f64>>, LyapError> {
        let ranges = self.ranges(sys, mode)?;
        let bases = primes(ranges.len());
        let len = sys.layout.env_len();
        Ok((0..self.count)
            .map(|i| {
                let mut env = vec![0.0; len];
                for (&(slot, lo, hi), &p) in ranges.iter().zip(&bases) {
                    env[slot] = lo + (hi - lo) * halton(i as u64 + 1, p);
                }
                env
            })
            .collect())
    }

    /// `refine` deterministic neighbours of base sample `index`, within 2%
    /// of the box width per coordinate and clamped to the box.
    pub fn neighbours(&self, sys: &CompiledSystem, mode: Mode, base: &[f64], index: usize) -> Vec<Vec<f64>> {
        let Ok(ranges) = self.ranges(sys, mode) else { return Vec::new() };
        let bases = primes(ranges.len());
        (0..self.refine)
            .map(|q| {
                let seq = (self.count + index * self.refine + q + 1) as u64;
                let mut env = base.to_vec();
                for (&(slot, lo, hi), &p) in ranges.iter().zip(&bases) {
                    let off = (halton(seq, p) - 0.5) * 0.04 * (hi - lo);
                    env[slot] = (base[slot] + off).clamp(lo, hi);
                }
                env
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
        assert_eq!(primes(5), vec![2, 3, 5, 7, 11]);
    }

    #[test]
    fn points_fill_box_and_clock_ranges() {
        let mut net = crate::system::example_network();
        net.clocks.push(crate::system::Clock {
            owner: 1,
            kind: crate::system::ClockKind::Adt(crate::hybridtime::AdtParams::new(2.0, 3.0).unwrap()),
        });
        let sys = net.compile().unwrap();
        let plan = SamplePlan::new(SampleBox::symmetric(2, 2.0, 0, 0.0)).with_count(500);
        let pts = plan.points(&sys, Mode::Jump).unwrap();
        assert!(pts.iter().all(|p| p[0].abs() <= 2.0 && (1.0..=3.0).contains(&p[2])));
        let mean: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / 500.0;
        assert!(mean.abs() < 0.05);
        let nb = plan.neighbours(&sys, Mode::Flow, &pts[3], 3);
        assert_eq!(nb.len(), 10);
        assert!(nb.iter().all(|p| (p[0] - pts[3][0]).abs() <= 0.08 + 1e-12));
    }
}
