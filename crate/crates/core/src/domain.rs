//! Parameter hypercubes, the correlation region, and uniform sampling.

use serde::{Deserialize, Serialize};

use crate::error::{LrvError, Result};
use crate::rng::RngStream;

/// Bound on every correlation coordinate.
pub const RHO_BOUND: f64 = 0.95;

/// Maximum number of rejected correlation triples before sampling gives up.
pub const REJECTION_CAP: usize = 1_000_000;

/// A point of a [`ParameterDomain`].
pub type ParameterPoint = Vec<f64>;

/// A product of closed intervals, optionally with three coordinates that
/// together must form an admissible correlation triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    pub intervals: Vec<(f64, f64)>,
    #[serde(default, rename = "correlation_indices", skip_serializing_if = "Option::is_none")]
    pub correlation_slot: Option<[usize; 3]>,
}

/// Membership in the correlation region: the triple lies in the cube
/// `[-0.95, 0.95]^3` and the Schur complement that forms the last pivot of
/// the Cholesky factor of `Q(ρ)` is non-negative.
pub fn region_check(rho: [f64; 3]) -> bool {
    let [r1, r2, r3] = rho;
    if rho.iter().any(|r| r.is_nan() || r.abs() > RHO_BOUND) {
        return false;
    }
    let lead = 1.0 - r1 * r1;
    1.0 - r2 * r2 - (r3 - r1 * r2).powi(2) / lead >= 0.0
}

impl ParameterDomain {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        let domain = Self { intervals, correlation_slot: None };
        domain.validate()?;
        Ok(domain)
    }

    pub fn with_correlation(intervals: Vec<(f64, f64)>, slot: [usize; 3]) -> Result<Self> {
        let domain = Self { intervals, correlation_slot: Some(slot) };
        domain.validate()?;
        Ok(domain)
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals.is_empty() {
            return Err(LrvError::InvalidDomain("no intervals".into()));
        }
        for (i, &(lo, hi)) in self.intervals.iter().enumerate() {
            if lo > hi || !lo.is_finite() || !hi.is_finite() {
                return Err(LrvError::InvalidDomain(format!("interval {i} = [{lo}, {hi}]")));
            }
        }
        if let Some(slot) = self.correlation_slot {
            for &j in &slot {
                let Some(&(lo, hi)) = self.intervals.get(j) else {
                    return Err(LrvError::InvalidDomain(format!("correlation index {j} out of range")));
                };
                if lo < -RHO_BOUND || hi > RHO_BOUND {
                    return Err(LrvError::InvalidDomain(format!(
                        "correlation interval {j} = [{lo}, {hi}] leaves [-0.95, 0.95]"
                    )));
                }
            }
            if slot[0] == slot[1] || slot[1] == slot[2] || slot[0] == slot[2] {
                return Err(LrvError::InvalidDomain("repeated correlation index".into()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        if p.len() != self.dim() {
            return Err(LrvError::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        let in_box = p.iter().zip(&self.intervals).all(|(&x, &(lo, hi))| lo <= x && x <= hi);
        Ok(in_box && self.correlation_slot.is_none_or(|[a, b, c]| region_check([p[a], p[b], p[c]])))
    }

    /// Uniform draw on the box; the correlation triple, when present, is
    /// redrawn from its sub-box until it lands in the region.
    pub fn sample_uniform(&self, stream: &mut RngStream) -> Result<ParameterPoint> {
        let mut p: Vec<f64> = self.intervals.iter().map(|&(lo, hi)| stream.uniform_in(lo, hi)).collect();
        if let Some([a, b, c]) = self.correlation_slot {
            let mut tries = 1;
            while !region_check([p[a], p[b], p[c]]) {
                if tries >= REJECTION_CAP {
                    return Err(LrvError::RejectionCap(tries));
                }
                for &j in &[a, b, c] {
                    let (lo, hi) = self.intervals[j];
                    p[j] = stream.uniform_in(lo, hi);
                }
                tries += 1;
            }
        }
        Ok(p)
    }

    pub fn sample_many(&self, n: usize, stream: &mut RngStream) -> Result<Vec<ParameterPoint>> {
        (0..n).map(|_| self.sample_uniform(stream)).collect()
    }

    pub fn midpoint(&self) -> ParameterPoint {
        self.intervals.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }
}
