//! Average basket put with a knock-in barrier on the worst asset.
//!
//! Prices are simulated on `N` exact log-Euler steps; continuous monitoring
//! is approximated by Brownian-bridge crossing probabilities between the
//! monitoring dates.

use crate::autodiff::Real;
use crate::domain::{ParameterDomain, RHO_BOUND};
use crate::error::{LrvError, Result};
use crate::models::basket::{cholesky_rows, lower_mul, BasketParams, RHO_SLOT};
use crate::models::Kernel;

/// Monitoring path `X₀ = ξ, X₁, …, X_N`.
pub fn barrier_path<S: Real>(p: &BasketParams, w: &[S], steps: usize) -> Result<Vec<[S; 3]>> {
    if w.len() != 3 * steps {
        return Err(LrvError::DimensionMismatch { expected: 3 * steps, got: w.len() });
    }
    Ok(path_unchecked(p, w, steps))
}

fn path_unchecked<S: Real>(p: &BasketParams, w: &[S], steps: usize) -> Vec<[S; 3]> {
    let l = cholesky_rows(p.rho);
    let dt = p.t / steps as f64;
    let sqrt_dt = dt.sqrt();
    let drift: [f64; 3] = std::array::from_fn(|i| dt * (p.r - p.delta[i] - 0.5 * p.sigma[i] * p.sigma[i]));
    let mut path = Vec::with_capacity(steps + 1);
    let mut x: [S; 3] = std::array::from_fn(|i| S::constant(p.xi[i]));
    path.push(x);
    for wn in w.chunks_exact(3) {
        let z = lower_mul(&l, wn);
        x = std::array::from_fn(|i| x[i] * (z[i] * (sqrt_dt * p.sigma[i]) + drift[i]).exp());
        path.push(x);
    }
    path
}

/// Per-asset bridge crossing factors `𝒯ᵢ(x, y)` over one step of length `dt`.
pub fn crossing_factors<S: Real>(sigma: &[f64; 3], barrier: f64, dt: f64, x: &[S; 3], y: &[S; 3]) -> [S; 3] {
    std::array::from_fn(|i| {
        if x[i].value().min(y[i].value()) < barrier {
            S::constant(1.0)
        } else {
            let a = (x[i] / barrier).ln();
            let b = (y[i] / barrier).ln();
            (a * b * (-2.0 / (sigma[i] * sigma[i] * dt))).exp()
        }
    })
}

/// `𝒫 = ½(2 - Π𝒰 - Πℒ)` with `𝒰 = 1 - maxⱼ 𝒯ⱼ` and `ℒ = max(1 - Σⱼ 𝒯ⱼ, 0)`.
pub fn bridge_crossing_prob<S: Real>(p: &BasketParams, path: &[[S; 3]]) -> S {
    let barrier = p.barrier.expect("barrier product requires B");
    let steps = path.len() - 1;
    let dt = p.t / steps as f64;
    let mut upper = S::constant(1.0);
    let mut lower = S::constant(1.0);
    for pair in path.windows(2) {
        let tf = crossing_factors(&p.sigma, barrier, dt, &pair[0], &pair[1]);
        upper = upper * tf[0].max(tf[1]).max(tf[2]).rsub(1.0);
        lower = lower * (tf[0] + tf[1] + tf[2]).rsub(1.0).relu();
    }
    (upper + lower).rsub(2.0) * 0.5
}

/// `Φ(p, w) = 𝒫(X) e^{-rT} max(K - mean(X_N), 0)`.
pub fn barrier_avg_put_payoff<S: Real>(p: &BasketParams, w: &[S], steps: usize) -> S {
    let path = path_unchecked(p, w, steps);
    let last = path[steps];
    let mean = (last[0] + last[1] + last[2]) / 3.0;
    let put = mean.rsub(p.k).relu() * (-p.r * p.t).exp();
    bridge_crossing_prob(p, &path) * put
}

/// `[90,110]³ × [1/2,1] × [-0.05,0.05] × [0,0.1]³ × [0.01,0.5]³ × R × [90,110] × [70,80]`.
pub fn domain() -> ParameterDomain {
    let mut iv = vec![(90.0, 110.0); 3];
    iv.push((0.5, 1.0));
    iv.push((-0.05, 0.05));
    iv.extend([(0.0, 0.1); 3]);
    iv.extend([(0.01, 0.5); 3]);
    iv.extend([(-RHO_BOUND, RHO_BOUND); 3]);
    iv.push((90.0, 110.0));
    iv.push((70.0, 80.0));
    ParameterDomain::with_correlation(iv, RHO_SLOT).expect("static domain")
}

#[derive(Clone, Copy, Debug)]
pub struct BarrierAvgPut {
    pub steps: usize,
}

impl Default for BarrierAvgPut {
    fn default() -> Self {
        Self { steps: 10 }
    }
}

impl Kernel for BarrierAvgPut {
    fn param_dim(&self) -> usize {
        16
    }

    fn sample_dim(&self) -> usize {
        3 * self.steps
    }

    fn eval<S: Real>(&self, p: &[f64], w: &[S]) -> S {
        barrier_avg_put_payoff(&BasketParams::from_slice(p), w, self.steps)
    }
}
