//! Three-asset Black–Scholes basket: correlation factor and worst-of put.

use crate::autodiff::Real;
use crate::domain::{region_check, ParameterDomain, RHO_BOUND};
use crate::error::{LrvError, Result};
use crate::models::Kernel;

/// `p = (ξ₁,ξ₂,ξ₃, T, r, δ₁,δ₂,δ₃, σ₁,σ₂,σ₃, ρ₁,ρ₂,ρ₃, K[, B])`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasketParams {
    pub xi: [f64; 3],
    pub t: f64,
    pub r: f64,
    pub delta: [f64; 3],
    pub sigma: [f64; 3],
    pub rho: [f64; 3],
    pub k: f64,
    pub barrier: Option<f64>,
}

pub const RHO_SLOT: [usize; 3] = [11, 12, 13];

impl BasketParams {
    pub fn from_slice(p: &[f64]) -> Self {
        Self {
            xi: [p[0], p[1], p[2]],
            t: p[3],
            r: p[4],
            delta: [p[5], p[6], p[7]],
            sigma: [p[8], p[9], p[10]],
            rho: [p[11], p[12], p[13]],
            k: p[14],
            barrier: p.get(15).copied(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(16);
        v.extend(self.xi);
        v.extend([self.t, self.r]);
        v.extend(self.delta);
        v.extend(self.sigma);
        v.extend(self.rho);
        v.push(self.k);
        v.extend(self.barrier);
        v
    }
}

/// `Q(ρ)`, the correlation matrix with off-diagonals `ρ₁ = Q₁₂, ρ₂ = Q₁₃, ρ₃ = Q₂₃`.
pub fn correlation_matrix(rho: [f64; 3]) -> [[f64; 3]; 3] {
    let [r1, r2, r3] = rho;
    [[1.0, r1, r2], [r1, 1.0, r3], [r2, r3, 1.0]]
}

/// Closed-form lower Cholesky factor of `Q(ρ)` without the region check.
pub fn cholesky_rows(rho: [f64; 3]) -> [[f64; 3]; 3] {
    let [r1, r2, r3] = rho;
    let c1 = (1.0 - r1 * r1).sqrt();
    let l32 = (r3 - r1 * r2) / c1;
    let l33 = (1.0 - r2 * r2 - (r3 - r1 * r2).powi(2) / (1.0 - r1 * r1)).sqrt();
    [[1.0, 0.0, 0.0], [r1, c1, 0.0], [r2, l32, l33]]
}

/// `L(ρ)` with `L Lᵀ = Q(ρ)`.
pub fn cholesky_l(rho: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    if !region_check(rho) {
        return Err(LrvError::RegionViolation(rho[0], rho[1], rho[2]));
    }
    Ok(cholesky_rows(rho))
}

/// `(L w)ᵢ` for a lower-triangular `L`.
#[inline]
pub fn lower_mul<S: Real>(l: &[[f64; 3]; 3], w: &[S]) -> [S; 3] {
    [w[0] * l[0][0], w[0] * l[1][0] + w[1] * l[1][1], w[0] * l[2][0] + w[1] * l[2][1] + w[2] * l[2][2]]
}

/// Terminal prices `ξᵢ exp((r - δᵢ - σᵢ²/2)T + √T σᵢ (L(ρ)w)ᵢ)`.
pub fn terminal_prices<S: Real>(p: &BasketParams, w: &[S]) -> [S; 3] {
    let l = cholesky_rows(p.rho);
    let z = lower_mul(&l, w);
    let sqrt_t = p.t.sqrt();
    std::array::from_fn(|i| {
        let drift = (p.r - p.delta[i] - 0.5 * p.sigma[i] * p.sigma[i]) * p.t;
        (z[i] * (sqrt_t * p.sigma[i]) + drift).exp() * p.xi[i]
    })
}

/// `e^{-rT} max(K - min_i Xᵢ, 0)`.
pub fn worst_of_put_payoff<S: Real>(p: &BasketParams, w: &[S]) -> S {
    let x = terminal_prices(p, w);
    let worst = x[0].min(x[1]).min(x[2]);
    worst.rsub(p.k).relu() * (-p.r * p.t).exp()
}

/// `[90,110]³ × [0.01,1] × [-0.05,0.05] × [0,0.1]³ × [0.01,0.5]³ × R × [90,110]`.
pub fn worst_of_domain() -> ParameterDomain {
    let mut iv = vec![(90.0, 110.0); 3];
    iv.push((0.01, 1.0));
    iv.push((-0.05, 0.05));
    iv.extend([(0.0, 0.1); 3]);
    iv.extend([(0.01, 0.5); 3]);
    iv.extend([(-RHO_BOUND, RHO_BOUND); 3]);
    iv.push((90.0, 110.0));
    ParameterDomain::with_correlation(iv, RHO_SLOT).expect("static domain")
}

#[derive(Clone, Copy, Debug, Default)]
pub struct WorstOfPut;

impl Kernel for WorstOfPut {
    fn param_dim(&self) -> usize {
        15
    }

    fn sample_dim(&self) -> usize {
        3
    }

    fn eval<S: Real>(&self, p: &[f64], w: &[S]) -> S {
        worst_of_put_payoff(&BasketParams::from_slice(p), w)
    }
}
