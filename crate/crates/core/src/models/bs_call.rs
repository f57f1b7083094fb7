//! European call in the one-asset Black–Scholes model.

use crate::autodiff::Real;
use crate::domain::ParameterDomain;
use crate::models::Kernel;
use crate::normal;

/// `p = (ξ, T, r, σ, K)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BsCallParams {
    pub xi: f64,
    pub t: f64,
    pub r: f64,
    pub sigma: f64,
    pub k: f64,
}

impl BsCallParams {
    pub fn from_slice(p: &[f64]) -> Self {
        Self { xi: p[0], t: p[1], r: p[2], sigma: p[3], k: p[4] }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.xi, self.t, self.r, self.sigma, self.k]
    }
}

/// `φ₀(p, w) = e^{-rT} max(ξ exp((r - σ²/2)T + σ√T w) - K, 0)`.
pub fn payoff<S: Real>(p: &BsCallParams, w: S) -> S {
    let (drift, vol, disc) = coefficients(p);
    ((w * vol + drift).exp() * p.xi - p.k).relu() * disc
}

/// `φ₁(p, w) = (φ₀(p, w) + φ₀(p, -w)) / 2`.
pub fn payoff_antithetic<S: Real>(p: &BsCallParams, w: S) -> S {
    (payoff(p, w) + payoff(p, -w)) * 0.5
}

#[inline]
fn coefficients(p: &BsCallParams) -> (f64, f64, f64) {
    let drift = (p.r - 0.5 * p.sigma * p.sigma) * p.t;
    let vol = p.sigma * p.t.sqrt();
    let disc = (-p.r * p.t).exp();
    (drift, vol, disc)
}

/// Black–Scholes price; `K ≤ 0` gives the forward value `ξ - K e^{-rT}`.
pub fn exact_price(p: &BsCallParams) -> f64 {
    let disc = (-p.r * p.t).exp();
    if p.k <= 0.0 {
        return p.xi - p.k * disc;
    }
    let vol = p.sigma * p.t.sqrt();
    let d1 = ((p.xi / p.k).ln() + (p.r + 0.5 * p.sigma * p.sigma) * p.t) / vol;
    let d2 = d1 - vol;
    p.xi * normal::cdf(d1) - p.k * disc * normal::cdf(d2)
}

/// The noise value at which the payoff switches on.
pub fn kink(p: &BsCallParams) -> f64 {
    let (drift, vol, _) = coefficients(p);
    ((p.k / p.xi).ln() - drift) / vol
}

/// `[90,110] × [0.01,1] × [-0.1,0.1] × [0.01,0.5] × [90,110]`.
pub fn domain() -> ParameterDomain {
    ParameterDomain::new(vec![(90.0, 110.0), (0.01, 1.0), (-0.1, 0.1), (0.01, 0.5), (90.0, 110.0)])
        .expect("static domain")
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BsCall;

impl Kernel for BsCall {
    fn param_dim(&self) -> usize {
        5
    }

    fn sample_dim(&self) -> usize {
        1
    }

    fn eval<S: Real>(&self, p: &[f64], w: &[S]) -> S {
        payoff(&BsCallParams::from_slice(p), w[0])
    }

    fn value_grad(&self, p: &[f64], w: &[f64], grad: &mut [f64]) -> f64 {
        let p = BsCallParams::from_slice(p);
        let (drift, vol, disc) = coefficients(&p);
        let s = (w[0] * vol + drift).exp() * p.xi;
        let z = s - p.k;
        if z > 0.0 {
            grad[0] = disc * s * vol;
            z * disc
        } else {
            grad[0] = 0.0;
            0.0 * disc
        }
    }

    fn exact(&self, p: &[f64]) -> Option<f64> {
        Some(exact_price(&BsCallParams::from_slice(p)))
    }

    fn sum_value(&self, p: &[f64], ws: &[f64]) -> f64 {
        let p = BsCallParams::from_slice(p);
        let (drift, vol, disc) = coefficients(&p);
        ws.iter().map(|&w| ((w * vol + drift).exp() * p.xi - p.k).max(0.0) * disc).fold(0.0, |a, v| a + v)
    }

    fn sum_value_grad(&self, p: &[f64], ws: &[f64], grad: &mut [f64]) -> f64 {
        let p = BsCallParams::from_slice(p);
        let (drift, vol, disc) = coefficients(&p);
        let mut acc = 0.0;
        for (&w, g) in ws.iter().zip(grad.iter_mut()) {
            let s = (w * vol + drift).exp() * p.xi;
            let z = s - p.k;
            if z > 0.0 {
                *g = disc * s * vol;
                acc += z * disc;
            } else {
                *g = 0.0;
                acc += 0.0 * disc;
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn atm() -> BsCallParams {
        BsCallParams { xi: 100.0, t: 1.0, r: 0.05, sigma: 0.2, k: 100.0 }
    }

    #[test]
    fn at_the_money_without_noise_is_worthless() {
        let p = BsCallParams { r: 0.0, ..atm() };
        assert_eq!(payoff(&p, 0.0), 0.0);
    }

    #[test]
    fn kink_point_pays_nothing() {
        let p = atm();
        assert!(payoff(&p, kink(&p)).abs() < 1e-12);
    }

    #[test]
    fn reference_payoff() {
        assert!((payoff(&atm(), 1.0) - 24.598793862109616).abs() < 1e-10);
        assert_eq!(payoff(&atm(), -1.0), 0.0);
        assert!((payoff_antithetic(&atm(), 1.0) - 12.299396931054808).abs() < 1e-10);
    }

    #[test]
    fn antithetic_is_even_and_reduces_at_zero() {
        let mut s = RngStream::new(6, "bs-even");
        let d = domain();
        for _ in 0..1000 {
            let p = BsCallParams::from_slice(&d.sample_uniform(&mut s).unwrap());
            let w = s.normal();
            assert_eq!(payoff_antithetic(&p, w), payoff_antithetic(&p, -w));
            assert_eq!(payoff_antithetic(&p, 0.0), payoff(&p, 0.0));
        }
    }

    #[test]
    fn reference_prices() {
        let cases = [
            ([100.0, 1.0, 0.0, 0.2, 100.0], 7.965567455405797),
            ([95.0, 0.5, 0.03, 0.3, 105.0], 4.82484685445907),
            ([110.0, 0.01, -0.1, 0.01, 90.0], 19.909_954_984_996_25),
        ];
        for (p, v) in cases {
            let got = exact_price(&BsCallParams::from_slice(&p));
            assert!((got - v).abs() < 1e-10, "{p:?}: {got} vs {v}");
        }
    }

    #[test]
    fn zero_strike_is_spot() {
        assert_eq!(exact_price(&BsCallParams { k: 0.0, ..atm() }), 100.0);
    }

    #[test]
    fn price_dominates_intrinsic_value() {
        let mut s = RngStream::new(7, "bs-bound");
        let d = domain();
        for _ in 0..10_000 {
            let p = BsCallParams::from_slice(&d.sample_uniform(&mut s).unwrap());
            let lower = (p.xi - p.k * (-p.r * p.t).exp()).max(0.0);
            assert!(exact_price(&p) >= lower - 1e-10);
        }
    }

    #[test]
    fn analytic_adjoint_matches_tape() {
        let mut s = RngStream::new(8, "bs-adjoint");
        let d = domain();
        for _ in 0..2000 {
            let p = d.sample_uniform(&mut s).unwrap();
            let w = [s.normal()];
            let mut analytic = [0.0];
            let v = BsCall.value_grad(&p, &w, &mut analytic);
            let mut taped = [0.0];
            let direct = BsCall.value(&p, &w);
            let tv = crate::autodiff::with_tape(|t| {
                let x = t.var(w[0]);
                let y = BsCall.eval(&p, &[x]);
                taped[0] = t.adjoints(y)[x.index().unwrap()];
                y.value()
            });
            assert_eq!(v.to_bits(), direct.to_bits());
            assert_eq!(v.to_bits(), tv.to_bits());
            assert!((analytic[0] - taped[0]).abs() <= 1e-12 * (1.0 + taped[0].abs()));
        }
    }

    #[test]
    fn block_sums_match_per_sample_evaluation() {
        let p = [97.0, 0.6, 0.03, 0.25, 101.0];
        let ws = RngStream::new(5, "blocks").standard_normal(257);
        let plain = ws.iter().map(|&w| BsCall.value(&p, &[w])).fold(0.0, |a, v| a + v);
        assert_eq!(BsCall.sum_value(&p, &ws).to_bits(), plain.to_bits());
        let mut g = vec![0.0; ws.len()];
        let total = BsCall.sum_value_grad(&p, &ws, &mut g);
        assert_eq!(total.to_bits(), plain.to_bits());
        for (w, gi) in ws.iter().zip(&g) {
            let mut one = [0.0];
            BsCall.value_grad(&p, &[*w], &mut one);
            assert_eq!(gi.to_bits(), one[0].to_bits());
        }
    }
}
