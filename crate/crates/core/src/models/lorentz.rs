//! Stochastic Lorentz system driven by additive noise, Heun scheme.

use crate::autodiff::Real;
use crate::domain::ParameterDomain;
use crate::error::{LrvError, Result};
use crate::models::{squared_norm, Kernel};

/// `p = (T, α₁,α₂,α₃, β₁,β₂,β₃, x₁,x₂,x₃)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorentzParams {
    pub t: f64,
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    pub x: [f64; 3],
}

impl LorentzParams {
    pub fn from_slice(p: &[f64]) -> Self {
        Self { t: p[0], alpha: [p[1], p[2], p[3]], beta: [p[4], p[5], p[6]], x: [p[7], p[8], p[9]] }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.t];
        v.extend(self.alpha);
        v.extend(self.beta);
        v.extend(self.x);
        v
    }
}

/// `μ_α(x) = (α₁(x₂ - x₁), α₂x₁ - x₂ - x₁x₃, x₁x₂ - α₃x₃)`.
#[inline]
pub fn lorentz_drift<S: Real>(alpha: &[f64; 3], x: &[S; 3]) -> [S; 3] {
    [(x[1] - x[0]) * alpha[0], x[0] * alpha[1] - x[1] - x[0] * x[2], x[0] * x[1] - x[2] * alpha[2]]
}

fn heun_unchecked<S: Real>(p: &LorentzParams, w: &[S], steps: usize) -> [S; 3] {
    let dt = p.t / steps as f64;
    let sq = dt.sqrt();
    let mut x: [S; 3] = std::array::from_fn(|i| S::constant(p.x[i]));
    for wn in w.chunks_exact(3).take(steps) {
        let noise: [S; 3] = std::array::from_fn(|i| wn[i] * (sq * p.beta[i]));
        let m0 = lorentz_drift(&p.alpha, &x);
        let pred: [S; 3] = std::array::from_fn(|i| x[i] + m0[i] * dt + noise[i]);
        let m1 = lorentz_drift(&p.alpha, &pred);
        x = std::array::from_fn(|i| x[i] + noise[i] + (m0[i] + m1[i]) * (0.5 * dt));
    }
    x
}

/// Terminal state of the Heun scheme with `steps` steps.
pub fn lorentz_heun_path<S: Real>(p: &LorentzParams, w: &[S], steps: usize) -> Result<[S; 3]> {
    if w.len() != 3 * steps {
        return Err(LrvError::DimensionMismatch { expected: 3 * steps, got: w.len() });
    }
    Ok(heun_unchecked(p, w, steps))
}

/// `Φ₀ = ‖X_N‖²`, or `Φ₁ = (‖X_N^w‖² + ‖X_N^{-w}‖²)/2` when `antithetic`.
pub fn lorentz_payoff<S: Real>(p: &LorentzParams, w: &[S], steps: usize, antithetic: bool) -> S {
    let plain = squared_norm(&heun_unchecked(p, w, steps));
    if antithetic {
        let neg: Vec<S> = w.iter().map(|&v| -v).collect();
        (plain + squared_norm(&heun_unchecked(p, &neg, steps))) * 0.5
    } else {
        plain
    }
}

/// Classical fourth-order Runge–Kutta for the noise-free system.
pub fn lorentz_rk4(alpha: &[f64; 3], x0: &[f64; 3], horizon: f64, steps: usize) -> [f64; 3] {
    let h = horizon / steps as f64;
    let mut x = *x0;
    let add = |a: &[f64; 3], b: &[f64; 3], s: f64| -> [f64; 3] { std::array::from_fn(|i| a[i] + s * b[i]) };
    for _ in 0..steps {
        let k1 = lorentz_drift(alpha, &x);
        let k2 = lorentz_drift(alpha, &add(&x, &k1, 0.5 * h));
        let k3 = lorentz_drift(alpha, &add(&x, &k2, 0.5 * h));
        let k4 = lorentz_drift(alpha, &add(&x, &k3, h));
        x = std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    x
}

/// `[0.01,1] × [9,11] × [13,15] × [1,2] × [0.05,0.25]³ × [0.5,2.5] × [8,10] × [10,12]`.
pub fn domain() -> ParameterDomain {
    let mut iv = vec![(0.01, 1.0), (9.0, 11.0), (13.0, 15.0), (1.0, 2.0)];
    iv.extend([(0.05, 0.25); 3]);
    iv.extend([(0.5, 2.5), (8.0, 10.0), (10.0, 12.0)]);
    ParameterDomain::new(iv).expect("static domain")
}

#[derive(Clone, Copy, Debug)]
pub struct Lorentz {
    pub steps: usize,
}

impl Default for Lorentz {
    fn default() -> Self {
        Self { steps: 25 }
    }
}

impl Kernel for Lorentz {
    fn param_dim(&self) -> usize {
        10
    }

    fn sample_dim(&self) -> usize {
        3 * self.steps
    }

    fn eval<S: Real>(&self, p: &[f64], w: &[S]) -> S {
        lorentz_payoff(&LorentzParams::from_slice(p), w, self.steps, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn params() -> LorentzParams {
        LorentzParams { t: 0.5, alpha: [10.0, 14.0, 1.5], beta: [0.1, 0.2, 0.15], x: [1.0, 9.0, 11.0] }
    }

    #[test]
    fn drift_examples() {
        assert_eq!(lorentz_drift(&[10.0, 14.0, 1.5], &[0.0; 3]), [0.0; 3]);
        assert_eq!(lorentz_drift(&[10.0, 14.0, 1.5], &[1.0; 3]), [0.0, 12.0, -0.5]);
        let m = lorentz_drift(&[9.5, 13.2, 1.7], &[0.8, -2.5, 3.1]);
        let expect = [-31.35, 10.56 + 2.5 - 2.48, -2.0 - 5.27];
        for i in 0..3 {
            assert!((m[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn origin_is_a_fixed_point() {
        let p = LorentzParams { beta: [0.0; 3], x: [0.0; 3], ..params() };
        assert_eq!(lorentz_heun_path(&p, &[0.7; 75], 25).unwrap(), [0.0; 3]);
    }

    #[test]
    fn one_deterministic_heun_step() {
        let p = LorentzParams { t: 0.04, alpha: [10.0, 14.0, 1.5], beta: [0.0; 3], x: [1.0; 3] };
        let x = lorentz_heun_path(&p, &[0.0; 3], 1).unwrap();
        let expect = [1.096, 1.4708, 0.9902];
        for i in 0..3 {
            assert!((x[i] - expect[i]).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn heun_is_second_order() {
        let alpha = [10.0, 14.0, 1.5];
        let x0 = [1.5, 9.0, 11.0];
        let exact = lorentz_rk4(&alpha, &x0, 1.0, 20_000);
        let err = |n: usize| {
            let p = LorentzParams { t: 1.0, alpha, beta: [0.0; 3], x: x0 };
            let x = lorentz_heun_path(&p, &vec![0.0; 3 * n], n).unwrap();
            (0..3).map(|i| (x[i] - exact[i]).powi(2)).sum::<f64>().sqrt()
        };
        let ratio = err(200) / err(400);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn antithetic_payoff_is_even() {
        let mut s = RngStream::new(11, "lorentz-even");
        let w = s.standard_normal(75);
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        let p = params();
        assert_eq!(lorentz_payoff(&p, &w, 25, true), lorentz_payoff(&p, &neg, 25, true));
    }

    #[test]
    fn without_noise_payoff_ignores_w() {
        let p = LorentzParams { beta: [0.0; 3], ..params() };
        let a = lorentz_payoff(&p, &[0.0; 75], 25, false);
        let b = lorentz_payoff(&p, &[1.3; 75], 25, false);
        assert_eq!(a, b);
    }

    #[test]
    fn payoff_reference_value() {
        let p = params();
        let w: Vec<f64> = (0..6).map(|i| (i as f64 - 2.5) * 0.4).collect();
        let v = lorentz_payoff(&p, &w, 2, false);
        assert!((v - 122_089.754_158_82).abs() < 1e-7, "{v}");
    }
}
