//! Additive-noise SDE `dX = μ(X) dt + dW` with Euler–Maruyama paths.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::domain::ParameterDomain;
use crate::error::{LrvError, Result};
use crate::models::{squared_norm, Kernel};

/// Terminal state of `Xₙ = Xₙ₋₁ + (T/N) μ(Xₙ₋₁) + √(T/N) wₙ`, `wₙ ∈ ℝ^d`.
pub fn euler_maruyama_path<S, F>(mu: F, x0: &[S], horizon: f64, w: &[S], steps: usize) -> Result<Vec<S>>
where
    S: Real,
    F: Fn(&[S]) -> Vec<S>,
{
    let d = x0.len();
    if w.len() != d * steps {
        return Err(LrvError::DimensionMismatch { expected: d * steps, got: w.len() });
    }
    let dt = horizon / steps as f64;
    let sq = dt.sqrt();
    let mut x = x0.to_vec();
    for wn in w.chunks_exact(d) {
        let m = mu(&x);
        for i in 0..d {
            x[i] = x[i] + m[i] * dt + wn[i] * sq;
        }
    }
    Ok(x)
}

/// Drift families with a closed form for `E‖X_t‖²` where one exists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    Zero,
    /// `μ(x) = a x`.
    Linear {
        a: f64,
    },
    /// `μ(x) = c x / (1 + x²)` componentwise; smooth and globally Lipschitz.
    Saturating {
        c: f64,
    },
}

impl Drift {
    pub fn apply<S: Real>(&self, x: &[S]) -> Vec<S> {
        match *self {
            Drift::Zero => vec![S::constant(0.0); x.len()],
            Drift::Linear { a } => x.iter().map(|&v| v * a).collect(),
            Drift::Saturating { c } => x.iter().map(|&v| v * c / (v * v + 1.0)).collect(),
        }
    }
}

/// `p = (t, ξ₁, …, ξ_d)` on `[0, T] × [-B, B]^d`; the payoff is `‖X_t‖²` for
/// the linearly interpolated Euler path with `steps` steps on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveSde {
    pub dim: usize,
    pub horizon: f64,
    pub bound: f64,
    pub steps: usize,
    pub drift: Drift,
}

impl AdditiveSde {
    /// The same problem discretised with `steps · 2^level` steps.
    pub fn refined(&self, level: u32) -> Self {
        Self { steps: self.steps << level, ..*self }
    }

    pub fn domain(&self) -> ParameterDomain {
        let mut iv = vec![(0.0, self.horizon)];
        iv.extend(std::iter::repeat_n((-self.bound, self.bound), self.dim));
        ParameterDomain::new(iv).expect("valid sde domain")
    }

    /// Linearly interpolated Euler path evaluated at time `t`.
    pub fn interpolated<S: Real>(&self, t: f64, xi: &[f64], w: &[S]) -> Vec<S> {
        let d = self.dim;
        let n_steps = self.steps;
        let dt = self.horizon / n_steps as f64;
        let sq = dt.sqrt();
        let pos = (t / dt).clamp(0.0, n_steps as f64);
        let full = (pos.floor() as usize).min(n_steps);
        let mut x: Vec<S> = xi.iter().map(|&v| S::constant(v)).collect();
        for n in 0..full {
            let m = self.drift.apply(&x);
            for i in 0..d {
                x[i] = x[i] + m[i] * dt + w[n * d + i] * sq;
            }
        }
        let frac = pos - full as f64;
        if full < n_steps && frac > 0.0 {
            let m = self.drift.apply(&x);
            for i in 0..d {
                x[i] = x[i] + (m[i] * dt + w[full * d + i] * sq) * frac;
            }
        }
        x
    }
}

impl Kernel for AdditiveSde {
    fn param_dim(&self) -> usize {
        1 + self.dim
    }

    fn sample_dim(&self) -> usize {
        self.steps * self.dim
    }

    fn eval<S: Real>(&self, p: &[f64], w: &[S]) -> S {
        squared_norm(&self.interpolated(p[0], &p[1..], w))
    }

    fn exact(&self, p: &[f64]) -> Option<f64> {
        let t = p[0];
        let norm2: f64 = p[1..].iter().map(|v| v * v).sum();
        let d = self.dim as f64;
        match self.drift {
            Drift::Zero => Some(norm2 + d * t),
            Drift::Linear { a: 0.0 } => Some(norm2 + d * t),
            Drift::Linear { a } => {
                let g = (2.0 * a * t).exp();
                Some(norm2 * g + d * (g - 1.0) / (2.0 * a))
            }
            Drift::Saturating { .. } => None,
        }
    }
}
