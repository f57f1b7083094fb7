//! Semilinear heat equation `∂u/∂t + ½Δu + f(u) = 0`, `u(T, x) = g(x)`, in
//! the fixed-point form used by multilevel Picard iterations.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::domain::ParameterDomain;
use crate::models::squared_norm;

/// A Picard kernel: `φ(p, w, v)` plus the transport `𝒫(p, w)` to the point
/// at which the next-lower iterate is evaluated.
pub trait PicardKernel: Send + Sync {
    fn param_dim(&self) -> usize;
    fn sample_dim(&self) -> usize;

    /// Coordinates of each sample block drawn from `U[0, 1]` instead of `N(0, 1)`.
    fn uniform_coords(&self) -> Vec<usize>;

    fn phi<S: Real>(&self, p: &[S], w: &[S], v: S) -> S;
    fn transport<S: Real>(&self, p: &[S], w: &[S]) -> Vec<S>;

    fn exact(&self, _p: &[f64]) -> Option<f64> {
        None
    }
}

/// The nonlinearity `f`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Zero,
    /// `f(v) = c max(v, 0)`.
    ScaledRelu { c: f64 },
}

impl Nonlinearity {
    pub fn apply<S: Real>(&self, v: S) -> S {
        match *self {
            Nonlinearity::Zero => S::constant(0.0),
            Nonlinearity::ScaledRelu { c } => v.relu() * c,
        }
    }
}

/// `g(x) = ‖x‖²`; `p = (t, x₁, …, x_d)`, `w = (w₁ ∈ ℝ^d, w₂ ∈ [0, 1])`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatMlp {
    pub dim: usize,
    pub horizon: f64,
    pub f: Nonlinearity,
}

#[inline]
fn safe_sqrt<S: Real>(x: S) -> S {
    if x.value() > 0.0 {
        x.sqrt()
    } else {
        S::constant(0.0)
    }
}

impl HeatMlp {
    /// `[0, T] × [-bound, bound]^d`.
    pub fn domain(&self, bound: f64) -> ParameterDomain {
        let mut iv = vec![(0.0, self.horizon)];
        iv.extend(std::iter::repeat_n((-bound, bound), self.dim));
        ParameterDomain::new(iv).expect("valid heat domain")
    }

    /// `w₂` is clamped into `[0, 1]`; trained parameters may leave it.
    #[inline]
    fn time_fraction<S: Real>(&self, w: &[S]) -> S {
        w[self.dim].max(S::constant(0.0)).min(S::constant(1.0))
    }
}

impl PicardKernel for HeatMlp {
    fn param_dim(&self) -> usize {
        1 + self.dim
    }

    fn sample_dim(&self) -> usize {
        1 + self.dim
    }

    fn uniform_coords(&self) -> Vec<usize> {
        vec![self.dim]
    }

    /// `g(x + √(T - t) w₁) + (T - t) f(v)`.
    fn phi<S: Real>(&self, p: &[S], w: &[S], v: S) -> S {
        let tau = p[0].rsub(self.horizon);
        let s = safe_sqrt(tau);
        let y: Vec<S> = (0..self.dim).map(|i| p[1 + i] + s * w[i]).collect();
        let g = squared_norm(&y);
        match self.f {
            Nonlinearity::Zero => g,
            f => g + tau * f.apply(v),
        }
    }

    /// `(t + w₂(T - t), x + √(w₂(T - t)) w₁)`.
    fn transport<S: Real>(&self, p: &[S], w: &[S]) -> Vec<S> {
        let tau = p[0].rsub(self.horizon);
        let r = self.time_fraction(w);
        let step = r * tau;
        let s = safe_sqrt(step);
        let mut out = Vec::with_capacity(1 + self.dim);
        out.push(p[0] + step);
        out.extend((0..self.dim).map(|i| p[1 + i] + s * w[i]));
        out
    }

    /// `e^{c(T-t)} (‖x‖² + d(T - t))`, with `c = 0` for `f ≡ 0`.
    fn exact(&self, p: &[f64]) -> Option<f64> {
        let tau = self.horizon - p[0];
        let c = match self.f {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::ScaledRelu { c } => c,
        };
        let base: f64 = p[1..].iter().map(|v| v * v).sum::<f64>() + self.dim as f64 * tau;
        Some((c * tau).exp() * base)
    }
}
