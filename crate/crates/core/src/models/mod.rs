//! Simulation and payoff kernels.
//!
//! A [`Kernel`] maps a parameter point `p` and one block of driving noise
//! `w` to a scalar. Kernels are generic over [`Real`] so the same code is
//! used for plain evaluation and for reverse-mode gradients in `w`.

pub mod barrier;
pub mod basket;
pub mod bs_call;
pub mod euler;
pub mod heat;
pub mod lorentz;

use crate::autodiff::{with_tape, Real};

pub use barrier::BarrierAvgPut;
pub use basket::{cholesky_l, WorstOfPut};
pub use bs_call::BsCall;
pub use euler::{AdditiveSde, Drift};
pub use heat::{HeatMlp, Nonlinearity, PicardKernel};
pub use lorentz::Lorentz;

/// A payoff `φ(p, w)` of one noise block.
pub trait Kernel: Send + Sync {
    fn param_dim(&self) -> usize;

    /// Number of scalars of `w` consumed per evaluation.
    fn sample_dim(&self) -> usize;

    fn eval<S: Real>(&self, p: &[f64], w: &[S]) -> S;

    fn value(&self, p: &[f64], w: &[f64]) -> f64 {
        self.eval(p, w)
    }

    /// Returns `φ(p, w)` and writes `∂φ/∂w` into `grad`.
    fn value_grad(&self, p: &[f64], w: &[f64], grad: &mut [f64]) -> f64 {
        with_tape(|tape| {
            let ws = tape.vars(w);
            let out = self.eval(p, &ws);
            let adj = tape.adjoints(out);
            for (g, v) in grad.iter_mut().zip(&ws) {
                *g = v.index().map_or(0.0, |i| adj[i]);
            }
            out.value()
        })
    }

    /// Closed-form expectation of `φ(p, W)` for standard normal `W`, if known.
    fn exact(&self, _p: &[f64]) -> Option<f64> {
        None
    }

    /// `Σ_𝔪 φ(p, w_𝔪)` over consecutive blocks of `ws`.
    fn sum_value(&self, p: &[f64], ws: &[f64]) -> f64 {
        ws.chunks_exact(self.sample_dim()).map(|w| self.value(p, w)).fold(0.0, |a, v| a + v)
    }

    /// Like [`Kernel::sum_value`], writing each block's gradient into the
    /// matching block of `grad`.
    fn sum_value_grad(&self, p: &[f64], ws: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.sample_dim();
        let mut acc = 0.0;
        for (w, g) in ws.chunks_exact(d).zip(grad.chunks_exact_mut(d)) {
            acc += self.value_grad(p, w, g);
        }
        acc
    }
}

/// The symmetrised kernel `(φ(p, w) + φ(p, -w)) / 2`.
#[derive(Clone, Debug)]
pub struct Antithetic<K>(pub K);

impl<K: Kernel> Kernel for Antithetic<K> {
    fn param_dim(&self) -> usize {
        self.0.param_dim()
    }

    fn sample_dim(&self) -> usize {
        self.0.sample_dim()
    }

    fn eval<S: Real>(&self, p: &[f64], w: &[S]) -> S {
        let neg: Vec<S> = w.iter().map(|&x| -x).collect();
        (self.0.eval(p, w) + self.0.eval(p, &neg)) * 0.5
    }

    fn value(&self, p: &[f64], w: &[f64]) -> f64 {
        let neg: Vec<f64> = w.iter().map(|&x| -x).collect();
        (self.0.value(p, w) + self.0.value(p, &neg)) * 0.5
    }

    fn value_grad(&self, p: &[f64], w: &[f64], grad: &mut [f64]) -> f64 {
        let neg: Vec<f64> = w.iter().map(|&x| -x).collect();
        let mut back = vec![0.0; w.len()];
        let a = self.0.value_grad(p, w, grad);
        let b = self.0.value_grad(p, &neg, &mut back);
        for (g, h) in grad.iter_mut().zip(&back) {
            *g = (*g - h) * 0.5;
        }
        (a + b) * 0.5
    }

    fn exact(&self, p: &[f64]) -> Option<f64> {
        self.0.exact(p)
    }
}

/// The problems shipped with the crate, dispatching to their kernels.
#[derive(Clone, Debug)]
pub enum Model {
    BsCall(BsCall),
    WorstOfPut(WorstOfPut),
    BarrierAvgPut(BarrierAvgPut),
    Lorentz(Lorentz),
    Euler(AdditiveSde),
}

macro_rules! dispatch {
    ($self:expr, $k:ident => $e:expr) => {
        match $self {
            Model::BsCall($k) => $e,
            Model::WorstOfPut($k) => $e,
            Model::BarrierAvgPut($k) => $e,
            Model::Lorentz($k) => $e,
            Model::Euler($k) => $e,
        }
    };
}

impl Kernel for Model {
    fn param_dim(&self) -> usize {
        dispatch!(self, k => k.param_dim())
    }
    fn sample_dim(&self) -> usize {
        dispatch!(self, k => k.sample_dim())
    }
    fn eval<S: Real>(&self, p: &[f64], w: &[S]) -> S {
        dispatch!(self, k => k.eval(p, w))
    }
    fn value(&self, p: &[f64], w: &[f64]) -> f64 {
        dispatch!(self, k => k.value(p, w))
    }
    fn value_grad(&self, p: &[f64], w: &[f64], grad: &mut [f64]) -> f64 {
        dispatch!(self, k => k.value_grad(p, w, grad))
    }
    fn exact(&self, p: &[f64]) -> Option<f64> {
        dispatch!(self, k => k.exact(p))
    }
    fn sum_value(&self, p: &[f64], ws: &[f64]) -> f64 {
        dispatch!(self, k => k.sum_value(p, ws))
    }
    fn sum_value_grad(&self, p: &[f64], ws: &[f64], grad: &mut [f64]) -> f64 {
        dispatch!(self, k => k.sum_value_grad(p, ws, grad))
    }
}

/// A kernel with a plain and an antithetic form behind one type.
#[derive(Clone, Debug)]
pub struct MaybeAntithetic<K> {
    pub kernel: K,
    pub antithetic: bool,
}

impl<K: Kernel> Kernel for MaybeAntithetic<K> {
    fn param_dim(&self) -> usize {
        self.kernel.param_dim()
    }
    fn sample_dim(&self) -> usize {
        self.kernel.sample_dim()
    }
    fn eval<S: Real>(&self, p: &[f64], w: &[S]) -> S {
        if self.antithetic {
            let neg: Vec<S> = w.iter().map(|&x| -x).collect();
            (self.kernel.eval(p, w) + self.kernel.eval(p, &neg)) * 0.5
        } else {
            self.kernel.eval(p, w)
        }
    }
    fn value(&self, p: &[f64], w: &[f64]) -> f64 {
        if self.antithetic {
            let neg: Vec<f64> = w.iter().map(|&x| -x).collect();
            (self.kernel.value(p, w) + self.kernel.value(p, &neg)) * 0.5
        } else {
            self.kernel.value(p, w)
        }
    }
    fn value_grad(&self, p: &[f64], w: &[f64], grad: &mut [f64]) -> f64 {
        if self.antithetic {
            Antithetic(&self.kernel).value_grad(p, w, grad)
        } else {
            self.kernel.value_grad(p, w, grad)
        }
    }
    fn exact(&self, p: &[f64]) -> Option<f64> {
        self.kernel.exact(p)
    }
    fn sum_value(&self, p: &[f64], ws: &[f64]) -> f64 {
        if self.antithetic {
            Antithetic(&self.kernel).sum_value(p, ws)
        } else {
            self.kernel.sum_value(p, ws)
        }
    }
    fn sum_value_grad(&self, p: &[f64], ws: &[f64], grad: &mut [f64]) -> f64 {
        if self.antithetic {
            Antithetic(&self.kernel).sum_value_grad(p, ws, grad)
        } else {
            self.kernel.sum_value_grad(p, ws, grad)
        }
    }
}

impl<K: Kernel> Kernel for &K {
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn sample_dim(&self) -> usize {
        (**self).sample_dim()
    }
    fn eval<S: Real>(&self, p: &[f64], w: &[S]) -> S {
        (**self).eval(p, w)
    }
    fn value(&self, p: &[f64], w: &[f64]) -> f64 {
        (**self).value(p, w)
    }
    fn value_grad(&self, p: &[f64], w: &[f64], grad: &mut [f64]) -> f64 {
        (**self).value_grad(p, w, grad)
    }
    fn exact(&self, p: &[f64]) -> Option<f64> {
        (**self).exact(p)
    }
    fn sum_value(&self, p: &[f64], ws: &[f64]) -> f64 {
        (**self).sum_value(p, ws)
    }
    fn sum_value_grad(&self, p: &[f64], ws: &[f64], grad: &mut [f64]) -> f64 {
        (**self).sum_value_grad(p, ws, grad)
    }
}

/// Squared Euclidean norm.
pub fn squared_norm<S: Real>(x: &[S]) -> S {
    let mut acc = S::constant(0.0);
    for &v in x {
        acc = acc + v * v;
    }
    acc
}
