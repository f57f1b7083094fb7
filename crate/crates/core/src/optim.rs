//! Stochastic gradient descent-type update rules and learning-rate schedules.
//!
//! Each optimizer is implemented in its recursive, state-carrying form.
//! [`psi_closed_form`] evaluates the same update as an explicit function of
//! the whole gradient history and serves as an independent oracle.

use serde::{Deserialize, Serialize};

use crate::error::{LrvError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Momentum,
    Adagrad,
    Rmsprop,
    Adadelta,
    Adamax,
    Adam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 7] = [
        OptimizerKind::Sgd,
        OptimizerKind::Momentum,
        OptimizerKind::Adagrad,
        OptimizerKind::Rmsprop,
        OptimizerKind::Adadelta,
        OptimizerKind::Adamax,
        OptimizerKind::Adam,
    ];
}

/// `α` weights first moments, `β` second moments, `δ` the Adadelta update
/// average; `ε` regularises every denominator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self { alpha: 0.9, beta: 0.999, delta: 0.999, epsilon: 1e-8 }
    }
}

/// Piecewise-constant rates: `rate_j` on `(bound_{j-1}, bound_j]`, the last
/// rate beyond the final bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub segments: Vec<(u64, f64)>,
}

impl LrSchedule {
    pub fn new(segments: Vec<(u64, f64)>) -> Result<Self> {
        let s = Self { segments };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(rate: f64) -> Self {
        Self { segments: vec![(u64::MAX, rate)] }
    }

    /// `γ_m = first · 10^{-(j-1)}` on `(len·(j-1), len·j]`, `j = 1..=count`.
    pub fn decades(first: f64, len: u64, count: u32) -> Self {
        Self { segments: (1..=count as u64).map(|j| (len * j, first / 10f64.powi(j as i32 - 1))).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(LrvError::InvalidSchedule("no segments".into()));
        }
        if self.segments.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(LrvError::InvalidSchedule("bounds must increase strictly".into()));
        }
        if self.segments.iter().any(|&(_, r)| r < 0.0 || !r.is_finite()) {
            return Err(LrvError::InvalidSchedule("rates must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Rate for step `m ≥ 1`.
    pub fn lr_at(&self, m: u64) -> f64 {
        self.segments.iter().find(|&&(bound, _)| m <= bound).or(self.segments.last()).map(|&(_, r)| r).unwrap_or(0.0)
    }
}

/// Optimizer accumulators, all starting at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub hyper: HyperParams,
    pub schedule: LrSchedule,
    /// Number of updates applied so far.
    pub step: u64,
    /// First moment `𝐦`.
    pub first: Vec<f64>,
    /// Second moment, squared-gradient sum or running max `𝕄`.
    pub second: Vec<f64>,
    /// Adadelta update average `Δ`.
    pub delta_avg: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, hyper: HyperParams, schedule: LrSchedule, dim: usize) -> Self {
        use OptimizerKind::*;
        let first = if matches!(kind, Momentum | Adamax | Adam) { vec![0.0; dim] } else { Vec::new() };
        let second =
            if matches!(kind, Adagrad | Rmsprop | Adadelta | Adamax | Adam) { vec![0.0; dim] } else { Vec::new() };
        let delta_avg = if kind == Adadelta { vec![0.0; dim] } else { Vec::new() };
        Self { kind, hyper, schedule, step: 0, first, second, delta_avg }
    }

    /// Applies `Θ_m = Θ_{m-1} - ψ_m` for the gradient `g = G_m(Θ_{m-1})`.
    pub fn step(&mut self, theta: &mut [f64], g: &[f64]) -> Result<()> {
        if g.len() != theta.len() {
            return Err(LrvError::DimensionMismatch { expected: theta.len(), got: g.len() });
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(LrvError::NonFiniteGradient(i));
        }
        self.step += 1;
        let m = self.step;
        let lr = self.schedule.lr_at(m);
        let HyperParams { alpha, beta, delta, epsilon: eps } = self.hyper;
        match self.kind {
            OptimizerKind::Sgd => {
                for (t, &gi) in theta.iter_mut().zip(g) {
                    *t -= lr * gi;
                }
            }
            OptimizerKind::Momentum => {
                for ((t, &gi), mo) in theta.iter_mut().zip(g).zip(&mut self.first) {
                    *mo = alpha * *mo + (1.0 - alpha) * gi;
                    *t -= lr * *mo;
                }
            }
            OptimizerKind::Adagrad => {
                for ((t, &gi), s) in theta.iter_mut().zip(g).zip(&mut self.second) {
                    *s += gi * gi;
                    *t -= lr / (eps + *s).sqrt() * gi;
                }
            }
            OptimizerKind::Rmsprop => {
                for ((t, &gi), s) in theta.iter_mut().zip(g).zip(&mut self.second) {
                    *s = beta * *s + (1.0 - beta) * gi * gi;
                    *t -= lr / (eps + *s).sqrt() * gi;
                }
            }
            OptimizerKind::Adadelta => {
                for (((t, &gi), s), dl) in theta.iter_mut().zip(g).zip(&mut self.second).zip(&mut self.delta_avg) {
                    *s = beta * *s + (1.0 - beta) * gi * gi;
                    let update = ((eps + *dl) / (eps + *s)).sqrt() * gi;
                    *t -= update;
                    *dl = delta * *dl + (1.0 - delta) * update * update;
                }
            }
            OptimizerKind::Adamax => {
                let bias = 1.0 - alpha.powi(m as i32);
                for (((t, &gi), mo), s) in theta.iter_mut().zip(g).zip(&mut self.first).zip(&mut self.second) {
                    *mo = alpha * *mo + (1.0 - alpha) * gi;
                    *s = (beta * *s).max(gi.abs());
                    *t -= lr * (*mo / bias) / (eps + *s);
                }
            }
            OptimizerKind::Adam => {
                let bias1 = 1.0 - alpha.powi(m as i32);
                let bias2 = 1.0 - beta.powi(m as i32);
                for (((t, &gi), mo), s) in theta.iter_mut().zip(g).zip(&mut self.first).zip(&mut self.second) {
                    *mo = alpha * *mo + (1.0 - alpha) * gi;
                    *s = beta * *s + (1.0 - beta) * gi * gi;
                    *t -= lr * (*mo / bias1) / (eps + (*s / bias2).sqrt());
                }
            }
        }
        Ok(())
    }
}

/// `ψ_m(g₁, …, g_m)` written as explicit sums over the gradient history.
pub fn psi_closed_form(
    kind: OptimizerKind,
    hyper: &HyperParams,
    schedule: &LrSchedule,
    history: &[Vec<f64>],
) -> Vec<f64> {
    let m = history.len();
    assert!(m > 0, "empty gradient history");
    let HyperParams { alpha, beta, epsilon: eps, .. } = *hyper;
    let lr = schedule.lr_at(m as u64);
    let dim = history[0].len();
    let gm = &history[m - 1];
    let ewma = |w: f64, f: &dyn Fn(f64) -> f64, i: usize| -> f64 {
        (0..m).map(|k| w.powi((m - 1 - k) as i32) * (1.0 - w) * f(history[k][i])).sum()
    };
    match kind {
        OptimizerKind::Sgd => gm.iter().map(|g| lr * g).collect(),
        OptimizerKind::Momentum => (0..dim).map(|i| lr * ewma(alpha, &|g| g, i)).collect(),
        OptimizerKind::Adagrad => {
            (0..dim).map(|i| lr / (eps + (0..m).map(|k| history[k][i].powi(2)).sum::<f64>()).sqrt() * gm[i]).collect()
        }
        OptimizerKind::Rmsprop => (0..dim).map(|i| lr / (eps + ewma(beta, &|g| g * g, i)).sqrt() * gm[i]).collect(),
        OptimizerKind::Adadelta => {
            let mut past: Vec<Vec<f64>> = Vec::with_capacity(m);
            for j in 1..=m {
                let psi = psi_closed_form(kind, hyper, schedule, &history[..j]);
                if j < m {
                    past.push(psi);
                } else {
                    return psi_adadelta(hyper, history, &past);
                }
            }
            unreachable!()
        }
        OptimizerKind::Adamax => (0..dim)
            .map(|i| {
                let mean = ewma(alpha, &|g| g, i) / (1.0 - alpha.powi(m as i32));
                let peak = (0..m).map(|k| beta.powi((m - 1 - k) as i32) * history[k][i].abs()).fold(0.0, f64::max);
                lr * mean / (eps + peak)
            })
            .collect(),
        OptimizerKind::Adam => (0..dim)
            .map(|i| {
                let mean = ewma(alpha, &|g| g, i) / (1.0 - alpha.powi(m as i32));
                let var = ewma(beta, &|g| g * g, i) / (1.0 - beta.powi(m as i32));
                lr * mean / (eps + var.sqrt())
            })
            .collect(),
    }
}

fn psi_adadelta(hyper: &HyperParams, history: &[Vec<f64>], past: &[Vec<f64>]) -> Vec<f64> {
    let HyperParams { beta, delta, epsilon: eps, .. } = *hyper;
    let m = history.len();
    let dim = history[0].len();
    (0..dim)
        .map(|i| {
            let num: f64 =
                (0..m - 1).map(|k| delta.powi((m - 2 - k) as i32) * (1.0 - delta) * past[k][i].powi(2)).sum();
            let den: f64 = (0..m).map(|k| beta.powi((m - 1 - k) as i32) * (1.0 - beta) * history[k][i].powi(2)).sum();
            ((eps + num) / (eps + den)).sqrt() * history[m - 1][i]
        })
        .collect()
}

/// Runs the recursive form and the closed form side by side on `history`
/// and returns the largest absolute difference between the updates.
pub fn max_update_deviation(
    kind: OptimizerKind,
    hyper: &HyperParams,
    schedule: &LrSchedule,
    history: &[Vec<f64>],
) -> f64 {
    let dim = history.first().map_or(0, |g| g.len());
    let mut state = OptimizerState::new(kind, *hyper, schedule.clone(), dim);
    let mut theta = vec![0.0; dim];
    let mut worst = 0.0f64;
    let mut past: Vec<Vec<f64>> = Vec::new();
    for m in 1..=history.len() {
        let before = theta.clone();
        state.step(&mut theta, &history[m - 1]).expect("finite gradients");
        let closed = if kind == OptimizerKind::Adadelta {
            let psi = psi_adadelta(hyper, &history[..m], &past);
            past.push(psi.clone());
            psi
        } else {
            psi_closed_form(kind, hyper, schedule, &history[..m])
        };
        for i in 0..dim {
            worst = worst.max(((before[i] - theta[i]) - closed[i]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn history(seed: u64, steps: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut s = RngStream::new(seed, "grads");
        (0..steps).map(|_| s.standard_normal(dim)).collect()
    }

    #[test]
    fn zero_gradient_leaves_theta() {
        for kind in OptimizerKind::ALL {
            let mut st = OptimizerState::new(kind, HyperParams::default(), LrSchedule::constant(0.1), 3);
            let mut theta = vec![1.0, -2.0, 0.5];
            st.step(&mut theta, &[0.0; 3]).unwrap();
            assert_eq!(theta, vec![1.0, -2.0, 0.5], "{kind:?}");
        }
    }

    #[test]
    fn sgd_single_step() {
        let mut st = OptimizerState::new(OptimizerKind::Sgd, HyperParams::default(), LrSchedule::constant(0.1), 1);
        let mut theta = vec![1.0];
        st.step(&mut theta, &[2.0]).unwrap();
        assert!((theta[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_the_rate() {
        let mut st = OptimizerState::new(OptimizerKind::Adam, HyperParams::default(), LrSchedule::constant(0.001), 1);
        let mut theta = vec![0.0];
        st.step(&mut theta, &[1.0]).unwrap();
        assert!((theta[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut st = OptimizerState::new(OptimizerKind::Adam, HyperParams::default(), LrSchedule::constant(0.1), 2);
        let mut theta = vec![0.0; 2];
        assert!(matches!(st.step(&mut theta, &[0.0, f64::NAN]), Err(LrvError::NonFiniteGradient(1))));
        assert_eq!(st.step, 0);
    }

    #[test]
    fn first_closed_form_update_matches_for_all_kinds() {
        let h = history(1, 1, 4);
        for kind in OptimizerKind::ALL {
            assert!(max_update_deviation(kind, &HyperParams::default(), &LrSchedule::constant(0.01), &h) < 1e-15);
        }
    }

    #[test]
    fn closed_forms_agree_over_two_hundred_steps() {
        let h = history(2, 200, 5);
        let sched = LrSchedule::new(vec![(50, 0.1), (120, 0.01), (200, 0.001)]).unwrap();
        for kind in OptimizerKind::ALL {
            let dev = max_update_deviation(kind, &HyperParams::default(), &sched, &h);
            assert!(dev < 1e-10, "{kind:?}: {dev:e}");
        }
    }

    #[test]
    fn adam_agrees_over_a_thousand_steps() {
        let h = history(3, 1000, 2);
        let dev = max_update_deviation(OptimizerKind::Adam, &HyperParams::default(), &LrSchedule::constant(0.001), &h);
        assert!(dev < 1e-10, "{dev:e}");
    }

    #[test]
    fn long_run_schedules() {
        let bs = LrSchedule::decades(0.1, 20_000, 7);
        assert_eq!(bs.lr_at(1), 0.1);
        assert_eq!(bs.lr_at(20_000), 0.1);
        assert_eq!(bs.lr_at(20_001), 0.01);
        assert!((bs.lr_at(1_000_000) - 1e-7).abs() < 1e-20);
        let lorentz = LrSchedule::new(vec![(5000, 1e-3), (8000, 1e-4), (10_000, 1e-5)]).unwrap();
        assert_eq!(lorentz.lr_at(5000), 1e-3);
        assert_eq!(lorentz.lr_at(5001), 1e-4);
        assert_eq!(lorentz.lr_at(10_001), 1e-5);
    }

    #[test]
    fn invalid_schedules() {
        assert!(LrSchedule::new(vec![]).is_err());
        assert!(LrSchedule::new(vec![(5, 0.1), (5, 0.01)]).is_err());
        assert!(LrSchedule::new(vec![(5, -0.1)]).is_err());
    }

    #[test]
    fn adagrad_rate_never_increases() {
        let h = history(4, 100, 1);
        let mut sum = 0.0f64;
        let mut last = f64::INFINITY;
        for g in &h {
            sum += g[0] * g[0];
            let rate = 0.1 / (1e-8 + sum).sqrt();
            assert!(rate <= last);
            last = rate;
        }
    }

    proptest! {
        #[test]
        fn updates_are_coordinatewise(kind_ix in 0..7usize, seed in any::<u64>(), bump in -3.0..3.0f64) {
            let kind = OptimizerKind::ALL[kind_ix];
            let h = history(seed, 5, 4);
            let mut perturbed = h.clone();
            perturbed[4][2] += bump;
            let run = |hist: &[Vec<f64>]| {
                let mut st = OptimizerState::new(kind, HyperParams::default(), LrSchedule::constant(0.05), 4);
                let mut theta = vec![0.0; 4];
                for g in hist {
                    st.step(&mut theta, g).unwrap();
                }
                theta
            };
            let a = run(&h);
            let b = run(&perturbed);
            for i in [0, 1, 3] {
                prop_assert_eq!(a[i].to_bits(), b[i].to_bits());
            }
        }
    }
}
