use crate::mcnet::Network;
use crate::models::Kernel;

/// `Ψ(p, θ) = (1/𝔐) Σ_𝔪 φ(p, θ-block_𝔪)`.
///
/// Covers plain MC, antithetic MC (with an antithetic kernel) and MC-Euler
/// (with a path kernel consuming `N·d` scalars per block).
#[derive(Clone, Debug)]
pub struct McNetwork<K> {
    pub kernel: K,
    pub samples: usize,
}

impl<K: Kernel> McNetwork<K> {
    pub fn new(kernel: K, samples: usize) -> Self {
        Self { kernel, samples }
    }
}

impl<K: Kernel> Network for McNetwork<K> {
    fn num_params(&self) -> usize {
        self.samples * self.kernel.sample_dim()
    }

    fn eval(&self, p: &[f64], theta: &[f64]) -> f64 {
        self.kernel.sum_value(p, theta) / self.samples as f64
    }

    fn value_grad(&self, p: &[f64], theta: &[f64], grad: &mut [f64]) -> f64 {
        let inv = 1.0 / self.samples as f64;
        let acc = self.kernel.sum_value_grad(p, theta, grad);
        for v in grad.iter_mut() {
            *v *= inv;
        }
        acc * inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Real;
    use crate::mcnet::{init_theta, ProposalSpec};
    use crate::models::bs_call::{self, BsCallParams};
    use crate::models::{Antithetic, BarrierAvgPut, BsCall, Lorentz, WorstOfPut};
    use crate::rng::RngStream;

    struct Constant;
    impl Kernel for Constant {
        fn param_dim(&self) -> usize {
            0
        }
        fn sample_dim(&self) -> usize {
            2
        }
        fn eval<S: Real>(&self, _p: &[f64], _w: &[S]) -> S {
            S::constant(2.5)
        }
    }

    /// `Φ(w) = Σ w`, linear in the path increments.
    struct Sum(usize);
    impl Kernel for Sum {
        fn param_dim(&self) -> usize {
            0
        }
        fn sample_dim(&self) -> usize {
            self.0
        }
        fn eval<S: Real>(&self, _p: &[f64], w: &[S]) -> S {
            w.iter().fold(S::constant(0.0), |a, &b| a + b)
        }
    }

    const P: [f64; 5] = [100.0, 1.0, 0.05, 0.2, 100.0];

    #[test]
    fn single_sample_is_the_kernel() {
        let net = McNetwork::new(BsCall, 1);
        assert_eq!(net.eval(&P, &[0.7]), bs_call::payoff(&BsCallParams::from_slice(&P), 0.7));
    }

    #[test]
    fn constant_kernel() {
        let net = McNetwork::new(Constant, 3);
        assert_eq!(net.eval(&[], &[1.0, -4.0, 2.0, 0.0, 9.0, 3.0]), 2.5);
    }

    #[test]
    fn two_sample_bs_call() {
        let net = McNetwork::new(BsCall, 2);
        let v = net.eval(&P, &[1.0, 0.5]);
        let b = bs_call::payoff(&BsCallParams::from_slice(&P), 0.5);
        assert!((v - 0.5 * (24.598793862109616 + b)).abs() < 1e-12);
    }

    #[test]
    fn linear_path_payoff_averages_sums() {
        let net = McNetwork::new(Sum(4), 2);
        let theta = [1.0, 2.0, 3.0, 4.0, -1.0, 0.0, 0.5, 0.5];
        assert_eq!(net.eval(&[], &theta), 0.5 * (10.0 + 0.0));
    }

    #[test]
    fn euler_network_spot_check() {
        let net = McNetwork::new(Lorentz { steps: 2 }, 2);
        let p = [0.5, 10.0, 14.0, 1.5, 0.1, 0.2, 0.15, 1.0, 9.0, 11.0];
        let theta: Vec<f64> = (0..12).map(|i| (i as f64 - 5.5) * 0.2).collect();
        let a = crate::models::lorentz::lorentz_payoff(
            &crate::models::lorentz::LorentzParams::from_slice(&p),
            &theta[..6],
            2,
            false,
        );
        let b = crate::models::lorentz::lorentz_payoff(
            &crate::models::lorentz::LorentzParams::from_slice(&p),
            &theta[6..],
            2,
            false,
        );
        assert_eq!(net.eval(&p, &theta), 0.5 * (a + b));
    }

    #[test]
    fn antithetic_network_is_even_with_odd_gradient() {
        let net = McNetwork::new(Antithetic(WorstOfPut), 8);
        let d = crate::models::basket::worst_of_domain();
        let mut s = RngStream::new(13, "anti");
        for _ in 0..50 {
            let p = d.sample_uniform(&mut s).unwrap();
            let theta = s.standard_normal(24);
            let neg: Vec<f64> = theta.iter().map(|v| -v).collect();
            assert_eq!(net.eval(&p, &theta), net.eval(&p, &neg));
            let mut g = vec![0.0; 24];
            let mut h = vec![0.0; 24];
            net.value_grad(&p, &theta, &mut g);
            net.value_grad(&p, &neg, &mut h);
            for (a, b) in g.iter().zip(&h) {
                assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn gradients_match_tape_for_every_kernel() {
        let mut s = RngStream::new(14, "mc-grad");
        let barrier = McNetwork::new(BarrierAvgPut::default(), 3);
        let d = crate::models::barrier::domain();
        let p = d.sample_uniform(&mut s).unwrap();
        let theta = s.standard_normal(90);
        let mut g = vec![0.0; 90];
        let v = barrier.value_grad(&p, &theta, &mut g);
        assert_eq!(v, barrier.eval(&p, &theta));
        let h = 1e-6;
        for i in 0..90 {
            let mut up = theta.clone();
            up[i] += h;
            let mut dn = theta.clone();
            dn[i] -= h;
            let fd = (barrier.eval(&p, &up) - barrier.eval(&p, &dn)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn init_layout_matches_network() {
        let net = McNetwork::new(BsCall, 64);
        let t = init_theta(&ProposalSpec::mc(64, 1), &mut RngStream::new(1, "x")).unwrap();
        assert!(net.check_len(&t.values).is_ok());
        assert!(net.check_len(&t.values[1..]).is_err());
    }
}
