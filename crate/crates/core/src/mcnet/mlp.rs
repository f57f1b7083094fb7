use crate::autodiff::{with_tape, Real};
use crate::mcnet::Network;
use crate::models::PicardKernel;

/// `C_n = Σ_{k=0}^{n-1} 𝔐^{n-k} (1 + C_k + C_{k-1})`, with `C_n = 0` for `n ≤ 0`.
pub fn mlp_counts(base: usize, n: i64) -> usize {
    if n <= 0 {
        return 0;
    }
    let mut c = vec![0usize; n as usize + 1];
    for j in 1..=n as usize {
        c[j] = (0..j).map(|k| base.pow((j - k) as u32) * (1 + c[k] + if k > 0 { c[k - 1] } else { 0 })).sum();
    }
    c[n as usize]
}

/// One-based index `c_{n,l,𝔪}` of the block that drives sample `𝔪` of the
/// level-`l` correction inside a level-`n` evaluation.
pub fn mlp_offset(base: usize, n: u32, l: u32, m: usize) -> usize {
    let block = |k: i64| 1 + mlp_counts(base, k) + mlp_counts(base, k - 1);
    let before: usize = (0..l as i64).map(|k| base.pow(n - k as u32) * block(k)).sum();
    before + (m - 1) * block(l as i64) + 1
}

/// Multilevel Picard network `𝒩_n(p, θ)` evaluated by structural recursion.
#[derive(Clone, Debug)]
pub struct MlpNetwork<K> {
    pub kernel: K,
    pub base: usize,
    pub level: u32,
}

impl<K: PicardKernel> MlpNetwork<K> {
    pub fn new(kernel: K, base: usize, level: u32) -> Self {
        Self { kernel, base, level }
    }

    /// `𝒩_n(p, θ)` for `θ` of length `C_n · 𝐝`.
    pub fn eval_at<S: Real>(&self, n: u32, p: &[S], theta: &[S]) -> S {
        if n == 0 {
            return S::constant(0.0);
        }
        let dd = self.kernel.sample_dim();
        let block = |i: usize| &theta[(i - 1) * dd..i * dd];
        let zero = S::constant(0.0);
        let count = self.base.pow(n);
        let mut acc = zero;
        for m in 1..=count {
            acc = acc + self.kernel.phi(p, block(m), zero);
        }
        let mut total = acc / count as f64;
        for k in 1..n {
            let ck = mlp_counts(self.base, k as i64);
            let ck1 = mlp_counts(self.base, k as i64 - 1);
            let count = self.base.pow(n - k);
            let mut acc = zero;
            for m in 1..=count {
                let c = mlp_offset(self.base, n, k, m);
                let w = block(c);
                let q = self.kernel.transport(p, w);
                let upper = self.eval_at(k, &q, &theta[c * dd..(c + ck) * dd]);
                let lower = self.eval_at(k - 1, &q, &theta[(c + ck) * dd..(c + ck + ck1) * dd]);
                acc = acc + self.kernel.phi(p, w, upper) - self.kernel.phi(p, w, lower);
            }
            total = total + acc / count as f64;
        }
        total
    }
}

impl<K: PicardKernel> Network for MlpNetwork<K> {
    fn num_params(&self) -> usize {
        mlp_counts(self.base, self.level as i64) * self.kernel.sample_dim()
    }

    fn eval(&self, p: &[f64], theta: &[f64]) -> f64 {
        self.eval_at(self.level, p, theta)
    }

    fn value_grad(&self, p: &[f64], theta: &[f64], grad: &mut [f64]) -> f64 {
        with_tape(|tape| {
            let xs = tape.vars(theta);
            let pv: Vec<_> = p.iter().map(|&v| Real::constant(v)).collect();
            let out = self.eval_at(self.level, &pv, &xs);
            let adj = tape.adjoints(out);
            for (g, x) in grad.iter_mut().zip(&xs) {
                *g = x.index().map_or(0.0, |i| adj[i]);
            }
            out.value()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcnet::{init_theta, ProposalSpec};
    use crate::models::{HeatMlp, Nonlinearity};
    use crate::rng::RngStream;

    #[test]
    fn counts() {
        assert_eq!(mlp_counts(2, 0), 0);
        assert_eq!(mlp_counts(2, -1), 0);
        assert_eq!([mlp_counts(2, 1), mlp_counts(2, 2), mlp_counts(2, 3)], [2, 10, 46]);
        assert_eq!([mlp_counts(1, 1), mlp_counts(1, 2), mlp_counts(1, 3)], [1, 3, 8]);
    }

    #[test]
    fn offsets() {
        for base in 1..4 {
            for n in 1..4 {
                assert_eq!(mlp_offset(base, n, 1, 1), base.pow(n) + 1);
            }
        }
        assert_eq!(mlp_offset(2, 2, 1, 1), 5);
        assert_eq!(mlp_offset(2, 2, 1, 2), 8);
    }

    #[test]
    fn offsets_tile_the_parameter_vector() {
        for base in 1..4usize {
            for n in 1..5u32 {
                let mut next = base.pow(n) + 1;
                for l in 1..n {
                    let span = 1 + mlp_counts(base, l as i64) + mlp_counts(base, l as i64 - 1);
                    for m in 1..=base.pow(n - l) {
                        assert_eq!(mlp_offset(base, n, l, m), next);
                        next += span;
                    }
                }
                assert_eq!(next - 1, mlp_counts(base, n as i64), "base {base} n {n}");
            }
        }
    }

    fn heat(f: Nonlinearity) -> HeatMlp {
        HeatMlp { dim: 2, horizon: 1.0, f }
    }

    #[test]
    fn level_one_is_mc_average() {
        let k = heat(Nonlinearity::ScaledRelu { c: 0.7 });
        let net = MlpNetwork::new(k, 3, 1);
        let theta = init_theta(&ProposalSpec::mlp(3, 1, 3, vec![2]), &mut RngStream::new(19, "mlp1")).unwrap();
        let p = [0.2, 0.5, -0.1];
        let expect = theta.values.chunks(3).map(|w| k.phi(&p, w, 0.0)).sum::<f64>() / 3.0;
        assert!((net.eval(&p, &theta.values) - expect).abs() < 1e-14);
    }

    #[test]
    fn linear_heat_reduces_to_mc() {
        let k = heat(Nonlinearity::Zero);
        let net = MlpNetwork::new(k, 2, 3);
        let spec = ProposalSpec::mlp(2, 3, 3, vec![2]);
        let theta = init_theta(&spec, &mut RngStream::new(20, "mlp0")).unwrap();
        let p = [0.3, 0.4, 1.0];
        let expect = theta.values[..8 * 3].chunks(3).map(|w| k.phi(&p, w, 0.0)).sum::<f64>() / 8.0;
        assert!((net.eval(&p, &theta.values) - expect).abs() < 1e-12);
    }

    #[test]
    fn level_two_single_sample_by_hand() {
        let k = heat(Nonlinearity::ScaledRelu { c: 0.5 });
        let net = MlpNetwork::new(k, 1, 2);
        let theta = [0.3, -0.2, 0.5, 1.1, 0.4, 0.25, -0.6, 0.9, 0.75];
        let p = [0.2, 0.5, -0.1];
        let (t1, t2, t3) = (&theta[0..3], &theta[3..6], &theta[6..9]);
        let q = k.transport(&p, t2);
        let inner = k.phi(&q, t3, 0.0);
        let expect = k.phi(&p, t1, 0.0) + k.phi(&p, t2, inner) - k.phi(&p, t2, 0.0);
        assert!((net.eval(&p, &theta) - expect).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = heat(Nonlinearity::ScaledRelu { c: 0.5 });
        let net = MlpNetwork::new(k, 2, 2);
        let spec = ProposalSpec::mlp(2, 2, 3, vec![2]);
        let theta = init_theta(&spec, &mut RngStream::new(21, "mlp-grad")).unwrap().values;
        let p = [0.1, 0.3, -0.2];
        let mut g = vec![0.0; theta.len()];
        let v = net.value_grad(&p, &theta, &mut g);
        assert_eq!(v.to_bits(), net.eval(&p, &theta).to_bits());
        let h = 1e-6;
        for i in 0..theta.len() {
            let mut up = theta.clone();
            up[i] += h;
            let mut dn = theta.clone();
            dn[i] -= h;
            let fd = (net.eval(&p, &up) - net.eval(&p, &dn)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }
}
