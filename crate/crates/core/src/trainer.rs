//! The training loop: fit `θ` so that `Ψ(·, θ)` matches reference values on
//! random parameter points.

use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::domain::{ParameterDomain, ParameterPoint};
use crate::error::{LrvError, Result};
use crate::mcnet::{init_theta, Network, ProposalSpec};
use crate::models::{Kernel, MaybeAntithetic};
use crate::optim::{HyperParams, LrSchedule, OptimizerKind, OptimizerState};
use crate::par::{map_chunks, CHUNK};
use crate::rng::RngStream;

/// How regression targets are produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// The closed-form value `u(p)`.
    Exact,
    /// A fresh Monte Carlo average of `samples` payoffs per point.
    StochasticMc { samples: usize, antithetic: bool },
}

/// A random map `Ξ(p)` whose expectation is the target `u(p)`.
pub trait Reference: Send + Sync {
    fn reference(&self, p: &[f64], stream: &mut RngStream) -> Result<f64>;
}

/// `Ξ(p) = u(p)` from the kernel's closed form.
#[derive(Clone, Debug)]
pub struct ExactReference<K>(pub K);

impl<K: Kernel> Reference for ExactReference<K> {
    fn reference(&self, p: &[f64], _stream: &mut RngStream) -> Result<f64> {
        self.0.exact(p).ok_or_else(|| LrvError::Unsupported("exact reference for a kernel without closed form".into()))
    }
}

/// `Ξ(p) = (1/𝓜) Σ φ(p, W_𝔪)` with freshly drawn `W_𝔪`.
#[derive(Clone, Debug)]
pub struct McReference<K> {
    pub kernel: MaybeAntithetic<K>,
    pub samples: usize,
}

impl<K: Kernel> McReference<K> {
    pub fn new(kernel: K, samples: usize, antithetic: bool) -> Self {
        Self { kernel: MaybeAntithetic { kernel, antithetic }, samples }
    }
}

impl<K: Kernel> Reference for McReference<K> {
    fn reference(&self, p: &[f64], stream: &mut RngStream) -> Result<f64> {
        if self.samples == 0 {
            return Err(LrvError::Config("reference needs at least one sample".into()));
        }
        let mut w = vec![0.0; self.kernel.sample_dim()];
        let mut acc = 0.0;
        for _ in 0..self.samples {
            stream.fill_standard_normal(&mut w);
            acc += self.kernel.value(p, &w);
        }
        Ok(acc / self.samples as f64)
    }
}

/// `Ξ(p)`: the mean of `Ψ(p, 𝔚_i)` over `samples` fresh draws `𝔚_i` from
/// the proposal's initial law.
#[derive(Clone, Debug)]
pub struct NetworkReference<N> {
    pub network: N,
    pub spec: ProposalSpec,
    pub samples: usize,
}

impl<N: Network> Reference for NetworkReference<N> {
    fn reference(&self, p: &[f64], stream: &mut RngStream) -> Result<f64> {
        if self.samples == 0 {
            return Err(LrvError::Config("reference needs at least one sample".into()));
        }
        let mut acc = 0.0;
        for _ in 0..self.samples {
            let theta = init_theta(&self.spec, stream)?;
            acc += self.network.eval(p, &theta.values);
        }
        Ok(acc / self.samples as f64)
    }
}

pub type ClosedForm = Box<dyn Fn(&[f64]) -> Option<f64> + Send + Sync>;

/// `Ξ(p) = u(p)` from an arbitrary closed form.
pub struct ClosedFormReference(pub ClosedForm);

impl Reference for ClosedFormReference {
    fn reference(&self, p: &[f64], _stream: &mut RngStream) -> Result<f64> {
        (self.0)(p).ok_or_else(|| LrvError::Unsupported("no closed form at this point".into()))
    }
}

impl<R: Reference + ?Sized> Reference for Box<R> {
    fn reference(&self, p: &[f64], stream: &mut RngStream) -> Result<f64> {
        (**self).reference(p, stream)
    }
}

/// Reference values for a batch; point `b` draws from `stream.split_indexed("ref", b)`.
pub fn reference_batch<R: Reference + ?Sized>(
    reference: &R,
    points: &[ParameterPoint],
    stream: &RngStream,
) -> Result<Vec<f64>> {
    let parts = map_chunks(points.len(), CHUNK, |range| {
        range
            .map(|b| reference.reference(&points[b], &mut stream.split_indexed("ref", b as u64)))
            .collect::<Result<Vec<f64>>>()
    });
    let mut out = Vec::with_capacity(points.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// `F(θ) = (1/𝐌) Σ_b |Ψ(p_b, θ) − y_b|²`.
pub fn loss_minibatch<N: Network + ?Sized>(network: &N, theta: &[f64], points: &[ParameterPoint], refs: &[f64]) -> f64 {
    let parts = map_chunks(points.len(), CHUNK, |range| {
        range.map(|b| (network.eval(&points[b], theta) - refs[b]).powi(2)).sum::<f64>()
    });
    parts.iter().sum::<f64>() / points.len() as f64
}

/// Minibatch loss and its gradient in `θ`, written into `grad`.
pub fn loss_and_grad<N: Network + ?Sized>(
    network: &N,
    theta: &[f64],
    points: &[ParameterPoint],
    refs: &[f64],
    grad: &mut [f64],
) -> f64 {
    let d = theta.len();
    let scale = 2.0 / points.len() as f64;
    let parts = map_chunks(points.len(), CHUNK, |range| {
        let mut acc = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        let mut loss = 0.0;
        for b in range {
            let out = network.value_grad(&points[b], theta, &mut scratch);
            let diff = out - refs[b];
            loss += diff * diff;
            let adj = scale * diff;
            for (a, s) in acc.iter_mut().zip(&scratch) {
                *a += adj * s;
            }
        }
        (loss, acc)
    });
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (l, acc) in parts {
        loss += l;
        for (g, a) in grad.iter_mut().zip(&acc) {
            *g += a;
        }
    }
    loss / points.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Parameter points per step `𝐌`.
    pub batch: usize,
    pub steps: u64,
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub hyper: HyperParams,
    pub schedule: LrSchedule,
    pub seed: u64,
    /// Checkpoint every this many steps; `0` disables checkpoints.
    #[serde(default)]
    pub checkpoint_every: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(LrvError::Config("batch must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(LrvError::Config("steps must be at least 1".into()));
        }
        self.schedule.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    /// Seconds since the trainer was created.
    pub wall_clock: f64,
}

/// Everything needed to continue training exactly where it stopped. Random
/// streams are keyed by step, so the step index doubles as stream position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub step: u64,
    pub theta: Vec<f64>,
    pub optimizer: OptimizerState,
}

pub struct Trainer<N, R> {
    network: N,
    reference: R,
    domain: ParameterDomain,
    config: TrainConfig,
    root: RngStream,
    theta: Vec<f64>,
    state: OptimizerState,
    trace: Vec<LossRecord>,
    grad: Vec<f64>,
    clock: Stopwatch,
}

impl<N: Network, R: Reference> Trainer<N, R> {
    /// Draws `Θ₀` from the proposal's initial law.
    pub fn new(
        network: N,
        reference: R,
        domain: ParameterDomain,
        spec: &ProposalSpec,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        domain.validate()?;
        let root = RngStream::new(config.seed, "train");
        let theta = init_theta(spec, &mut root.split("init"))?.values;
        network.check_len(&theta)?;
        let state = OptimizerState::new(config.optimizer, config.hyper, config.schedule.clone(), theta.len());
        Ok(Self::assemble(network, reference, domain, config, root, theta, state))
    }

    pub fn resume(
        network: N,
        reference: R,
        domain: ParameterDomain,
        config: TrainConfig,
        checkpoint: Checkpoint,
    ) -> Result<Self> {
        config.validate()?;
        if checkpoint.seed != config.seed {
            return Err(LrvError::Artifact(format!(
                "checkpoint seed {} differs from config seed {}",
                checkpoint.seed, config.seed
            )));
        }
        if checkpoint.optimizer.step != checkpoint.step {
            return Err(LrvError::Artifact("checkpoint step disagrees with optimizer state".into()));
        }
        network.check_len(&checkpoint.theta)?;
        let root = RngStream::new(config.seed, "train");
        Ok(Self::assemble(network, reference, domain, config, root, checkpoint.theta, checkpoint.optimizer))
    }

    fn assemble(
        network: N,
        reference: R,
        domain: ParameterDomain,
        config: TrainConfig,
        root: RngStream,
        theta: Vec<f64>,
        state: OptimizerState,
    ) -> Self {
        let grad = vec![0.0; theta.len()];
        Self {
            network,
            reference,
            domain,
            config,
            root,
            theta,
            state,
            trace: Vec::new(),
            grad,
            clock: Stopwatch::start(),
        }
    }

    pub fn network(&self) -> &N {
        &self.network
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_theta(self) -> Vec<f64> {
        self.theta
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.state
    }

    /// Steps completed so far.
    pub fn step_count(&self) -> u64 {
        self.state.step
    }

    pub fn trace(&self) -> &[LossRecord] {
        &self.trace
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            seed: self.config.seed,
            step: self.state.step,
            theta: self.theta.clone(),
            optimizer: self.state.clone(),
        }
    }

    /// Training points of step `m`.
    pub fn points_at(&self, m: u64) -> Result<Vec<ParameterPoint>> {
        self.domain.sample_many(self.config.batch, &mut self.root.split_indexed("step/points", m))
    }

    /// One optimizer step; returns the minibatch loss at the pre-step `θ`.
    pub fn step(&mut self) -> Result<f64> {
        let m = self.state.step + 1;
        let points = self.points_at(m)?;
        let refs = reference_batch(&self.reference, &points, &self.root.split_indexed("step/refs", m))?;
        let loss = loss_and_grad(&self.network, &self.theta, &points, &refs, &mut self.grad);
        if !loss.is_finite() {
            return Err(LrvError::NonFiniteLoss(m as usize));
        }
        self.state.step(&mut self.theta, &self.grad)?;
        self.trace.push(LossRecord {
            step: m,
            loss,
            lr: self.config.schedule.lr_at(m),
            wall_clock: self.clock.seconds(),
        });
        Ok(loss)
    }

    /// Trains up to the configured step count, handing checkpoints to `sink`.
    pub fn run(&mut self, mut sink: impl FnMut(&Checkpoint) -> Result<()>) -> Result<()> {
        while self.state.step < self.config.steps {
            self.step()?;
            let every = self.config.checkpoint_every;
            if every > 0 && self.state.step.is_multiple_of(every) {
                sink(&self.checkpoint())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcnet::McNetwork;
    use crate::models::{bs_call, BsCall};

    fn config(steps: u64, lr: f64) -> TrainConfig {
        TrainConfig {
            batch: 32,
            steps,
            optimizer: OptimizerKind::Adam,
            hyper: HyperParams::default(),
            schedule: LrSchedule::constant(lr),
            seed: 7,
            checkpoint_every: 0,
        }
    }

    fn trainer(steps: u64, lr: f64) -> Trainer<McNetwork<BsCall>, ExactReference<BsCall>> {
        Trainer::new(
            McNetwork::new(BsCall, 16),
            ExactReference(BsCall),
            bs_call::domain(),
            &ProposalSpec::mc(16, 1),
            config(steps, lr),
        )
        .unwrap()
    }

    #[test]
    fn loss_examples() {
        let net = McNetwork::new(BsCall, 2);
        let theta = [0.3, -0.4];
        let pts = vec![vec![100.0, 1.0, 0.05, 0.2, 100.0], vec![110.0, 0.5, 0.01, 0.3, 95.0]];
        let outs: Vec<f64> = pts.iter().map(|p| net.eval(p, &theta)).collect();
        assert_eq!(loss_minibatch(&net, &theta, &pts, &outs), 0.0);
        assert!((loss_minibatch(&net, &theta, &pts[..1], &[outs[0] - 3.0]) - 9.0).abs() < 1e-12);
        let two = loss_minibatch(&net, &theta, &pts, &[outs[0] + 1.0, outs[1] - 2.0]);
        assert!((two - 2.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = McNetwork::new(BsCall, 4);
        let theta = vec![0.7, -0.2, 1.3, 0.4];
        let pts = vec![
            vec![100.0, 1.0, 0.05, 0.2, 100.0],
            vec![95.0, 0.7, 0.02, 0.25, 90.0],
            vec![105.0, 1.5, 0.03, 0.15, 110.0],
        ];
        let refs = vec![10.0, 7.0, 6.0];
        let mut g = vec![0.0; 4];
        loss_and_grad(&net, &theta, &pts, &refs, &mut g);
        for i in 0..4 {
            let h = 1e-6;
            let mut a = theta.clone();
            a[i] += h;
            let mut b = theta.clone();
            b[i] -= h;
            let fd = (loss_minibatch(&net, &a, &pts, &refs) - loss_minibatch(&net, &b, &pts, &refs)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn exact_and_single_draw_references() {
        let p = vec![100.0, 1.0, 0.05, 0.2, 100.0];
        let s = RngStream::new(1, "r");
        let exact = reference_batch(&ExactReference(BsCall), std::slice::from_ref(&p), &s).unwrap();
        assert_eq!(exact[0], bs_call::exact_price(&bs_call::BsCallParams::from_slice(&p)));
        let one = reference_batch(&McReference::new(BsCall, 1, false), std::slice::from_ref(&p), &s).unwrap();
        let w = s.split_indexed("ref", 0).normal();
        assert_eq!(one[0], BsCall.value(&p, &[w]));
    }

    #[test]
    fn stochastic_reference_is_unbiased() {
        let p = vec![100.0, 1.0, 0.05, 0.2, 100.0];
        let exact = BsCall.exact(&p).unwrap();
        let r = McReference::new(BsCall, 4096, false);
        let root = RngStream::new(3, "clt");
        let vals: Vec<f64> = (0..500).map(|i| r.reference(&p, &mut root.split_indexed("batch", i)).unwrap()).collect();
        let mean = vals.iter().sum::<f64>() / 500.0;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 499.0;
        assert!((mean - exact).abs() < 4.0 * (var / 500.0).sqrt());
    }

    #[test]
    fn exact_reference_needs_closed_form() {
        let k = crate::models::Lorentz { steps: 2 };
        let p = crate::models::lorentz::domain().midpoint();
        assert!(ExactReference(k).reference(&p, &mut RngStream::new(0, "x")).is_err());
    }

    #[test]
    fn zero_rate_keeps_initial_theta() {
        let mut t = trainer(20, 0.0);
        let start = t.theta().to_vec();
        t.run(|_| Ok(())).unwrap();
        assert_eq!(t.theta(), &start[..]);
        assert_eq!(t.trace().len(), 20);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let mut a = trainer(30, 0.01);
        let mut b = trainer(30, 0.01);
        a.run(|_| Ok(())).unwrap();
        b.run(|_| Ok(())).unwrap();
        let bits = |t: &Trainer<_, _>| t.theta().iter().map(|v: &f64| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let losses = |t: &Trainer<_, _>| t.trace().iter().map(|r: &LossRecord| r.loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(losses(&a), losses(&b));
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let mut full = trainer(40, 0.01);
        full.run(|_| Ok(())).unwrap();
        let mut cfg = config(40, 0.01);
        cfg.checkpoint_every = 15;
        let mut saved = Vec::new();
        let mut first = Trainer::new(
            McNetwork::new(BsCall, 16),
            ExactReference(BsCall),
            bs_call::domain(),
            &ProposalSpec::mc(16, 1),
            cfg.clone(),
        )
        .unwrap();
        first
            .run(|c| {
                saved.push(c.clone());
                Ok(())
            })
            .unwrap();
        assert_eq!(saved.iter().map(|c| c.step).collect::<Vec<_>>(), vec![15, 30]);
        let mut resumed = Trainer::resume(
            McNetwork::new(BsCall, 16),
            ExactReference(BsCall),
            bs_call::domain(),
            cfg,
            saved[0].clone(),
        )
        .unwrap();
        resumed.run(|_| Ok(())).unwrap();
        assert_eq!(resumed.theta(), full.theta());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let run = |w| {
            crate::par::with_workers(w, || {
                let mut t = trainer(10, 0.01);
                t.run(|_| Ok(())).unwrap();
                t.into_theta()
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn nan_loss_reports_step() {
        struct Broken;
        impl Reference for Broken {
            fn reference(&self, _p: &[f64], _s: &mut RngStream) -> Result<f64> {
                Ok(f64::NAN)
            }
        }
        let mut t = Trainer::new(
            McNetwork::new(BsCall, 4),
            Broken,
            bs_call::domain(),
            &ProposalSpec::mc(4, 1),
            config(5, 0.01),
        )
        .unwrap();
        assert!(matches!(t.step(), Err(LrvError::NonFiniteLoss(1))));
    }

    #[test]
    fn loss_trend_decreases_with_exact_references() {
        let mut t = trainer(400, 0.05);
        t.run(|_| Ok(())).unwrap();
        let median = |w: &[LossRecord]| {
            let mut v: Vec<f64> = w.iter().map(|r| r.loss).collect();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let tr = t.trace();
        assert!(median(&tr[tr.len() - 10..]) < median(&tr[..10]));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut c = config(10, 0.1);
        c.batch = 0;
        assert!(c.validate().is_err());
        let mut c = config(10, 0.1);
        c.steps = 0;
        assert!(c.validate().is_err());
    }
}
