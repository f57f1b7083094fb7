//! End-to-end pipelines behind the command-line tool: training, baselines,
//! evaluation of saved parameters and export of learned variables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::config::{ExperimentConfig, ModelSpec};
use crate::domain::{ParameterDomain, ParameterPoint};
use crate::error::{LrvError, Result};
use crate::eval::{errors_on, mc_baseline, qmc_normals, reference_values, ErrorReport};
use crate::io::{self, CsvRow, ThetaHeader};
use crate::mcnet::{init_theta, McNetwork, MlmcNetwork, MlpNetwork, Network, ProposalKind, ProposalSpec};
use crate::models::{Kernel, MaybeAntithetic, Model, PicardKernel};
use crate::rng::RngStream;
use crate::sobol::SobolSequence;
use crate::stats::{histogram, moments, Histogram, Moments};
use crate::trainer::{
    ClosedFormReference, ExactReference, LossRecord, McReference, NetworkReference, Reference, ReferenceSpec, Trainer,
};

pub const THETA_FILE: &str = "theta.bin";
pub const LOSS_FILE: &str = "loss.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

pub type DynTrainer = Trainer<Box<dyn Network>, Box<dyn Reference>>;

/// A validated configuration with its derived objects.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub domain: ParameterDomain,
    pub spec: ProposalSpec,
    pub kernel: Option<Model>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { domain: config.domain()?, spec: config.proposal_spec()?, kernel: config.model.kernel(), config })
    }

    pub fn network(&self) -> Result<Box<dyn Network>> {
        let m = self.spec.samples[0];
        let net: Box<dyn Network> = match (&self.config.model, self.spec.kind) {
            (ModelSpec::HeatMlp { .. }, _) => {
                let heat = self.config.model.heat().expect("heat model");
                Box::new(MlpNetwork::new(heat, m, self.spec.picard_level.unwrap_or(0)))
            }
            (ModelSpec::AdditiveSde(sde), ProposalKind::Mlmc) => {
                Box::new(MlmcNetwork::for_sde(*sde, self.spec.samples.clone())?)
            }
            (_, ProposalKind::AntitheticMc) => {
                Box::new(McNetwork::new(MaybeAntithetic { kernel: self.kernel()?, antithetic: true }, m))
            }
            _ => Box::new(McNetwork::new(self.kernel()?, m)),
        };
        if net.num_params() != self.spec.num_params() {
            return Err(LrvError::LayoutMismatch { expected: self.spec.num_params(), got: net.num_params() });
        }
        Ok(net)
    }

    fn kernel(&self) -> Result<Model> {
        self.kernel
            .clone()
            .ok_or_else(|| LrvError::Unsupported(format!("{} has no payoff kernel", self.config.model.name())))
    }

    pub fn reference(&self) -> Result<Box<dyn Reference>> {
        Ok(match (self.config.reference, &self.config.model) {
            (ReferenceSpec::Exact, ModelSpec::HeatMlp { .. }) => {
                let heat = self.config.model.heat().expect("heat model");
                Box::new(ClosedFormReference(Box::new(move |p| heat.exact(p))))
            }
            (ReferenceSpec::Exact, _) => Box::new(ExactReference(self.kernel()?)),
            (ReferenceSpec::StochasticMc { samples, .. }, ModelSpec::HeatMlp { .. }) => {
                Box::new(NetworkReference { network: self.network()?, spec: self.spec.clone(), samples })
            }
            (ReferenceSpec::StochasticMc { samples, antithetic }, _) => {
                Box::new(McReference::new(self.kernel()?, samples, antithetic))
            }
        })
    }

    pub fn trainer(&self) -> Result<DynTrainer> {
        Trainer::new(self.network()?, self.reference()?, self.domain.clone(), &self.spec, self.config.train_config()?)
    }

    pub fn resume(&self, checkpoint: crate::trainer::Checkpoint) -> Result<DynTrainer> {
        Trainer::resume(
            self.network()?,
            self.reference()?,
            self.domain.clone(),
            self.config.train_config()?,
            checkpoint,
        )
    }

    /// The shared evaluation grid, determined by the seed alone.
    pub fn grid(&self) -> Result<Vec<ParameterPoint>> {
        self.domain.sample_many(self.config.eval.points, &mut RngStream::new(self.config.seed, "eval/grid"))
    }

    /// Target values on `points`: closed forms where known, else the oracle.
    pub fn grid_references(&self, points: &[ParameterPoint]) -> Result<Vec<f64>> {
        match &self.config.model {
            ModelSpec::HeatMlp { .. } => {
                let heat = self.config.model.heat().expect("heat model");
                points
                    .iter()
                    .map(|p| heat.exact(p).ok_or_else(|| LrvError::Unsupported("heat reference".into())))
                    .collect()
            }
            _ => reference_values(
                &self.kernel()?,
                points,
                self.config.eval.oracle_budget,
                &RngStream::new(self.config.seed, "eval/oracle"),
            ),
        }
    }

    pub fn theta_header(&self, step: u64, len: usize) -> ThetaHeader {
        ThetaHeader {
            version: 1,
            model: self.config.model.name().to_string(),
            layout: self.spec.clone(),
            seed: self.config.seed,
            config_hash: self.config.hash(),
            step,
            len,
        }
    }

    fn row(
        &self,
        method: String,
        num_params: usize,
        num_samples: usize,
        errors: ErrorReport,
        train_time: f64,
    ) -> CsvRow {
        CsvRow {
            method,
            num_params,
            num_samples,
            errors,
            train_time,
            seed: self.config.seed,
            config_hash: self.config.hash(),
            epsilon: self.config.train.hyper.epsilon,
            hyperparams: self.config.hyperparams_string(),
        }
    }

    fn method_name(&self) -> String {
        let kind =
            serde_json::to_value(self.spec.kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        format!("lrv_{kind}")
    }

    /// Errors of `Ψ(·, θ)` on the shared grid.
    pub fn evaluate(
        &self,
        network: &dyn Network,
        theta: &[f64],
        points: &[ParameterPoint],
        refs: &[f64],
    ) -> Result<ErrorReport> {
        network.check_len(theta)?;
        errors_on(points, refs, |_, p| network.eval(p, theta))
    }
}

/// Files written by a training run.
#[derive(Clone, Debug)]
pub struct TrainArtifacts {
    pub theta_path: PathBuf,
    pub loss_path: PathBuf,
    pub results_path: PathBuf,
    /// Errors at `Θ₀` and at the final step.
    pub rows: Vec<CsvRow>,
}

/// Trains, writes parameters, loss trace, checkpoints and error rows.
pub fn run_train(
    config: &ExperimentConfig,
    out: &Path,
    resume: Option<&Path>,
    mut progress: impl FnMut(&LossRecord),
) -> Result<TrainArtifacts> {
    let exp = Experiment::new(config.clone())?;
    let mut trainer = match resume {
        Some(path) => exp.resume(io::read_checkpoint(path)?)?,
        None => exp.trainer()?,
    };
    let theta0 = trainer.theta().to_vec();
    let start = trainer.step_count();
    let clock = Stopwatch::start();
    let ckpt_dir = out.join(CHECKPOINT_DIR);
    let every = trainer.config().checkpoint_every;
    while trainer.step_count() < trainer.config().steps {
        trainer.step()?;
        if let Some(r) = trainer.trace().last() {
            progress(r);
        }
        if every > 0 && trainer.step_count() % every == 0 {
            io::write_checkpoint(
                &ckpt_dir.join(format!("step-{:08}.bin", trainer.step_count())),
                &trainer.checkpoint(),
            )?;
        }
    }
    let train_time = clock.seconds();

    let theta_path = out.join(THETA_FILE);
    io::write_theta(&theta_path, &exp.theta_header(trainer.step_count(), trainer.theta().len()), trainer.theta())?;
    let loss_path = out.join(LOSS_FILE);
    io::write_text(&loss_path, &io::loss_trace_csv(trainer.trace()))?;

    let points = exp.grid()?;
    let refs = exp.grid_references(&points)?;
    let net = trainer.network();
    let n = exp.spec.samples.iter().sum();
    let mut rows = Vec::new();
    if start == 0 {
        let init = exp.evaluate(net.as_ref(), &theta0, &points, &refs)?;
        rows.push(exp.row(format!("{}_init", exp.method_name()), theta0.len(), n, init, 0.0));
    }
    let fin = exp.evaluate(net.as_ref(), trainer.theta(), &points, &refs)?;
    rows.push(exp.row(exp.method_name(), theta0.len(), n, fin, train_time));
    let results_path = out.join(RESULTS_FILE);
    io::append_rows(&results_path, &rows)?;
    Ok(TrainArtifacts { theta_path, loss_path, results_path, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Mc,
    McAnti,
    Qmc,
    QmcAnti,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::Mc => "mc",
            BaselineMethod::McAnti => "mc_anti",
            BaselineMethod::Qmc => "qmc",
            BaselineMethod::QmcAnti => "qmc_anti",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(BaselineMethod::Mc),
            "mc_anti" => Ok(BaselineMethod::McAnti),
            "qmc" => Ok(BaselineMethod::Qmc),
            "qmc_anti" => Ok(BaselineMethod::QmcAnti),
            other => Err(LrvError::Config(format!("unknown baseline method {other}"))),
        }
    }
}

/// Classical estimator errors on the shared grid; appends a row to the results.
pub fn run_baseline(config: &ExperimentConfig, method: BaselineMethod, out: &Path) -> Result<CsvRow> {
    let exp = Experiment::new(config.clone())?;
    let samples = config.eval.baseline_samples.unwrap_or(exp.spec.samples[0]);
    if samples == 0 {
        return Err(LrvError::Config("baseline needs at least one sample".into()));
    }
    let points = exp.grid()?;
    let refs = exp.grid_references(&points)?;
    let stream = RngStream::new(config.seed, format!("baseline/{}", method.name()));
    let errors = match (&config.model, method) {
        (ModelSpec::HeatMlp { .. }, BaselineMethod::Mc) => {
            let net = exp.network()?;
            errors_on(&points, &refs, |i, p| {
                let theta =
                    init_theta(&exp.spec, &mut stream.split_indexed("point", i as u64)).expect("validated layout");
                net.eval(p, &theta.values)
            })?
        }
        (ModelSpec::HeatMlp { .. }, _) => {
            return Err(LrvError::Unsupported(format!("{} baseline for the Picard model", method.name())))
        }
        (_, BaselineMethod::Mc | BaselineMethod::McAnti) => {
            let kernel = exp.kernel()?;
            let anti = method == BaselineMethod::McAnti;
            errors_on(&points, &refs, |i, p| {
                mc_baseline(&kernel, p, samples, &mut stream.split_indexed("point", i as u64), anti)
                    .expect("positive sample count")
            })?
        }
        (_, BaselineMethod::Qmc | BaselineMethod::QmcAnti) => {
            let kernel = exp.kernel()?;
            let ws = qmc_normals(&SobolSequence::new(kernel.sample_dim())?, samples)?;
            let k = MaybeAntithetic { kernel, antithetic: method == BaselineMethod::QmcAnti };
            errors_on(&points, &refs, |_, p| k.sum_value(p, &ws) / samples as f64)?
        }
    };
    let num_params = samples * config.model.sample_dim();
    let row = exp.row(method.name().to_string(), num_params, samples, errors, 0.0);
    io::append_rows(&out.join(RESULTS_FILE), std::slice::from_ref(&row))?;
    Ok(row)
}

/// Errors of saved parameters on the shared grid; appends a row to the results.
pub fn run_eval(config: &ExperimentConfig, theta_path: &Path, out: &Path) -> Result<CsvRow> {
    let exp = Experiment::new(config.clone())?;
    let (header, theta) = io::read_theta(theta_path)?;
    if header.layout != exp.spec {
        return Err(LrvError::Artifact("theta layout does not match the configuration".into()));
    }
    let net = exp.network()?;
    let points = exp.grid()?;
    let refs = exp.grid_references(&points)?;
    let errors = exp.evaluate(net.as_ref(), &theta.values, &points, &refs)?;
    let row = exp.row(
        format!("{}_step{}", exp.method_name(), header.step),
        theta.len(),
        exp.spec.samples.iter().sum(),
        errors,
        0.0,
    );
    io::append_rows(&out.join(RESULTS_FILE), std::slice::from_ref(&row))?;
    Ok(row)
}

/// Histogram and moments of learned variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedExport {
    pub histogram: Histogram,
    pub moments: Moments,
}

/// Collects coordinate `coord` of every sample block (all entries if `None`).
pub fn learned_values(theta: &[f64], block: usize, coord: Option<usize>) -> Result<Vec<f64>> {
    match coord {
        None => Ok(theta.to_vec()),
        Some(c) if c < block => Ok(theta.iter().skip(c).step_by(block).copied().collect()),
        Some(c) => Err(LrvError::Config(format!("coordinate {c} outside blocks of size {block}"))),
    }
}

pub fn export_learned(
    theta_path: &Path,
    bins: usize,
    range: (f64, f64),
    coord: Option<usize>,
) -> Result<LearnedExport> {
    let (header, theta) = io::read_theta(theta_path)?;
    if theta.is_empty() {
        return Err(LrvError::Artifact("theta file holds no values".into()));
    }
    let xs = learned_values(&theta.values, header.layout.per_sample_dim, coord)?;
    Ok(LearnedExport { histogram: histogram(&xs, bins, range.0, range.1)?, moments: moments(&xs)? })
}
