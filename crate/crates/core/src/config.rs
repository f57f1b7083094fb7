//! Experiment configuration files and bundled presets.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::ParameterDomain;
use crate::error::{LrvError, Result};
use crate::mcnet::{ProposalKind, ProposalSpec};
use crate::models::{barrier, basket, BsCall, HeatMlp, WorstOfPut};
use crate::models::{bs_call, lorentz, AdditiveSde, BarrierAvgPut, Kernel, Lorentz, Model, Nonlinearity};
use crate::optim::{HyperParams, LrSchedule, OptimizerKind};
use crate::trainer::{ReferenceSpec, TrainConfig};

/// The problem being approximated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    BsCall,
    WorstOfPut,
    BarrierAvgPut {
        #[serde(default = "default_barrier_steps")]
        steps: usize,
    },
    Lorentz {
        #[serde(default = "default_lorentz_steps")]
        steps: usize,
    },
    HeatMlp {
        dim: usize,
        horizon: f64,
        #[serde(default)]
        nonlinearity: Nonlinearity,
        bound: f64,
    },
    AdditiveSde(AdditiveSde),
}

fn default_barrier_steps() -> usize {
    10
}

fn default_lorentz_steps() -> usize {
    25
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::BsCall => "bs_call",
            ModelSpec::WorstOfPut => "worst_of_put",
            ModelSpec::BarrierAvgPut { .. } => "barrier_avg_put",
            ModelSpec::Lorentz { .. } => "lorentz",
            ModelSpec::HeatMlp { .. } => "heat_mlp",
            ModelSpec::AdditiveSde(_) => "additive_sde",
        }
    }

    /// The payoff kernel, for every model except the Picard one.
    pub fn kernel(&self) -> Option<Model> {
        Some(match self {
            ModelSpec::BsCall => Model::BsCall(BsCall),
            ModelSpec::WorstOfPut => Model::WorstOfPut(WorstOfPut),
            ModelSpec::BarrierAvgPut { steps } => Model::BarrierAvgPut(BarrierAvgPut { steps: *steps }),
            ModelSpec::Lorentz { steps } => Model::Lorentz(Lorentz { steps: *steps }),
            ModelSpec::AdditiveSde(sde) => Model::Euler(*sde),
            ModelSpec::HeatMlp { .. } => return None,
        })
    }

    pub fn heat(&self) -> Option<HeatMlp> {
        match *self {
            ModelSpec::HeatMlp { dim, horizon, nonlinearity, .. } => Some(HeatMlp { dim, horizon, f: nonlinearity }),
            _ => None,
        }
    }

    pub fn default_domain(&self) -> ParameterDomain {
        match self {
            ModelSpec::BsCall => bs_call::domain(),
            ModelSpec::WorstOfPut => basket::worst_of_domain(),
            ModelSpec::BarrierAvgPut { .. } => barrier::domain(),
            ModelSpec::Lorentz { .. } => lorentz::domain(),
            ModelSpec::HeatMlp { dim, horizon, nonlinearity, bound } => {
                HeatMlp { dim: *dim, horizon: *horizon, f: *nonlinearity }.domain(*bound)
            }
            ModelSpec::AdditiveSde(sde) => sde.domain(),
        }
    }

    /// Scalars of noise consumed by one sample.
    pub fn sample_dim(&self) -> usize {
        match self {
            ModelSpec::HeatMlp { dim, .. } => dim + 1,
            other => other.kernel().expect("kernel model").sample_dim(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub kind: ProposalKind,
    /// `[𝔐]`, or the per-level counts for MLMC.
    pub samples: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_level: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub batch: usize,
    pub steps: u64,
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub hyper: HyperParams,
    /// `(upper step bound, rate)` segments.
    pub schedule: Vec<(u64, f64)>,
    #[serde(default)]
    pub checkpoint_every: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSection {
    /// Size of the shared uniform error grid.
    pub points: usize,
    /// Antithetic MC samples per grid point for models without closed form.
    #[serde(default)]
    pub oracle_budget: usize,
    /// Samples used by the baselines; defaults to the proposal's `𝔐`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub model: ModelSpec,
    /// Overrides the model's parameter intervals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<(f64, f64)>>,
    pub proposal: ProposalConfig,
    pub reference: ReferenceSpec,
    pub train: TrainSection,
    pub eval: EvalSection,
    /// Output directory, overridable from the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LrvError::Config(e.to_string()))
    }

    pub fn domain(&self) -> Result<ParameterDomain> {
        let base = self.model.default_domain();
        match &self.domain {
            None => Ok(base),
            Some(iv) => {
                let d = ParameterDomain { intervals: iv.clone(), correlation_slot: base.correlation_slot };
                d.validate()?;
                if d.dim() != base.dim() {
                    return Err(LrvError::DimensionMismatch { expected: base.dim(), got: d.dim() });
                }
                Ok(d)
            }
        }
    }

    /// The network layout implied by model and proposal.
    pub fn proposal_spec(&self) -> Result<ProposalSpec> {
        let p = &self.proposal;
        let d = self.model.sample_dim();
        let m = || p.samples.first().copied().ok_or_else(|| LrvError::InvalidProposal("missing sample count".into()));
        let spec = match (p.kind, &self.model) {
            (ProposalKind::Mlp, ModelSpec::HeatMlp { dim, .. }) => {
                let level = p.picard_level.ok_or_else(|| LrvError::InvalidProposal("MLP needs picard_level".into()))?;
                ProposalSpec::mlp(m()?, level, dim + 1, vec![*dim])
            }
            (ProposalKind::Mlp, _) | (_, ModelSpec::HeatMlp { .. }) => {
                return Err(LrvError::InvalidProposal("the MLP proposal pairs with the heat model only".into()))
            }
            (ProposalKind::Mlmc, ModelSpec::AdditiveSde(sde)) => {
                ProposalSpec::mlmc(p.samples.clone(), sde.steps * sde.dim, sde.dim)
            }
            (ProposalKind::Mlmc, _) => {
                return Err(LrvError::InvalidProposal("MLMC needs an additive SDE model".into()))
            }
            (ProposalKind::Mc, _) => ProposalSpec::mc(m()?, d),
            (ProposalKind::AntitheticMc, _) => ProposalSpec::antithetic_mc(m()?, d),
            (ProposalKind::McEuler, ModelSpec::BarrierAvgPut { steps } | ModelSpec::Lorentz { steps }) => {
                ProposalSpec::mc_euler(m()?, *steps, 3)
            }
            (ProposalKind::McEuler, ModelSpec::AdditiveSde(sde)) => ProposalSpec::mc_euler(m()?, sde.steps, sde.dim),
            (ProposalKind::McEuler, _) => return Err(LrvError::InvalidProposal("MC-Euler needs a path model".into())),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            batch: t.batch,
            steps: t.steps,
            optimizer: t.optimizer,
            hyper: t.hyper,
            schedule: LrSchedule::new(t.schedule.clone())?,
            seed: self.seed,
            checkpoint_every: t.checkpoint_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let domain = self.domain()?;
        self.proposal_spec()?;
        self.train_config()?;
        if self.eval.points == 0 {
            return Err(LrvError::Config("eval.points must be positive".into()));
        }
        let mid = domain.midpoint();
        match (self.reference, &self.model) {
            (ReferenceSpec::Exact, ModelSpec::HeatMlp { .. }) => {}
            (ReferenceSpec::Exact, model) => {
                if model.kernel().and_then(|k| k.exact(&mid)).is_none() {
                    return Err(LrvError::Config(format!(
                        "{} has no closed form; use a stochastic reference",
                        model.name()
                    )));
                }
            }
            (ReferenceSpec::StochasticMc { samples: 0, .. }, _) => {
                return Err(LrvError::Config("reference samples must be positive".into()))
            }
            _ => {}
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring `seed` and `out`.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.seed = 0;
        canon.out = None;
        let json = serde_json::to_vec(&canon).expect("config serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The audit string written into CSV rows.
    pub fn hyperparams_string(&self) -> String {
        let t = &self.train;
        let h = &t.hyper;
        let sched: Vec<String> = t.schedule.iter().map(|(b, r)| format!("{b}:{r:e}")).collect();
        format!(
            "optimizer={:?},alpha={},beta={},delta={},batch={},steps={},schedule={}",
            t.optimizer,
            h.alpha,
            h.beta,
            h.delta,
            t.batch,
            t.steps,
            sched.join("/")
        )
        .to_lowercase()
    }
}

/// Desk-scale presets.
pub const PRESETS: [(&str, &str); 6] = [
    ("bs_call_small", include_str!("../presets/bs_call_small.toml")),
    ("worst_of_small", include_str!("../presets/worst_of_small.toml")),
    ("barrier_small", include_str!("../presets/barrier_small.toml")),
    ("lorentz_small", include_str!("../presets/lorentz_small.toml")),
    ("heat_mlp_small", include_str!("../presets/heat_mlp_small.toml")),
    ("sde_mlmc_small", include_str!("../presets/sde_mlmc_small.toml")),
];

/// Long-running presets with large step counts and batch sizes.
pub const FULL_PRESETS: [(&str, &str); 4] = [
    ("bs_call_full", include_str!("../presets/bs_call_full.toml")),
    ("worst_of_full", include_str!("../presets/worst_of_full.toml")),
    ("barrier_full", include_str!("../presets/barrier_full.toml")),
    ("lorentz_full", include_str!("../presets/lorentz_full.toml")),
];

/// TOML text of a preset; full-scale presets require `full_scale`.
pub fn preset_text(name: &str, full_scale: bool) -> Result<&'static str> {
    if let Some((_, text)) = PRESETS.iter().find(|(n, _)| *n == name) {
        return Ok(text);
    }
    match FULL_PRESETS.iter().find(|(n, _)| *n == name) {
        Some((_, text)) if full_scale => Ok(text),
        Some(_) => Err(LrvError::Config(format!("{name} is a full-scale preset; pass the full-scale flag"))),
        None => Err(LrvError::Config(format!("unknown preset {name}"))),
    }
}

pub fn preset(name: &str, full_scale: bool) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml(preset_text(name, full_scale)?)
}
