//! Monte Carlo-type networks `Ψ(p, θ)`: estimators whose random draws have
//! been replaced by the parameter vector `θ`.
//!
//! `θ` is flat. Blocks are ordered level-major, then sample-major, then by
//! coordinate, so offsets agree with the index arithmetic of the estimators.

mod mc;
mod mlmc;
mod mlp;

use serde::{Deserialize, Serialize};

use crate::error::{LrvError, Result};
use crate::rng::RngStream;

pub use mc::McNetwork;
pub use mlmc::{mlmc_coupling_project, MlmcNetwork};
pub use mlp::{mlp_counts, mlp_offset, MlpNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    Mc,
    AntitheticMc,
    McEuler,
    Mlmc,
    Mlp,
}

/// Structure of a network and hence of its parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalSpec {
    pub kind: ProposalKind,
    /// `[𝔐]` for the MC kinds and the Picard base, `[𝔐₀, …, 𝔐_L]` for MLMC.
    pub samples: Vec<usize>,
    /// Scalars per sample block; for MLMC the level-0 block size `𝐝₀`.
    pub per_sample_dim: usize,
    /// Time steps of one path (MC-Euler).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Picard level `n` (MLP).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_level: Option<u32>,
    /// Width of the noise increments paired by the MLMC coupling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_width: Option<usize>,
    /// Coordinates inside each sample block initialised from `U[0, 1]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uniform_coords: Vec<usize>,
}

impl ProposalSpec {
    fn base(kind: ProposalKind, samples: Vec<usize>, per_sample_dim: usize) -> Self {
        Self {
            kind,
            samples,
            per_sample_dim,
            steps: None,
            picard_level: None,
            coupling_width: None,
            uniform_coords: Vec::new(),
        }
    }

    pub fn mc(samples: usize, per_sample_dim: usize) -> Self {
        Self::base(ProposalKind::Mc, vec![samples], per_sample_dim)
    }

    pub fn antithetic_mc(samples: usize, per_sample_dim: usize) -> Self {
        Self::base(ProposalKind::AntitheticMc, vec![samples], per_sample_dim)
    }

    pub fn mc_euler(samples: usize, steps: usize, dim: usize) -> Self {
        Self { steps: Some(steps), ..Self::base(ProposalKind::McEuler, vec![samples], steps * dim) }
    }

    /// `samples[l] = 𝔐_l`, level `l` blocks hold `2^l · base_dim` scalars.
    pub fn mlmc(samples: Vec<usize>, base_dim: usize, coupling_width: usize) -> Self {
        Self { coupling_width: Some(coupling_width), ..Self::base(ProposalKind::Mlmc, samples, base_dim) }
    }

    /// `𝔐_l = 2^{L-l}`.
    pub fn mlmc_geometric(levels: u32, base_dim: usize, coupling_width: usize) -> Self {
        Self::mlmc((0..=levels).map(|l| 1usize << (levels - l)).collect(), base_dim, coupling_width)
    }

    pub fn mlp(base: usize, level: u32, per_sample_dim: usize, uniform_coords: Vec<usize>) -> Self {
        Self { picard_level: Some(level), uniform_coords, ..Self::base(ProposalKind::Mlp, vec![base], per_sample_dim) }
    }

    pub fn levels(&self) -> u32 {
        self.samples.len().saturating_sub(1) as u32
    }

    /// Block size at MLMC level `l`.
    pub fn level_dim(&self, l: u32) -> usize {
        self.per_sample_dim << l
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LrvError::InvalidProposal(m.to_string()));
        if self.per_sample_dim == 0 {
            return bad("per-sample dimension must be positive");
        }
        if self.samples.is_empty() || self.samples.contains(&0) {
            return bad("sample counts must be positive");
        }
        if self.uniform_coords.iter().any(|&i| i >= self.per_sample_dim) {
            return bad("uniform coordinate outside the sample block");
        }
        match self.kind {
            ProposalKind::Mc | ProposalKind::AntitheticMc if self.samples.len() != 1 => {
                bad("MC proposals take a single sample count")
            }
            ProposalKind::McEuler => match self.steps {
                Some(n) if n > 0 && self.per_sample_dim.is_multiple_of(n) && self.samples.len() == 1 => Ok(()),
                _ => bad("MC-Euler needs steps dividing the per-sample dimension and one sample count"),
            },
            ProposalKind::Mlmc => {
                if self.samples.windows(2).any(|w| w[0] < w[1]) {
                    return bad("MLMC sample counts must be non-increasing in the level");
                }
                if !self.uniform_coords.is_empty() {
                    return bad("MLMC blocks are Gaussian");
                }
                let c = self.coupling_width.unwrap_or(self.per_sample_dim);
                if c == 0 || !self.per_sample_dim.is_multiple_of(c) {
                    return bad("coupling width must divide the level-0 block size");
                }
                Ok(())
            }
            ProposalKind::Mlp => {
                if self.samples.len() != 1 || self.picard_level.is_none() {
                    return bad("MLP needs one base sample count and a Picard level");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Length `𝔡` of the parameter vector.
    pub fn num_params(&self) -> usize {
        match self.kind {
            ProposalKind::Mc | ProposalKind::AntitheticMc | ProposalKind::McEuler => {
                self.samples[0] * self.per_sample_dim
            }
            ProposalKind::Mlmc => self.samples.iter().enumerate().map(|(l, &m)| m * self.level_dim(l as u32)).sum(),
            ProposalKind::Mlp => {
                mlp_counts(self.samples[0], self.picard_level.unwrap_or(0) as i64) * self.per_sample_dim
            }
        }
    }
}

/// Trainable parameters together with their layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaVector {
    pub values: Vec<f64>,
    pub layout: ProposalSpec,
}

impl ThetaVector {
    pub fn new(values: Vec<f64>, layout: ProposalSpec) -> Result<Self> {
        layout.validate()?;
        let expected = layout.num_params();
        if values.len() != expected {
            return Err(LrvError::LayoutMismatch { expected, got: values.len() });
        }
        Ok(Self { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Draws `Θ₀` from the proposal's sampling law: standard normal entries,
/// except `uniform_coords` of each sample block which are `U[0, 1]`.
pub fn init_theta(spec: &ProposalSpec, stream: &mut RngStream) -> Result<ThetaVector> {
    spec.validate()?;
    let n = spec.num_params();
    let mut values = vec![0.0; n];
    if spec.uniform_coords.is_empty() {
        stream.fill_standard_normal(&mut values);
    } else {
        let width = spec.per_sample_dim;
        for (i, v) in values.iter_mut().enumerate() {
            *v = if spec.uniform_coords.contains(&(i % width)) { stream.uniform() } else { stream.normal() };
        }
    }
    ThetaVector::new(values, spec.clone())
}

/// A parametric family `Ψ(p, θ)`.
pub trait Network: Send + Sync {
    fn num_params(&self) -> usize;

    fn eval(&self, p: &[f64], theta: &[f64]) -> f64;

    /// Returns `Ψ(p, θ)` and overwrites `grad` with `∂Ψ/∂θ`.
    fn value_grad(&self, p: &[f64], theta: &[f64], grad: &mut [f64]) -> f64;

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(LrvError::LayoutMismatch { expected: self.num_params(), got: theta.len() });
        }
        Ok(())
    }
}

impl<N: Network + ?Sized> Network for Box<N> {
    fn num_params(&self) -> usize {
        (**self).num_params()
    }
    fn eval(&self, p: &[f64], theta: &[f64]) -> f64 {
        (**self).eval(p, theta)
    }
    fn value_grad(&self, p: &[f64], theta: &[f64], grad: &mut [f64]) -> f64 {
        (**self).value_grad(p, theta, grad)
    }
}
