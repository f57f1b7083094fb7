use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{LrvError, Result};
use crate::mcnet::Network;
use crate::models::{AdditiveSde, Kernel};

/// `𝒫_l`: pairs consecutive increments of width `width` into
/// `ϑₙ = (θ_{2n-1} + θ_{2n}) / √2`.
pub fn mlmc_coupling_project(theta_fine: &[f64], width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(theta_fine.len() / 2);
    for pair in theta_fine.chunks_exact(2 * width) {
        let (a, b) = pair.split_at(width);
        out.extend(a.iter().zip(b).map(|(x, y)| (x + y) * FRAC_1_SQRT_2));
    }
    out
}

/// Multilevel network: a level-0 average plus coupled corrections
/// `(1/𝔐_l) Σ [Φ_l(θ) - Φ_{l-1}(𝒫_l θ)]`.
#[derive(Clone, Debug)]
pub struct MlmcNetwork<K> {
    pub levels: Vec<K>,
    pub samples: Vec<usize>,
    pub width: usize,
}

impl<K: Kernel> MlmcNetwork<K> {
    /// `levels[l]` must consume twice as many scalars as `levels[l - 1]`.
    pub fn new(levels: Vec<K>, samples: Vec<usize>, width: usize) -> Result<Self> {
        if levels.is_empty() || levels.len() != samples.len() {
            return Err(LrvError::InvalidProposal("one sample count per level required".into()));
        }
        for l in 1..levels.len() {
            if levels[l].sample_dim() != 2 * levels[l - 1].sample_dim() {
                return Err(LrvError::InvalidProposal(format!("level {l} does not double the block size")));
            }
        }
        if width == 0 || !levels[0].sample_dim().is_multiple_of(width) {
            return Err(LrvError::InvalidProposal("coupling width must divide the level-0 block".into()));
        }
        Ok(Self { levels, samples, width })
    }
}

impl MlmcNetwork<AdditiveSde> {
    /// Levels `sde.refined(l)`, coupling increments of width `sde.dim`.
    pub fn for_sde(sde: AdditiveSde, samples: Vec<usize>) -> Result<Self> {
        let levels = (0..samples.len() as u32).map(|l| sde.refined(l)).collect();
        Self::new(levels, samples, sde.dim)
    }
}

impl<K: Kernel> Network for MlmcNetwork<K> {
    fn num_params(&self) -> usize {
        self.levels.iter().zip(&self.samples).map(|(k, m)| k.sample_dim() * m).sum()
    }

    fn eval(&self, p: &[f64], theta: &[f64]) -> f64 {
        let mut offset = 0;
        let mut total = 0.0;
        for (l, (k, &m)) in self.levels.iter().zip(&self.samples).enumerate() {
            let d = k.sample_dim();
            let mut acc = 0.0;
            for block in theta[offset..offset + m * d].chunks_exact(d) {
                acc += k.value(p, block);
                if l > 0 {
                    acc -= self.levels[l - 1].value(p, &mlmc_coupling_project(block, self.width));
                }
            }
            total += acc / m as f64;
            offset += m * d;
        }
        total
    }

    fn value_grad(&self, p: &[f64], theta: &[f64], grad: &mut [f64]) -> f64 {
        let mut offset = 0;
        let mut total = 0.0;
        let w = self.width;
        for (l, (k, &m)) in self.levels.iter().zip(&self.samples).enumerate() {
            let d = k.sample_dim();
            let inv = 1.0 / m as f64;
            let mut coarse_grad = vec![0.0; d / 2];
            let mut acc = 0.0;
            let range = offset..offset + m * d;
            for (block, g) in theta[range.clone()].chunks_exact(d).zip(grad[range].chunks_exact_mut(d)) {
                acc += k.value_grad(p, block, g);
                if l > 0 {
                    let coarse = mlmc_coupling_project(block, w);
                    acc -= self.levels[l - 1].value_grad(p, &coarse, &mut coarse_grad);
                    for (n, cg) in coarse_grad.chunks_exact(w).enumerate() {
                        for i in 0..w {
                            let back = cg[i] * FRAC_1_SQRT_2;
                            g[2 * n * w + i] -= back;
                            g[(2 * n + 1) * w + i] -= back;
                        }
                    }
                }
                for v in g.iter_mut() {
                    *v *= inv;
                }
            }
            total += acc * inv;
            offset += m * d;
        }
        total
    }
}
