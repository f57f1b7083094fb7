//! Error estimation over the parameter box and the classical baselines:
//! plain and antithetic Monte Carlo, plain and antithetic quasi-Monte Carlo,
//! and the large-sample reference oracle.

use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::domain::{ParameterDomain, ParameterPoint};
use crate::error::{LrvError, Result};
use crate::models::{Kernel, MaybeAntithetic};
use crate::normal::inverse_cdf;
use crate::par::{map_chunks, CHUNK};
use crate::rng::RngStream;
use crate::sobol::SobolSequence;

/// Empirical `L¹`, `L²` and `L∞` errors over a point set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub n_eval: usize,
    pub se_l1: f64,
    pub se_l2: f64,
    /// Seconds spent evaluating the approximation.
    pub wall_clock: f64,
}

/// A Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// Uniform evaluation points; shared between methods so comparisons are paired.
pub fn error_grid(domain: &ParameterDomain, n: usize, stream: &mut RngStream) -> Result<Vec<ParameterPoint>> {
    domain.sample_many(n, stream)
}

/// Errors of `approx` against precomputed `refs` on `points`.
pub fn errors_on<F>(points: &[ParameterPoint], refs: &[f64], approx: F) -> Result<ErrorReport>
where
    F: Fn(usize, &[f64]) -> f64 + Sync + Send,
{
    if points.len() != refs.len() {
        return Err(LrvError::DimensionMismatch { expected: points.len(), got: refs.len() });
    }
    if points.is_empty() {
        return Err(LrvError::Config("error grid is empty".into()));
    }
    let clock = Stopwatch::start();
    let parts =
        map_chunks(points.len(), CHUNK, |range| range.map(|i| approx(i, &points[i]) - refs[i]).collect::<Vec<f64>>());
    let wall_clock = clock.seconds();
    let errs: Vec<f64> = parts.into_iter().flatten().collect();
    let mut report = summarize(&errs);
    report.wall_clock = wall_clock;
    Ok(report)
}

/// Draws `n` uniform points and measures `approx` against `reference`.
pub fn estimate_errors<A, R>(
    approx: A,
    reference: R,
    domain: &ParameterDomain,
    n: usize,
    stream: &mut RngStream,
) -> Result<ErrorReport>
where
    A: Fn(&[f64]) -> f64 + Sync + Send,
    R: Fn(&[f64]) -> f64 + Sync + Send,
{
    let points = error_grid(domain, n, stream)?;
    let refs: Vec<f64> = map_chunks(points.len(), CHUNK, |r| r.map(|i| reference(&points[i])).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect();
    errors_on(&points, &refs, |_, p| approx(p))
}

/// Error norms of a vector of pointwise errors.
pub fn summarize(errs: &[f64]) -> ErrorReport {
    let n = errs.len() as f64;
    let abs_mean = errs.iter().map(|e| e.abs()).sum::<f64>() / n;
    let sq_mean = errs.iter().map(|e| e * e).sum::<f64>() / n;
    let linf = errs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let l1 = abs_mean.min(linf);
    // The norms are ordered exactly; clamping only removes rounding noise.
    let l2 = sq_mean.sqrt().clamp(l1, linf);
    let (se_l1, se_l2) = if errs.len() > 1 {
        let var_abs = errs.iter().map(|e| (e.abs() - abs_mean).powi(2)).sum::<f64>() / (n - 1.0);
        let var_sq = errs.iter().map(|e| (e * e - sq_mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se_sq = (var_sq / n).sqrt();
        ((var_abs / n).sqrt(), if l2 > 0.0 { se_sq / (2.0 * l2) } else { 0.0 })
    } else {
        (0.0, 0.0)
    };
    ErrorReport { l1, l2, linf, n_eval: errs.len(), se_l1, se_l2, wall_clock: 0.0 }
}

/// `(1/M) Σ φ(p, W_m)`, or its antithetic form, with standard error.
pub fn mc_estimate<K: Kernel>(
    kernel: &K,
    p: &[f64],
    samples: usize,
    stream: &mut RngStream,
    antithetic: bool,
) -> Result<Estimate> {
    if samples == 0 {
        return Err(LrvError::Config("Monte Carlo needs at least one sample".into()));
    }
    let k = MaybeAntithetic { kernel, antithetic };
    let mut w = vec![0.0; k.sample_dim()];
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        stream.fill_standard_normal(&mut w);
        let v = k.value(p, &w);
        sum += v;
        sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let se = if samples > 1 { ((sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt() } else { f64::NAN };
    Ok(Estimate { mean, se })
}

/// Plain or antithetic Monte Carlo estimate of `E[φ(p, W)]`.
pub fn mc_baseline<K: Kernel>(
    kernel: &K,
    p: &[f64],
    samples: usize,
    stream: &mut RngStream,
    antithetic: bool,
) -> Result<f64> {
    if samples == 0 {
        return Err(LrvError::Config("Monte Carlo needs at least one sample".into()));
    }
    let mut ws = vec![0.0; samples * kernel.sample_dim()];
    stream.fill_standard_normal(&mut ws);
    Ok(MaybeAntithetic { kernel, antithetic }.sum_value(p, &ws) / samples as f64)
}

/// `Φ⁻¹` applied to `samples` consecutive Sobol points starting at the cursor.
pub fn qmc_normals(sobol: &SobolSequence, samples: usize) -> Result<Vec<f64>> {
    let d = sobol.dim();
    let mut ws = vec![0.0; samples * d];
    for (j, w) in ws.chunks_exact_mut(d).enumerate() {
        sobol.point_at(sobol.cursor() + j as u64, w);
        for x in w.iter_mut() {
            *x = inverse_cdf(*x)?;
        }
    }
    Ok(ws)
}

/// Average of `φ(p, Φ⁻¹(x_m))` over Sobol points, or of the `±` pair.
pub fn qmc_baseline<K: Kernel>(
    kernel: &K,
    p: &[f64],
    samples: usize,
    sobol: &SobolSequence,
    antithetic: bool,
) -> Result<f64> {
    if sobol.dim() != kernel.sample_dim() {
        return Err(LrvError::DimensionMismatch { expected: kernel.sample_dim(), got: sobol.dim() });
    }
    if samples == 0 {
        return Err(LrvError::Config("QMC needs at least one point".into()));
    }
    let ws = qmc_normals(sobol, samples)?;
    Ok(MaybeAntithetic { kernel, antithetic }.sum_value(p, &ws) / samples as f64)
}

/// Paired replications of plain and antithetic MC on the same draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntitheticComparison {
    pub mse_standard: f64,
    pub mse_antithetic: f64,
    pub se_standard: f64,
    pub se_antithetic: f64,
    /// Replications where the antithetic squared error is strictly smaller.
    pub antithetic_wins: usize,
    /// Replications with different squared errors.
    pub decided: usize,
    /// One-sided sign-test p-value for "antithetic is better".
    pub sign_test_p: f64,
}

/// MSEs of both estimators against `exact` over `reps` independent replications.
pub fn variance_compare_antithetic<K: Kernel>(
    kernel: &K,
    p: &[f64],
    exact: f64,
    samples: usize,
    reps: usize,
    stream: &RngStream,
) -> Result<AntitheticComparison> {
    if reps < 2 || samples == 0 {
        return Err(LrvError::Config("need at least two replications and one sample".into()));
    }
    let mut std_err = Vec::with_capacity(reps);
    let mut anti_err = Vec::with_capacity(reps);
    let mut ws = vec![0.0; samples * kernel.sample_dim()];
    for r in 0..reps {
        stream.split_indexed("rep", r as u64).fill_standard_normal(&mut ws);
        let m = kernel.sum_value(p, &ws) / samples as f64;
        let a = MaybeAntithetic { kernel, antithetic: true }.sum_value(p, &ws) / samples as f64;
        std_err.push((m - exact).powi(2));
        anti_err.push((a - exact).powi(2));
    }
    let mean_se = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    let (mse_standard, se_standard) = mean_se(&std_err);
    let (mse_antithetic, se_antithetic) = mean_se(&anti_err);
    let antithetic_wins = anti_err.iter().zip(&std_err).filter(|(a, s)| a < s).count();
    let decided = anti_err.iter().zip(&std_err).filter(|(a, s)| a != s).count();
    Ok(AntitheticComparison {
        mse_standard,
        mse_antithetic,
        se_standard,
        se_antithetic,
        antithetic_wins,
        decided,
        sign_test_p: sign_test_upper(antithetic_wins, decided),
    })
}

/// `P(Bin(n, 1/2) ≥ k)`.
pub fn sign_test_upper(k: usize, n: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let ln_pmf = |j: usize| {
        libm::lgamma(n as f64 + 1.0)
            - libm::lgamma(j as f64 + 1.0)
            - libm::lgamma((n - j) as f64 + 1.0)
            - n as f64 * std::f64::consts::LN_2
    };
    (k..=n).map(|j| ln_pmf(j).exp()).sum::<f64>().min(1.0)
}

/// Samples per independent block of the reference oracle.
const ORACLE_BLOCK: usize = 1 << 14;

/// `u(p)` from the closed form when available, otherwise an antithetic MC
/// average over `budget` draws.
pub fn reference_oracle<K: Kernel>(kernel: &K, p: &[f64], budget: usize, stream: &RngStream) -> Result<Estimate> {
    if let Some(u) = kernel.exact(p) {
        return Ok(Estimate { mean: u, se: 0.0 });
    }
    if budget == 0 {
        return Err(LrvError::Config("reference oracle needs a positive sample budget".into()));
    }
    let anti = MaybeAntithetic { kernel, antithetic: true };
    let blocks = budget.div_ceil(ORACLE_BLOCK);
    let parts = map_chunks(blocks, 1, |range| {
        let mut w = vec![0.0; anti.sample_dim()];
        let (mut sum, mut sq) = (0.0, 0.0);
        for j in range {
            let mut s = stream.split_indexed("oracle", j as u64);
            let len = ORACLE_BLOCK.min(budget - j * ORACLE_BLOCK);
            for _ in 0..len {
                s.fill_standard_normal(&mut w);
                let v = anti.value(p, &w);
                sum += v;
                sq += v * v;
            }
        }
        (sum, sq)
    });
    let (sum, sq) = parts.iter().fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    let n = budget as f64;
    let mean = sum / n;
    let se = if budget > 1 { ((sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt() } else { f64::NAN };
    Ok(Estimate { mean, se })
}

/// Oracle values for a point set; point `i` uses `stream.split_indexed("point", i)`.
pub fn reference_values<K: Kernel>(
    kernel: &K,
    points: &[ParameterPoint],
    budget: usize,
    stream: &RngStream,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        out.push(reference_oracle(kernel, p, budget, &stream.split_indexed("point", i as u64))?.mean);
    }
    Ok(out)
}
