//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Build with `wasm-pack build crates/demo --target web --out-dir www/pkg`.

use lrv::eval::{errors_on, mc_baseline, qmc_baseline};
use lrv::mcnet::{McNetwork, Network, ProposalSpec};
use lrv::models::barrier::crossing_factors;
use lrv::models::bs_call;
use lrv::models::{BsCall, Kernel};
use lrv::optim::{HyperParams, LrSchedule, OptimizerKind};
use lrv::stats::histogram;
use lrv::trainer::{ExactReference, TrainConfig, Trainer};
use lrv::{ParameterPoint, RngStream, SobolSequence};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Prices a call across spot values `xi` in `[lo, hi]`.
///
/// Returns `points` rows of `[xi, exact, mc, antithetic mc, qmc]`, flattened.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn price_curve(
    t: f64,
    r: f64,
    sigma: f64,
    k: f64,
    lo: f64,
    hi: f64,
    points: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    if points < 2 || samples == 0 {
        return Err(JsError::new("need at least two points and one sample"));
    }
    let sobol = SobolSequence::new(1).map_err(js_err)?;
    let root = RngStream::new(seed, "demo/curve");
    let mut out = Vec::with_capacity(points * 5);
    for i in 0..points {
        let xi = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let p = [xi, t, r, sigma, k];
        let mut s = root.split_indexed("point", i as u64);
        let exact = BsCall.exact(&p).unwrap_or(f64::NAN);
        let mc = mc_baseline(&BsCall, &p, samples, &mut s, false).map_err(js_err)?;
        let anti = mc_baseline(&BsCall, &p, samples, &mut s, true).map_err(js_err)?;
        let qmc = qmc_baseline(&BsCall, &p, samples, &sobol, false).map_err(js_err)?;
        out.extend([xi, exact, mc, anti, qmc]);
    }
    Ok(out)
}

/// Probability that a log-normal bridge from `x` to `y` over `dt` dips below `barrier`.
#[wasm_bindgen]
pub fn bridge_probability(x: f64, y: f64, sigma: f64, dt: f64, barrier: f64) -> f64 {
    crossing_factors(&[sigma; 3], barrier, dt, &[x, f64::MAX, f64::MAX], &[y, f64::MAX, f64::MAX])[0]
}

/// Learns the random variables of a Black-Scholes MC estimator step by step.
#[wasm_bindgen]
pub struct TrainingSession {
    trainer: Trainer<McNetwork<BsCall>, ExactReference<BsCall>>,
    grid: Vec<ParameterPoint>,
    refs: Vec<f64>,
    initial: Vec<f64>,
}

#[wasm_bindgen]
impl TrainingSession {
    #[wasm_bindgen(constructor)]
    pub fn new(samples: usize, batch: usize, rate: f64, seed: u64) -> Result<TrainingSession, JsError> {
        let config = TrainConfig {
            batch,
            steps: u64::MAX,
            optimizer: OptimizerKind::Adam,
            hyper: HyperParams::default(),
            schedule: LrSchedule::constant(rate),
            seed,
            checkpoint_every: 0,
        };
        let domain = bs_call::domain();
        let grid = domain.sample_many(1000, &mut RngStream::new(seed, "demo/grid")).map_err(js_err)?;
        let refs = grid.iter().map(|p| BsCall.exact(p).unwrap_or(f64::NAN)).collect();
        let trainer = Trainer::new(
            McNetwork::new(BsCall, samples),
            ExactReference(BsCall),
            domain,
            &ProposalSpec::mc(samples, 1),
            config,
        )
        .map_err(js_err)?;
        let initial = trainer.theta().to_vec();
        Ok(TrainingSession { trainer, grid, refs, initial })
    }

    /// Runs `n` optimizer steps and returns the last mini-batch loss.
    pub fn step(&mut self, n: u32) -> Result<f64, JsError> {
        let mut loss = f64::NAN;
        for _ in 0..n {
            loss = self.trainer.step().map_err(js_err)?;
        }
        Ok(loss)
    }

    pub fn steps_done(&self) -> f64 {
        self.trainer.step_count() as f64
    }

    /// `[initial L², current L²]` on a fixed evaluation grid.
    pub fn l2_errors(&self) -> Result<Vec<f64>, JsError> {
        let net = self.trainer.network();
        let before = errors_on(&self.grid, &self.refs, |_, p| net.eval(p, &self.initial)).map_err(js_err)?;
        let after = errors_on(&self.grid, &self.refs, |_, p| net.eval(p, self.trainer.theta())).map_err(js_err)?;
        Ok(vec![before.l2, after.l2])
    }

    /// Bin counts of the current and initial random variables on `[-4, 4]`.
    pub fn histograms(&self, bins: usize) -> Result<Vec<f64>, JsError> {
        let now = histogram(self.trainer.theta(), bins, -4.0, 4.0).map_err(js_err)?;
        let init = histogram(&self.initial, bins, -4.0, 4.0).map_err(js_err)?;
        Ok(now.counts.iter().chain(&init.counts).map(|&c| c as f64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_rows_are_close_to_exact() {
        let rows = price_curve(1.0, 0.05, 0.2, 100.0, 90.0, 110.0, 5, 4096, 1).unwrap();
        assert_eq!(rows.len(), 25);
        for row in rows.chunks(5) {
            assert!((row[2] - row[1]).abs() < 1.5);
            assert!((row[4] - row[1]).abs() < 0.1);
        }
    }

    #[test]
    fn training_reduces_error() {
        let mut s = TrainingSession::new(64, 64, 0.05, 3).unwrap();
        s.step(300).unwrap();
        let e = s.l2_errors().unwrap();
        assert!(e[1] < e[0]);
        assert_eq!(s.histograms(8).unwrap().len(), 16);
    }

    #[test]
    fn bridge_probability_is_one_below_barrier() {
        assert_eq!(bridge_probability(70.0, 90.0, 0.3, 0.1, 75.0), 1.0);
        let p = bridge_probability(80.0, 78.0, 0.3, 0.1, 75.0);
        assert!(p > 0.0 && p < 1.0);
    }
}
