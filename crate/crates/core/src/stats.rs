//! Histograms and sample moments of learned variables.

use serde::{Deserialize, Serialize};

use crate::error::{LrvError, Result};

/// Mean, variance, skewness and (non-excess) kurtosis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn moments(xs: &[f64]) -> Result<Moments> {
    if xs.len() < 2 {
        return Err(LrvError::Config("moments need at least two values".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let central = |k: i32| xs.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / n;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    Ok(Moments {
        n: xs.len(),
        mean,
        variance: m2 * n / (n - 1.0),
        skewness: if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 },
        kurtosis: if m2 > 0.0 { m4 / (m2 * m2) } else { 0.0 },
    })
}

/// Equal-width bins on `[lo, hi]`; values outside are counted separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

pub fn histogram(xs: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins == 0 || lo >= hi || !lo.is_finite() || !hi.is_finite() {
        return Err(LrvError::Config(format!("invalid histogram range [{lo}, {hi}] with {bins} bins")));
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + i as f64 * width }).collect();
    let mut h = Histogram { edges, counts: vec![0; bins], below: 0, above: 0 };
    for &x in xs {
        if x < lo {
            h.below += 1;
        } else if x > hi {
            h.above += 1;
        } else {
            let i = (((x - lo) / width) as usize).min(bins - 1);
            h.counts[i] += 1;
        }
    }
    Ok(h)
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin-lo;bin-hi;count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{};{};{}\n", self.edges[i], self.edges[i + 1], c));
        }
        s
    }
}
