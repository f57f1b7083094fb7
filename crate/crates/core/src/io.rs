//! Artifact files: parameter vectors, checkpoints and CSV tables.
//!
//! Binary artifacts are an 8-byte magic, a little-endian `u32` header length,
//! a JSON header and then little-endian `f64` arrays whose lengths the header
//! lists in order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LrvError, Result};
use crate::eval::ErrorReport;
use crate::mcnet::{ProposalSpec, ThetaVector};
use crate::optim::{HyperParams, LrSchedule, OptimizerKind, OptimizerState};
use crate::trainer::{Checkpoint, LossRecord};

pub const THETA_MAGIC: &[u8; 8] = b"LRVTHETA";
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LRVCKPT1";

fn encode<H: Serialize>(magic: &[u8; 8], header: &H, arrays: &[&[f64]]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let len = u32::try_from(json.len()).map_err(|_| LrvError::Artifact("header too large".into()))?;
    let mut out = Vec::with_capacity(12 + json.len() + 8 * arrays.iter().map(|a| a.len()).sum::<usize>());
    out.extend_from_slice(magic);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    for a in arrays {
        for v in a.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn decode<H: DeserializeOwned>(
    magic: &[u8; 8],
    bytes: &[u8],
    lengths: impl Fn(&H) -> Vec<usize>,
) -> Result<(H, Vec<Vec<f64>>)> {
    if bytes.len() < 12 || &bytes[..8] != magic {
        return Err(LrvError::Artifact("bad magic".into()));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes")) as usize;
    let body = bytes.get(12..12 + len).ok_or_else(|| LrvError::Artifact("truncated header".into()))?;
    let header: H = serde_json::from_slice(body)?;
    let mut rest = &bytes[12 + len..];
    let mut arrays = Vec::new();
    for n in lengths(&header) {
        if rest.len() < 8 * n {
            return Err(LrvError::Artifact("truncated data".into()));
        }
        let (head, tail) = rest.split_at(8 * n);
        arrays.push(head.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))).collect());
        rest = tail;
    }
    if !rest.is_empty() {
        return Err(LrvError::Artifact("trailing bytes".into()));
    }
    Ok((header, arrays))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Metadata stored next to a parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaHeader {
    pub version: u32,
    /// Model name as in the experiment config.
    pub model: String,
    pub layout: ProposalSpec,
    pub seed: u64,
    pub config_hash: String,
    pub step: u64,
    pub len: usize,
}

pub fn encode_theta(header: &ThetaHeader, theta: &[f64]) -> Result<Vec<u8>> {
    if header.len != theta.len() {
        return Err(LrvError::LayoutMismatch { expected: header.len, got: theta.len() });
    }
    encode(THETA_MAGIC, header, &[theta])
}

/// Parses a theta file and checks the values against the stored layout.
pub fn decode_theta(bytes: &[u8]) -> Result<(ThetaHeader, ThetaVector)> {
    let (header, mut arrays) = decode(THETA_MAGIC, bytes, |h: &ThetaHeader| vec![h.len])?;
    let theta = ThetaVector::new(arrays.pop().expect("one array"), header.layout.clone())?;
    Ok((header, theta))
}

pub fn write_theta(path: &Path, header: &ThetaHeader, theta: &[f64]) -> Result<()> {
    write_bytes(path, &encode_theta(header, theta)?)
}

pub fn read_theta(path: &Path) -> Result<(ThetaHeader, ThetaVector)> {
    decode_theta(&fs::read(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CheckpointHeader {
    version: u32,
    seed: u64,
    step: u64,
    kind: OptimizerKind,
    hyper: HyperParams,
    schedule: LrSchedule,
    lengths: [usize; 4],
}

pub fn encode_checkpoint(c: &Checkpoint) -> Result<Vec<u8>> {
    let o = &c.optimizer;
    let header = CheckpointHeader {
        version: 1,
        seed: c.seed,
        step: c.step,
        kind: o.kind,
        hyper: o.hyper,
        schedule: o.schedule.clone(),
        lengths: [c.theta.len(), o.first.len(), o.second.len(), o.delta_avg.len()],
    };
    encode(CHECKPOINT_MAGIC, &header, &[&c.theta, &o.first, &o.second, &o.delta_avg])
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let (h, arrays) = decode(CHECKPOINT_MAGIC, bytes, |h: &CheckpointHeader| h.lengths.to_vec())?;
    let mut it = arrays.into_iter();
    let mut next = || it.next().expect("four arrays");
    let theta = next();
    let optimizer = OptimizerState {
        kind: h.kind,
        hyper: h.hyper,
        schedule: h.schedule,
        step: h.step,
        first: next(),
        second: next(),
        delta_avg: next(),
    };
    let fresh = OptimizerState::new(optimizer.kind, optimizer.hyper, optimizer.schedule.clone(), theta.len());
    if (fresh.first.len(), fresh.second.len(), fresh.delta_avg.len())
        != (optimizer.first.len(), optimizer.second.len(), optimizer.delta_avg.len())
    {
        return Err(LrvError::Artifact("optimizer accumulators do not match the parameter vector".into()));
    }
    Ok(Checkpoint { seed: h.seed, step: h.step, theta, optimizer })
}

pub fn write_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    write_bytes(path, &encode_checkpoint(c)?)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

/// One line of an error table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub method: String,
    pub num_params: usize,
    pub num_samples: usize,
    pub errors: ErrorReport,
    pub train_time: f64,
    pub seed: u64,
    pub config_hash: String,
    pub epsilon: f64,
    /// `key=value` pairs joined by commas.
    pub hyperparams: String,
}

pub const CSV_HEADER: &str = "method;num-params;num-samples;l1-error;l-2-error;l-inf-error;train-time;eval-time;seed;config-hash;epsilon;hyperparams";

/// Index of the wall-clock columns, which differ between identical runs.
pub const CSV_TIME_COLUMNS: [usize; 2] = [6, 7];

impl CsvRow {
    pub fn to_line(&self) -> String {
        let e = &self.errors;
        format!(
            "{};{};{};{:e};{:e};{:e};{:.3};{:.3};{};{};{:e};{}",
            self.method,
            self.num_params,
            self.num_samples,
            e.l1,
            e.l2,
            e.linf,
            self.train_time,
            e.wall_clock,
            self.seed,
            self.config_hash,
            self.epsilon,
            self.hyperparams
        )
    }
}

/// Drops the wall-clock columns of a CSV line.
pub fn mask_times(line: &str) -> String {
    line.split(';')
        .enumerate()
        .map(|(i, f)| if CSV_TIME_COLUMNS.contains(&i) { "*" } else { f })
        .collect::<Vec<_>>()
        .join(";")
}

/// Appends rows to `path`, writing the header first if the file is new.
pub fn append_rows(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let fresh = !path.exists();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{CSV_HEADER}")?;
    }
    for r in rows {
        writeln!(f, "{}", r.to_line())?;
    }
    Ok(())
}

pub fn loss_trace_csv(trace: &[LossRecord]) -> String {
    let mut s = String::from("step;loss;lr;wall-clock\n");
    for r in trace {
        s.push_str(&format!("{};{:e};{:e};{:.3}\n", r.step, r.loss, r.lr, r.wall_clock));
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}
