//! Artifact layout under the output directory, and the trained-model file
//! format.
//!
//! ```text
//! out/
//!   channels/        gen-channels: shared H0 + test sequences
//!   bank/            build-bank: pretrained detector bank
//!   pretrain-one/    pretrain-one: single-entry bank
//!   models/          train: hypermimo.model, hypermimo_lr.model, logs
//!   reports/         ser-vs-snr, ser-vs-hop CSVs
//! ```
//!
//! A model file is binary: magic `MDHN`, a little-endian u32 version, six
//! u32 dimensions, the output transform, the flat weights as little-endian
//! f64, and a trailing SHA-256 over everything before it.

use crate::CliError;
use mimo_detect::hypernet::HyperNetParams;
use mimo_detect::mmnet::MmNetDims;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

const MODEL_MAGIC: &[u8; 4] = b"MDHN";
const MODEL_VERSION: u32 = 1;

/// Output-directory layout.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub out: PathBuf,
}

impl Workspace {
    pub fn new(out: &Path) -> Self {
        Self {
            out: out.to_path_buf(),
        }
    }

    pub fn channels_dir(&self) -> PathBuf {
        self.out.join("channels")
    }

    pub fn bank_dir(&self) -> PathBuf {
        self.out.join("bank")
    }

    pub fn pretrain_one_dir(&self) -> PathBuf {
        self.out.join("pretrain-one")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out.join("models")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out.join("reports")
    }

    /// `hypermimo.model` for beta = 0, `hypermimo_lr.model` otherwise.
    pub fn model_path(&self, beta: f64) -> PathBuf {
        self.models_dir().join(format!("{}.model", model_stem(beta)))
    }

    pub fn train_log_path(&self, beta: f64) -> PathBuf {
        self.models_dir().join(format!("train_{}.csv", model_stem(beta)))
    }
}

pub fn model_stem(beta: f64) -> &'static str {
    if beta == 0.0 {
        "hypermimo"
    } else {
        "hypermimo_lr"
    }
}

pub fn save_model(theta: &HyperNetParams, path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mm = theta.mm_dims();
    let dims = theta.dims();
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for v in [
        mm.n_rx as u32,
        mm.n_tx as u32,
        mm.layers as u32,
        dims.input as u32,
        dims.hidden as u32,
        dims.output as u32,
    ] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend_from_slice(&theta.output_gain.to_le_bytes());
    bytes.extend_from_slice(&theta.output_bias.to_le_bytes());
    let flat = theta.to_flat();
    bytes.extend_from_slice(&(flat.len() as u64).to_le_bytes());
    for f in &flat {
        bytes.extend_from_slice(&f.to_le_bytes());
    }
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<HyperNetParams, CliError> {
    let bytes = fs::read(path).map_err(|e| {
        CliError::MissingArtifact(format!("trained model not found at {}: {e}", path.display()))
    })?;
    let corrupt = |what: &str| CliError::Other(format!("{}: {what}", path.display()));
    if bytes.len() < 4 + 4 + 24 + 16 + 8 + 32 {
        return Err(corrupt("model file is truncated"));
    }
    let (payload, checksum) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(payload).as_slice() != checksum {
        return Err(corrupt("model checksum mismatch"));
    }
    if &payload[..4] != MODEL_MAGIC {
        return Err(corrupt("not a model file (bad magic)"));
    }
    let mut off = 4;
    let mut read_u32 = |bytes: &[u8]| {
        let v = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        off += 4;
        v
    };
    let version = read_u32(payload);
    if version != MODEL_VERSION {
        return Err(corrupt(&format!(
            "unsupported model version {version}, expected {MODEL_VERSION}"
        )));
    }
    let n_rx = read_u32(payload) as usize;
    let n_tx = read_u32(payload) as usize;
    let layers = read_u32(payload) as usize;
    let _input = read_u32(payload) as usize;
    let hidden = read_u32(payload) as usize;
    let _output = read_u32(payload) as usize;
    let gain = f64::from_le_bytes(payload[off..off + 8].try_into().unwrap());
    let bias = f64::from_le_bytes(payload[off + 8..off + 16].try_into().unwrap());
    let count = u64::from_le_bytes(payload[off + 16..off + 24].try_into().unwrap()) as usize;
    let data = &payload[off + 24..];
    if data.len() != count * 8 {
        return Err(corrupt("model weight payload has the wrong length"));
    }
    let flat: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mm = MmNetDims {
        n_rx,
        n_tx,
        layers,
    };
    HyperNetParams::from_flat(mm, hidden, gain, bias, &flat)
        .map_err(|e| corrupt(&e.to_string()))
}
