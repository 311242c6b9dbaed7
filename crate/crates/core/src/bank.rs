//! Build, persist, and load the bank of pretrained channel-specific
//! detectors, plus the channel-archive format that shares its layout.
//!
//! On disk an artifact is a directory holding a human-readable
//! `manifest.toml` (format version, kind, dimensions, hyperparameters,
//! per-entry file names and SHA-256 checksums) and one binary blob per
//! entry: little-endian 64-bit floats, channel first (real parts row-major,
//! then imaginary parts), then the flattened detector parameters in the
//! normative order. Saving the same value twice yields byte-identical
//! files.

use crate::channel::{jakes_sequence, ChannelSequence, JakesConfig};
use crate::linalg::ComplexMatrix;
use crate::mmnet::{pretrain_mmnet, MmNetDims, MmNetParams, PretrainConfig, TrainError};
use crate::modem::Constellation;
use crate::rng::RngStream;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;
const BANK_KIND: &str = "model-bank";
const CHANNEL_KIND: &str = "channel-archive";

#[derive(Debug, Error)]
pub enum BankError {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest parse error: {0}")]
    Manifest(String),
    #[error("unsupported format version {got}; this build reads version {expected}")]
    FormatVersion { got: u32, expected: u32 },
    #[error("artifact kind is {got:?}, expected {expected:?}")]
    WrongKind { got: String, expected: String },
    #[error("checksum mismatch for {file}")]
    ChecksumMismatch { file: String },
    #[error("{file} is truncated or oversized: {got} floats, expected {expected}")]
    BadLength {
        file: String,
        got: usize,
        expected: usize,
    },
    #[error("pretraining failed for sequence {sequence}, hop {hop}: {source}")]
    PretrainFailed {
        sequence: u32,
        hop: u32,
        source: TrainError,
    },
    #[error("metadata does not match the provided channel: {0}")]
    MetaMismatch(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BankError + '_ {
    move |source| BankError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// System-level metadata stored with a bank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankMeta {
    pub n_rx: usize,
    pub n_tx: usize,
    pub modulation_order: usize,
    pub layers: usize,
    pub rho: f64,
    pub rho_k: f64,
    pub seed: u64,
    pub pretrain: PretrainConfig,
}

impl BankMeta {
    pub fn dims(&self) -> MmNetDims {
        MmNetDims {
            n_rx: self.n_rx,
            n_tx: self.n_tx,
            layers: self.layers,
        }
    }
}

/// One pretrained detector anchored to its channel.
#[derive(Clone, Debug, PartialEq)]
pub struct BankEntry {
    pub channel: ComplexMatrix,
    pub sigma2_ref: f64,
    pub params: MmNetParams,
    /// `(sequence id, hop)`; the shared initial channel is `(0, 0)`.
    pub provenance: (u32, u32),
}

/// The persisted set of pretrained channel-specific detectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBank {
    pub meta: BankMeta,
    pub entries: Vec<BankEntry>,
}

impl ModelBank {
    /// The entry for the shared initial channel.
    pub fn h0_entry(&self) -> Option<&BankEntry> {
        self.entries.iter().find(|e| e.provenance == (0, 0))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Generate the Gauss-Markov sequences and pretrain one detector per
/// distinct channel. The shared initial channel is trained exactly once, so
/// the entry count is `n_sequences * horizon + 1`.
///
/// Pretraining fans out across entries with independently split streams;
/// results are assembled in deterministic order.
pub fn build_bank(
    h0: &ComplexMatrix,
    jakes: &JakesConfig,
    n_sequences: usize,
    constellation: &Constellation,
    meta: BankMeta,
    rng: &mut RngStream,
) -> Result<ModelBank, BankError> {
    if (h0.rows(), h0.cols()) != (meta.n_rx, meta.n_tx) {
        return Err(BankError::MetaMismatch(format!(
            "channel is {}x{} but metadata says {}x{}",
            h0.rows(),
            h0.cols(),
            meta.n_rx,
            meta.n_tx
        )));
    }
    let dims = meta.dims();
    let sigma2_ref = meta.pretrain.reference_sigma2(dims);

    let mut jobs: Vec<(u32, u32, ComplexMatrix)> = vec![(0, 0, h0.clone())];
    for s in 1..=n_sequences {
        let seq = jakes_sequence(h0, jakes, rng).map_err(|e| {
            BankError::MetaMismatch(format!("sequence generation failed: {e}"))
        })?;
        for t in 1..=jakes.horizon {
            jobs.push((s as u32, t as u32, seq.hop(t).clone()));
        }
    }
    let streams: Vec<RngStream> = jobs.iter().map(|_| rng.split()).collect();

    let results: Vec<Result<BankEntry, BankError>> = jobs
        .into_par_iter()
        .zip(streams.into_par_iter())
        .map(|((sequence, hop, channel), mut stream)| {
            let params =
                pretrain_mmnet(&channel, dims, &meta.pretrain, constellation, &mut stream)
                    .map_err(|source| BankError::PretrainFailed {
                        sequence,
                        hop,
                        source,
                    })?;
            Ok(BankEntry {
                channel,
                sigma2_ref,
                params,
                provenance: (sequence, hop),
            })
        })
        .collect();

    let mut entries = Vec::with_capacity(results.len());
    for r in results {
        entries.push(r?);
    }
    Ok(ModelBank { meta, entries })
}

// ---------------------------------------------------------------------------
// binary blob helpers

fn matrix_to_floats(m: &ComplexMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.data().len());
    out.extend(m.data().iter().map(|z| z.re));
    out.extend(m.data().iter().map(|z| z.im));
    out
}

fn matrix_from_floats(rows: usize, cols: usize, floats: &[f64]) -> ComplexMatrix {
    let n = rows * cols;
    assert_eq!(floats.len(), 2 * n);
    let data = (0..n)
        .map(|i| Complex64::new(floats[i], floats[n + i]))
        .collect();
    ComplexMatrix::from_data(rows, cols, data)
}

fn floats_to_bytes(floats: &[f64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(floats.len() * 8);
    for f in floats {
        bytes.extend_from_slice(&f.to_le_bytes());
    }
    bytes
}

fn bytes_to_floats(bytes: &[u8]) -> Option<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    )
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

fn write_blob(dir: &Path, file: &str, floats: &[f64]) -> Result<String, BankError> {
    let bytes = floats_to_bytes(floats);
    let path = dir.join(file);
    fs::write(&path, &bytes).map_err(io_err(&path))?;
    Ok(sha256_hex(&bytes))
}

fn read_blob(dir: &Path, file: &str, sha256: &str, expected_floats: usize) -> Result<Vec<f64>, BankError> {
    let path = dir.join(file);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    if sha256_hex(&bytes) != sha256 {
        return Err(BankError::ChecksumMismatch { file: file.into() });
    }
    let floats = bytes_to_floats(&bytes).ok_or_else(|| BankError::BadLength {
        file: file.into(),
        got: bytes.len(),
        expected: expected_floats * 8,
    })?;
    if floats.len() != expected_floats {
        return Err(BankError::BadLength {
            file: file.into(),
            got: floats.len(),
            expected: expected_floats,
        });
    }
    Ok(floats)
}

// ---------------------------------------------------------------------------
// bank persistence

#[derive(Serialize, Deserialize)]
struct BankManifest {
    format_version: u32,
    kind: String,
    meta: BankMeta,
    entries: Vec<BankEntryRecord>,
}

#[derive(Serialize, Deserialize)]
struct BankEntryRecord {
    file: String,
    sequence: u32,
    hop: u32,
    sigma2_ref: f64,
    sha256: String,
}

#[derive(Deserialize)]
struct ManifestHeader {
    format_version: u32,
    kind: String,
}

/// Validate version and kind before attempting the full parse, so stale or
/// mismatched artifacts produce a pointed error instead of a field-level
/// deserialization failure.
fn check_header(text: &str, expected_kind: &str) -> Result<(), BankError> {
    let header: ManifestHeader =
        toml::from_str(text).map_err(|e| BankError::Manifest(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(BankError::FormatVersion {
            got: header.format_version,
            expected: FORMAT_VERSION,
        });
    }
    if header.kind != expected_kind {
        return Err(BankError::WrongKind {
            got: header.kind,
            expected: expected_kind.to_string(),
        });
    }
    Ok(())
}

pub fn save_bank(bank: &ModelBank, dir: &Path) -> Result<(), BankError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut records = Vec::with_capacity(bank.entries.len());
    for (idx, entry) in bank.entries.iter().enumerate() {
        let file = format!("entry_{idx:04}.bin");
        let mut floats = matrix_to_floats(&entry.channel);
        floats.extend(entry.params.flatten());
        let sha256 = write_blob(dir, &file, &floats)?;
        records.push(BankEntryRecord {
            file,
            sequence: entry.provenance.0,
            hop: entry.provenance.1,
            sigma2_ref: entry.sigma2_ref,
            sha256,
        });
    }
    let manifest = BankManifest {
        format_version: FORMAT_VERSION,
        kind: BANK_KIND.into(),
        meta: bank.meta.clone(),
        entries: records,
    };
    let text = toml::to_string(&manifest).expect("manifest serialization");
    let path = dir.join("manifest.toml");
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(())
}

pub fn load_bank(dir: &Path) -> Result<ModelBank, BankError> {
    let path = dir.join("manifest.toml");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    check_header(&text, BANK_KIND)?;
    let manifest: BankManifest =
        toml::from_str(&text).map_err(|e| BankError::Manifest(e.to_string()))?;
    let meta = manifest.meta;
    let dims = meta.dims();
    let channel_floats = 2 * meta.n_rx * meta.n_tx;
    let expected = channel_floats + dims.param_len();
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for rec in &manifest.entries {
        let floats = read_blob(dir, &rec.file, &rec.sha256, expected)?;
        let channel = matrix_from_floats(meta.n_rx, meta.n_tx, &floats[..channel_floats]);
        let params = MmNetParams::from_flat(dims, &floats[channel_floats..]).map_err(|e| {
            BankError::Manifest(format!("{}: {e}", rec.file))
        })?;
        entries.push(BankEntry {
            channel,
            sigma2_ref: rec.sigma2_ref,
            params,
            provenance: (rec.sequence, rec.hop),
        });
    }
    Ok(ModelBank { meta, entries })
}

// ---------------------------------------------------------------------------
// channel archive persistence

/// Metadata for an archived set of test channel sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMeta {
    pub n_rx: usize,
    pub n_tx: usize,
    pub rho: f64,
    pub rho_k: f64,
    pub horizon: usize,
    pub seed: u64,
}

/// A shared initial channel plus the sequences that evolve from it.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelArchive {
    pub meta: ArchiveMeta,
    pub h0: ComplexMatrix,
    pub sequences: Vec<ChannelSequence>,
}

#[derive(Serialize, Deserialize)]
struct ChannelManifest {
    format_version: u32,
    kind: String,
    meta: ArchiveMeta,
    h0_file: String,
    h0_sha256: String,
    sequences: Vec<SequenceRecord>,
}

#[derive(Serialize, Deserialize)]
struct SequenceRecord {
    file: String,
    sha256: String,
}

pub fn save_channel_archive(archive: &ChannelArchive, dir: &Path) -> Result<(), BankError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let h0_file = "h0.bin".to_string();
    let h0_sha256 = write_blob(dir, &h0_file, &matrix_to_floats(&archive.h0))?;
    let mut records = Vec::with_capacity(archive.sequences.len());
    for (idx, seq) in archive.sequences.iter().enumerate() {
        let file = format!("seq_{idx:04}.bin");
        let mut floats = Vec::new();
        for step in seq.steps() {
            floats.extend(matrix_to_floats(step));
        }
        let sha256 = write_blob(dir, &file, &floats)?;
        records.push(SequenceRecord { file, sha256 });
    }
    let manifest = ChannelManifest {
        format_version: FORMAT_VERSION,
        kind: CHANNEL_KIND.into(),
        meta: archive.meta.clone(),
        h0_file,
        h0_sha256,
        sequences: records,
    };
    let text = toml::to_string(&manifest).expect("manifest serialization");
    let path = dir.join("manifest.toml");
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(())
}

pub fn load_channel_archive(dir: &Path) -> Result<ChannelArchive, BankError> {
    let path = dir.join("manifest.toml");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    check_header(&text, CHANNEL_KIND)?;
    let manifest: ChannelManifest =
        toml::from_str(&text).map_err(|e| BankError::Manifest(e.to_string()))?;
    let meta = manifest.meta.clone();
    let per_matrix = 2 * meta.n_rx * meta.n_tx;
    let h0_floats = read_blob(dir, &manifest.h0_file, &manifest.h0_sha256, per_matrix)?;
    let h0 = matrix_from_floats(meta.n_rx, meta.n_tx, &h0_floats);
    let mut sequences = Vec::with_capacity(manifest.sequences.len());
    for rec in &manifest.sequences {
        let floats = read_blob(dir, &rec.file, &rec.sha256, per_matrix * meta.horizon)?;
        let steps = (0..meta.horizon)
            .map(|t| {
                matrix_from_floats(
                    meta.n_rx,
                    meta.n_tx,
                    &floats[t * per_matrix..(t + 1) * per_matrix],
                )
            })
            .collect();
        sequences.push(ChannelSequence::new(h0.clone(), steps));
    }
    Ok(ChannelArchive {
        meta: manifest.meta,
        h0,
        sequences,
    })
}

/// One-line-per-entry summary of a bank manifest for the CLI.
pub fn bank_summary(bank: &ModelBank) -> String {
    let meta = &bank.meta;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "model bank: {} entries, {}x{} antennas, {}-QAM, {} layers",
        bank.entries.len(),
        meta.n_rx,
        meta.n_tx,
        meta.modulation_order,
        meta.layers
    );
    let _ = writeln!(
        out,
        "channel model: rho = {}, rho_k = {}, seed = {}",
        meta.rho, meta.rho_k, meta.seed
    );
    let _ = writeln!(
        out,
        "pretraining: {} iterations, batch {}, lr {}, SNR {}..{} dB",
        meta.pretrain.iterations,
        meta.pretrain.batch,
        meta.pretrain.lr,
        meta.pretrain.snr_db_min,
        meta.pretrain.snr_db_max
    );
    for e in &bank.entries {
        let _ = writeln!(
            out,
            "  seq {:>3} hop {} sigma2_ref {:.6}",
            e.provenance.0, e.provenance.1, e.sigma2_ref
        );
    }
    out
}
