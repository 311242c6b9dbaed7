//! The experiment pipeline: channel generation, bank building, training,
//! and the two SER studies.
//!
//! Stage streams derive from the experiment seed with fixed tags, so each
//! command is reproducible in isolation and reruns yield identical
//! artifacts.

use crate::artifacts::{load_model, save_model, Workspace};
use crate::config::ExperimentConfig;
use crate::report::{low_count_warnings, ser_vs_hop_csv, ser_vs_snr_csv};
use crate::CliError;
use mimo_detect::bank::{
    bank_summary, build_bank, load_bank, load_channel_archive, save_bank, save_channel_archive,
    ArchiveMeta, BankError, BankMeta, ChannelArchive, ModelBank,
};
use mimo_detect::channel::{jakes_sequence, sample_kronecker, sigma2_for_snr};
use mimo_detect::eval::{paired_ser, Detector, NamedDetector, SerRow, TrialPlan};
use mimo_detect::hypernet::{train, HyperNetParams};
use mimo_detect::linalg::ComplexMatrix;
use mimo_detect::mmnet::pretrain_mmnet;
use mimo_detect::modem::{make_qam, Constellation};
use mimo_detect::rng::RngStream;
use std::fs;
use std::path::{Path, PathBuf};

const STAGE_CHANNELS: u64 = 1;
const STAGE_BANK: u64 = 2;
const STAGE_TRAIN: u64 = 3;
const STAGE_PRETRAIN_ONE: u64 = 4;

fn constellation(cfg: &ExperimentConfig) -> Result<Constellation, CliError> {
    make_qam(cfg.system.modulation_order).map_err(|e| CliError::Config(e.to_string()))
}

fn bank_meta(cfg: &ExperimentConfig) -> BankMeta {
    BankMeta {
        n_rx: cfg.system.n_rx,
        n_tx: cfg.system.n_tx,
        modulation_order: cfg.system.modulation_order,
        layers: cfg.system.mmnet_layers,
        rho: cfg.channel.rho,
        rho_k: cfg.channel.rho_k,
        seed: cfg.seed,
        pretrain: cfg.pretrain(),
    }
}

fn missing(e: BankError, what: &str, dir: &Path, hint: &str) -> CliError {
    match e {
        BankError::Io { .. } => CliError::MissingArtifact(format!(
            "{what} not found under {}; {hint}",
            dir.display()
        )),
        other => other.into(),
    }
}

pub fn load_channels(ws: &Workspace) -> Result<ChannelArchive, CliError> {
    let dir = ws.channels_dir();
    load_channel_archive(&dir)
        .map_err(|e| missing(e, "test channels", &dir, "run gen-channels first"))
}

pub fn load_bank_artifact(ws: &Workspace) -> Result<ModelBank, CliError> {
    let dir = ws.bank_dir();
    load_bank(&dir).map_err(|e| missing(e, "model bank", &dir, "run build-bank first"))
}

/// Draw the shared initial channel and the test sequences, and archive them.
pub fn cmd_gen_channels(cfg: &ExperimentConfig, ws: &Workspace) -> Result<ChannelArchive, CliError> {
    let kron = cfg.kronecker()?;
    let jakes = cfg.jakes()?;
    let mut rng = RngStream::derive(cfg.seed, &[STAGE_CHANNELS]);
    let h0 = sample_kronecker(&kron, &mut rng).map_err(|e| CliError::Config(e.to_string()))?;
    let sequences = (0..cfg.evaluation.n_test_sequences)
        .map(|_| jakes_sequence(&h0, &jakes, &mut rng))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let archive = ChannelArchive {
        meta: ArchiveMeta {
            n_rx: cfg.system.n_rx,
            n_tx: cfg.system.n_tx,
            rho: cfg.channel.rho,
            rho_k: cfg.channel.rho_k,
            horizon: cfg.channel.horizon,
            seed: cfg.seed,
        },
        h0,
        sequences,
    };
    save_channel_archive(&archive, &ws.channels_dir())?;
    Ok(archive)
}

/// Build the pretrained-detector bank from the archived initial channel.
pub fn cmd_build_bank(cfg: &ExperimentConfig, ws: &Workspace) -> Result<usize, CliError> {
    let archive = load_channels(ws)?;
    let c = constellation(cfg)?;
    let jakes = cfg.jakes()?;
    let mut rng = RngStream::derive(cfg.seed, &[STAGE_BANK]);
    let bank = build_bank(
        &archive.h0,
        &jakes,
        cfg.bank.n_sequences,
        &c,
        bank_meta(cfg),
        &mut rng,
    )?;
    save_bank(&bank, &ws.bank_dir())?;
    Ok(bank.len())
}

/// Pretrain a single detector on the archived initial channel; stored as a
/// one-entry bank for inspection.
pub fn cmd_pretrain_one(cfg: &ExperimentConfig, ws: &Workspace) -> Result<PathBuf, CliError> {
    let archive = load_channels(ws)?;
    let c = constellation(cfg)?;
    let mut rng = RngStream::derive(cfg.seed, &[STAGE_PRETRAIN_ONE]);
    let pretrain = cfg.pretrain();
    let params = pretrain_mmnet(&archive.h0, cfg.mm_dims(), &pretrain, &c, &mut rng)
        .map_err(CliError::from)?;
    let bank = ModelBank {
        meta: bank_meta(cfg),
        entries: vec![mimo_detect::bank::BankEntry {
            channel: archive.h0.clone(),
            sigma2_ref: pretrain.reference_sigma2(cfg.mm_dims()),
            params,
            provenance: (0, 0),
        }],
    };
    let dir = ws.pretrain_one_dir();
    save_bank(&bank, &dir)?;
    Ok(dir)
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub log_path: PathBuf,
    pub final_loss: f64,
}

/// Train the hypernetwork at the configured (or overridden) beta and
/// persist the model and its training log.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    ws: &Workspace,
    beta_override: Option<f64>,
    mut progress: impl FnMut(&mimo_detect::hypernet::LogRow),
) -> Result<TrainOutcome, CliError> {
    let train_cfg = cfg.train_config(beta_override);
    let c = constellation(cfg)?;
    let kron = cfg.kronecker()?;
    let bank = if train_cfg.beta > 0.0 {
        load_bank_artifact(ws)?
    } else {
        ModelBank {
            meta: bank_meta(cfg),
            entries: Vec::new(),
        }
    };
    let mut init_rng = RngStream::derive(cfg.seed, &[STAGE_TRAIN, train_cfg.beta.to_bits(), 0]);
    let mut theta0 = HyperNetParams::init(cfg.mm_dims(), cfg.training.hidden_units, &mut init_rng);
    theta0.output_gain = cfg.training.output_gain;
    theta0.output_bias = cfg.training.output_bias;

    let mut train_rng = RngStream::derive(cfg.seed, &[STAGE_TRAIN, train_cfg.beta.to_bits(), 1]);
    let (theta, log) = train(
        &theta0,
        &train_cfg,
        &bank,
        &kron,
        &c,
        &mut train_rng,
        &mut progress,
    )?;

    let model_path = ws.model_path(train_cfg.beta);
    save_model(&theta, &model_path)?;
    let log_path = ws.train_log_path(train_cfg.beta);
    if let Some(parent) = log_path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&log_path, log.to_csv())?;
    Ok(TrainOutcome {
        model_path,
        log_path,
        final_loss: log.rows.last().map_or(f64::NAN, |r| r.loss_total),
    })
}

/// Everything the SER studies need on hand.
pub struct EvalArtifacts {
    pub archive: ChannelArchive,
    pub bank: ModelBank,
    pub hypermimo: HyperNetParams,
    pub hypermimo_lr: HyperNetParams,
}

pub fn load_eval_artifacts(ws: &Workspace) -> Result<EvalArtifacts, CliError> {
    let archive = load_channels(ws)?;
    let bank = load_bank_artifact(ws)?;
    bank.h0_entry().ok_or_else(|| {
        CliError::Other("bank has no initial-channel entry (sequence 0, hop 0)".into())
    })?;
    let hypermimo = load_model(&ws.model_path(0.0)).map_err(|e| match e {
        CliError::MissingArtifact(m) => {
            CliError::MissingArtifact(format!("{m}; run train --beta 0 first"))
        }
        other => other,
    })?;
    let hypermimo_lr = load_model(&ws.model_path(1.0)).map_err(|e| match e {
        CliError::MissingArtifact(m) => {
            CliError::MissingArtifact(format!("{m}; run train --beta 1 first"))
        }
        other => other,
    })?;
    Ok(EvalArtifacts {
        archive,
        bank,
        hypermimo,
        hypermimo_lr,
    })
}

fn detector_lineup<'a>(artifacts: &'a EvalArtifacts) -> Vec<NamedDetector<'a>> {
    vec![
        NamedDetector::new("zf", Detector::ZeroForcing),
        NamedDetector::new("mmse", Detector::Mmse),
        NamedDetector::new("ml", Detector::Ml),
        NamedDetector::new(
            "mmnet",
            Detector::MmNet(&artifacts.bank.h0_entry().expect("checked at load").params),
        ),
        NamedDetector::new("hypermimo", Detector::HyperNet(&artifacts.hypermimo)),
        NamedDetector::new("hypermimo-lr", Detector::HyperNet(&artifacts.hypermimo_lr)),
    ]
}

/// Stable channel id shared by both SER commands: sequences enumerate their
/// hops contiguously.
fn channel_id(seq_idx: usize, hop: usize, horizon: usize) -> u64 {
    (seq_idx * (horizon + 1) + hop) as u64
}

/// Pool every hop of every test sequence.
fn pooled_channels(archive: &ChannelArchive) -> Vec<(u64, &ComplexMatrix)> {
    let horizon = archive.meta.horizon;
    archive
        .sequences
        .iter()
        .enumerate()
        .flat_map(|(si, seq)| {
            (0..=horizon).map(move |t| (channel_id(si, t, horizon), seq.hop(t)))
        })
        .collect()
}

fn reps_for(trials_per_point: usize, channels: usize) -> usize {
    trials_per_point.div_ceil(channels).max(1)
}

pub fn warn_low_counts(rows: &[SerRow]) {
    for w in low_count_warnings(rows.iter()) {
        eprintln!("{w}");
    }
}

/// SER as a function of SNR, pooled over all test-sequence hops, all
/// detectors paired on identical trials.
pub fn cmd_ser_vs_snr(cfg: &ExperimentConfig, ws: &Workspace) -> Result<PathBuf, CliError> {
    let artifacts = load_eval_artifacts(ws)?;
    let c = constellation(cfg)?;
    let detectors = detector_lineup(&artifacts);
    let channels = pooled_channels(&artifacts.archive);
    let reps = reps_for(cfg.evaluation.trials_per_point, channels.len());
    let mut rows = Vec::new();
    for &snr_db in &cfg.evaluation.snr_grid_db {
        let plan = TrialPlan {
            channels: channels.clone(),
            constellation: &c,
            snr_db,
            sigma2: sigma2_for_snr(snr_db, cfg.system.n_tx, cfg.system.n_rx),
            reps_per_channel: reps,
            seed: cfg.seed,
        };
        let result = paired_ser(&plan, &detectors).map_err(|e| CliError::Other(e.to_string()))?;
        warn_low_counts(&result);
        rows.extend(result.into_iter().map(|r| (snr_db, r)));
    }
    let dir = ws.reports_dir();
    fs::create_dir_all(&dir)?;
    let path = dir.join("ser_vs_snr.csv");
    fs::write(&path, ser_vs_snr_csv(&rows))?;
    Ok(path)
}

/// SER per hop at a fixed SNR, pooled over the test sequences.
pub fn cmd_ser_vs_hop(
    cfg: &ExperimentConfig,
    ws: &Workspace,
    snr_db: f64,
) -> Result<PathBuf, CliError> {
    let artifacts = load_eval_artifacts(ws)?;
    let c = constellation(cfg)?;
    let detectors = detector_lineup(&artifacts);
    let horizon = artifacts.archive.meta.horizon;
    let n_seq = artifacts.archive.sequences.len();
    let reps = reps_for(cfg.evaluation.trials_per_point, n_seq);
    let mut rows = Vec::new();
    for hop in 0..=horizon {
        let channels: Vec<(u64, &ComplexMatrix)> = artifacts
            .archive
            .sequences
            .iter()
            .enumerate()
            .map(|(si, seq)| (channel_id(si, hop, horizon), seq.hop(hop)))
            .collect();
        let plan = TrialPlan {
            channels,
            constellation: &c,
            snr_db,
            sigma2: sigma2_for_snr(snr_db, cfg.system.n_tx, cfg.system.n_rx),
            reps_per_channel: reps,
            seed: cfg.seed,
        };
        let result = paired_ser(&plan, &detectors).map_err(|e| CliError::Other(e.to_string()))?;
        warn_low_counts(&result);
        rows.extend(result.into_iter().map(|r| (hop as u32, snr_db, r)));
    }
    let dir = ws.reports_dir();
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("ser_vs_hop_{snr_db}dB.csv"));
    fs::write(&path, ser_vs_hop_csv(&rows))?;
    Ok(path)
}

/// Human-readable bank manifest summary.
pub fn cmd_bank_inspect(path: &Path) -> Result<String, CliError> {
    let bank =
        load_bank(path).map_err(|e| missing(e, "model bank", path, "point --path at a bank"))?;
    Ok(bank_summary(&bank))
}
