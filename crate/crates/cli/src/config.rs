//! Experiment configuration: flat, sectioned TOML whose defaults reproduce
//! the reference system (4 receive antennas, 2 users, 4-QAM, 6 detector
//! layers, correlation 0.6/0.98, 50k training iterations at batch 100).

use crate::CliError;
use mimo_detect::channel::{JakesConfig, KroneckerConfig};
use mimo_detect::hypernet::TrainConfig;
use mimo_detect::mmnet::{MmNetDims, PretrainConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub system: SystemSection,
    pub channel: ChannelSection,
    pub training: TrainingSection,
    pub bank: BankSection,
    pub evaluation: EvaluationSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub n_rx: usize,
    pub n_tx: usize,
    pub modulation_order: usize,
    pub mmnet_layers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub rho_k: f64,
    pub rho: f64,
    pub horizon: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub beta: f64,
    pub batch_channels: usize,
    pub iterations: usize,
    pub snr_db_min: f64,
    pub snr_db_max: f64,
    pub lr_init: f64,
    pub check_interval: usize,
    pub scheduler_factor: f64,
    pub scheduler_floor: f64,
    pub scheduler_patience: usize,
    pub hidden_units: usize,
    pub output_gain: f64,
    pub output_bias: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BankSection {
    pub n_sequences: usize,
    pub pretrain_iterations: usize,
    pub pretrain_batch: usize,
    pub pretrain_lr: f64,
    pub pretrain_init_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub n_test_sequences: usize,
    pub snr_grid_db: Vec<f64>,
    pub trials_per_point: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            system: SystemSection::default(),
            channel: ChannelSection::default(),
            training: TrainingSection::default(),
            bank: BankSection::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            n_rx: 4,
            n_tx: 2,
            modulation_order: 4,
            mmnet_layers: 6,
        }
    }
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            rho_k: 0.6,
            rho: 0.98,
            horizon: 4,
        }
    }
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            beta: 1.0,
            batch_channels: 100,
            iterations: 50_000,
            snr_db_min: 5.0,
            snr_db_max: 10.0,
            lr_init: 1e-3,
            check_interval: 500,
            scheduler_factor: 0.9,
            scheduler_floor: 1e-6,
            scheduler_patience: 1,
            hidden_units: 100,
            output_gain: 1.0,
            output_bias: 0.0,
        }
    }
}

impl Default for BankSection {
    fn default() -> Self {
        Self {
            n_sequences: 140,
            pretrain_iterations: 1000,
            pretrain_batch: 500,
            pretrain_lr: 1e-3,
            pretrain_init_std: 0.01,
        }
    }
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            n_test_sequences: 100,
            snr_grid_db: vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0],
            trials_per_point: 50_000,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.system;
        if s.n_tx < 1 || s.n_rx < s.n_tx {
            return Err(CliError::Config(format!(
                "need n_rx >= n_tx >= 1, got {}x{}",
                s.n_rx, s.n_tx
            )));
        }
        if ![4, 16, 64].contains(&s.modulation_order) {
            return Err(CliError::Config(format!(
                "modulation_order must be 4, 16, or 64, got {}",
                s.modulation_order
            )));
        }
        if s.mmnet_layers == 0 {
            return Err(CliError::Config("mmnet_layers must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.channel.rho_k) {
            return Err(CliError::Config(format!(
                "rho_k must be in [0, 1), got {}",
                self.channel.rho_k
            )));
        }
        if !(0.0..=1.0).contains(&self.channel.rho) {
            return Err(CliError::Config(format!(
                "rho must be in [0, 1], got {}",
                self.channel.rho
            )));
        }
        let t = &self.training;
        if t.beta < 0.0 {
            return Err(CliError::Config(format!("beta must be >= 0, got {}", t.beta)));
        }
        if t.batch_channels < 1 {
            return Err(CliError::Config("batch_channels must be >= 1".into()));
        }
        if !(t.scheduler_factor > 0.0 && t.scheduler_factor < 1.0) {
            return Err(CliError::Config(format!(
                "scheduler_factor must be in (0, 1), got {}",
                t.scheduler_factor
            )));
        }
        if t.snr_db_max < t.snr_db_min {
            return Err(CliError::Config("snr_db_max must be >= snr_db_min".into()));
        }
        if self.evaluation.snr_grid_db.is_empty() {
            return Err(CliError::Config("snr_grid_db must be nonempty".into()));
        }
        if self.evaluation.n_test_sequences == 0 {
            return Err(CliError::Config("n_test_sequences must be >= 1".into()));
        }
        Ok(())
    }

    pub fn mm_dims(&self) -> MmNetDims {
        MmNetDims {
            n_rx: self.system.n_rx,
            n_tx: self.system.n_tx,
            layers: self.system.mmnet_layers,
        }
    }

    pub fn kronecker(&self) -> Result<KroneckerConfig, CliError> {
        KroneckerConfig::new(self.system.n_rx, self.system.n_tx, self.channel.rho_k)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn jakes(&self) -> Result<JakesConfig, CliError> {
        JakesConfig::new(self.channel.rho, self.channel.horizon)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn pretrain(&self) -> PretrainConfig {
        PretrainConfig {
            iterations: self.bank.pretrain_iterations,
            batch: self.bank.pretrain_batch,
            lr: self.bank.pretrain_lr,
            snr_db_min: self.training.snr_db_min,
            snr_db_max: self.training.snr_db_max,
            init_std: self.bank.pretrain_init_std,
        }
    }

    /// Training hyperparameters with `beta` possibly overridden from the
    /// command line.
    pub fn train_config(&self, beta: Option<f64>) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            beta: beta.unwrap_or(t.beta),
            batch_channels: t.batch_channels,
            iterations: t.iterations,
            snr_db_min: t.snr_db_min,
            snr_db_max: t.snr_db_max,
            lr_init: t.lr_init,
            check_interval: t.check_interval,
            scheduler_factor: t.scheduler_factor,
            scheduler_floor: t.scheduler_floor,
            scheduler_patience: t.scheduler_patience,
        }
    }
}
