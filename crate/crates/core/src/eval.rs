//! Paired Monte Carlo symbol-error-rate evaluation.
//!
//! Every trial derives its random stream from `(seed, snr bits, channel id,
//! rep)`, so all detectors see exactly the same channel, symbols, and noise
//! for a given trial, and two commands evaluating the same channel at the
//! same SNR produce identical trials. Trials fan out across workers; error
//! counts are integers, so the reduction is order-independent.

use crate::detectors::{detect_ml, detect_mmse, detect_zf, DetectError, DetectionProblem};
use crate::hypernet::{hypermimo_detect, HyperNetParams};
use crate::linalg::{from_real_vector, ComplexMatrix};
use crate::mmnet::{mmnet_forward, DetectorInput, MmNetParams};
use crate::modem::{hard_decision, sample_symbols, Constellation, SymbolVector};
use crate::rng::RngStream;
use rayon::prelude::*;

/// A detector under evaluation.
#[derive(Clone, Copy, Debug)]
pub enum Detector<'a> {
    ZeroForcing,
    Mmse,
    Ml,
    /// A fixed channel-specific detector (typically the bank's initial-channel
    /// entry) evaluated on whatever channel the trial presents.
    MmNet(&'a MmNetParams),
    /// Hypernetwork-generated detector.
    HyperNet(&'a HyperNetParams),
}

impl Detector<'_> {
    pub fn detect(&self, p: &DetectionProblem) -> Result<SymbolVector, DetectError> {
        match self {
            Detector::ZeroForcing => detect_zf(p),
            Detector::Mmse => detect_mmse(p),
            Detector::Ml => detect_ml(p),
            Detector::MmNet(params) => {
                let input = DetectorInput::from_complex(p.y, p.channel, p.sigma2);
                let soft = mmnet_forward(params, &input, p.constellation);
                Ok(hard_decision(p.constellation, &from_real_vector(&soft)))
            }
            Detector::HyperNet(theta) => Ok(hypermimo_detect(theta, p)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NamedDetector<'a> {
    pub name: String,
    pub detector: Detector<'a>,
}

impl<'a> NamedDetector<'a> {
    pub fn new(name: &str, detector: Detector<'a>) -> Self {
        Self {
            name: name.to_string(),
            detector,
        }
    }
}

/// One aggregate result line.
#[derive(Clone, Debug, PartialEq)]
pub struct SerRow {
    pub detector: String,
    /// Number of transmissions; each carries `N_u` user-symbols.
    pub trials: u64,
    /// Wrong user-symbols across all trials.
    pub errors: u64,
    pub ser: f64,
    /// 95% binomial half-width via the normal approximation.
    pub ci95: f64,
    /// Fewer than 10 errors: the normal approximation is shaky.
    pub low_count: bool,
}

pub fn ser_row(detector: &str, trials: u64, n_tx: usize, errors: u64) -> SerRow {
    let symbols = (trials * n_tx as u64).max(1);
    let p = errors as f64 / symbols as f64;
    let ci95 = 1.96 * (p * (1.0 - p) / symbols as f64).sqrt();
    SerRow {
        detector: detector.to_string(),
        trials,
        errors,
        ser: p,
        ci95,
        low_count: errors < 10,
    }
}

/// A pool of channels to evaluate at one noise level. `id` must be stable
/// across commands so trial streams line up.
pub struct TrialPlan<'a> {
    pub channels: Vec<(u64, &'a ComplexMatrix)>,
    pub constellation: &'a Constellation,
    pub snr_db: f64,
    pub sigma2: f64,
    pub reps_per_channel: usize,
    pub seed: u64,
}

/// Run all detectors over the pooled paired trials; one row per detector, in
/// the order given.
pub fn paired_ser(
    plan: &TrialPlan,
    detectors: &[NamedDetector],
) -> Result<Vec<SerRow>, DetectError> {
    let n_tx = plan
        .channels
        .first()
        .map(|(_, h)| h.cols())
        .unwrap_or_default();
    let jobs: Vec<(u64, &ComplexMatrix, u64)> = plan
        .channels
        .iter()
        .flat_map(|&(id, h)| (0..plan.reps_per_channel as u64).map(move |rep| (id, h, rep)))
        .collect();

    let counts: Vec<u64> = jobs
        .par_iter()
        .map(|&(id, h, rep)| -> Result<Vec<u64>, DetectError> {
            let mut rng =
                RngStream::derive(plan.seed, &[plan.snr_db.to_bits(), id, rep]);
            let x = sample_symbols(plan.constellation, h.cols(), &mut rng);
            let noise = crate::channel::NoiseModel {
                sigma2: plan.sigma2,
                snr_db: plan.snr_db,
            };
            let y = crate::channel::transmit(h, &x.values, &noise, &mut rng)
                .map_err(|e| DetectError::DimensionMismatch(e.to_string()))?;
            let problem = DetectionProblem {
                y: &y,
                channel: h,
                sigma2: plan.sigma2,
                constellation: plan.constellation,
            };
            let mut errs = Vec::with_capacity(detectors.len());
            for d in detectors {
                let est = d.detector.detect(&problem)?;
                errs.push(
                    est.indices
                        .iter()
                        .zip(x.indices.iter())
                        .filter(|(a, b)| a != b)
                        .count() as u64,
                );
            }
            Ok(errs)
        })
        .try_reduce(
            || vec![0u64; detectors.len()],
            |mut acc, item| {
                for (a, b) in acc.iter_mut().zip(item.iter()) {
                    *a += b;
                }
                Ok(acc)
            },
        )?;

    let trials = jobs.len() as u64;
    Ok(detectors
        .iter()
        .zip(counts.iter())
        .map(|(d, &errors)| ser_row(&d.name, trials, n_tx, errors))
        .collect())
}
