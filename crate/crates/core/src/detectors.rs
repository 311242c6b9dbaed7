//! Classical baseline detectors: zero forcing, MMSE, and exhaustive
//! maximum likelihood.
//!
//! The linear detectors run on the equivalent real model, where ridge
//! regularization with `lambda = sigma2` reproduces the complex MMSE filter
//! `(H^H H + sigma2 I)^{-1} H^H y` exactly for unit-energy symbols.

use crate::linalg::{
    from_real_vector, solve_regularized, to_real_composite, to_real_vector, ComplexMatrix,
    LinalgError,
};
use crate::modem::{hard_decision, Constellation, SymbolVector};
use num_complex::Complex64;
use thiserror::Error;

/// Candidate count above which exhaustive search refuses to run.
pub const ML_ENUMERATION_CAP: usize = 1 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("channel is singular for this detector")]
    SingularChannel,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("search space of {0} candidates exceeds the cap of {1}")]
    SearchSpaceTooLarge(usize, usize),
}

/// One detection instance: observation, channel state, and constellation.
#[derive(Clone, Copy, Debug)]
pub struct DetectionProblem<'a> {
    pub y: &'a [Complex64],
    pub channel: &'a ComplexMatrix,
    pub sigma2: f64,
    pub constellation: &'a Constellation,
}

impl<'a> DetectionProblem<'a> {
    fn check_dims(&self) -> Result<(), DetectError> {
        if self.channel.rows() != self.y.len() {
            return Err(DetectError::DimensionMismatch(format!(
                "channel is {}x{} but observation has length {}",
                self.channel.rows(),
                self.channel.cols(),
                self.y.len()
            )));
        }
        Ok(())
    }
}

fn solve_linear(p: &DetectionProblem, lambda: f64) -> Result<SymbolVector, DetectError> {
    p.check_dims()?;
    let h_real = to_real_composite(p.channel);
    let y_real = to_real_vector(p.y);
    let soft_real = solve_regularized(&h_real, lambda, &y_real).map_err(|e| match e {
        LinalgError::Singular => DetectError::SingularChannel,
        other => DetectError::DimensionMismatch(other.to_string()),
    })?;
    let soft = from_real_vector(&soft_real);
    Ok(hard_decision(p.constellation, &soft))
}

/// Zero forcing: hard decision of the least-squares solution `H^+ y`.
pub fn detect_zf(p: &DetectionProblem) -> Result<SymbolVector, DetectError> {
    solve_linear(p, 0.0)
}

/// MMSE: hard decision of `(H^H H + sigma2 I)^{-1} H^H y`.
pub fn detect_mmse(p: &DetectionProblem) -> Result<SymbolVector, DetectError> {
    solve_linear(p, p.sigma2)
}

/// Exact maximum likelihood by exhaustive search over all `K^{N_u}`
/// candidate symbol vectors, enumerated row-major over user indices with
/// ties broken by lexicographic order.
pub fn detect_ml(p: &DetectionProblem) -> Result<SymbolVector, DetectError> {
    p.check_dims()?;
    let n_tx = p.channel.cols();
    let k = p.constellation.order();
    let total = k
        .checked_pow(n_tx as u32)
        .filter(|&t| t <= ML_ENUMERATION_CAP)
        .ok_or_else(|| {
            DetectError::SearchSpaceTooLarge(k.saturating_pow(n_tx as u32), ML_ENUMERATION_CAP)
        })?;

    let mut best_indices = vec![0usize; n_tx];
    let mut best_cost = f64::INFINITY;
    let mut indices = vec![0usize; n_tx];
    let mut x = vec![Complex64::new(0.0, 0.0); n_tx];
    for candidate in 0..total {
        let mut rem = candidate;
        for u in (0..n_tx).rev() {
            indices[u] = rem % k;
            rem /= k;
        }
        for (xu, &iu) in x.iter_mut().zip(indices.iter()) {
            *xu = p.constellation.point(iu);
        }
        let image = p.channel.matvec(&x);
        let cost: f64 = p
            .y
            .iter()
            .zip(image.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        if cost < best_cost {
            best_cost = cost;
            best_indices.copy_from_slice(&indices);
        }
    }
    Ok(SymbolVector::from_indices(p.constellation, best_indices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_kronecker, transmit, KroneckerConfig, NoiseModel};
    use crate::modem::{make_qam, sample_symbols};
    use crate::rng::RngStream;

    fn problem<'a>(
        y: &'a [Complex64],
        h: &'a ComplexMatrix,
        sigma2: f64,
        c: &'a Constellation,
    ) -> DetectionProblem<'a> {
        DetectionProblem {
            y,
            channel: h,
            sigma2,
            constellation: c,
        }
    }

    #[test]
    fn zf_recovers_noiseless_symbols() {
        let c = make_qam(4).unwrap();
        let cfg = KroneckerConfig::new(4, 2, 0.6).unwrap();
        let mut rng = RngStream::from_seed(31);
        for _ in 0..50 {
            let h = sample_kronecker(&cfg, &mut rng).unwrap();
            let x = sample_symbols(&c, 2, &mut rng);
            let y = h.matvec(&x.values);
            let est = detect_zf(&problem(&y, &h, 0.0, &c)).unwrap();
            assert_eq!(est.indices, x.indices);
        }
    }

    #[test]
    fn mmse_equals_zf_at_zero_noise() {
        let c = make_qam(4).unwrap();
        let cfg = KroneckerConfig::new(4, 2, 0.6).unwrap();
        let mut rng = RngStream::from_seed(32);
        let noise = NoiseModel::from_snr(8.0, 2, 4);
        for _ in 0..50 {
            let h = sample_kronecker(&cfg, &mut rng).unwrap();
            let x = sample_symbols(&c, 2, &mut rng);
            let y = transmit(&h, &x.values, &noise, &mut rng).unwrap();
            let zf = detect_zf(&problem(&y, &h, 0.0, &c)).unwrap();
            let mmse0 = detect_mmse(&problem(&y, &h, 0.0, &c)).unwrap();
            assert_eq!(zf.indices, mmse0.indices);
        }
    }

    #[test]
    fn mmse_scalar_shrinkage_formula() {
        // H = I, sigma2 = 1: soft estimate is (1+1)^{-1} * 1 * y = y/2, so
        // y = 2 * point decides to exactly that point.
        let c = make_qam(4).unwrap();
        let h = ComplexMatrix::identity(2);
        let target = [c.point(1), c.point(2)];
        let y: Vec<Complex64> = target.iter().map(|p| 2.0 * p).collect();
        let est = detect_mmse(&problem(&y, &h, 1.0, &c)).unwrap();
        assert_eq!(est.values, target);
    }

    #[test]
    fn ml_is_the_exhaustive_argmin() {
        let c = make_qam(4).unwrap();
        let cfg = KroneckerConfig::new(4, 2, 0.6).unwrap();
        let mut rng = RngStream::from_seed(33);
        let noise = NoiseModel::from_snr(5.0, 2, 4);
        for _ in 0..100 {
            let h = sample_kronecker(&cfg, &mut rng).unwrap();
            let x = sample_symbols(&c, 2, &mut rng);
            let y = transmit(&h, &x.values, &noise, &mut rng).unwrap();
            let est = detect_ml(&problem(&y, &h, noise.sigma2, &c)).unwrap();
            let cost_of = |iv: &[usize]| -> f64 {
                let cand: Vec<Complex64> = iv.iter().map(|&i| c.point(i)).collect();
                let im = h.matvec(&cand);
                y.iter().zip(im.iter()).map(|(a, b)| (a - b).norm_sqr()).sum()
            };
            let est_cost = cost_of(&est.indices);
            for a in 0..4 {
                for b in 0..4 {
                    assert!(
                        est_cost <= cost_of(&[a, b]) + 1e-12,
                        "candidate ({a},{b}) beats the returned argmin"
                    );
                }
            }
        }
    }

    #[test]
    fn ml_recovers_noiseless_symbols() {
        let c = make_qam(4).unwrap();
        let cfg = KroneckerConfig::new(4, 2, 0.6).unwrap();
        let mut rng = RngStream::from_seed(34);
        for _ in 0..50 {
            let h = sample_kronecker(&cfg, &mut rng).unwrap();
            let x = sample_symbols(&c, 2, &mut rng);
            let y = h.matvec(&x.values);
            let est = detect_ml(&problem(&y, &h, 0.01, &c)).unwrap();
            assert_eq!(est.indices, x.indices);
        }
    }

    #[test]
    fn ml_rejects_oversized_search_space() {
        let c = make_qam(64).unwrap();
        let h = ComplexMatrix::identity(8);
        let y = vec![Complex64::new(0.0, 0.0); 8];
        // 64^8 = 2^48 candidates.
        let err = detect_ml(&problem(&y, &h, 0.1, &c)).unwrap_err();
        assert!(matches!(err, DetectError::SearchSpaceTooLarge(_, _)));
    }

    #[test]
    fn singular_channel_is_reported() {
        let c = make_qam(4).unwrap();
        let h = ComplexMatrix::from_data(
            2,
            2,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        let y = vec![Complex64::new(1.0, 0.0); 2];
        assert_eq!(
            detect_zf(&problem(&y, &h, 0.0, &c)),
            Err(DetectError::SingularChannel)
        );
        // MMSE regularizes, so it stays solvable.
        assert!(detect_mmse(&problem(&y, &h, 0.1, &c)).is_ok());
    }

    #[test]
    fn outputs_are_constellation_members() {
        let c = make_qam(4).unwrap();
        let cfg = KroneckerConfig::new(4, 2, 0.6).unwrap();
        let mut rng = RngStream::from_seed(36);
        let noise = NoiseModel::from_snr(5.0, 2, 4);
        for _ in 0..200 {
            let h = sample_kronecker(&cfg, &mut rng).unwrap();
            let x = sample_symbols(&c, 2, &mut rng);
            let y = transmit(&h, &x.values, &noise, &mut rng).unwrap();
            for est in [
                detect_zf(&problem(&y, &h, noise.sigma2, &c)).unwrap(),
                detect_mmse(&problem(&y, &h, noise.sigma2, &c)).unwrap(),
                detect_ml(&problem(&y, &h, noise.sigma2, &c)).unwrap(),
            ] {
                for (&i, v) in est.indices.iter().zip(est.values.iter()) {
                    assert!(i < 4);
                    assert_eq!(*v, c.point(i));
                }
            }
        }
    }

    #[test]
    fn paired_trial_detector_ordering() {
        // ML minimizes the exact likelihood, so on shared trials its error
        // count stays at or below the linear detectors' up to binomial noise;
        // MMSE sits between ML and ZF at moderate SNR.
        let c = make_qam(4).unwrap();
        let cfg = KroneckerConfig::new(4, 2, 0.6).unwrap();
        let trials = 10_000;
        for snr_db in [5.0, 10.0] {
            let noise = NoiseModel::from_snr(snr_db, cfg.n_tx, cfg.n_rx);
            let mut errs = [0usize; 3]; // ml, mmse, zf
            for trial in 0..trials {
                let mut rng = RngStream::derive(9000, &[snr_db.to_bits(), trial]);
                let h = sample_kronecker(&cfg, &mut rng).unwrap();
                let x = sample_symbols(&c, cfg.n_tx, &mut rng);
                let y = transmit(&h, &x.values, &noise, &mut rng).unwrap();
                let p = problem(&y, &h, noise.sigma2, &c);
                let dets = [
                    detect_ml(&p).unwrap(),
                    detect_mmse(&p).unwrap(),
                    detect_zf(&p).unwrap(),
                ];
                for (e, d) in errs.iter_mut().zip(dets.iter()) {
                    *e += d
                        .indices
                        .iter()
                        .zip(x.indices.iter())
                        .filter(|(a, b)| a != b)
                        .count();
                }
            }
            let [ml, mmse, zf] = errs.map(|e| e as f64);
            let slack = |e: f64| 2.0 * e.max(1.0).sqrt();
            assert!(ml <= mmse + slack(mmse), "{snr_db} dB: ML {ml} vs MMSE {mmse}");
            assert!(ml <= zf + slack(zf), "{snr_db} dB: ML {ml} vs ZF {zf}");
            assert!(
                mmse <= zf + slack(zf),
                "{snr_db} dB: MMSE {mmse} vs ZF {zf}"
            );
        }
    }
}
