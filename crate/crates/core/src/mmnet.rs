//! The channel-specific unrolled detector ("main network").
//!
//! Each of the L layers applies a learnable linear correction to the running
//! estimate and then an elementwise Gaussian-posterior denoiser over the
//! per-component constellation levels:
//!
//! ```text
//! x_0 = 0
//! z_t = x_t + A_t (y - H x_t)
//! x_{t+1,i} = denoise(z_{t,i}, softplus(theta2_{t,i}))
//! ```
//!
//! everything in the equivalent real model. The flatten order of the
//! parameters is normative for persistence and for the hypernetwork output:
//! layer-major, within a layer `A_t` row-major followed by `theta2_t`.

use crate::autodiff::{
    adam_step, softplus, AdamState, Gradients, ParamStore, Shape, Tape, Tensor, VarId,
};
use crate::channel::{sigma2_for_snr, transmit, NoiseModel};
use crate::linalg::{to_real_composite, to_real_vector, ComplexMatrix, RealMatrix};
use crate::modem::{sample_symbols, Constellation};
use crate::rng::RngStream;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },
    #[error("parameter vector has length {got}, expected {expected}")]
    BadParamLength { got: usize, expected: usize },
    #[error("a nonempty model bank is required when beta > 0")]
    BankRequired,
}

/// System dimensions of the unrolled detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MmNetDims {
    pub n_rx: usize,
    pub n_tx: usize,
    pub layers: usize,
}

impl MmNetDims {
    /// Flattened parameter count: `L * (4 Nu Nr + 2 Nu)`.
    pub fn param_len(&self) -> usize {
        self.layers * (4 * self.n_tx * self.n_rx + 2 * self.n_tx)
    }

    fn a_len(&self) -> usize {
        4 * self.n_tx * self.n_rx
    }

    fn theta_len(&self) -> usize {
        2 * self.n_tx
    }
}

/// One unrolled layer: full linear correction plus pre-activation denoiser
/// variance parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MmNetLayer {
    /// `2 N_u x 2 N_r` correction matrix.
    pub a: RealMatrix,
    /// Length `2 N_u`; the denoiser variance is `softplus(theta2)`.
    pub theta2: Vec<f64>,
}

/// Parameters of the channel-specific detector.
#[derive(Clone, Debug, PartialEq)]
pub struct MmNetParams {
    dims: MmNetDims,
    layers: Vec<MmNetLayer>,
}

impl MmNetParams {
    pub fn new(dims: MmNetDims, layers: Vec<MmNetLayer>) -> Self {
        assert_eq!(layers.len(), dims.layers, "layer count mismatch");
        for l in &layers {
            assert_eq!((l.a.rows(), l.a.cols()), (2 * dims.n_tx, 2 * dims.n_rx));
            assert_eq!(l.theta2.len(), 2 * dims.n_tx);
        }
        Self { dims, layers }
    }

    pub fn dims(&self) -> MmNetDims {
        self.dims
    }

    pub fn layers(&self) -> &[MmNetLayer] {
        &self.layers
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.a.data().iter().all(|x| x.is_finite()) && l.theta2.iter().all(|x| x.is_finite())
        })
    }

    /// Normative flatten order: layer-major, `A` row-major, then `theta2`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.dims.param_len());
        for l in &self.layers {
            flat.extend_from_slice(l.a.data());
            flat.extend_from_slice(&l.theta2);
        }
        flat
    }

    pub fn from_flat(dims: MmNetDims, flat: &[f64]) -> Result<Self, TrainError> {
        if flat.len() != dims.param_len() {
            return Err(TrainError::BadParamLength {
                got: flat.len(),
                expected: dims.param_len(),
            });
        }
        let (a_len, t_len) = (dims.a_len(), dims.theta_len());
        let mut layers = Vec::with_capacity(dims.layers);
        let mut off = 0;
        for _ in 0..dims.layers {
            let a = RealMatrix::from_data(
                2 * dims.n_tx,
                2 * dims.n_rx,
                flat[off..off + a_len].to_vec(),
            );
            off += a_len;
            let theta2 = flat[off..off + t_len].to_vec();
            off += t_len;
            layers.push(MmNetLayer { a, theta2 });
        }
        Ok(Self { dims, layers })
    }
}

/// Real-composite view of one detection instance.
#[derive(Clone, Debug)]
pub struct DetectorInput {
    pub y_real: Vec<f64>,
    pub h_real: RealMatrix,
    pub sigma2: f64,
}

impl DetectorInput {
    pub fn from_complex(y: &[Complex64], h: &ComplexMatrix, sigma2: f64) -> Self {
        Self {
            y_real: to_real_vector(y),
            h_real: to_real_composite(h),
            sigma2,
        }
    }
}

/// Gaussian-posterior mean over the level alphabet, stabilized by
/// subtracting the largest exponent.
pub fn denoise(z: f64, sigma2_t: f64, levels: &[f64]) -> f64 {
    let mut max_e = f64::NEG_INFINITY;
    for &l in levels {
        let e = -(z - l) * (z - l) / sigma2_t;
        if e > max_e {
            max_e = e;
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &l in levels {
        let w = (-(z - l) * (z - l) / sigma2_t - max_e).exp();
        num += l * w;
        den += w;
    }
    num / den
}

/// Plain (evaluation) forward pass: soft estimate of the real-composite
/// symbol vector, length `2 N_u`.
pub fn mmnet_forward(
    params: &MmNetParams,
    input: &DetectorInput,
    constellation: &Constellation,
) -> Vec<f64> {
    let dims = params.dims;
    assert_eq!(input.y_real.len(), 2 * dims.n_rx, "observation length");
    assert_eq!(
        (input.h_real.rows(), input.h_real.cols()),
        (2 * dims.n_rx, 2 * dims.n_tx),
        "channel shape"
    );
    let levels = constellation.real_levels();
    let mut x = vec![0.0; 2 * dims.n_tx];
    for layer in &params.layers {
        let hx = input.h_real.matvec(&x);
        let residual: Vec<f64> = input
            .y_real
            .iter()
            .zip(hx.iter())
            .map(|(y, p)| y - p)
            .collect();
        let correction = layer.a.matvec(&residual);
        for (i, xi) in x.iter_mut().enumerate() {
            let z = *xi + correction[i];
            let s2 = softplus(layer.theta2[i]);
            *xi = denoise(z, s2, levels);
        }
    }
    x
}

/// Differentiable forward pass reading the parameters from a flat tape
/// vector laid out in the normative flatten order. Returns the soft
/// estimate node.
pub fn mmnet_forward_tape(
    tape: &mut Tape,
    flat_params: VarId,
    dims: MmNetDims,
    input: &DetectorInput,
    constellation: &Constellation,
) -> VarId {
    assert_eq!(
        tape.value(flat_params).len(),
        dims.param_len(),
        "flat parameter length"
    );
    let levels = constellation.real_levels().to_vec();
    let y = tape.constant(Tensor::vector(input.y_real.clone()));
    let h = tape.constant(Tensor::matrix(
        2 * dims.n_rx,
        2 * dims.n_tx,
        input.h_real.data().to_vec(),
    ));
    let mut x = tape.constant(Tensor::vector(vec![0.0; 2 * dims.n_tx]));
    let (a_len, t_len) = (dims.a_len(), dims.theta_len());
    let mut off = 0;
    for _ in 0..dims.layers {
        let a_flat = tape.slice(flat_params, off, a_len);
        let a = tape.reshape(a_flat, Shape::Matrix(2 * dims.n_tx, 2 * dims.n_rx));
        off += a_len;
        let theta2 = tape.slice(flat_params, off, t_len);
        off += t_len;

        let hx = tape.matvec(h, x);
        let residual = tape.sub(y, hx);
        let correction = tape.matvec(a, residual);
        let z = tape.add(x, correction);
        let s2 = tape.softplus(theta2);

        // Log-domain stabilization: the shift enters as a constant and
        // cancels between numerator and denominator, so gradients are
        // unaffected.
        let mut exponents = Vec::with_capacity(levels.len());
        for &l in &levels {
            let d = tape.add_const(z, -l);
            let q = tape.square(d);
            let neg = tape.scale_const(q, -1.0);
            exponents.push(tape.div(neg, s2));
        }
        let mut shift = vec![f64::NEG_INFINITY; t_len];
        for e in &exponents {
            for (m, v) in shift.iter_mut().zip(tape.value(*e).data()) {
                *m = m.max(*v);
            }
        }
        let shift = tape.constant(Tensor::vector(shift));
        let mut num: Option<VarId> = None;
        let mut den: Option<VarId> = None;
        for (e, &l) in exponents.iter().zip(levels.iter()) {
            let centered = tape.sub(*e, shift);
            let w = tape.exp(centered);
            let lw = tape.scale_const(w, l);
            num = Some(match num {
                Some(n) => tape.add(n, lw),
                None => lw,
            });
            den = Some(match den {
                Some(d) => tape.add(d, w),
                None => w,
            });
        }
        x = tape.div(num.unwrap(), den.unwrap());
    }
    x
}

/// Channel-specific pretraining settings.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PretrainConfig {
    pub iterations: usize,
    pub batch: usize,
    pub lr: f64,
    pub snr_db_min: f64,
    pub snr_db_max: f64,
    /// Standard deviation of the random perturbation on the matched-filter
    /// warm start.
    pub init_std: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            batch: 500,
            lr: 1e-3,
            snr_db_min: 5.0,
            snr_db_max: 10.0,
            init_std: 0.01,
        }
    }
}

impl PretrainConfig {
    /// Noise level the detector is anchored to: the midpoint of the
    /// training SNR range.
    pub fn reference_sigma2(&self, dims: MmNetDims) -> f64 {
        sigma2_for_snr(
            0.5 * (self.snr_db_min + self.snr_db_max),
            dims.n_tx,
            dims.n_rx,
        )
    }
}

/// Warm-start initialization: each `A_t` is a small random perturbation of
/// the scaled matched filter `H^T / trace(H^T H)`, and `theta2` starts at
/// `softplus^{-1}(1)`.
pub fn init_params(
    h: &ComplexMatrix,
    dims: MmNetDims,
    init_std: f64,
    rng: &mut RngStream,
) -> MmNetParams {
    let h_real = to_real_composite(h);
    let ht = h_real.transpose();
    let gram = ht.matmul(&h_real);
    let mut trace = 0.0;
    for i in 0..gram.rows() {
        trace += gram[(i, i)];
    }
    let c = 1.0 / trace;
    // softplus(x) = 1  =>  x = ln(e - 1)
    let theta0 = (std::f64::consts::E - 1.0).ln();
    let mut layers = Vec::with_capacity(dims.layers);
    for _ in 0..dims.layers {
        let mut a = RealMatrix::zeros(2 * dims.n_tx, 2 * dims.n_rx);
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                a[(i, j)] = c * ht[(i, j)] + init_std * rng.normal();
            }
        }
        layers.push(MmNetLayer {
            a,
            theta2: vec![theta0; 2 * dims.n_tx],
        });
    }
    MmNetParams::new(dims, layers)
}

fn batch_loss_tape(
    flat: &[f64],
    dims: MmNetDims,
    h: &ComplexMatrix,
    constellation: &Constellation,
    batch: &[(Vec<f64>, Vec<Complex64>, f64)],
) -> (f64, Tensor) {
    let mut tape = Tape::new();
    let params = tape.input(Tensor::vector(flat.to_vec()));
    let mut acc: Option<VarId> = None;
    for (x_real, y, sigma2) in batch {
        let input = DetectorInput::from_complex(y, h, *sigma2);
        let soft = mmnet_forward_tape(&mut tape, params, dims, &input, constellation);
        let truth = tape.constant(Tensor::vector(x_real.clone()));
        let diff = tape.sub(soft, truth);
        let sq = tape.square(diff);
        let item = tape.sum(sq);
        acc = Some(match acc {
            Some(a) => tape.add(a, item),
            None => item,
        });
    }
    let loss = tape.scale_const(acc.expect("nonempty batch"), 1.0 / batch.len() as f64);
    let grads: Gradients = tape.backward(loss);
    (
        tape.value(loss).item(),
        grads.wrt_or_zeros(params, tape.value(params).shape()),
    )
}

/// Train one detector for a fixed channel by minimizing the empirical mean
/// squared symbol error over fresh `(x, noise, snr)` draws.
pub fn pretrain_mmnet(
    h: &ComplexMatrix,
    dims: MmNetDims,
    cfg: &PretrainConfig,
    constellation: &Constellation,
    rng: &mut RngStream,
) -> Result<MmNetParams, TrainError> {
    let init = init_params(h, dims, cfg.init_std, rng);
    let mut store = ParamStore::new();
    store.insert("mmnet", Tensor::vector(init.flatten()));
    let mut adam = AdamState::new(&store, cfg.lr);

    for iteration in 0..cfg.iterations {
        let mut batch = Vec::with_capacity(cfg.batch);
        for _ in 0..cfg.batch {
            let snr_db = rng.uniform(cfg.snr_db_min, cfg.snr_db_max);
            let noise = NoiseModel::from_snr(snr_db, dims.n_tx, dims.n_rx);
            let x = sample_symbols(constellation, dims.n_tx, rng);
            let y = transmit(h, &x.values, &noise, rng).expect("dimensions fixed");
            batch.push((to_real_vector(&x.values), y, noise.sigma2));
        }
        let (loss, grad) =
            batch_loss_tape(store.get("mmnet").data(), dims, h, constellation, &batch);
        if !loss.is_finite() {
            return Err(TrainError::Diverged { iteration, loss });
        }
        adam_step(&mut store, &[grad], &mut adam);
    }
    MmNetParams::from_flat(dims, store.get("mmnet").data())
}
