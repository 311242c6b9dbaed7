//! The channel-agnostic hypernetwork and its regularized training loop.
//!
//! A three-layer dense network maps channel state (flattened real and
//! imaginary parts plus the noise level as `sqrt(sigma2)`) to the flat
//! parameter vector of the unrolled detector. ELU is applied after every
//! layer including the output; an affine output transform (gain 1, bias 0
//! by default) is available to widen the reachable parameter range.
//!
//! Training minimizes a data term plus an L1 anchor to a bank of pretrained
//! channel-specific detectors:
//!
//! ```text
//! loss(theta) = E ||x - xhat||^2  +  beta * sum_i ||W_i^bank - g(H_i; theta)||_1
//! ```
//!
//! With `beta = 0` the anchor vanishes and training is the plain
//! hypernetwork scheme.

use crate::autodiff::{
    adam_step, elu, AdamState, ParamStore, PlateauScheduler, Shape, Tape, Tensor, VarId,
};
use crate::bank::ModelBank;
use crate::channel::{sample_kronecker, transmit, KroneckerConfig, NoiseModel};
use crate::detectors::DetectionProblem;
use crate::linalg::{from_real_vector, to_real_vector, ComplexMatrix, RealMatrix};
use crate::mmnet::{
    mmnet_forward, mmnet_forward_tape, DetectorInput, MmNetDims, MmNetParams, TrainError,
};
use crate::modem::{hard_decision, sample_symbols, Constellation, SymbolVector};
use crate::rng::RngStream;
use num_complex::Complex64;
use std::fmt::Write as _;

/// Layer widths of the hypernetwork for a given detector geometry:
/// input `2 Nr Nu + 1`, a hidden layer, and one output unit per detector
/// parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HyperNetDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl HyperNetDims {
    pub fn for_detector(mm: MmNetDims, hidden: usize) -> Self {
        Self {
            input: 2 * mm.n_rx * mm.n_tx + 1,
            hidden,
            output: mm.param_len(),
        }
    }
}

/// Hypernetwork weights plus the output transform they were trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperNetParams {
    mm_dims: MmNetDims,
    dims: HyperNetDims,
    pub output_gain: f64,
    pub output_bias: f64,
    store: ParamStore,
}

impl HyperNetParams {
    /// Uniform init in `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(mm_dims: MmNetDims, hidden: usize, rng: &mut RngStream) -> Self {
        let dims = HyperNetDims::for_detector(mm_dims, hidden);
        let widths = [dims.input, dims.input, dims.hidden, dims.output];
        let mut store = ParamStore::new();
        for layer in 0..3 {
            let (fan_in, fan_out) = (widths[layer], widths[layer + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.uniform(-bound, bound))
                .collect();
            store.insert(
                &format!("w{}", layer + 1),
                Tensor::matrix(fan_out, fan_in, w),
            );
            store.insert(&format!("b{}", layer + 1), Tensor::vector(vec![0.0; fan_out]));
        }
        Self {
            mm_dims,
            dims,
            output_gain: 1.0,
            output_bias: 0.0,
            store,
        }
    }

    /// All-zero weights and biases (every output is `elu(0) = 0`).
    pub fn zeros(mm_dims: MmNetDims, hidden: usize) -> Self {
        let mut p = Self::init(mm_dims, hidden, &mut RngStream::from_seed(0));
        for t in p.store.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        p
    }

    pub fn mm_dims(&self) -> MmNetDims {
        self.mm_dims
    }

    pub fn dims(&self) -> HyperNetDims {
        self.dims
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Weights in store order, flattened; pairs with [`HyperNetParams::from_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        self.store.to_flat()
    }

    pub fn from_flat(
        mm_dims: MmNetDims,
        hidden: usize,
        output_gain: f64,
        output_bias: f64,
        flat: &[f64],
    ) -> Result<Self, TrainError> {
        let mut p = Self::zeros(mm_dims, hidden);
        if flat.len() != p.store.total_len() {
            return Err(TrainError::BadParamLength {
                got: flat.len(),
                expected: p.store.total_len(),
            });
        }
        p.store.set_from_flat(flat);
        p.output_gain = output_gain;
        p.output_bias = output_bias;
        Ok(p)
    }

    /// Input feature vector: `[Re H row-major; Im H row-major; sqrt(sigma2)]`.
    pub fn feature_vector(h: &ComplexMatrix, sigma2: f64) -> Vec<f64> {
        let mut f = Vec::with_capacity(2 * h.data().len() + 1);
        f.extend(h.data().iter().map(|z| z.re));
        f.extend(h.data().iter().map(|z| z.im));
        f.push(sigma2.sqrt());
        f
    }

    /// Plain forward pass: detector parameters for one channel state.
    pub fn forward(&self, h: &ComplexMatrix, sigma2: f64) -> MmNetParams {
        let mut x = Self::feature_vector(h, sigma2);
        assert_eq!(x.len(), self.dims.input, "feature length mismatch");
        for layer in 1..=3 {
            let w = tensor_as_matrix(self.store.get(&format!("w{layer}")));
            let b = self.store.get(&format!("b{layer}"));
            let mut z = w.matvec(&x);
            for (zi, bi) in z.iter_mut().zip(b.data()) {
                *zi = elu(*zi + bi);
            }
            x = z;
        }
        for v in &mut x {
            *v = self.output_gain * *v + self.output_bias;
        }
        MmNetParams::from_flat(self.mm_dims, &x).expect("output width matches detector")
    }
}

fn tensor_as_matrix(t: &Tensor) -> RealMatrix {
    match t.shape() {
        Shape::Matrix(r, c) => RealMatrix::from_data(*r, *c, t.data().to_vec()),
        other => panic!("expected a matrix tensor, got {other:?}"),
    }
}

/// Tape handles for the hypernetwork leaves, in store order.
pub struct HyperNetVars {
    ids: Vec<VarId>,
}

impl HyperNetVars {
    /// Record the current weights as tape inputs.
    pub fn record(theta: &HyperNetParams, tape: &mut Tape) -> Self {
        let ids = theta
            .store
            .iter()
            .map(|(_, t)| tape.input(t.clone()))
            .collect();
        Self { ids }
    }

    pub fn ids(&self) -> &[VarId] {
        &self.ids
    }

    fn layer(&self, idx: usize) -> (VarId, VarId) {
        (self.ids[2 * idx], self.ids[2 * idx + 1])
    }
}

/// Differentiable forward pass; returns the flat detector-parameter node.
pub fn hypernet_forward_tape(
    tape: &mut Tape,
    theta: &HyperNetParams,
    vars: &HyperNetVars,
    h: &ComplexMatrix,
    sigma2: f64,
) -> VarId {
    let feature = HyperNetParams::feature_vector(h, sigma2);
    let mut x = tape.constant(Tensor::vector(feature));
    for layer in 0..3 {
        let (w, b) = vars.layer(layer);
        let z = tape.dense(w, b, x);
        x = tape.elu(z);
    }
    let scaled = tape.scale_const(x, theta.output_gain);
    tape.add_const(scaled, theta.output_bias)
}

/// Full learned-detector pipeline: generate weights, run the unrolled
/// detector, slice to the constellation.
pub fn hypermimo_detect(theta: &HyperNetParams, p: &DetectionProblem) -> SymbolVector {
    let params = theta.forward(p.channel, p.sigma2);
    let input = DetectorInput::from_complex(p.y, p.channel, p.sigma2);
    let soft = mmnet_forward(&params, &input, p.constellation);
    hard_decision(p.constellation, &from_real_vector(&soft))
}

/// One training example for the data term.
#[derive(Clone, Debug)]
pub struct TrainBatchItem {
    pub channel: ComplexMatrix,
    pub x_real: Vec<f64>,
    pub y: Vec<Complex64>,
    pub sigma2: f64,
}

/// Data term: mean over the batch of the squared soft-output error.
pub fn loss_a_value(
    theta: &HyperNetParams,
    batch: &[TrainBatchItem],
    constellation: &Constellation,
) -> f64 {
    assert!(!batch.is_empty(), "loss_a needs a nonempty batch");
    let mut acc = 0.0;
    for item in batch {
        let params = theta.forward(&item.channel, item.sigma2);
        let input = DetectorInput::from_complex(&item.y, &item.channel, item.sigma2);
        let soft = mmnet_forward(&params, &input, constellation);
        acc += soft
            .iter()
            .zip(item.x_real.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    acc / batch.len() as f64
}

/// Anchor term: `beta` times the summed entrywise absolute difference
/// between each bank detector and the hypernetwork's output at that bank
/// channel (evaluated at the stored reference noise level).
pub fn loss_b_value(theta: &HyperNetParams, bank: &ModelBank, beta: f64) -> f64 {
    let mut acc = 0.0;
    for entry in &bank.entries {
        let generated = theta.forward(&entry.channel, entry.sigma2_ref).flatten();
        let anchor = entry.params.flatten();
        acc += generated
            .iter()
            .zip(anchor.iter())
            .map(|(g, m)| (g - m).abs())
            .sum::<f64>();
    }
    beta * acc
}

/// Loss values from one differentiable evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub loss_a: f64,
    pub loss_b: f64,
}

/// Build the full objective on a tape and return its parts plus gradients
/// with respect to every hypernetwork weight, in store order.
///
/// `bank` participates only when `beta > 0`; a `beta = 0` run is bit
/// identical to one with an empty bank.
pub fn objective_gradients(
    theta: &HyperNetParams,
    batch: &[TrainBatchItem],
    bank: Option<(&ModelBank, f64)>,
    constellation: &Constellation,
) -> (LossParts, Vec<Tensor>) {
    let mut tape = Tape::new();
    let vars = HyperNetVars::record(theta, &mut tape);

    let mut acc: Option<VarId> = None;
    for item in batch {
        let w = hypernet_forward_tape(&mut tape, theta, &vars, &item.channel, item.sigma2);
        let input = DetectorInput::from_complex(&item.y, &item.channel, item.sigma2);
        let soft = mmnet_forward_tape(&mut tape, w, theta.mm_dims, &input, constellation);
        let truth = tape.constant(Tensor::vector(item.x_real.clone()));
        let diff = tape.sub(soft, truth);
        let sq = tape.square(diff);
        let item_loss = tape.sum(sq);
        acc = Some(match acc {
            Some(a) => tape.add(a, item_loss),
            None => item_loss,
        });
    }
    let loss_a = tape.scale_const(acc.expect("nonempty batch"), 1.0 / batch.len() as f64);

    let loss_b = match bank {
        Some((bank, beta)) if beta > 0.0 && !bank.is_empty() => {
            let mut acc: Option<VarId> = None;
            for entry in &bank.entries {
                let generated =
                    hypernet_forward_tape(&mut tape, theta, &vars, &entry.channel, entry.sigma2_ref);
                let anchor = tape.constant(Tensor::vector(entry.params.flatten()));
                let diff = tape.sub(generated, anchor);
                let l1 = tape.abs(diff);
                let s = tape.sum(l1);
                acc = Some(match acc {
                    Some(a) => tape.add(a, s),
                    None => s,
                });
            }
            Some(tape.scale_const(acc.unwrap(), beta))
        }
        _ => None,
    };

    let total = match loss_b {
        Some(lb) => tape.add(loss_a, lb),
        None => loss_a,
    };
    let grads_all = tape.backward(total);
    let grads = vars
        .ids()
        .iter()
        .map(|&id| grads_all.wrt_or_zeros(id, tape.value(id).shape()))
        .collect();
    (
        LossParts {
            total: tape.value(total).item(),
            loss_a: tape.value(loss_a).item(),
            loss_b: loss_b.map_or(0.0, |lb| tape.value(lb).item()),
        },
        grads,
    )
}

/// Gradient of the anchor term alone with respect to every hypernetwork
/// weight, in store order.
pub fn loss_b_gradients(
    theta: &HyperNetParams,
    bank: &ModelBank,
    beta: f64,
) -> (f64, Vec<Tensor>) {
    assert!(!bank.is_empty(), "loss_b needs a nonempty bank");
    let mut tape = Tape::new();
    let vars = HyperNetVars::record(theta, &mut tape);
    let mut acc: Option<VarId> = None;
    for entry in &bank.entries {
        let generated =
            hypernet_forward_tape(&mut tape, theta, &vars, &entry.channel, entry.sigma2_ref);
        let anchor = tape.constant(Tensor::vector(entry.params.flatten()));
        let diff = tape.sub(generated, anchor);
        let l1 = tape.abs(diff);
        let s = tape.sum(l1);
        acc = Some(match acc {
            Some(a) => tape.add(a, s),
            None => s,
        });
    }
    let loss = tape.scale_const(acc.unwrap(), beta);
    let grads_all = tape.backward(loss);
    let grads = vars
        .ids()
        .iter()
        .map(|&id| grads_all.wrt_or_zeros(id, tape.value(id).shape()))
        .collect();
    (tape.value(loss).item(), grads)
}

/// Training hyperparameters for the hypernetwork.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
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
}

impl Default for TrainConfig {
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
        }
    }
}

/// One row of the training log, recorded at every scheduler check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub loss_total: f64,
    pub loss_a: f64,
    pub loss_b: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss_total,loss_a,loss_b,lr\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration, r.loss_total, r.loss_a, r.loss_b, r.lr
            );
        }
        out
    }
}

/// Train the hypernetwork: every iteration draws `batch_channels` fresh
/// spatially correlated channels, one `(x, noise, snr)` realization per
/// channel, and takes one ADAM step on the regularized objective. The
/// scheduler sees the mean total loss over each check interval; `on_check`
/// fires with each recorded log row.
pub fn train(
    theta0: &HyperNetParams,
    cfg: &TrainConfig,
    bank: &ModelBank,
    channel_cfg: &KroneckerConfig,
    constellation: &Constellation,
    rng: &mut RngStream,
    mut on_check: impl FnMut(&LogRow),
) -> Result<(HyperNetParams, TrainingLog), TrainError> {
    if cfg.beta > 0.0 && bank.is_empty() {
        return Err(TrainError::BankRequired);
    }
    let mut theta = theta0.clone();
    let mut adam = AdamState::new(&theta.store, cfg.lr_init);
    let mut scheduler = PlateauScheduler::new(
        cfg.check_interval,
        cfg.lr_init,
        cfg.scheduler_factor,
        cfg.scheduler_floor,
        cfg.scheduler_patience,
    );
    let mut log = TrainingLog::default();
    let mut window = (0.0f64, 0.0f64, 0.0f64, 0usize);

    let bank_arg = if cfg.beta > 0.0 {
        Some((bank, cfg.beta))
    } else {
        None
    };

    for iteration in 1..=cfg.iterations {
        let mut batch = Vec::with_capacity(cfg.batch_channels);
        for _ in 0..cfg.batch_channels {
            let h = sample_kronecker(channel_cfg, rng).expect("valid channel config");
            let snr_db = rng.uniform(cfg.snr_db_min, cfg.snr_db_max);
            let noise = NoiseModel::from_snr(snr_db, channel_cfg.n_tx, channel_cfg.n_rx);
            let x = sample_symbols(constellation, channel_cfg.n_tx, rng);
            let y = transmit(&h, &x.values, &noise, rng).expect("dimensions fixed");
            batch.push(TrainBatchItem {
                channel: h,
                x_real: to_real_vector(&x.values),
                y,
                sigma2: noise.sigma2,
            });
        }
        let (parts, grads) = objective_gradients(&theta, &batch, bank_arg, constellation);
        if !parts.total.is_finite() {
            return Err(TrainError::Diverged {
                iteration,
                loss: parts.total,
            });
        }
        adam_step(&mut theta.store, &grads, &mut adam);

        window.0 += parts.total;
        window.1 += parts.loss_a;
        window.2 += parts.loss_b;
        window.3 += 1;
        if iteration % cfg.check_interval == 0 {
            let n = window.3 as f64;
            let mean_total = window.0 / n;
            let lr = scheduler.update(mean_total);
            adam.lr = lr;
            let row = LogRow {
                iteration,
                loss_total: mean_total,
                loss_a: window.1 / n,
                loss_b: window.2 / n,
                lr,
            };
            on_check(&row);
            log.rows.push(row);
            window = (0.0, 0.0, 0.0, 0);
        }
    }
    Ok((theta, log))
}

/// An empty bank for unregularized runs; metadata mirrors the system shape.
pub fn empty_bank(meta: crate::bank::BankMeta) -> ModelBank {
    ModelBank {
        meta,
        entries: Vec::new(),
    }
}
