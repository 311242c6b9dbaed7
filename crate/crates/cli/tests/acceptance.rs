//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its runtime. Run with `cargo test -p mimo-detect-cli --test acceptance`
//! (add `-- --nocapture` to see the PASS lines and measured values).

use mimo_detect::autodiff::{central_difference, max_relative_error, PlateauScheduler};
use mimo_detect::bank::{
    build_bank, load_bank, save_bank, BankEntry, BankMeta, ModelBank,
};
use mimo_detect::channel::{
    exp_correlation_matrix, jakes_sequence, sample_kronecker, sigma2_for_snr, transmit,
    JakesConfig, KroneckerConfig, NoiseModel,
};
use mimo_detect::detectors::{detect_ml, detect_mmse, detect_zf, DetectionProblem};
use mimo_detect::eval::{paired_ser, ser_row, Detector, NamedDetector, TrialPlan};
use mimo_detect::hypernet::{
    empty_bank, loss_a_value, loss_b_value, loss_b_gradients, objective_gradients, train,
    HyperNetParams, HyperNetVars, TrainBatchItem, TrainConfig,
    hypernet_forward_tape,
};
use mimo_detect::linalg::{to_real_vector, ComplexMatrix, RealMatrix};
use mimo_detect::mmnet::{
    mmnet_forward, mmnet_forward_tape, DetectorInput, MmNetDims, MmNetLayer, MmNetParams,
    PretrainConfig,
};
use mimo_detect::modem::{make_qam, sample_symbols, Constellation};
use mimo_detect::rng::RngStream;
use mimo_detect::autodiff::{Tape, Tensor};
use std::time::Instant;

const FULL: MmNetDims = MmNetDims {
    n_rx: 4,
    n_tx: 2,
    layers: 6,
};

const SMALL: MmNetDims = MmNetDims {
    n_rx: 2,
    n_tx: 1,
    layers: 2,
};

fn small_meta(pretrain: PretrainConfig) -> BankMeta {
    BankMeta {
        n_rx: SMALL.n_rx,
        n_tx: SMALL.n_tx,
        modulation_order: 4,
        layers: SMALL.layers,
        rho: 0.98,
        rho_k: 0.6,
        seed: 1,
        pretrain,
    }
}

fn random_small_batch(
    n: usize,
    constellation: &Constellation,
    rng: &mut RngStream,
) -> Vec<TrainBatchItem> {
    let kron = KroneckerConfig::new(SMALL.n_rx, SMALL.n_tx, 0.6).unwrap();
    (0..n)
        .map(|_| {
            let h = sample_kronecker(&kron, rng).unwrap();
            let snr = rng.uniform(5.0, 10.0);
            let noise = NoiseModel::from_snr(snr, SMALL.n_tx, SMALL.n_rx);
            let x = sample_symbols(constellation, SMALL.n_tx, rng);
            let y = transmit(&h, &x.values, &noise, rng).unwrap();
            TrainBatchItem {
                channel: h,
                x_real: to_real_vector(&x.values),
                y,
                sigma2: noise.sigma2,
            }
        })
        .collect()
}

fn small_synthetic_bank(rng: &mut RngStream) -> ModelBank {
    let kron = KroneckerConfig::new(SMALL.n_rx, SMALL.n_tx, 0.6).unwrap();
    let channel = sample_kronecker(&kron, rng).unwrap();
    let anchor: Vec<f64> = (0..SMALL.param_len()).map(|_| 0.2 * rng.normal()).collect();
    ModelBank {
        meta: small_meta(PretrainConfig::default()),
        entries: vec![BankEntry {
            channel,
            sigma2_ref: sigma2_for_snr(7.5, SMALL.n_tx, SMALL.n_rx),
            params: MmNetParams::from_flat(SMALL, &anchor).unwrap(),
            provenance: (0, 0),
        }],
    }
}

/// Criterion 1: reverse-mode gradients of the data loss, the anchor loss,
/// the full objective, the detector forward pass, and the hypernetwork
/// forward pass all match central finite differences to 1e-5 relative on
/// at least 50 seeded instances each. Runtime < 1 min.
#[test]
fn criterion_1_gradient_suite() {
    let start = Instant::now();
    let tol = 1e-5;
    let c = make_qam(4).unwrap();

    // Data loss, anchor loss, and the full objective on a reduced geometry
    // (full weight vector probed by finite differences).
    for seed in 0..50 {
        let mut rng = RngStream::from_seed(1000 + seed);
        let theta = HyperNetParams::init(SMALL, 5, &mut rng);
        let batch = random_small_batch(2, &c, &mut rng);
        let bank = small_synthetic_bank(&mut rng);
        let beta = 0.8;
        let flat0 = theta.to_flat();

        let (_, ga) = objective_gradients(&theta, &batch, None, &c);
        let reverse_a: Vec<f64> = ga.iter().flat_map(|t| t.data().to_vec()).collect();
        let fd_a = central_difference(
            |flat| {
                let t = HyperNetParams::from_flat(SMALL, 5, 1.0, 0.0, flat).unwrap();
                loss_a_value(&t, &batch, &c)
            },
            &flat0,
            1e-5,
        );
        let err_a = max_relative_error(&reverse_a, &fd_a, 1e-4);
        assert!(err_a < tol, "loss_a seed {seed}: {err_a}");

        let (_, gb) = loss_b_gradients(&theta, &bank, beta);
        let reverse_b: Vec<f64> = gb.iter().flat_map(|t| t.data().to_vec()).collect();
        let fd_b = central_difference(
            |flat| {
                let t = HyperNetParams::from_flat(SMALL, 5, 1.0, 0.0, flat).unwrap();
                loss_b_value(&t, &bank, beta)
            },
            &flat0,
            1e-5,
        );
        let err_b = max_relative_error(&reverse_b, &fd_b, 1e-4);
        assert!(err_b < tol, "loss_b seed {seed}: {err_b}");

        let (_, gt) = objective_gradients(&theta, &batch, Some((&bank, beta)), &c);
        let reverse_t: Vec<f64> = gt.iter().flat_map(|t| t.data().to_vec()).collect();
        let fd_t = central_difference(
            |flat| {
                let t = HyperNetParams::from_flat(SMALL, 5, 1.0, 0.0, flat).unwrap();
                loss_a_value(&t, &batch, &c) + loss_b_value(&t, &bank, beta)
            },
            &flat0,
            1e-5,
        );
        let err_t = max_relative_error(&reverse_t, &fd_t, 1e-4);
        assert!(err_t < tol, "objective seed {seed}: {err_t}");
    }

    // Detector forward pass at full geometry: all 216 parameters against a
    // random linear probe of the soft output.
    let kron = KroneckerConfig::new(4, 2, 0.6).unwrap();
    for seed in 0..50 {
        let mut rng = RngStream::from_seed(2000 + seed);
        let h = sample_kronecker(&kron, &mut rng).unwrap();
        let flat: Vec<f64> = (0..FULL.param_len()).map(|_| 0.3 * rng.normal()).collect();
        let params = MmNetParams::from_flat(FULL, &flat).unwrap();
        let x = sample_symbols(&c, 2, &mut rng);
        let noise = NoiseModel::from_snr(8.0, 2, 4);
        let y = transmit(&h, &x.values, &noise, &mut rng).unwrap();
        let input = DetectorInput::from_complex(&y, &h, noise.sigma2);
        let probe: Vec<f64> = (0..4).map(|_| rng.normal()).collect();

        let mut tape = Tape::new();
        let flat_var = tape.input(Tensor::vector(params.flatten()));
        let soft = mmnet_forward_tape(&mut tape, flat_var, FULL, &input, &c);
        let w = tape.constant(Tensor::vector(probe.clone()));
        let weighted = tape.mul(soft, w);
        let scalar = tape.sum(weighted);
        let grads = tape.backward(scalar);
        let reverse = grads.wrt(flat_var).unwrap().data().to_vec();

        let fd = central_difference(
            |f| {
                let p = MmNetParams::from_flat(FULL, f).unwrap();
                mmnet_forward(&p, &input, &c)
                    .iter()
                    .zip(probe.iter())
                    .map(|(s, w)| s * w)
                    .sum()
            },
            &flat,
            1e-5,
        );
        let err = max_relative_error(&reverse, &fd, 1e-4);
        assert!(err < tol, "mmnet_forward seed {seed}: {err}");
    }

    // Hypernetwork forward pass at full geometry: one random output
    // coordinate, finite differences on a random subset of the ~24k
    // weights per instance.
    for seed in 0..50 {
        let mut rng = RngStream::from_seed(3000 + seed);
        let theta = HyperNetParams::init(FULL, 100, &mut rng);
        let h = sample_kronecker(&kron, &mut rng).unwrap();
        let sigma2 = rng.uniform(0.02, 0.2);
        let coord = rng.index(theta.dims().output);

        let mut tape = Tape::new();
        let vars = HyperNetVars::record(&theta, &mut tape);
        let out = hypernet_forward_tape(&mut tape, &theta, &vars, &h, sigma2);
        let picked = tape.slice(out, coord, 1);
        let scalar = tape.sum(picked);
        let grads = tape.backward(scalar);
        let mut reverse = Vec::new();
        for &id in vars.ids() {
            reverse.extend_from_slice(grads.wrt_or_zeros(id, tape.value(id).shape()).data());
        }

        let mut flat = theta.to_flat();
        let eval = |flat: &[f64]| {
            let t = HyperNetParams::from_flat(FULL, 100, 1.0, 0.0, flat).unwrap();
            t.forward(&h, sigma2).flatten()[coord]
        };
        for _ in 0..40 {
            let k = rng.index(flat.len());
            let orig = flat[k];
            flat[k] = orig + 1e-5;
            let up = eval(&flat);
            flat[k] = orig - 1e-5;
            let down = eval(&flat);
            flat[k] = orig;
            let fd = (up - down) / 2e-5;
            let err = max_relative_error(&[reverse[k]], &[fd], 1e-4);
            assert!(err < tol, "hypernet_forward seed {seed} coord {k}: {err}");
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "gradient suite took {elapsed:?}");
    println!("criterion 1 (gradient suite): PASS in {elapsed:?}");
}

/// Criterion 2: Kronecker sample covariance matches the Kronecker-product
/// oracle within 5% relative Frobenius at 1e5 draws; Gauss-Markov per-entry
/// variance stays within 3% of 1 through hop 50 at rho = 0.98; the lag-t
/// autocorrelation matches rho^t within Monte Carlo error. Runtime < 2 min.
#[test]
fn criterion_2_channel_statistics() {
    let start = Instant::now();
    let kron_cfg = KroneckerConfig::new(4, 2, 0.6).unwrap();

    // Covariance of vec(H) against kron(R_u^T, R_r).
    let mut rng = RngStream::from_seed(900);
    let d = 8;
    let mut cov = vec![num_complex::Complex64::new(0.0, 0.0); d * d];
    let n_draws = 100_000;
    for _ in 0..n_draws {
        let h = sample_kronecker(&kron_cfg, &mut rng).unwrap();
        let v: Vec<num_complex::Complex64> =
            (0..d).map(|idx| h[(idx % 4, idx / 4)]).collect();
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += v[i] * v[j].conj();
            }
        }
    }
    let r_rx = exp_correlation_matrix(4, 0.6).unwrap();
    let r_tx = exp_correlation_matrix(2, 0.6).unwrap();
    let mut expected = RealMatrix::zeros(d, d);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..4 {
                for l in 0..4 {
                    // kron(R_u^T, R_r)
                    expected[(i * 4 + k, j * 4 + l)] = r_tx[(j, i)] * r_rx[(k, l)];
                }
            }
        }
    }
    let mut diff = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let got = cov[i * d + j] / n_draws as f64;
            diff += (got - expected[(i, j)]).norm_sqr();
        }
    }
    let rel = diff.sqrt() / expected.frobenius_norm();
    assert!(rel < 0.05, "covariance relative Frobenius error {rel}");

    // Stationary variance and rho^t autocorrelation through hop 50.
    let rho: f64 = 0.98;
    let horizon = 50;
    let jakes = JakesConfig::new(rho, horizon).unwrap();
    let n_seq = 6000;
    let mut rng = RngStream::from_seed(901);
    let mut var_per_hop = vec![0.0f64; horizon + 1];
    let mut corr_per_hop = vec![0.0f64; horizon + 1];
    for _ in 0..n_seq {
        let h0 = mimo_detect::channel::sample_gaussian_matrix(4, 2, &mut rng);
        let seq = jakes_sequence(&h0, &jakes, &mut rng).unwrap();
        for t in 0..=horizon {
            let hop = seq.hop(t);
            var_per_hop[t] += hop.data().iter().map(|z| z.norm_sqr()).sum::<f64>();
            corr_per_hop[t] += hop
                .data()
                .iter()
                .zip(h0.data().iter())
                .map(|(a, b)| (a * b.conj()).re)
                .sum::<f64>();
        }
    }
    let n_samples = (n_seq * 8) as f64;
    for t in 0..=horizon {
        let var = var_per_hop[t] / n_samples;
        assert!(
            (var - 1.0).abs() < 0.03,
            "hop {t}: per-entry variance {var}"
        );
        let corr = corr_per_hop[t] / n_samples;
        let expected = rho.powi(t as i32);
        assert!(
            (corr - expected).abs() < 0.02,
            "hop {t}: autocorrelation {corr} vs {expected}"
        );
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "channel statistics took {elapsed:?}");
    println!("criterion 2 (channel statistics): PASS in {elapsed:?}");
}

/// Criterion 3: on 1e4 paired trials per SNR in {5..10} dB over fresh
/// Kronecker channels, exhaustive ML's error count never exceeds ZF's or
/// MMSE's beyond 2-sigma binomial slack, and MMSE stays at or below ZF
/// within summed confidence intervals. Runtime < 2 min.
#[test]
fn criterion_3_oracle_dominance() {
    let start = Instant::now();
    let c = make_qam(4).unwrap();
    let kron = KroneckerConfig::new(4, 2, 0.6).unwrap();
    let trials = 10_000u64;
    for snr_db in [5.0f64, 6.0, 7.0, 8.0, 9.0, 10.0] {
        let noise = NoiseModel::from_snr(snr_db, 2, 4);
        let mut errs = [0u64; 3]; // ml, mmse, zf
        for trial in 0..trials {
            let mut rng = RngStream::derive(77_000, &[snr_db.to_bits(), trial]);
            let h = sample_kronecker(&kron, &mut rng).unwrap();
            let x = sample_symbols(&c, 2, &mut rng);
            let y = transmit(&h, &x.values, &noise, &mut rng).unwrap();
            let p = DetectionProblem {
                y: &y,
                channel: &h,
                sigma2: noise.sigma2,
                constellation: &c,
            };
            for (slot, est) in [
                detect_ml(&p).unwrap(),
                detect_mmse(&p).unwrap(),
                detect_zf(&p).unwrap(),
            ]
            .iter()
            .enumerate()
            {
                errs[slot] += est
                    .indices
                    .iter()
                    .zip(x.indices.iter())
                    .filter(|(a, b)| a != b)
                    .count() as u64;
            }
        }
        let [ml, mmse, zf] = errs;
        let slack = |e: u64| 2.0 * (e as f64).max(1.0).sqrt();
        assert!(
            (ml as f64) <= mmse as f64 + slack(mmse),
            "{snr_db} dB: ML {ml} vs MMSE {mmse}"
        );
        assert!(
            (ml as f64) <= zf as f64 + slack(zf),
            "{snr_db} dB: ML {ml} vs ZF {zf}"
        );
        let row_mmse = ser_row("mmse", trials, 2, mmse);
        let row_zf = ser_row("zf", trials, 2, zf);
        assert!(
            row_mmse.ser <= row_zf.ser + row_mmse.ci95 + row_zf.ci95,
            "{snr_db} dB: MMSE {} vs ZF {} beyond CI",
            row_mmse.ser,
            row_zf.ser
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "oracle dominance took {elapsed:?}");
    println!("criterion 3 (oracle dominance): PASS in {elapsed:?}");
}

/// Criterion 5: the bank counting law (140 sequences x horizon 4 + shared
/// initial channel = 561 entries, pretraining stubbed to one iteration),
/// bit-identical save/load, and the golden on-disk format.
#[test]
fn criterion_5_bank_law_and_persistence() {
    let start = Instant::now();
    let c = make_qam(4).unwrap();
    let kron = KroneckerConfig::new(4, 2, 0.6).unwrap();
    let stub = PretrainConfig {
        iterations: 1,
        batch: 2,
        ..Default::default()
    };
    let meta = BankMeta {
        n_rx: 4,
        n_tx: 2,
        modulation_order: 4,
        layers: 6,
        rho: 0.98,
        rho_k: 0.6,
        seed: 5,
        pretrain: stub,
    };
    let mut rng = RngStream::from_seed(5);
    let h0 = sample_kronecker(&kron, &mut rng).unwrap();
    let jakes = JakesConfig::new(0.98, 4).unwrap();
    let bank561 = build_bank(&h0, &jakes, 140, &c, meta.clone(), &mut rng).unwrap();
    assert_eq!(bank561.len(), 561, "counting law 140 * 4 + 1");

    // Bit-identical round trip on a 13-entry bank.
    let mut rng = RngStream::from_seed(6);
    let h0 = sample_kronecker(&kron, &mut rng).unwrap();
    let bank13 = build_bank(&h0, &jakes, 3, &c, meta, &mut rng).unwrap();
    assert_eq!(bank13.len(), 13);
    let dir = tempfile::tempdir().unwrap();
    save_bank(&bank13, dir.path()).unwrap();
    let loaded = load_bank(dir.path()).unwrap();
    assert_eq!(bank13, loaded, "round trip must be bit-identical");

    // Golden format: hand-set values that are exact in binary.
    let dims = MmNetDims {
        n_rx: 1,
        n_tx: 1,
        layers: 1,
    };
    let golden_bank = ModelBank {
        meta: BankMeta {
            n_rx: 1,
            n_tx: 1,
            modulation_order: 4,
            layers: 1,
            rho: 0.98,
            rho_k: 0.6,
            seed: 7,
            pretrain: PretrainConfig {
                iterations: 1,
                batch: 1,
                lr: 0.001,
                snr_db_min: 5.0,
                snr_db_max: 10.0,
                init_std: 0.01,
            },
        },
        entries: vec![BankEntry {
            channel: ComplexMatrix::from_data(
                1,
                1,
                vec![num_complex::Complex64::new(1.5, -0.25)],
            ),
            sigma2_ref: 0.125,
            params: MmNetParams::new(
                dims,
                vec![MmNetLayer {
                    a: RealMatrix::from_data(2, 2, vec![0.5, -1.0, 2.0, 0.0]),
                    theta2: vec![1.0, -2.0],
                }],
            ),
            provenance: (0, 0),
        }],
    };
    let dir = tempfile::tempdir().unwrap();
    save_bank(&golden_bank, dir.path()).unwrap();
    let blob = std::fs::read(dir.path().join("entry_0000.bin")).unwrap();
    let mut expected = Vec::new();
    for f in [1.5f64, -0.25, 0.5, -1.0, 2.0, 0.0, 1.0, -2.0] {
        expected.extend_from_slice(&f.to_le_bytes());
    }
    assert_eq!(blob, expected, "golden blob layout");
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.starts_with("format_version = 1\nkind = \"model-bank\"\n"));
    assert!(manifest.contains("sigma2_ref = 0.125"));
    assert_eq!(load_bank(dir.path()).unwrap(), golden_bank);

    let elapsed = start.elapsed();
    println!("criterion 5 (bank law and persistence): PASS in {elapsed:?}");
}

/// Criterion 6: the anchor loss vanishes when the hypernetwork reproduces
/// the bank exactly; beta-linearity is exact; a beta = 0 trajectory is
/// bit-identical to an empty-bank run.
#[test]
fn criterion_6_loss_identities() {
    let start = Instant::now();
    let c = make_qam(4).unwrap();

    // Overparameterized toy: zero weights with the third bias set to a
    // positive anchor make the ELU output reproduce it exactly.
    let toy = MmNetDims {
        n_rx: 1,
        n_tx: 1,
        layers: 1,
    };
    let mut rng = RngStream::from_seed(60);
    let anchor: Vec<f64> = (0..toy.param_len()).map(|_| 0.1 + rng.uniform(0.0, 1.0)).collect();
    let mut theta = HyperNetParams::zeros(toy, 4);
    {
        let store = theta.store_mut();
        let flat_len = store.total_len();
        let mut flat = store.to_flat();
        // b3 occupies the trailing `output` coordinates of the flat layout.
        let out_len = anchor.len();
        flat[flat_len - out_len..].copy_from_slice(&anchor);
        store.set_from_flat(&flat);
    }
    let kron_toy = KroneckerConfig::new(1, 1, 0.6).unwrap();
    let channel = sample_kronecker(&kron_toy, &mut rng).unwrap();
    let bank = ModelBank {
        meta: BankMeta {
            n_rx: 1,
            n_tx: 1,
            modulation_order: 4,
            layers: 1,
            rho: 0.98,
            rho_k: 0.6,
            seed: 1,
            pretrain: PretrainConfig::default(),
        },
        entries: vec![BankEntry {
            channel,
            sigma2_ref: 0.05,
            params: MmNetParams::from_flat(toy, &anchor).unwrap(),
            provenance: (0, 0),
        }],
    };
    assert_eq!(
        loss_b_value(&theta, &bank, 1.0),
        0.0,
        "anchor loss must vanish when outputs reproduce the bank"
    );

    // Exact beta-linearity.
    let mut rng = RngStream::from_seed(61);
    let theta_r = HyperNetParams::init(SMALL, 5, &mut rng);
    let bank_r = small_synthetic_bank(&mut rng);
    let l1 = loss_b_value(&theta_r, &bank_r, 1.0);
    assert_eq!(loss_b_value(&theta_r, &bank_r, 2.0), 2.0 * l1);
    let l03 = loss_b_value(&theta_r, &bank_r, 0.3);
    assert!((l03 - 0.3 * l1).abs() <= 1e-12 * l1.abs().max(1.0));

    // beta = 0 trajectory is bit-identical with and without a bank.
    let kron = KroneckerConfig::new(SMALL.n_rx, SMALL.n_tx, 0.6).unwrap();
    let cfg = TrainConfig {
        beta: 0.0,
        batch_channels: 6,
        iterations: 30,
        check_interval: 10,
        ..Default::default()
    };
    let theta0 = HyperNetParams::init(SMALL, 5, &mut RngStream::from_seed(62));
    let (a, log_a) = train(
        &theta0,
        &cfg,
        &bank_r,
        &kron,
        &c,
        &mut RngStream::from_seed(63),
        |_| {},
    )
    .unwrap();
    let (b, log_b) = train(
        &theta0,
        &cfg,
        &empty_bank(small_meta(PretrainConfig::default())),
        &kron,
        &c,
        &mut RngStream::from_seed(63),
        |_| {},
    )
    .unwrap();
    assert_eq!(a, b, "beta = 0 must ignore the bank bit for bit");
    assert_eq!(log_a, log_b);

    let elapsed = start.elapsed();
    println!("criterion 6 (loss identities): PASS in {elapsed:?}");
}

/// Criterion 7: the plateau scheduler holds the rate while the loss
/// improves, multiplies it by 0.9 per stagnant check, and never drops
/// below the 1e-6 floor.
#[test]
fn criterion_7_scheduler_contract() {
    let start = Instant::now();

    let mut improving = PlateauScheduler::new(500, 1e-3, 0.9, 1e-6, 1);
    for k in 1..=20 {
        let lr = improving.update(1.0 / k as f64);
        assert_eq!(lr, 1e-3, "improving losses must not reduce the rate");
    }

    let mut stagnant = PlateauScheduler::new(500, 1e-3, 0.9, 1e-6, 1);
    stagnant.update(1.0);
    let mut expected = 1e-3;
    for _ in 0..10 {
        expected = (expected * 0.9f64).max(1e-6);
        let lr = stagnant.update(1.0);
        assert!(
            (lr - expected).abs() < 1e-18,
            "stagnant checks multiply by 0.9"
        );
    }

    let mut floored = PlateauScheduler::new(500, 2e-6, 0.9, 1e-6, 1);
    floored.update(1.0);
    for _ in 0..20 {
        let lr = floored.update(1.0);
        assert!(lr >= 1e-6, "rate must never drop below the floor");
    }
    assert_eq!(floored.lr(), 1e-6);

    let elapsed = start.elapsed();
    println!("criterion 7 (scheduler contract): PASS in {elapsed:?}");
}
