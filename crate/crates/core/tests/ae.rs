use std::sync::OnceLock;

use onebit_core::ae::*;
use onebit_core::nn::Tensor;
use onebit_core::rf::{FtnChannel, IqSignal, Modulation};
use onebit_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn small(g: usize) -> AeConfig {
    AeConfig {
        subblock: 8,
        oversampling: g,
        width_factor: 6,
        store_size: 256,
        batch_size: 32,
        step1_epochs: 3,
        step2_epochs: 5,
        ..AeConfig::default()
    }
}

fn random(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random::<f64>() - 0.3).collect()).unwrap()
}

#[test]
fn config_validation() {
    assert!(AeConfig::default().validate().is_ok());
    assert!(AeConfig { width_factor: 4, oversampling: 4, ..AeConfig::default() }.validate().is_err());
    assert!(AeConfig { subblock: 7, ..AeConfig::default() }.validate().is_err());
    assert!(AeConfig { alpha: 1.5, ..AeConfig::default() }.validate().is_err());
    assert!(AeConfig { store_size: 0, ..AeConfig::default() }.validate().is_err());
    let q = AeConfig { modulation: Modulation::Qam16, ..AeConfig::default() };
    assert_eq!(q.bits_per_subblock(), 128);
    let levels: Vec<f64> = q.input_levels().iter().map(|l| l.0).collect();
    let want = [3.0, 1.0, -1.0, -3.0].map(|v| v / 5f64.sqrt());
    for (a, b) in levels.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn dimension_chain() {
    let cfg = AeConfig::default();
    let m = AeModel::new(cfg.clone()).unwrap();
    let (n, gn, kn) = (64, 4 * 64, 20 * 64);
    let dims = |net: &onebit_core::nn::Network| net.specs().iter().map(|s| (s.inputs, s.outputs)).collect::<Vec<_>>();
    assert_eq!(dims(&m.precoder), vec![(n, gn)]);
    assert!(!m.precoder.layers[0].spec.bias);
    assert_eq!(dims(&m.equalizer), vec![(gn, gn)]);
    assert_eq!(dims(&m.decoder), vec![(gn, kn), (kn, kn), (kn, kn), (kn, n)]);
    assert!(m.decoder.layers[..3].iter().all(|l| l.bn.is_some()));
    // θ1 only connects row i to input i div G
    for i in 0..gn {
        for j in 0..n {
            let v = m.theta1.get(i, j);
            if j == i / 4 {
                assert_eq!(v.abs(), 1.0);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }
}

#[test]
fn shaping_gives_zero_mean_unit_power() {
    let a = random(5, 16, 1);
    let (t, _) = shape_forward(&a);
    for r in 0..5 {
        let row = t.row(r);
        assert!(row.iter().sum::<f64>().abs() < 1e-12);
        let p = row.iter().map(|x| x * x).sum::<f64>() / 8.0;
        assert!((p - 1.0).abs() < 1e-12);
    }
}

#[test]
fn shaping_gradient_matches_finite_differences() {
    let a = random(3, 10, 2);
    let w = random(3, 10, 3);
    let loss = |a: &Tensor| -> f64 { shape_forward(a).0.data().iter().zip(w.data()).map(|(x, y)| x * y).sum() };
    let (t, scale) = shape_forward(&a);
    let g = shape_backward(&t, &scale, &w);
    let h = 1e-6;
    for k in 0..a.data().len() {
        let mut p = a.clone();
        p.data_mut()[k] += h;
        let mut m = a.clone();
        m.data_mut()[k] -= h;
        let fd = (loss(&p) - loss(&m)) / (2.0 * h);
        assert!((fd - g.data()[k]).abs() < 1e-6, "{k}: {fd} vs {}", g.data()[k]);
    }
}

#[test]
fn matrix_chain_matches_streaming_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (alpha, g) in [(1.0, 2), (0.5, 4)] {
        let chain = RfChain::new(alpha, g, 32).unwrap();
        let x = random(2, 32, 9);
        let y = chain.forward(&x).unwrap();
        let ch = FtnChannel::new(alpha, g).unwrap();
        for r in 0..2 {
            let sig = IqSignal::from_pairs(x.row(r), 1.0).unwrap();
            let want = IqSignal::from_rails(&ch.apply_rail(sig.i(), None), &ch.apply_rail(sig.q(), None), 1.0).unwrap();
            for (a, b) in want.to_pairs().iter().zip(y.row(r)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // seeded noise path against the streaming transmitter
        let sigma = 0.4;
        let nu = chain.seeded_filtered_noise(&[77], sigma).unwrap();
        let sig = IqSignal::from_pairs(x.row(0), 1.0).unwrap();
        let want = ch.transmit(&sig, sigma, &mut ChaCha8Rng::seed_from_u64(77)).to_pairs();
        for ((a, c), n) in want.iter().zip(y.row(0)).zip(nu.row(0)) {
            assert!((a - (c + n)).abs() < 1e-12);
        }
        // adjoint
        let d = random(2, 32, 10);
        let lhs: f64 = y.data().iter().zip(d.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(chain.adjoint(&d).unwrap().data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
        let _ = rng.random::<u8>();
    }
}

#[test]
fn pair_store_is_binary_deterministic_and_replayable() {
    let cfg = small(2);
    let (m, store) = train_decoder_step1(&cfg).unwrap();
    assert_eq!(store.len(), 256);
    assert!(store.l1.data().iter().all(|&v| v == 1.0 || v == -1.0));
    let (_, again) = train_decoder_step1(&cfg).unwrap();
    assert_eq!(store, again);
    let (_, other) = train_decoder_step1(&AeConfig { seed: 2, ..cfg }).unwrap();
    assert_ne!(store.l1, other.l1);
    let idx: Vec<usize> = (0..store.len()).collect();
    assert_eq!(m.replay_l1(&store, &idx).unwrap(), store.l1);
}

#[test]
fn step2_requires_step1_and_marks_complete() {
    let cfg = small(2);
    let fresh = AeModel::new(cfg.clone()).unwrap();
    let (m, store) = train_decoder_step1(&cfg).unwrap();
    assert!(train_encoder_step2(fresh, &store).is_err());
    assert!(matches!(ae_encode(&m, &[1.0; 8]), Err(Error::Untrained)));
    let m = train_encoder_step2(m, &store).unwrap();
    assert_eq!(m.stage, TrainingStage::Complete);
    assert_eq!(m.history.step1_loss.len(), 3);
    assert_eq!(m.history.step2_loss.len(), 5);
    assert_eq!(m.history.sparsity.len(), 5);
}

#[test]
fn divergence_is_reported() {
    let cfg = AeConfig { step1_learning_rate: 1e200, step1_epochs: 50, ..small(2) };
    match train_decoder_step1(&cfg) {
        Err(Error::Diverged { .. }) | Err(Error::NonFinite(_)) => {}
        other => panic!("expected divergence, got {:?}", other.map(|m| m.0.history)),
    }
}

fn small_trained() -> &'static AeModel {
    static M: OnceLock<AeModel> = OnceLock::new();
    M.get_or_init(|| train(&small(2)).unwrap().0)
}

#[test]
fn encode_contract() {
    let m = small_trained();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = m.random_inputs(1, &mut rng);
    let x = ae_encode(m, s.data()).unwrap();
    assert_eq!(x.len(), 8);
    assert!((x.mean_power() - 1.0).abs() < 1e-6);
    assert_eq!(ae_encode(m, s.data()).unwrap(), x);
    assert!(ae_encode(m, &[1.0; 5]).is_err());
}

#[test]
fn decode_contract() {
    let m = small_trained();
    let r = IqSignal::from_pairs(&[1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0], 0.5).unwrap();
    let s = ae_decode(m, &r).unwrap();
    assert_eq!(s.len(), 8);
    assert_eq!(ae_decode(m, &r).unwrap(), s);
    let short = IqSignal::from_pairs(&[1.0, 1.0], 0.5).unwrap();
    assert!(ae_decode(m, &short).is_err());
    let soft = IqSignal::from_pairs(&[0.5; 16], 0.5).unwrap();
    assert!(ae_decode(m, &soft).is_err());
}

#[test]
fn inference_is_pure_given_noise() {
    let m = small_trained();
    let s = m.random_inputs(4, &mut ChaCha8Rng::seed_from_u64(1));
    let a = m.transceive(&s, 3.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let b = m.transceive(&s, 3.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn checkpoint_round_trip() {
    let m = small_trained();
    let dir = std::env::temp_dir().join(format!("onebit-ae-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("model.obnn");
    m.save(&path).unwrap();
    let back = AeModel::load(&path).unwrap();
    assert_eq!(back.config, m.config);
    assert_eq!(back.history, m.history);
    assert_eq!(back.theta1, m.theta1);
    let s = m.random_inputs(3, &mut ChaCha8Rng::seed_from_u64(3));
    let a = m.transceive(&s, 2.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let b = back.transceive(&s, 2.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert_eq!(a, b);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sparsity_near_half_on_binary_inputs() {
    let m = small_trained();
    let s = m.random_inputs(500, &mut ChaCha8Rng::seed_from_u64(6));
    let z = m.zero_fraction(&s).unwrap();
    assert!((0.4..=0.6).contains(&z), "{z}");
}

#[test]
fn llr_extraction() {
    let levels = AeConfig::default().input_levels();
    let cal = Calibration::uniform(2, 0.8, 0.5);
    let l = extract_llr(&[0.0, 0.3, -1.2, 0.0], &cal, &levels).unwrap();
    assert_eq!(l[0], 0.0);
    assert!((l[1] - 2.0 * 0.8 * 0.3 / 0.5).abs() < 1e-12);
    assert!((l[2] + 2.0 * 0.8 * 1.2 / 0.5).abs() < 1e-12);
    assert!(extract_llr(&[0.1; 3], &cal, &levels).is_err());
    assert!(extract_llr(&[0.1; 2], &Calibration::uniform(2, 1.0, 0.0), &levels).is_err());

    // 16-QAM: sign bit by the nearest scaled level, magnitude by |ŝ| vs the midpoint
    let q = AeConfig { modulation: Modulation::Qam16, ..AeConfig::default() }.input_levels();
    let cal = Calibration::uniform(1, 1.0, 0.1);
    let a = 1.0 / 5f64.sqrt();
    let l = extract_llr(&[2.5 * a, -0.5 * a], &cal, &q).unwrap();
    assert_eq!(l.len(), 4);
    assert!(l[0] > 0.0 && l[1] < 0.0);
    assert!(l[2] < 0.0 && l[3] > 0.0);
}

#[test]
fn calibration_recovers_gaussian_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mu, s2): (f64, f64) = (0.7, 0.3);
    let rows = 100_000;
    let noise = Normal::new(0.0, s2.sqrt()).unwrap();
    let s: Vec<f64> = (0..rows).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let shat: Vec<f64> = s.iter().map(|x| mu * x + noise.sample(&mut rng)).collect();
    let cal = fit_residual(&Tensor::from_vec(rows, 1, s.clone()).unwrap(), &Tensor::from_vec(rows, 1, shat).unwrap()).unwrap();
    assert!((cal.mu[0] / mu - 1.0).abs() < 0.02, "{:?}", cal);
    assert!((cal.sigma2[0] / s2 - 1.0).abs() < 0.02, "{:?}", cal);
}

#[test]
fn calibration_degenerate_and_small_inputs() {
    let s = Tensor::from_vec(1000, 1, (0..1000).map(|k| if k % 3 == 0 { 1.0 } else { -1.0 }).collect()).unwrap();
    let cal = fit_residual(&s, &s).unwrap();
    assert_eq!(cal.mu[0], 1.0);
    assert_eq!(cal.sigma2[0], SIGMA2_FLOOR);
    let few = Tensor::zeros(999, 1);
    assert!(fit_residual(&few, &few).is_err());
    assert!(calibrate_residual(small_trained(), 2.0, 999, 1).is_err());
}

#[test]
fn losses_settle_after_warmup() {
    let cfg = AeConfig { step2_epochs: 60, ..small(2) };
    let (m, _) = train(&cfg).unwrap();
    let h = &m.history.step2_loss;
    let start = h.len() / 10;
    let smooth: Vec<f64> = h[start..].windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    for w in smooth.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-3), "{:?}", smooth);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn llr_sign_follows_estimate(v in -3.0f64..3.0, mu in 0.1f64..2.0, s2 in 0.01f64..2.0) {
        let levels = AeConfig::default().input_levels();
        let l = extract_llr(&[v], &Calibration::uniform(1, mu, s2), &levels).unwrap();
        prop_assert!((l[0] - 2.0 * mu * v / s2).abs() < 1e-9 * (1.0 + l[0].abs()));
    }

    #[test]
    fn shaped_rows_have_unit_power(seed in any::<u64>()) {
        let a = random(2, 12, seed).map(|x| x.max(0.0) + 0.01);
        let (t, _) = shape_forward(&a);
        for r in 0..2 {
            let p = t.row(r).iter().map(|x| x * x).sum::<f64>() / 6.0;
            prop_assert!((p - 1.0).abs() < 1e-9);
        }
    }
}
