//! Desk-scale behavior of trained inner codes and of the full concatenated
//! pipeline. Slow on first run; models are cached (see `common`).

mod common;

use std::sync::OnceLock;

use onebit_core::ae::{
    calibrate_residual, conditional_means, extract_llr, train_decoder_step1, AeConfig, AeModel,
};
use onebit_core::capacity::min_snr_for_rate;
use onebit_core::harness::{
    ae_inputs, concat_channel, concat_decode, concat_encode, run_ber_sweep, ExperimentConfig, Scheme,
};
use onebit_core::nn::Tensor;
use onebit_core::rf::Modulation;
use onebit_core::stats::{excess_kurtosis, Proportion};
use onebit_core::turbo::{TurboCodec, TurboSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model_g4() -> &'static AeModel {
    static M: OnceLock<AeModel> = OnceLock::new();
    M.get_or_init(|| common::trained(&common::desk(4)))
}

fn model_g2() -> &'static AeModel {
    static M: OnceLock<AeModel> = OnceLock::new();
    M.get_or_init(|| common::trained(&common::desk(2)))
}

fn sign_errors(s: &Tensor, shat: &Tensor) -> f64 {
    let bad = s.data().iter().zip(shat.data()).filter(|(a, b)| (**a > 0.0) != (**b > 0.0)).count();
    bad as f64 / s.data().len() as f64
}

#[test]
fn high_snr_step1_reconstructs_held_out_blocks() {
    let cfg = AeConfig { train_ebn0_db: 20.0, ..common::desk(4) };
    let (m, _) = train_decoder_step1(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let s = m.random_inputs(2000, &mut rng);
    let shat = m.step1_reconstruct(&s, 20.0, &mut rng).unwrap();
    let mse = s.data().iter().zip(shat.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / s.data().len() as f64;
    println!("held-out step-1 reconstruction MSE at 20 dB: {mse:.4}");
    assert!(mse < 1e-2, "MSE {mse}");
}

#[test]
fn uncoded_ber_six_db_above_training_snr() {
    let m = model_g4();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let s = m.random_inputs(4000, &mut rng);
    let ebn0 = m.config.train_ebn0_db + 6.0;
    let ber = sign_errors(&s, &m.transceive(&s, ebn0, &mut rng).unwrap());
    println!("uncoded inner BER at {ebn0} dB: {ber:.4}");
    assert!(ber < 1e-2, "BER {ber}");
}

#[test]
fn noiseless_limit_recovers_signs() {
    let m = model_g4();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let s = m.random_inputs(4000, &mut rng);
    let agree = 1.0 - sign_errors(&s, &m.transceive(&s, 300.0, &mut rng).unwrap());
    println!("noiseless sign agreement: {agree:.4}");
    assert!(agree >= 0.99, "agreement {agree}");
}

#[test]
fn all_ones_codeword_leaves_half_the_precoder_units_at_zero() {
    let m = model_g2();
    let ones = Tensor::from_vec(1, 64, vec![1.0; 64]).unwrap();
    let zeros = (m.zero_fraction(&ones).unwrap() * 128.0).round() as usize;
    println!("all-ones input, N=64 G=2: {zeros} of 128 precoder units are zero");
    assert!((51..=77).contains(&zeros), "{zeros} zero units");
}

#[test]
fn residual_means_are_antisymmetric() {
    let m = model_g4();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let s = m.random_inputs(4000, &mut rng);
    let shat = m.transceive(&s, m.config.train_ebn0_db, &mut rng).unwrap();
    let cm = conditional_means(&s, &shat, &[1.0, -1.0]);
    let ((mp, np), (mn, nn)) = (cm[0], cm[1]);
    let var = shat.data().iter().map(|v| v * v).sum::<f64>() / shat.data().len() as f64;
    let tol = 4.0 * (var * (1.0 / np as f64 + 1.0 / nn as f64)).sqrt();
    println!("mu(+1) = {mp:.4}, mu(-1) = {mn:.4}, tolerance {tol:.4}");
    assert!((mp + mn).abs() < tol);
}

#[test]
fn residual_is_close_to_gaussian() {
    let m = model_g4();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let rows = 100_000usize.div_ceil(m.config.subblock);
    let s = m.random_inputs(rows, &mut rng);
    let shat = m.transceive(&s, m.config.train_ebn0_db, &mut rng).unwrap();
    let cal = onebit_core::ae::fit_residual(&s, &shat).unwrap();
    let n = m.config.subblock;
    let res: Vec<f64> = s
        .data()
        .iter()
        .zip(shat.data())
        .enumerate()
        .map(|(i, (x, y))| y - cal.mu[i % n] * x)
        .collect();
    let k = excess_kurtosis(&res);
    println!("residual excess kurtosis over {} samples: {k:.4}", res.len());
    assert!(k.abs() < 0.2, "excess kurtosis {k}");
}

#[test]
fn soft_llrs_do_not_lose_to_sliced_estimates() {
    let m = model_g4();
    let codec = TurboCodec::new(TurboSpec::lte(1024, 5).unwrap()).unwrap();
    let levels = m.config.input_levels();
    for ebn0 in [2.0, 4.0] {
        let cal = calibrate_residual(m, ebn0, 4000, 7).unwrap();
        // sign error rate of ŝ sets the magnitude of the sliced LLRs
        let mut rng = ChaCha8Rng::seed_from_u64(106);
        let s = m.random_inputs(4000, &mut rng);
        let p = sign_errors(&s, &m.transceive(&s, ebn0, &mut rng).unwrap()).clamp(1e-6, 0.5 - 1e-6);
        let mag = ((1.0 - p) / p).ln();
        let (mut soft_err, mut hard_err, mut bits) = (0u64, 0u64, 0u64);
        for _ in 0..40 {
            let info: Vec<u8> = (0..1024).map(|_| rng.random_range(0..2u8)).collect();
            let rx = concat_channel(&concat_encode(&info, &codec, m).unwrap(), m, ebn0, &mut rng).unwrap();
            let soft = concat_decode(&rx, &codec, m, Some(&cal), ebn0).unwrap().bits;
            let r = Tensor::from_vec(rx.to_pairs().len() / m.config.encoded_dim(), m.config.encoded_dim(), rx.to_pairs())
                .unwrap();
            let shat = m.decode_batch(&r).unwrap();
            let mut llr: Vec<f64> = extract_llr(shat.data(), &cal, &levels)
                .unwrap()
                .iter()
                .map(|&l| if l >= 0.0 { mag } else { -mag })
                .collect();
            llr.truncate(codec.spec.coded_len());
            let hard = codec.decode(&llr).unwrap().bits;
            soft_err += soft.iter().zip(&info).filter(|(a, b)| a != b).count() as u64;
            hard_err += hard.iter().zip(&info).filter(|(a, b)| a != b).count() as u64;
            bits += 1024;
        }
        let (ps, ph) = (Proportion::new(soft_err, bits), Proportion::new(hard_err, bits));
        println!("{ebn0} dB: soft {:.3e}, sliced {:.3e}", ps.estimate, ph.estimate);
        assert!(ps.ci_low <= ph.ci_high, "soft {ps:?} vs sliced {ph:?}");
    }
}

#[test]
fn soft_turbo_waterfall_at_6144() {
    let cfg = ExperimentConfig {
        scheme: Scheme::TurboSoftUnquantized,
        block_length: 6144,
        ebn0_grid: vec![0.0, 0.5, 1.0, 1.5],
        ..ExperimentConfig::desk_scale()
    };
    let recs = run_ber_sweep(&cfg, None, None, |_| Ok(())).unwrap();
    for r in &recs {
        println!("soft turbo K=6144 {:.1} dB: BER {:.3e} ({} bits)", r.ebn0_db, r.ber, r.bits);
    }
    assert!(recs.iter().any(|r| r.ber < 1e-4));
}

#[test]
fn proposed_scheme_fails_below_the_capacity_threshold() {
    let gamma_min = min_snr_for_rate(1.0 / 3.0, 1e-3, 1_000_000, 1).unwrap().ebn0_db;
    let cfg = ExperimentConfig {
        ebn0_grid: vec![gamma_min - 3.0, gamma_min - 0.5],
        ..ExperimentConfig::desk_scale()
    };
    let recs = run_ber_sweep(&cfg, Some(model_g4()), None, |_| Ok(())).unwrap();
    for r in &recs {
        println!("proposed {:.2} dB (threshold {gamma_min:.2}): BER {:.3e}", r.ebn0_db, r.ber);
        assert!(r.ber > 1e-2);
    }
}

#[test]
fn pipeline_round_trip_at_20_db() {
    let m = model_g4();
    let codec = TurboCodec::new(TurboSpec::lte(1024, 5).unwrap()).unwrap();
    let cal = calibrate_residual(m, 20.0, 4000, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut errors = 0;
    for _ in 0..100 {
        let info: Vec<u8> = (0..1024).map(|_| rng.random_range(0..2u8)).collect();
        let rx = concat_channel(&concat_encode(&info, &codec, m).unwrap(), m, 20.0, &mut rng).unwrap();
        let got = concat_decode(&rx, &codec, m, Some(&cal), 20.0).unwrap().bits;
        errors += got.iter().zip(&info).filter(|(a, b)| a != b).count();
    }
    println!("20 dB round trip: {errors} bit errors over 100 blocks");
    assert_eq!(errors, 0);
}

#[test]
fn sixteen_qam_inputs_map_onto_subblocks() {
    // the 16-QAM inner code sees four amplitude levels per rail
    let ae = AeConfig { modulation: Modulation::Qam16, ..common::desk(4) };
    let bits: Vec<u8> = (0..256).map(|i| (i % 3 == 0) as u8).collect();
    let s = ae_inputs(&bits, &ae).unwrap();
    assert_eq!(s.shape(), (2, 64));
    let levels: Vec<f64> = ae.input_levels().iter().map(|l| l.0).collect();
    assert!(s.data().iter().all(|v| levels.contains(v)));
}
