use onebit_core::oracle::{
    arcsine_kernel, arcsine_kernel_check, exact_ml_error, exact_rule_error, gaussianity_test,
    ml_decision_sets, quantizer_layer_kernel, relu_kernel, theorem1_gap, GapBudget, GpArchitecture,
    TinyCode,
};
use onebit_core::stats::{excess_kurtosis, ks_normal, wilson_interval, Proportion};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian tail by composite Simpson integration of the density.
fn q_simpson(t: f64) -> f64 {
    let (a, b, n) = (t, t + 14.0, 20_000);
    let h = (b - a) / n as f64;
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(a) + pdf(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Second evaluator: per-output likelihoods in the log domain, first-index
/// ties resolved by exact equality, mass split over the argmax set.
fn brute_force_error(code: &TinyCode) -> f64 {
    let n = code.n;
    let m_count = code.codebook.len();
    let mut err = 0.0;
    for r in 0..1usize << n {
        let logl: Vec<f64> = code
            .codebook
            .iter()
            .map(|c| {
                (0..n)
                    .map(|i| {
                        let s = if r >> i & 1 == 1 { 1.0 } else { -1.0 };
                        // P(sign(√γx + z) = s) = 1 − Q(s·x·√γ)
                        (1.0 - q_simpson(s * c[i] * code.gamma.sqrt())).ln()
                    })
                    .sum()
            })
            .collect();
        let best = logl.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..m_count).filter(|&m| logl[m] >= best - 1e-10).collect();
        for (m, l) in logl.iter().enumerate() {
            let p = l.exp();
            let hit = if winners.contains(&m) {
                1.0 / winners.len() as f64
            } else {
                0.0
            };
            err += p * (1.0 - hit);
        }
    }
    err / m_count as f64
}

#[test]
fn antipodal_single_use_matches_closed_form() {
    for gamma in [0.25, 1.0, 4.0, 10.0] {
        let code = TinyCode::new(1, vec![vec![1.0], vec![-1.0]], gamma).unwrap();
        let e = exact_ml_error(&code).unwrap().ml_error_prob;
        assert!((e - q_simpson(gamma.sqrt())).abs() < 1e-12, "γ={gamma}: {e}");
    }
}

#[test]
fn noiseless_distinct_patterns_are_error_free() {
    let book: Vec<Vec<f64>> = (0..8usize)
        .map(|m| (0..4).map(|i| if m >> i & 1 == 1 { 1.0 } else { -1.0 }).collect())
        .collect();
    let code = TinyCode::new(3, book, f64::INFINITY).unwrap();
    assert_eq!(exact_ml_error(&code).unwrap().ml_error_prob, 0.0);
}

#[test]
fn exact_error_agrees_with_independent_summation() {
    for seed in [3u64, 11, 29] {
        let code = TinyCode::random_gaussian(3, 6, 4.0, seed).unwrap();
        let a = exact_ml_error(&code).unwrap();
        let b = brute_force_error(&code);
        assert!((a.ml_error_prob - b).abs() < 1e-9, "{} vs {b}", a.ml_error_prob);
        let mean = a.per_message.iter().sum::<f64>() / a.per_message.len() as f64;
        assert!((mean - a.ml_error_prob).abs() < 1e-15);
    }
}

#[test]
fn tied_codewords_split_their_mass() {
    // Two identical codewords can never be told apart: half of their mass is lost.
    let code = TinyCode::new(1, vec![vec![1.0, -1.0], vec![1.0, -1.0]], 3.0).unwrap();
    let e = exact_ml_error(&code).unwrap().ml_error_prob;
    assert!((e - 0.5).abs() < 1e-12);
}

#[test]
fn exact_error_is_deterministic() {
    let code = TinyCode::random_gaussian(4, 8, 2.0, 5).unwrap();
    assert_eq!(exact_ml_error(&code).unwrap(), exact_ml_error(&code).unwrap());
}

#[test]
fn tiny_code_rejects_bad_shapes() {
    assert!(TinyCode::random_gaussian(3, 13, 1.0, 1).is_err());
    assert!(TinyCode::random_gaussian(7, 8, 1.0, 1).is_err());
    assert!(TinyCode::new(1, vec![vec![1.0]], 1.0).is_err());
    assert!(TinyCode::new(1, vec![vec![1.0], vec![0.0]], 1.0).is_err());
    assert!(TinyCode::new(1, vec![vec![1.0], vec![-1.0]], -1.0).is_err());
}

#[test]
fn codewords_are_power_normalized() {
    let code = TinyCode::random_gaussian(3, 5, 1.0, 8).unwrap();
    for c in &code.codebook {
        let p = c.iter().map(|x| x * x).sum::<f64>() / c.len() as f64;
        assert!((p - 1.0).abs() < 1e-12);
    }
}

#[test]
fn ml_rule_is_optimal_among_deterministic_rules() {
    let code = TinyCode::random_gaussian(2, 5, 2.0, 4).unwrap();
    let ml = exact_ml_error(&code).unwrap().ml_error_prob;
    let sets = ml_decision_sets(&code).unwrap();
    let first: Vec<usize> = sets.iter().map(|s| s[0]).collect();
    assert!((exact_rule_error(&code, &first) - ml).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let rule: Vec<usize> = (0..sets.len())
            .map(|_| rand::Rng::random_range(&mut rng, 0..4))
            .collect();
        assert!(exact_rule_error(&code, &rule) >= ml - 1e-12);
    }
}

#[test]
fn trained_decoder_never_beats_ml() {
    let code = TinyCode::random_gaussian(2, 6, 2.0, 9).unwrap();
    let budget = GapBudget {
        epochs: 20,
        eval_samples: 50_000,
        ..GapBudget::default()
    };
    let r = theorem1_gap(&code, &budget).unwrap();
    assert!(r.gap >= -1e-12, "gap {}", r.gap);
    assert!(r.trained_error_mc.ci_high >= r.ml_error);
    assert!(r.mass_agreement > 0.0 && r.mass_agreement <= 1.0 + 1e-12);
    assert_eq!(r.loss_history.len(), 20);
}

#[test]
fn gap_run_is_reproducible() {
    let code = TinyCode::random_gaussian(2, 4, 1.0, 2).unwrap();
    let budget = GapBudget {
        epochs: 3,
        samples_per_epoch: 1024,
        eval_samples: 5000,
        ..GapBudget::default()
    };
    assert_eq!(theorem1_gap(&code, &budget).unwrap(), theorem1_gap(&code, &budget).unwrap());
}

#[test]
fn arcsine_edge_points() {
    let r = arcsine_kernel_check(&[1.0, 0.0, -1.0], 200_000, 1).unwrap();
    assert_eq!(r.points[0].empirical, 1.0);
    assert_eq!(r.points[0].analytic, 1.0);
    assert!(r.points[1].empirical.abs() < 4.0 * r.points[1].std_error.max(1.0 / 450.0));
    assert_eq!(r.points[2].empirical, -1.0);
    assert!(arcsine_kernel_check(&[1.5], 10, 1).is_err());
}

#[test]
fn arcsine_half_is_one_third() {
    assert!((arcsine_kernel(0.5) - 1.0 / 3.0).abs() < 1e-15);
    let r = arcsine_kernel_check(&[0.5], 1_000_000, 7).unwrap();
    assert!((r.points[0].empirical - 1.0 / 3.0).abs() < 0.01);
}

#[test]
fn kernel_error_shrinks_at_monte_carlo_rate() {
    let rhos: Vec<f64> = (-9..=9).map(|i| i as f64 / 10.0).collect();
    let mean_err = |n: usize| {
        let r = arcsine_kernel_check(&rhos, n, 13).unwrap();
        r.points.iter().map(|p| (p.empirical - p.analytic).abs()).sum::<f64>() / rhos.len() as f64
    };
    let coarse = mean_err(10_000);
    let fine = mean_err(1_000_000);
    // √100 = 10 expected; accept a broad band around it
    let ratio = coarse / fine;
    assert!(ratio > 3.0 && ratio < 40.0, "ratio {ratio} ({coarse} vs {fine})");
}

#[test]
fn quantizer_layer_follows_arcsine_of_its_input_correlation() {
    let d = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..3 {
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let zh: Vec<f64> = z
            .iter()
            .map(|x| {
                let e: f64 = StandardNormal.sample(&mut rng);
                0.6 * x + 0.8 * e
            })
            .collect();
        let (rho, post) = quantizer_layer_kernel(&z, &zh, 1 << 16, 5).unwrap();
        assert!((post - arcsine_kernel(rho)).abs() < 0.02, "{post} vs {}", arcsine_kernel(rho));
    }
}

#[test]
fn relu_kernel_reference_values() {
    assert!((relu_kernel(1.0) - 0.5).abs() < 1e-15);
    assert!((relu_kernel(0.0) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
    assert!(relu_kernel(-1.0).abs() < 1e-15);
    // Monte Carlo reference at ρ = 0.3
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 400_000;
    let c = (1.0f64 - 0.09).sqrt();
    let s: f64 = (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            a.max(0.0) * (0.3 * a + c * b).max(0.0)
        })
        .sum();
    assert!((s / n as f64 - relu_kernel(0.3)).abs() < 3e-3);
}

fn symmetric_psd(m: &[Vec<f64>], tol: f64) -> bool {
    let n = m.len();
    for i in 0..n {
        for j in 0..n {
            if (m[i][j] - m[j][i]).abs() > tol {
                return false;
            }
        }
    }
    // Cholesky with a small diagonal allowance
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] + tol - s;
                if d <= 0.0 {
                    return false;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    true
}

#[test]
fn linear_network_output_is_gaussian_at_any_width() {
    let r = gaussianity_test(GpArchitecture::SingleLinear, &[64, 512], 50_000, 8, 3).unwrap();
    for w in &r.widths {
        assert!(w.excess_kurtosis.abs() < 4.0 * w.kurtosis_std_error, "{w:?}");
        assert!(w.ks_statistic < 0.01);
        assert!(symmetric_psd(&w.covariance, 1e-9));
        for (a, b) in w.covariance.iter().flatten().zip(w.reference_covariance.iter().flatten()) {
            assert!((a - b).abs() < 0.03);
        }
    }
}

#[test]
fn relu_network_kurtosis_tracks_width() {
    let r = gaussianity_test(GpArchitecture::ReluHidden, &[64, 256], 20_000, 8, 6).unwrap();
    for w in &r.widths {
        assert!(
            (w.excess_kurtosis - w.analytic_excess_kurtosis).abs() < 4.0 * w.kurtosis_std_error,
            "{w:?}"
        );
        assert!(symmetric_psd(&w.covariance, 1e-9));
        for (a, b) in w.covariance.iter().flatten().zip(w.reference_covariance.iter().flatten()) {
            assert!((a - b).abs() < 0.03, "{a} vs {b}");
        }
    }
    assert!(gaussianity_test(GpArchitecture::ReluHidden, &[32], 100, 8, 1).is_err());
}

#[test]
fn wilson_interval_properties() {
    let (lo, hi) = wilson_interval(0, 100, 1.96);
    assert_eq!(lo, 0.0);
    assert!(hi > 0.0 && hi < 0.05);
    let p = Proportion::new(30, 100);
    assert!(p.ci_low < 0.3 && p.ci_high > 0.3);
    // textbook value for 30/100 at 95%: [0.2189, 0.3958]
    assert!((p.ci_low - 0.2189).abs() < 5e-4 && (p.ci_high - 0.3958).abs() < 5e-4);
    assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
}

#[test]
fn sample_moments_of_known_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    assert!(excess_kurtosis(&g).abs() < 0.05);
    assert!(ks_normal(&g) < 0.005);
    // uniform: excess kurtosis −1.2
    let u: Vec<f64> = (0..200_000).map(|i| (i as f64 + 0.5) / 200_000.0).collect();
    assert!((excess_kurtosis(&u) + 1.2).abs() < 1e-3);
    assert!(ks_normal(&u) > 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ml_error_is_a_probability(seed in 0u64..1000, k in 1usize..4, n in 1usize..7, g in 0.0f64..20.0) {
        let code = TinyCode::random_gaussian(k, n, g, seed).unwrap();
        let r = exact_ml_error(&code).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.ml_error_prob));
        prop_assert!(r.per_message.iter().all(|e| (0.0..=1.0).contains(e)));
        // never worse than guessing
        let m = code.codebook.len() as f64;
        prop_assert!(r.ml_error_prob <= 1.0 - 1.0 / m + 1e-12);
    }

    #[test]
    fn transitions_sum_to_one(seed in 0u64..1000, n in 1usize..9, g in 0.0f64..50.0) {
        let code = TinyCode::random_gaussian(1, n, g, seed).unwrap();
        for m in 0..2 {
            let s: f64 = (0..1usize << n).map(|r| code.transition(m, r)).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
