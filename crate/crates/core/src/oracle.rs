//! Ground truth for small problems: exact maximum-likelihood error of tiny
//! codes over the one-bit channel, a trained one-hot decoder compared with
//! it, and Monte Carlo checks of the sign-layer kernel and of output
//! Gaussianity at initialisation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::q_function;
use crate::nn::{
    cross_entropy_with_grad, Activation, LayerSpec, Network, Optimizer, OptimizerConfig, Tensor,
};
use crate::rf::derive_seed;
use crate::stats::{excess_kurtosis, ks_normal, Proportion};
use crate::{Error, Result};

pub const MAX_INFO_BITS: usize = 6;
pub const MAX_CODE_LEN: usize = 12;
/// Relative likelihood tolerance under which two messages count as tied.
const TIE_TOL: f64 = 1e-12;
/// Draws per deterministic Monte Carlo chunk.
const CHUNK: usize = 1 << 14;

/// Codebook of 2^k real codewords of length n, each scaled to unit mean
/// power, sent over y = √γ·x + z, r = sign(y) with z ~ N(0, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TinyCode {
    pub k: usize,
    pub n: usize,
    pub codebook: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl TinyCode {
    pub fn new(k: usize, codebook: Vec<Vec<f64>>, gamma: f64) -> Result<Self> {
        if k > MAX_INFO_BITS {
            return Err(Error::InvalidParameter(format!(
                "at most {MAX_INFO_BITS} info bits, got {k}"
            )));
        }
        if codebook.len() != 1 << k {
            return Err(Error::Shape(format!(
                "codebook has {} codewords, expected {}",
                codebook.len(),
                1usize << k
            )));
        }
        let n = codebook[0].len();
        if n == 0 || n > MAX_CODE_LEN {
            return Err(Error::InvalidParameter(format!(
                "codeword length must be in 1..={MAX_CODE_LEN}, got {n}"
            )));
        }
        if !(gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("SNR must be nonnegative, got {gamma}")));
        }
        let mut normalized = Vec::with_capacity(codebook.len());
        for (m, c) in codebook.into_iter().enumerate() {
            if c.len() != n {
                return Err(Error::Shape(format!("codeword {m} has length {}, expected {n}", c.len())));
            }
            let p = c.iter().map(|x| x * x).sum::<f64>() / n as f64;
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!("codeword {m} has power {p}")));
            }
            let s = p.sqrt();
            normalized.push(c.into_iter().map(|x| x / s).collect());
        }
        Ok(Self {
            k,
            n,
            codebook: normalized,
            gamma,
        })
    }

    /// I.i.d. N(0, 1) entries, then power normalised.
    pub fn random_gaussian(k: usize, n: usize, gamma: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let book = (0..1usize << k)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Self::new(k, book, gamma)
    }

    pub fn messages(&self) -> usize {
        self.codebook.len()
    }

    /// P(r_i = +1 | x_i) = Q(−x_i√γ); well defined for γ = ∞.
    pub fn prob_plus(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.5;
        }
        q_function(-x * self.gamma.sqrt())
    }

    /// P(r | message m) where bit i of `r` set means r_i = +1.
    pub fn transition(&self, m: usize, r: usize) -> f64 {
        self.codebook[m]
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let p = self.prob_plus(x);
                if r >> i & 1 == 1 {
                    p
                } else {
                    1.0 - p
                }
            })
            .product()
    }

    /// Quantized output vector for index `r` as ±1 values.
    pub fn output_vector(&self, r: usize) -> Vec<f64> {
        (0..self.n).map(|i| if r >> i & 1 == 1 { 1.0 } else { -1.0 }).collect()
    }

    /// One channel use: (r as ±1 values, r index).
    pub fn transmit<R: Rng>(&self, m: usize, rng: &mut R) -> (Vec<f64>, usize) {
        let sg = self.gamma.sqrt();
        let mut idx = 0usize;
        let r = self.codebook[m]
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let z: f64 = StandardNormal.sample(rng);
                let y = if self.gamma.is_infinite() { x } else { sg * x + z };
                if y >= 0.0 {
                    idx |= 1 << i;
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        (r, idx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactErrorReport {
    /// ε(n, M) with tied messages sharing the probability mass equally.
    pub ml_error_prob: f64,
    pub per_message: Vec<f64>,
    pub trained_decoder_error: Option<Proportion>,
}

/// For every output r, the set of messages of maximal likelihood.
pub fn ml_decision_sets(code: &TinyCode) -> Result<Vec<Vec<usize>>> {
    if code.n > MAX_CODE_LEN {
        return Err(Error::InvalidParameter(format!(
            "cannot enumerate 2^{} outputs",
            code.n
        )));
    }
    Ok((0..1usize << code.n)
        .map(|r| {
            let lik: Vec<f64> = (0..code.messages()).map(|m| code.transition(m, r)).collect();
            let best = lik.iter().cloned().fold(0.0, f64::max);
            (0..code.messages())
                .filter(|&m| lik[m] >= best * (1.0 - TIE_TOL))
                .collect()
        })
        .collect())
}

/// Exact ML block-error probability by enumerating every quantized output.
/// Ties are split: a message in a tie of size t is decided correctly with
/// probability 1/t, which is the error of a uniformly random tie break.
pub fn exact_ml_error(code: &TinyCode) -> Result<ExactErrorReport> {
    let sets = ml_decision_sets(code)?;
    let per_message: Vec<f64> = (0..code.messages())
        .map(|m| {
            let correct: f64 = sets
                .iter()
                .enumerate()
                .filter(|(_, s)| s.contains(&m))
                .map(|(r, s)| code.transition(m, r) / s.len() as f64)
                .sum();
            (1.0 - correct).clamp(0.0, 1.0)
        })
        .collect();
    let ml_error_prob = per_message.iter().sum::<f64>() / code.messages() as f64;
    Ok(ExactErrorReport {
        ml_error_prob,
        per_message,
        trained_decoder_error: None,
    })
}

/// Exact block-error probability of a deterministic decision rule `decide[r]`.
pub fn exact_rule_error(code: &TinyCode, decide: &[usize]) -> f64 {
    let correct: f64 = decide
        .iter()
        .enumerate()
        .map(|(r, &m)| code.transition(m, r))
        .sum();
    (1.0 - correct / code.messages() as f64).clamp(0.0, 1.0)
}

/// Training and evaluation budget of the one-hot decoder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapBudget {
    /// Hidden width; `None` means 4·2^k.
    pub hidden: Option<usize>,
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for GapBudget {
    fn default() -> Self {
        Self {
            hidden: None,
            epochs: 200,
            samples_per_epoch: 8192,
            batch_size: 128,
            learning_rate: 1e-3,
            eval_samples: 200_000,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub ml_error: f64,
    /// Error of the trained decision rule, summed exactly over all outputs.
    pub trained_error_exact: f64,
    pub trained_error_mc: Proportion,
    /// (trained − ML)/ML from the exact trained error.
    pub gap: f64,
    /// The same ratio over the Monte Carlo confidence interval.
    pub gap_ci: (f64, f64),
    /// Probability mass of outputs where the trained decision is an ML decision.
    pub mass_agreement: f64,
    pub loss_history: Vec<f64>,
}

/// Trains a softmax decoder (one ReLU hidden layer) on simulated channel
/// outputs of the frozen codebook and compares it with the ML decoder.
pub fn theorem1_gap(code: &TinyCode, budget: &GapBudget) -> Result<GapReport> {
    if budget.epochs == 0 || budget.samples_per_epoch == 0 || budget.batch_size == 0 {
        return Err(Error::InvalidParameter("training budget must be nonzero".into()));
    }
    let ml = exact_ml_error(code)?;
    let sets = ml_decision_sets(code)?;
    let m_count = code.messages();
    let hidden = budget.hidden.unwrap_or(4 * m_count);
    let specs = [
        LayerSpec::new(code.n, hidden, Activation::Relu),
        LayerSpec::new(hidden, m_count, Activation::Softmax),
    ];
    let mut net = Network::with_fan_in_init(&specs, budget.seed)?;
    let mut opt = Optimizer::new(OptimizerConfig::adam(budget.learning_rate))?;
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    rng.set_stream(1);

    let mut history = Vec::with_capacity(budget.epochs);
    for epoch in 0..budget.epochs {
        let mut total = 0.0;
        let mut done = 0;
        while done < budget.samples_per_epoch {
            let b = budget.batch_size.min(budget.samples_per_epoch - done);
            let mut x = Tensor::zeros(b, code.n);
            let mut y = Tensor::zeros(b, m_count);
            for row in 0..b {
                let m = rng.random_range(0..m_count);
                let (r, _) = code.transmit(m, &mut rng);
                x.row_mut(row).copy_from_slice(&r);
                y.set(row, m, 1.0);
            }
            let cache = net.forward(&x, crate::nn::Mode::Train)?;
            let (loss, g) = cross_entropy_with_grad(cache.output(), &y)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            let grads = net.backward(&cache, &g)?;
            opt.step(&mut net.params_mut(), &grads.slices())?;
            total += loss * b as f64;
            done += b;
        }
        history.push(total / budget.samples_per_epoch as f64);
    }

    let all: Vec<f64> = (0..1usize << code.n).flat_map(|r| code.output_vector(r)).collect();
    let probs = net.infer(&Tensor::from_vec(1 << code.n, code.n, all)?)?;
    let decide: Vec<usize> = (0..probs.rows())
        .map(|r| argmax(probs.row(r)))
        .collect();
    let trained_exact = exact_rule_error(code, &decide);

    let mass_agreement: f64 = (0..1usize << code.n)
        .filter(|&r| sets[r].contains(&decide[r]))
        .map(|r| (0..m_count).map(|m| code.transition(m, r)).sum::<f64>() / m_count as f64)
        .sum();

    let mut eval_rng = ChaCha8Rng::seed_from_u64(budget.seed);
    eval_rng.set_stream(2);
    let errors = (0..budget.eval_samples)
        .filter(|_| {
            let m = eval_rng.random_range(0..m_count);
            let (_, r) = code.transmit(m, &mut eval_rng);
            decide[r] != m
        })
        .count();
    let mc = Proportion::new(errors as u64, budget.eval_samples as u64);
    let base = ml.ml_error_prob;
    let rel = |e: f64| if base > 0.0 { (e - base) / base } else { e - base };
    Ok(GapReport {
        ml_error: base,
        trained_error_exact: trained_exact,
        trained_error_mc: mc,
        gap: rel(trained_exact),
        gap_ci: (rel(mc.ci_low), rel(mc.ci_high)),
        mass_agreement,
        loss_history: history,
    })
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub rho: f64,
    pub empirical: f64,
    pub analytic: f64,
    pub std_error: f64,
}

/// Output statistics of the untrained network at one hidden width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthStats {
    pub width: usize,
    pub draws: usize,
    pub excess_kurtosis: f64,
    /// √(24/draws), the large-sample standard error of the kurtosis.
    pub kurtosis_std_error: f64,
    pub analytic_excess_kurtosis: f64,
    pub ks_statistic: f64,
    /// Empirical output covariance over the probe inputs.
    pub covariance: Vec<Vec<f64>>,
    /// Infinite-width covariance over the same inputs.
    pub reference_covariance: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub points: Vec<KernelPoint>,
    pub widths: Vec<WidthStats>,
}

/// (2/π)·arcsin(ρ).
pub fn arcsine_kernel(rho: f64) -> f64 {
    std::f64::consts::FRAC_2_PI * rho.clamp(-1.0, 1.0).asin()
}

/// E[relu(u)relu(v)] for unit-variance u, v with correlation ρ.
pub fn relu_kernel(rho: f64) -> f64 {
    let rho = rho.clamp(-1.0, 1.0);
    let t = rho.acos();
    (t.sin() + (std::f64::consts::PI - t) * rho) / (2.0 * std::f64::consts::PI)
}

fn chunk_rng(seed: u64, chunk: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, chunk as u64));
    rng.set_stream(stream);
    rng
}

/// Empirical E[sign(u)sign(v)] for unit bivariate Gaussians against the
/// arcsine law, one point per ρ.
pub fn arcsine_kernel_check(rhos: &[f64], samples: usize, seed: u64) -> Result<KernelReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if let Some(r) = rhos.iter().find(|r| !(r.abs() <= 1.0)) {
        return Err(Error::InvalidParameter(format!("correlation {r} outside [-1, 1]")));
    }
    let points = rhos
        .iter()
        .enumerate()
        .map(|(ri, &rho)| {
            let c = (1.0 - rho * rho).max(0.0).sqrt();
            let sum: i64 = (0..samples.div_ceil(CHUNK))
                .into_par_iter()
                .map(|ch| {
                    let n = CHUNK.min(samples - ch * CHUNK);
                    let mut rng = chunk_rng(seed, ch, ri as u64);
                    (0..n)
                        .map(|_| {
                            let a: f64 = StandardNormal.sample(&mut rng);
                            let b: f64 = StandardNormal.sample(&mut rng);
                            let v = rho * a + c * b;
                            if (a >= 0.0) == (v >= 0.0) {
                                1i64
                            } else {
                                -1
                            }
                        })
                        .sum::<i64>()
                })
                .collect::<Vec<_>>()
                .into_iter()
                .sum();
            let empirical = sum as f64 / samples as f64;
            KernelPoint {
                rho,
                empirical,
                analytic: arcsine_kernel(rho),
                std_error: ((1.0 - empirical * empirical).max(0.0) / samples as f64).sqrt(),
            }
        })
        .collect();
    Ok(KernelReport {
        points,
        widths: Vec::new(),
    })
}

/// One random Gaussian layer of the given width applied to two inputs:
/// returns (pre-quantizer correlation, post-quantizer kernel), both as
/// averages over the units.
pub fn quantizer_layer_kernel(z: &[f64], zh: &[f64], width: usize, seed: u64) -> Result<(f64, f64)> {
    if z.len() != zh.len() || z.is_empty() {
        return Err(Error::Shape("inputs must be nonempty and of equal length".into()));
    }
    if width == 0 {
        return Err(Error::InvalidParameter("width must be positive".into()));
    }
    let parts: Vec<[f64; 4]> = (0..width.div_ceil(CHUNK))
        .into_par_iter()
        .map(|ch| {
            let n = CHUNK.min(width - ch * CHUNK);
            let mut rng = chunk_rng(seed, ch, 0);
            let mut acc = [0.0; 4];
            for _ in 0..n {
                let (mut u, mut v) = (0.0, 0.0);
                for (a, b) in z.iter().zip(zh) {
                    let w: f64 = StandardNormal.sample(&mut rng);
                    u += w * a;
                    v += w * b;
                }
                acc[0] += u * v;
                acc[1] += u * u;
                acc[2] += v * v;
                acc[3] += if (u >= 0.0) == (v >= 0.0) { 1.0 } else { -1.0 };
            }
            acc
        })
        .collect();
    let mut s = [0.0; 4];
    for p in &parts {
        for (a, b) in s.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok((s[0] / (s[1] * s[2]).sqrt(), s[3] / width as f64))
}

/// Untrained network whose output distribution is examined over
/// initialisations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpArchitecture {
    /// Quantized input straight into one linear output unit.
    SingleLinear,
    /// The decoder side of the autoencoder at init: quantized input, one
    /// ReLU hidden layer of the swept width, one linear output unit.
    ReluHidden,
}

/// Probe inputs: ±1 patterns of length `dim` with prescribed overlaps.
fn probe_inputs(dim: usize) -> Vec<Vec<f64>> {
    let a: Vec<f64> = vec![1.0; dim];
    let b: Vec<f64> = (0..dim).map(|i| if i < dim / 4 { -1.0 } else { 1.0 }).collect();
    let c: Vec<f64> = (0..dim).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    vec![a, b, c]
}

/// Output statistics over `draws` independent N(0, 1) initialisations per
/// width (weights scaled by 1/√fan-in). Reports excess kurtosis and a KS
/// distance for the first probe input and the covariance over three probes.
pub fn gaussianity_test(
    arch: GpArchitecture,
    widths: &[usize],
    draws: usize,
    input_dim: usize,
    seed: u64,
) -> Result<KernelReport> {
    if draws < 2 || input_dim == 0 {
        return Err(Error::InvalidParameter("need at least two draws and a nonempty input".into()));
    }
    if let Some(w) = widths.iter().find(|&&w| w < 64) {
        return Err(Error::InvalidParameter(format!("widths must be at least 64, got {w}")));
    }
    let probes = probe_inputs(input_dim);
    let p = probes.len();
    let norm_in = 1.0 / (input_dim as f64).sqrt();
    let stats = widths
        .iter()
        .enumerate()
        .map(|(wi, &width)| {
            let outs: Vec<Vec<f64>> = (0..draws.div_ceil(CHUNK))
                .into_par_iter()
                .map(|ch| {
                    let n = CHUNK.min(draws - ch * CHUNK);
                    let mut rng = chunk_rng(seed, ch, wi as u64);
                    let mut out = Vec::with_capacity(n * p);
                    let mut h = vec![0.0; p];
                    for _ in 0..n {
                        match arch {
                            GpArchitecture::SingleLinear => {
                                h.iter_mut().for_each(|x| *x = 0.0);
                                for i in 0..input_dim {
                                    let w: f64 = StandardNormal.sample(&mut rng);
                                    for (hk, pk) in h.iter_mut().zip(&probes) {
                                        *hk += w * pk[i] * norm_in;
                                    }
                                }
                                out.extend_from_slice(&h);
                            }
                            GpArchitecture::ReluHidden => {
                                let mut o = vec![0.0; p];
                                let mut pre = vec![0.0; p];
                                for _ in 0..width {
                                    pre.iter_mut().for_each(|x| *x = 0.0);
                                    for i in 0..input_dim {
                                        let w: f64 = StandardNormal.sample(&mut rng);
                                        for (q, pk) in pre.iter_mut().zip(&probes) {
                                            *q += w * pk[i];
                                        }
                                    }
                                    let v: f64 = StandardNormal.sample(&mut rng);
                                    for (ok, q) in o.iter_mut().zip(&pre) {
                                        *ok += v * (q * norm_in).max(0.0);
                                    }
                                }
                                let s = 1.0 / (width as f64).sqrt();
                                out.extend(o.iter().map(|x| x * s));
                            }
                        }
                    }
                    out
                })
                .collect();
            let flat: Vec<f64> = outs.into_iter().flatten().collect();
            let first: Vec<f64> = flat.iter().step_by(p).cloned().collect();
            let mut cov = vec![vec![0.0; p]; p];
            let means: Vec<f64> = (0..p)
                .map(|a| flat.iter().skip(a).step_by(p).sum::<f64>() / draws as f64)
                .collect();
            for row in flat.chunks(p) {
                for a in 0..p {
                    for b in 0..p {
                        cov[a][b] += (row[a] - means[a]) * (row[b] - means[b]);
                    }
                }
            }
            cov.iter_mut()
                .flatten()
                .for_each(|c| *c /= (draws - 1) as f64);
            let reference: Vec<Vec<f64>> = probes
                .iter()
                .map(|x| {
                    probes
                        .iter()
                        .map(|y| {
                            let rho = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
                                / input_dim as f64;
                            match arch {
                                GpArchitecture::SingleLinear => rho,
                                GpArchitecture::ReluHidden => relu_kernel(rho),
                            }
                        })
                        .collect()
                })
                .collect();
            WidthStats {
                width,
                draws,
                excess_kurtosis: excess_kurtosis(&first),
                kurtosis_std_error: (24.0 / draws as f64).sqrt(),
                // output | hidden ~ N(0, S) with S = ‖h‖²/w, E S = 1/2,
                // Var S = (5/4)/w: kurtosis 3 Var S / (E S)² = 15/w
                analytic_excess_kurtosis: match arch {
                    GpArchitecture::SingleLinear => 0.0,
                    GpArchitecture::ReluHidden => 15.0 / width as f64,
                },
                ks_statistic: ks_normal(&first),
                covariance: cov,
                reference_covariance: reference,
            }
        })
        .collect();
    Ok(KernelReport {
        points: Vec::new(),
        widths: stats,
    })
}
