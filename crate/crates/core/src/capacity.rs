//! Monte Carlo mutual-information bound of the one-bit quantized channel
//! autoencoder with Gaussian encoder weights, and the minimum SNR at which it
//! reaches a given code rate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rf::derive_seed;
use crate::{Error, Result};

/// Samples per deterministic reduction chunk.
const CHUNK: usize = 1 << 15;

/// Upper-tail probability of the standard normal.
pub fn q_function(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

/// Binary entropy in bits with 0·log 0 = 0.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Per-use bound for one weight draw: 1 − h2(Q(θ√γ)).
pub fn capacity_term(theta: f64, gamma: f64) -> f64 {
    1.0 - binary_entropy(q_function(theta * gamma.sqrt()))
}

/// Mapping between the transmit SNR γ and the Eb/N0 axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EbN0Convention {
    /// Eb/N0 (dB) = γ (dB).
    Identity,
    /// Eb/N0 (dB) = γ (dB) − 10·log10(2R).
    TwoRate,
    /// Eb/N0 (dB) = γ (dB) − 10·log10(R).
    Rate,
}

impl EbN0Convention {
    pub fn offset_db(self, rate: f64) -> f64 {
        match self {
            EbN0Convention::Identity => 0.0,
            EbN0Convention::TwoRate => -10.0 * (2.0 * rate).log10(),
            EbN0Convention::Rate => -10.0 * rate.log10(),
        }
    }

    pub fn ebn0_db(self, gamma_db: f64, rate: f64) -> f64 {
        gamma_db + self.offset_db(rate)
    }

    pub fn gamma_db(self, ebn0_db: f64, rate: f64) -> f64 {
        ebn0_db - self.offset_db(rate)
    }
}

/// Convention used for reported Eb/N0 values.
pub const DEFAULT_CONVENTION: EbN0Convention = EbN0Convention::Identity;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityPoint {
    pub gamma: f64,
    pub ebn0_db: f64,
    pub c_bits_per_use: f64,
    pub mc_samples: usize,
    pub std_error: f64,
}

/// Fixed set of weight draws, reusable across SNR values so a capacity curve
/// built from it is exactly monotone.
#[derive(Clone, Debug)]
pub struct WeightSamples {
    /// |θ|; the bound is even in θ.
    abs_theta: Vec<f64>,
}

impl WeightSamples {
    pub fn draw(samples: usize, seed: u64) -> Self {
        let chunks = samples.div_ceil(CHUNK);
        let abs_theta: Vec<f64> = (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let n = CHUNK.min(samples - c * CHUNK);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
                (0..n)
                    .map(move |_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z.abs()
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Self { abs_theta }
    }

    pub fn len(&self) -> usize {
        self.abs_theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abs_theta.is_empty()
    }

    /// Mean and standard error of the bound at linear SNR `gamma`; chunk sums
    /// are combined in chunk order so the result does not depend on threads.
    pub fn evaluate(&self, gamma: f64) -> (f64, f64) {
        let sg = gamma.sqrt();
        let partial: Vec<(f64, f64)> = self
            .abs_theta
            .par_chunks(CHUNK)
            .map(|ch| {
                ch.iter().fold((0.0, 0.0), |(s, s2), &t| {
                    let v = 1.0 - binary_entropy(q_function(t * sg));
                    (s + v, s2 + v * v)
                })
            })
            .collect();
        let (s, s2) = partial
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let n = self.len() as f64;
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0);
        (mean, (var / n).sqrt())
    }
}

/// Monte Carlo estimate of the bound at linear SNR `gamma` for a code of rate
/// `rate` (only used to place the point on the Eb/N0 axis).
pub fn capacity_one_bit(gamma: f64, samples: usize, seed: u64, rate: f64) -> Result<CapacityPoint> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("SNR must be nonnegative, got {gamma}")));
    }
    if samples < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "at least 10^4 Monte Carlo samples are required, got {samples}"
        )));
    }
    let w = WeightSamples::draw(samples, seed);
    let (c, se) = w.evaluate(gamma);
    Ok(CapacityPoint {
        gamma,
        ebn0_db: DEFAULT_CONVENTION.ebn0_db(10.0 * gamma.log10(), rate),
        c_bits_per_use: c,
        mc_samples: samples,
        std_error: se,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinSnr {
    pub rate: f64,
    pub gamma_db: f64,
    pub ebn0_db: f64,
}

/// Smallest γ with C(γ) = rate, by bisection on a shared set of weight draws
/// until the bracket is narrower than `tolerance_db`.
pub fn min_snr_for_rate(rate: f64, tolerance_db: f64, samples: usize, seed: u64) -> Result<MinSnr> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rate must lie in (0, 1), got {rate}"
        )));
    }
    if !(tolerance_db > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let w = WeightSamples::draw(samples, seed);
    let c = |db: f64| w.evaluate(10f64.powf(db / 10.0)).0;
    let (mut lo, mut hi) = (-30.0, 10.0);
    while c(hi) < rate {
        hi += 10.0;
        if hi > 200.0 {
            return Err(Error::InvalidParameter(format!("rate {rate} is unreachable")));
        }
    }
    while hi - lo > tolerance_db {
        let mid = 0.5 * (lo + hi);
        if c(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma_db = 0.5 * (lo + hi);
    Ok(MinSnr {
        rate,
        gamma_db,
        ebn0_db: DEFAULT_CONVENTION.ebn0_db(gamma_db, rate),
    })
}

/// Capacity at each Eb/N0 grid value for rate `rate`.
pub fn capacity_curve(
    ebn0_db: &[f64],
    rate: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<CapacityPoint>> {
    if samples < 10_000 {
        return Err(Error::InvalidParameter("at least 10^4 samples are required".into()));
    }
    let w = WeightSamples::draw(samples, seed);
    Ok(ebn0_db
        .iter()
        .map(|&e| {
            let gamma = 10f64.powf(DEFAULT_CONVENTION.gamma_db(e, rate) / 10.0);
            let (c, se) = w.evaluate(gamma);
            CapacityPoint {
                gamma,
                ebn0_db: e,
                c_bits_per_use: c,
                mc_samples: samples,
                std_error: se,
            }
        })
        .collect())
}
