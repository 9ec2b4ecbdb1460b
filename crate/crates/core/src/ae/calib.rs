use serde::{Deserialize, Serialize};

use super::model::stream_rng;
use super::AeModel;
use crate::nn::Tensor;
use crate::{Error, Result};

/// Minimum samples behind each per-position estimate.
pub const MIN_CALIBRATION_SAMPLES: usize = 1000;
pub const SIGMA2_FLOOR: f64 = 1e-9;

/// Gaussian residual model ŝ ≈ μ·s + n, n ~ N(0, σ²), fitted per position
/// within the subblock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl Calibration {
    pub fn uniform(n: usize, mu: f64, sigma2: f64) -> Self {
        Self {
            mu: vec![mu; n],
            sigma2: vec![sigma2; n],
        }
    }

    /// Position-averaged (μ, σ²).
    pub fn pooled(&self) -> (f64, f64) {
        let n = self.mu.len() as f64;
        (self.mu.iter().sum::<f64>() / n, self.sigma2.iter().sum::<f64>() / n)
    }
}

/// Least-squares fit of μ and the residual variance per column.
pub fn fit_residual(s: &Tensor, shat: &Tensor) -> Result<Calibration> {
    if s.shape() != shat.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", s.shape(), shat.shape())));
    }
    let (rows, n) = s.shape();
    if rows < MIN_CALIBRATION_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "calibration needs at least {MIN_CALIBRATION_SAMPLES} blocks, got {rows}"
        )));
    }
    let mut mu = vec![0.0; n];
    let mut sigma2 = vec![0.0; n];
    for j in 0..n {
        let (mut sx, mut xx) = (0.0, 0.0);
        for r in 0..rows {
            sx += shat.get(r, j) * s.get(r, j);
            xx += s.get(r, j) * s.get(r, j);
        }
        mu[j] = sx / xx;
        let res: f64 = (0..rows).map(|r| (shat.get(r, j) - mu[j] * s.get(r, j)).powi(2)).sum();
        sigma2[j] = (res / rows as f64).max(SIGMA2_FLOOR);
    }
    Ok(Calibration { mu, sigma2 })
}

/// Mean of ŝ conditioned on each input level, pooled over positions.
pub fn conditional_means(s: &Tensor, shat: &Tensor, levels: &[f64]) -> Vec<(f64, usize)> {
    levels
        .iter()
        .map(|&l| {
            let (mut sum, mut n) = (0.0, 0);
            for (x, y) in s.data().iter().zip(shat.data()) {
                if *x == l {
                    sum += y;
                    n += 1;
                }
            }
            (if n > 0 { sum / n as f64 } else { f64::NAN }, n)
        })
        .collect()
}

/// Fits the residual model on `n_blocks` fresh blocks at `ebn0_db`.
pub fn calibrate_residual(model: &AeModel, ebn0_db: f64, n_blocks: usize, seed: u64) -> Result<Calibration> {
    if n_blocks < MIN_CALIBRATION_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "calibration needs at least {MIN_CALIBRATION_SAMPLES} blocks, got {n_blocks}"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let s = model.random_inputs(n_blocks, &mut rng);
    let shat = model.transceive(&s, ebn0_db, &mut rng)?;
    fit_residual(&s, &shat)
}

/// Bitwise max-log LLRs (positive ⇒ 0) for each estimate, `bits_per_rail`
/// values per estimate, under the fitted Gaussian residual model.
pub fn extract_llr(shat: &[f64], cal: &Calibration, levels: &[(f64, Vec<u8>)]) -> Result<Vec<f64>> {
    let n = cal.mu.len();
    if n == 0 || shat.len() % n != 0 {
        return Err(Error::Shape(format!("{} estimates for {} positions", shat.len(), n)));
    }
    if cal.sigma2.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter("residual variance must be positive".into()));
    }
    let bpr = levels[0].1.len();
    let mut out = Vec::with_capacity(shat.len() * bpr);
    for (k, &y) in shat.iter().enumerate() {
        let (mu, s2) = (cal.mu[k % n], cal.sigma2[k % n]);
        for b in 0..bpr {
            let (mut d0, mut d1) = (f64::INFINITY, f64::INFINITY);
            for (x, bits) in levels {
                let d = (y - mu * x).powi(2);
                if bits[b] == 0 {
                    d0 = d0.min(d);
                } else {
                    d1 = d1.min(d);
                }
            }
            out.push((d1 - d0) / (2.0 * s2));
        }
    }
    Ok(out)
}
