use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Root-raised-cosine pulse sampled at `samples_per_symbol` points per symbol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub alpha: f64,
    /// Half-support in symbol periods.
    pub span_symbols: usize,
    pub samples_per_symbol: usize,
}

impl PulseSpec {
    pub fn new(alpha: f64, samples_per_symbol: usize) -> Self {
        Self {
            alpha,
            span_symbols: 16,
            samples_per_symbol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "excess bandwidth must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.span_symbols < 8 {
            return Err(Error::InvalidParameter(format!(
                "pulse span must be at least 8 symbols, got {}",
                self.span_symbols
            )));
        }
        if self.samples_per_symbol == 0 {
            return Err(Error::InvalidParameter("samples per symbol must be positive".into()));
        }
        Ok(())
    }
}

/// Continuous RRC impulse response at time `t` (symbol periods), unnormalised.
pub fn rrc_value(alpha: f64, t: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - alpha + 4.0 * alpha / PI;
    }
    if alpha > 0.0 && ((4.0 * alpha * t).abs() - 1.0).abs() < 1e-9 {
        let a = PI / (4.0 * alpha);
        return alpha / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - alpha)).sin() + 4.0 * alpha * t * (PI * t * (1.0 + alpha)).cos();
    let den = PI * t * (1.0 - (4.0 * alpha * t).powi(2));
    num / den
}

/// Unit-energy RRC taps, 2·span·sps + 1 of them, centred.
pub fn rrc_taps(spec: &PulseSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let sps = spec.samples_per_symbol as f64;
    let half = (spec.span_symbols * spec.samples_per_symbol) as i64;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|k| rrc_value(spec.alpha, k as f64 / sps))
        .collect();
    let norm = taps.iter().map(|x| x * x).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|x| *x /= norm);
    Ok(taps)
}

/// Full linear convolution.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (yj, &hj) in y[i..].iter_mut().zip(h) {
            *yj += xi * hj;
        }
    }
    y
}

/// Transposed full convolution: the adjoint of `convolve(·, h)` restricted to
/// an input of length `n`.
pub fn convolve_adjoint(g: &[f64], h: &[f64], n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (i, xi) in x.iter_mut().enumerate() {
        *xi = g[i..i + h.len()].iter().zip(h).map(|(a, b)| a * b).sum();
    }
    x
}

/// Bandwidth-accounting SNR shift for oversampling factor `g` and roll-off
/// `alpha`: max(0, 10·log10((g/2)/(1+alpha))).
pub fn snr_penalty_db(g: usize, alpha: f64) -> f64 {
    (10.0 * ((g as f64 / 2.0) / (1.0 + alpha)).log10()).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_examples() {
        assert_eq!(snr_penalty_db(4, 1.0), 0.0);
        assert!((snr_penalty_db(8, 1.0) - 3.0103).abs() < 1e-3);
        assert_eq!(snr_penalty_db(1, 0.3), 0.0);
    }

    #[test]
    fn adjoint_matches_transpose() {
        let h = [0.3, -1.0, 0.5];
        let x = [1.0, 2.0, -0.5, 0.25];
        let g = [0.1, -0.2, 0.7, 1.1, -0.4, 0.9];
        let lhs: f64 = convolve(&x, &h).iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(convolve_adjoint(&g, &h, 4)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn singular_points_are_continuous() {
        for alpha in [0.25, 0.5, 1.0] {
            let t0 = 1.0 / (4.0 * alpha);
            let exact = rrc_value(alpha, t0);
            let near = rrc_value(alpha, t0 + 1e-6);
            assert!((exact - near).abs() < 1e-4, "alpha {alpha}: {exact} vs {near}");
        }
    }
}
