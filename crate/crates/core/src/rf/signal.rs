use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Complex baseband samples stored as all I values followed by all Q values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IqSignal {
    samples: Vec<f64>,
    /// Sample spacing in symbol periods (1/G for oversampled signals).
    pub sample_period: f64,
}

impl IqSignal {
    pub fn new(samples: Vec<f64>, sample_period: f64) -> Result<Self> {
        if samples.len() % 2 != 0 {
            return Err(Error::Shape(format!(
                "IQ sample vector must have even length, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("IQ samples".into()));
        }
        Ok(Self {
            samples,
            sample_period,
        })
    }

    pub fn from_rails(i: &[f64], q: &[f64], sample_period: f64) -> Result<Self> {
        if i.len() != q.len() {
            return Err(Error::Shape(format!("rails of length {} and {}", i.len(), q.len())));
        }
        let mut s = i.to_vec();
        s.extend_from_slice(q);
        Self::new(s, sample_period)
    }

    /// Builds a signal from interleaved (I, Q) pairs: x[2k] → I_k, x[2k+1] → Q_k.
    pub fn from_pairs(x: &[f64], sample_period: f64) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::Shape("pair vector must have even length".into()));
        }
        let i: Vec<f64> = x.iter().step_by(2).copied().collect();
        let q: Vec<f64> = x.iter().skip(1).step_by(2).copied().collect();
        Self::from_rails(&i, &q, sample_period)
    }

    /// Interleaved (I, Q) pairs, inverse of [`IqSignal::from_pairs`].
    pub fn to_pairs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.samples.len());
        for (a, b) in self.i().iter().zip(self.q()) {
            out.push(*a);
            out.push(*b);
        }
        out
    }

    /// Number of complex samples.
    pub fn len(&self) -> usize {
        self.samples.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn i(&self) -> &[f64] {
        &self.samples[..self.len()]
    }

    pub fn q(&self) -> &[f64] {
        &self.samples[self.len()..]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Mean power per complex sample.
    pub fn mean_power(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }
}

/// Elementwise sign on both rails, sign(0) = +1.
pub fn one_bit_quantize(y: &IqSignal) -> IqSignal {
    IqSignal {
        samples: y.samples.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect(),
        sample_period: y.sample_period,
    }
}

/// Scales to unit mean power per complex sample.
pub fn power_normalize(x: &IqSignal) -> Result<IqSignal> {
    let p = x.mean_power();
    if p == 0.0 {
        return Err(Error::InvalidParameter("cannot normalise an all-zero signal".into()));
    }
    let s = 1.0 / p.sqrt();
    Ok(IqSignal {
        samples: x.samples.iter().map(|v| v * s).collect(),
        sample_period: x.sample_period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantizer_examples() {
        let y = IqSignal::from_rails(&[0.3, 0.0], &[-2.0, -0.0], 1.0).unwrap();
        assert_eq!(one_bit_quantize(&y).samples(), &[1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn normalise_example() {
        let x = IqSignal::new(vec![2.0, 0.0, 0.0, 0.0], 1.0).unwrap();
        let n = power_normalize(&x).unwrap();
        assert!((n.mean_power() - 1.0).abs() < 1e-15);
        assert!(power_normalize(&IqSignal::new(vec![0.0; 4], 1.0).unwrap()).is_err());
    }

    #[test]
    fn pairs_round_trip() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let s = IqSignal::from_pairs(&x, 0.5).unwrap();
        assert_eq!(s.i(), &[1.0, 3.0, 5.0]);
        assert_eq!(s.to_pairs(), x);
    }

    #[test]
    fn odd_length_rejected() {
        assert!(IqSignal::new(vec![1.0; 3], 1.0).is_err());
    }
}
