use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::pulse::{convolve, convolve_adjoint, rrc_taps, PulseSpec};
use super::IqSignal;
use crate::nn::Tensor;
use crate::{Error, Result};

/// Lowest simulation rate in samples per symbol. An RRC pulse with roll-off
/// up to 1 occupies |f| ≤ 1/T, so two samples per symbol avoid aliasing.
const MIN_SIM_RATE: usize = 2;

/// Operating point on the Eb/N0 axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrSpec {
    pub ebn0_db: f64,
    pub code_rate: f64,
    pub bits_per_symbol: usize,
}

impl SnrSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.code_rate > 0.0 && self.code_rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "code rate must lie in (0, 1], got {}",
                self.code_rate
            )));
        }
        if self.bits_per_symbol == 0 || !self.ebn0_db.is_finite() {
            return Err(Error::InvalidParameter("invalid SNR specification".into()));
        }
        Ok(())
    }

    /// Es/N0 (linear) with Es = R · bits_per_symbol · Eb.
    pub fn esn0(&self) -> f64 {
        self.code_rate * self.bits_per_symbol as f64 * 10f64.powf(self.ebn0_db / 10.0)
    }

    /// Noise std-dev per real dimension, sqrt(N0/2), for unit symbol energy.
    pub fn noise_sigma(&self) -> f64 {
        (0.5 / self.esn0()).sqrt()
    }
}

/// Linear FTN front end: samples at period T/G → RRC → (+ noise) → matched
/// filter → back to period T/G, with the integer group delay removed.
///
/// One complex sample at unit amplitude carries energy 1/G, so a symbol
/// period of unit-power samples has the energy of one unit-power symbol.
#[derive(Clone, Debug)]
pub struct FtnChannel {
    pub pulse: PulseSpec,
    taps: Vec<f64>,
    /// Simulation-rate upsampling applied on top of G.
    up: usize,
    amplitude: f64,
}

impl FtnChannel {
    pub fn new(alpha: f64, g: usize) -> Result<Self> {
        if g == 0 {
            return Err(Error::InvalidParameter("oversampling factor must be positive".into()));
        }
        let up = MIN_SIM_RATE.div_ceil(g);
        let pulse = PulseSpec::new(alpha, g);
        let taps = rrc_taps(&PulseSpec {
            samples_per_symbol: g * up,
            ..pulse
        })?;
        Ok(Self {
            pulse,
            taps,
            up,
            amplitude: 1.0 / (g as f64).sqrt(),
        })
    }

    pub fn oversampling(&self) -> usize {
        self.pulse.samples_per_symbol
    }

    /// Number of noise samples one rail of `n` inputs consumes.
    pub fn noise_len(&self, n: usize) -> usize {
        n * self.up + self.taps.len() - 1
    }

    fn delay(&self) -> usize {
        self.taps.len() - 1
    }

    /// One rail through the chain; `noise` (length [`Self::noise_len`]) is
    /// added to the transmitted waveform before matched filtering.
    pub fn apply_rail(&self, x: &[f64], noise: Option<&[f64]>) -> Vec<f64> {
        let mut up = vec![0.0; x.len() * self.up];
        for (k, v) in x.iter().enumerate() {
            up[k * self.up] = v * self.amplitude;
        }
        let mut tx = convolve(&up, &self.taps);
        if let Some(n) = noise {
            debug_assert_eq!(n.len(), tx.len());
            tx.iter_mut().zip(n).for_each(|(t, w)| *t += w);
        }
        let rx = convolve(&tx, &self.taps);
        let d = self.delay();
        (0..x.len()).map(|k| rx[d + k * self.up]).collect()
    }

    /// Adjoint of the noiseless rail map, for backpropagation.
    pub fn adjoint_rail(&self, g: &[f64]) -> Vec<f64> {
        let n = g.len();
        let tx_len = n * self.up + self.taps.len() - 1;
        let mut rx = vec![0.0; tx_len + self.taps.len() - 1];
        let d = self.delay();
        for (k, v) in g.iter().enumerate() {
            rx[d + k * self.up] = *v;
        }
        let tx = convolve_adjoint(&rx, &self.taps, tx_len);
        let up = convolve_adjoint(&tx, &self.taps, n * self.up);
        (0..n).map(|k| up[k * self.up] * self.amplitude).collect()
    }

    /// Matrix of the noiseless rail map for `n` inputs (n × n).
    pub fn rail_matrix(&self, n: usize) -> Tensor {
        let mut m = Tensor::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            for (i, v) in self.apply_rail(&e, None).into_iter().enumerate() {
                m.set(i, j, v);
            }
            e[j] = 0.0;
        }
        m
    }

    /// Matrix taking one rail's raw noise (length [`Self::noise_len`]) to
    /// its matched-filter output at the `n` sample instants.
    pub fn noise_matrix(&self, n: usize) -> Tensor {
        let len = self.noise_len(n);
        let mut m = Tensor::zeros(n, len);
        let d = self.delay();
        for i in 0..n {
            // rx[d + i·up] = Σ_j noise[j] · taps[d + i·up − j]
            let c = d + i * self.up;
            for (j, tap) in self.taps.iter().enumerate() {
                if let Some(col) = c.checked_sub(j) {
                    if col < len {
                        m.set(i, col, *tap);
                    }
                }
            }
        }
        m
    }

    /// Draws one rail's worth of white noise at std-dev `sigma`.
    pub fn draw_noise<R: Rng>(&self, n: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
        (0..self.noise_len(n))
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            })
            .collect()
    }

    /// Whole-signal transmit chain. Input should be power normalised.
    pub fn transmit<R: Rng>(&self, x: &IqSignal, sigma: f64, rng: &mut R) -> IqSignal {
        let ni = self.draw_noise(x.len(), sigma, rng);
        let nq = self.draw_noise(x.len(), sigma, rng);
        let (i, q) = if sigma > 0.0 {
            (self.apply_rail(x.i(), Some(&ni)), self.apply_rail(x.q(), Some(&nq)))
        } else {
            (self.apply_rail(x.i(), None), self.apply_rail(x.q(), None))
        };
        IqSignal::from_rails(&i, &q, x.sample_period).expect("rails have equal length")
    }
}

/// Sends one-sample-per-symbol `symbols` through the chain at oversampling
/// `pulse.samples_per_symbol` and returns G samples per symbol.
pub fn transmit_chain<R: Rng>(
    symbols: &IqSignal,
    pulse: &PulseSpec,
    snr: &SnrSpec,
    rng: &mut R,
) -> Result<IqSignal> {
    snr.validate()?;
    pulse.validate()?;
    let g = pulse.samples_per_symbol;
    let mut ch = FtnChannel::new(pulse.alpha, g)?;
    ch.pulse.span_symbols = pulse.span_symbols;
    ch.taps = rrc_taps(&PulseSpec {
        samples_per_symbol: g * ch.up,
        ..*pulse
    })?;
    // symbol-rate input: zero-stuff to G samples per symbol, full symbol energy
    ch.amplitude = 1.0;
    let stuff = |r: &[f64]| {
        let mut v = vec![0.0; r.len() * g];
        for (k, x) in r.iter().enumerate() {
            v[k * g] = *x;
        }
        v
    };
    let x = IqSignal::from_rails(&stuff(symbols.i()), &stuff(symbols.q()), 1.0 / g as f64)?;
    Ok(ch.transmit(&x, snr.noise_sigma(), rng))
}
