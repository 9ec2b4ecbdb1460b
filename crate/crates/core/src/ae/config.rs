use serde::{Deserialize, Serialize};

use crate::rf::{snr_penalty_db, Modulation, SnrSpec};
use crate::{Error, Result};

/// Noise used in the step-2 chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step2Noise {
    /// The realization that produced each stored l1.
    #[default]
    Replay,
    /// A new draw per batch at the training SNR.
    Fresh,
}

/// Distribution of the nonzero step-1 encoder entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaInit {
    Gaussian,
    /// Random ±1.
    #[default]
    Rademacher,
}

/// Architecture and training budget of the one-bit autoencoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    /// Input rails per subblock (N).
    pub subblock: usize,
    /// Transmit samples per symbol period (G).
    pub oversampling: usize,
    /// Decoder width factor (K); hidden layers have K·N units.
    pub width_factor: usize,
    pub alpha: f64,
    pub modulation: Modulation,
    /// Outer code rate, used to put the training SNR on the Eb/N0 axis.
    pub code_rate: f64,
    pub train_ebn0_db: f64,
    /// Number of (l0, l1) pairs captured in step 1.
    pub store_size: usize,
    pub batch_size: usize,
    pub step1_epochs: usize,
    pub step2_epochs: usize,
    pub step1_learning_rate: f64,
    pub step2_learning_rate: f64,
    #[serde(default)]
    pub step2_noise: Step2Noise,
    #[serde(default)]
    pub theta_init: ThetaInit,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        Self {
            subblock: 64,
            oversampling: 4,
            width_factor: 20,
            alpha: 1.0,
            modulation: Modulation::Qpsk,
            code_rate: 1.0 / 3.0,
            train_ebn0_db: 4.0,
            store_size: 8192,
            batch_size: 128,
            step1_epochs: 6,
            step2_epochs: 500,
            step1_learning_rate: 1e-3,
            step2_learning_rate: 1e-4,
            step2_noise: Step2Noise::Replay,
            theta_init: ThetaInit::Rademacher,
            seed: 1,
        }
    }
}

impl AeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.oversampling == 0 || self.width_factor <= self.oversampling {
            return bad(format!(
                "need K > G >= 1, got K={} G={}",
                self.width_factor, self.oversampling
            ));
        }
        if self.subblock == 0 || self.subblock % 2 != 0 {
            return bad(format!("subblock {} must be a positive even number of rails", self.subblock));
        }
        if (self.subblock * self.modulation.bits_per_rail()) % self.modulation.bits_per_symbol() != 0 {
            return bad("subblock does not hold whole symbols".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(self.code_rate > 0.0 && self.code_rate <= 1.0) || !self.train_ebn0_db.is_finite() {
            return bad("invalid training SNR or code rate".into());
        }
        if self.store_size == 0 || self.batch_size == 0 {
            return bad("store_size and batch_size must be positive".into());
        }
        if !(self.step1_learning_rate > 0.0 && self.step2_learning_rate > 0.0) {
            return bad("learning rates must be positive".into());
        }
        Ok(())
    }

    /// Precoder width G·N.
    pub fn encoded_dim(&self) -> usize {
        self.oversampling * self.subblock
    }

    pub fn hidden_dim(&self) -> usize {
        self.width_factor * self.subblock
    }

    /// Coded bits carried by one subblock.
    pub fn bits_per_subblock(&self) -> usize {
        self.subblock * self.modulation.bits_per_rail()
    }

    /// Per-rail noise std-dev at `ebn0_db`, including the bandwidth penalty.
    pub fn noise_sigma(&self, ebn0_db: f64) -> f64 {
        SnrSpec {
            ebn0_db: ebn0_db - snr_penalty_db(self.oversampling, self.alpha),
            code_rate: self.code_rate,
            bits_per_symbol: self.modulation.bits_per_symbol(),
        }
        .noise_sigma()
    }

    /// AE input levels with their (sign, magnitude) bit labels: ±1 for QPSK,
    /// unit-power per-rail levels {±1, ±3}/√5 for 16-QAM.
    pub fn input_levels(&self) -> Vec<(f64, Vec<u8>)> {
        match self.modulation {
            Modulation::Qpsk => vec![(1.0, vec![0]), (-1.0, vec![1])],
            Modulation::Qam16 => {
                let s = 5f64.sqrt();
                vec![
                    (3.0 / s, vec![0, 1]),
                    (1.0 / s, vec![0, 0]),
                    (-1.0 / s, vec![1, 0]),
                    (-3.0 / s, vec![1, 1]),
                ]
            }
        }
    }

    /// AE input value for the bits of one rail.
    pub fn rail_input(&self, bits: &[u8]) -> Result<f64> {
        self.input_levels()
            .into_iter()
            .find(|(_, b)| b.as_slice() == bits)
            .map(|(v, _)| v)
            .ok_or_else(|| Error::InvalidParameter(format!("no input level for bits {bits:?}")))
    }
}
