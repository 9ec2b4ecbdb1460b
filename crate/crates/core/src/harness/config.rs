use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ae::{AeConfig, Step2Noise, ThetaInit};
use crate::rf::Modulation;
use crate::turbo::{qpp_params, DecodingAlgo};
use crate::{Error, Result};

/// Transmission scheme under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Turbo outer code with the one-bit autoencoder as inner code.
    Proposed,
    /// Turbo code over an unquantized Nyquist-rate receiver.
    TurboSoftUnquantized,
    /// Turbo code over a Nyquist-rate one-bit receiver.
    TurboHardOnebit,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::TurboSoftUnquantized => "turbo_soft_unquantized",
            Scheme::TurboHardOnebit => "turbo_hard_onebit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "turbo_soft_unquantized" => Ok(Scheme::TurboSoftUnquantized),
            "turbo_hard_onebit" => Ok(Scheme::TurboHardOnebit),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

/// How the proposed scheme gets its inner model when none is supplied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// One model trained at each operating Eb/N0 of the grid.
    #[default]
    PerPoint,
    /// One model trained at `train_ebn0_db` and reused across the grid.
    Single,
}

/// Reported points need at least this many bit errors to count as confident.
pub const CONFIDENT_ERRORS: u64 = 100;

/// One BER experiment: scheme, codes, grid and stopping rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub block_length: usize,
    pub turbo_iterations: usize,
    pub decoding: DecodingAlgo,
    /// Modulation, G, α and training budget of the inner code.
    pub ae: AeConfig,
    pub ebn0_grid: Vec<f64>,
    pub min_bit_errors: u64,
    pub max_bits: u64,
    pub seed: u64,
    /// Blocks used to fit the residual model at each SNR.
    pub calibration_blocks: usize,
    /// Worker threads; 0 uses the rayon default. Not saved with results,
    /// which do not depend on it.
    #[serde(skip)]
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Trained inner model, used at every point; trained according to
    /// `train_mode` when absent.
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub train_mode: TrainMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk_scale()
    }
}

impl ExperimentConfig {
    /// K = 1024, BER floor around 1e-4.
    pub fn desk_scale() -> Self {
        Self {
            scheme: Scheme::Proposed,
            block_length: 1024,
            turbo_iterations: 5,
            decoding: DecodingAlgo::MaxLogMap,
            ae: AeConfig::default(),
            ebn0_grid: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            min_bit_errors: 200,
            max_bits: 2_000_000,
            seed: 1,
            calibration_blocks: 4000,
            workers: 0,
            out_dir: PathBuf::from("out"),
            model_path: None,
            train_mode: TrainMode::PerPoint,
        }
    }

    /// K = 6144 down to BER 1e-6.
    pub fn paper_scale() -> Self {
        Self {
            block_length: 6144,
            max_bits: 400_000_000,
            ..Self::desk_scale()
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.ae.modulation
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        qpp_params(self.block_length).map_err(|_| {
            Error::Config(format!("block length {} has no QPP interleaver", self.block_length))
        })?;
        if ![2, 5].contains(&self.turbo_iterations) {
            return bad(format!("turbo_iterations must be 2 or 5, got {}", self.turbo_iterations));
        }
        if self.ebn0_grid.is_empty() {
            return bad("ebn0_grid is empty".into());
        }
        if self.ebn0_grid.iter().any(|x| !x.is_finite()) {
            return bad("ebn0_grid has non-finite values".into());
        }
        if self.ebn0_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("ebn0_grid must be strictly increasing".into());
        }
        if self.min_bit_errors == 0 || self.max_bits == 0 {
            return bad("min_bit_errors and max_bits must be positive".into());
        }
        if self.calibration_blocks < crate::ae::MIN_CALIBRATION_SAMPLES {
            return bad(format!(
                "calibration_blocks must be at least {}",
                crate::ae::MIN_CALIBRATION_SAMPLES
            ));
        }
        self.ae.validate()
    }

    /// Parses flat `key = value` text. `#` starts a comment; unknown keys
    /// and repeated keys are errors. Missing keys keep the desk-scale values.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_onto(Self::desk_scale(), text)
    }

    /// As [`ExperimentConfig::parse`], with missing keys taken from `base`.
    pub fn parse_onto(base: Self, text: &str) -> Result<Self> {
        let mut cfg = base;
        let mut seen = std::collections::HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key}", no + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Assigns one key. Keys mirror the struct fields; inner-code keys are
    /// the [`AeConfig`] field names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scheme" => self.scheme = Scheme::parse(value)?,
            "modulation" => self.ae.modulation = Modulation::parse(value)?,
            "block_length" => self.block_length = num(key, value)?,
            "turbo_iterations" => self.turbo_iterations = num(key, value)?,
            "decoding" => {
                self.decoding = match value {
                    "max_log_map" => DecodingAlgo::MaxLogMap,
                    "log_map" => DecodingAlgo::LogMap,
                    _ => return Err(Error::Config(format!("unknown decoding {value:?}"))),
                }
            }
            "subblock" => self.ae.subblock = num(key, value)?,
            "oversampling" => self.ae.oversampling = num(key, value)?,
            "alpha" => self.ae.alpha = num(key, value)?,
            "width_factor" => self.ae.width_factor = num(key, value)?,
            "train_ebn0_db" => self.ae.train_ebn0_db = num(key, value)?,
            "store_size" => self.ae.store_size = num(key, value)?,
            "batch_size" => self.ae.batch_size = num(key, value)?,
            "step1_epochs" => self.ae.step1_epochs = num(key, value)?,
            "step2_epochs" => self.ae.step2_epochs = num(key, value)?,
            "step1_learning_rate" => self.ae.step1_learning_rate = num(key, value)?,
            "step2_learning_rate" => self.ae.step2_learning_rate = num(key, value)?,
            "step2_noise" => {
                self.ae.step2_noise = match value {
                    "replay" => Step2Noise::Replay,
                    "fresh" => Step2Noise::Fresh,
                    _ => return Err(Error::Config(format!("unknown step2_noise {value:?}"))),
                }
            }
            "theta_init" => {
                self.ae.theta_init = match value {
                    "gaussian" => ThetaInit::Gaussian,
                    "rademacher" => ThetaInit::Rademacher,
                    _ => return Err(Error::Config(format!("unknown theta_init {value:?}"))),
                }
            }
            "ae_seed" => self.ae.seed = num(key, value)?,
            "ebn0_grid" => {
                self.ebn0_grid = value
                    .split(',')
                    .map(|v| num("ebn0_grid", v.trim()))
                    .collect::<Result<_>>()?
            }
            "min_bit_errors" => self.min_bit_errors = num(key, value)?,
            "max_bits" => self.max_bits = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "calibration_blocks" => self.calibration_blocks = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "model_path" => {
                self.model_path = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "train_mode" => {
                self.train_mode = match value {
                    "per_point" => TrainMode::PerPoint,
                    "single" => TrainMode::Single,
                    _ => return Err(Error::Config(format!("unknown train_mode {value:?}"))),
                }
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}
