//! One-bit channel autoencoder: precoder, RF chain, receiver-side equalizer
//! and decoder, trained in two steps.

mod calib;
mod chain;
mod config;
mod model;

pub use calib::{
    calibrate_residual, conditional_means, extract_llr, fit_residual, Calibration,
    MIN_CALIBRATION_SAMPLES, SIGMA2_FLOOR,
};
pub use chain::{quantize, shape_backward, shape_forward, RfChain};
pub use config::{AeConfig, Step2Noise, ThetaInit};
pub use model::{
    ae_decode, ae_encode, train, train_decoder_step1, train_encoder_step2, AeModel,
    TrainingHistory, TrainingPairStore, TrainingStage,
};
