//! Experiment orchestration: the turbo + autoencoder concatenation, BER
//! sweeps with Nyquist-rate baselines, configuration and result files.

mod config;
mod output;
mod pipeline;
mod sweep;

pub use config::{ExperimentConfig, Scheme, TrainMode, CONFIDENT_ERRORS};
pub use output::{
    emit_outputs, output_paths, read_json, started_utc, version_string, write_csv, write_json,
    write_plot_script, ResultFile, CSV_HEADER,
};
pub use pipeline::{
    ae_inputs, baseline_llrs, concat_channel, concat_decode, concat_encode, fnv1a, model_checksum,
    subblock_count,
};
pub use sweep::{
    calibration_for, point_seed, run_ber_sweep, run_ber_sweep_per_point, BerRecord, BATCH_BLOCKS,
    BER_FLOOR,
};
