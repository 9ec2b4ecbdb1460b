//! Trained-model cache shared by the slow integration tests.
//!
//! Training at desk scale takes minutes on one core, so a model is trained
//! once per (config, training source) and kept under the cargo tmp dir. The
//! key hashes the config and the source files that shape training, so any
//! edit to them retrains.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Mutex;

use onebit_core::ae::{train, AeConfig, AeModel};
use onebit_core::harness::fnv1a;

const SOURCES: &[&str] = &[
    include_str!("../../src/ae/chain.rs"),
    include_str!("../../src/ae/config.rs"),
    include_str!("../../src/ae/model.rs"),
    include_str!("../../src/nn/init.rs"),
    include_str!("../../src/nn/loss.rs"),
    include_str!("../../src/nn/network.rs"),
    include_str!("../../src/nn/optim.rs"),
    include_str!("../../src/nn/tensor.rs"),
    include_str!("../../src/rf/channel.rs"),
    include_str!("../../src/rf/pulse.rs"),
];

static TRAINING: Mutex<()> = Mutex::new(());

fn cache_path(cfg: &AeConfig) -> PathBuf {
    let key = fnv1a(
        serde_json::to_vec(cfg)
            .unwrap()
            .into_iter()
            .chain(SOURCES.iter().flat_map(|s| s.bytes())),
    );
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("ae-model-{key:016x}.ckpt"))
}

/// Trained model for `cfg`, loaded from the cache when present.
pub fn trained(cfg: &AeConfig) -> AeModel {
    // one training at a time; parallel test threads would only share the core
    let _guard = TRAINING.lock().unwrap_or_else(|e| e.into_inner());
    let path = cache_path(cfg);
    if let Ok(m) = AeModel::load(&path) {
        if &m.config == cfg {
            return m;
        }
    }
    let t0 = std::time::Instant::now();
    let (model, _) = train(cfg).unwrap();
    eprintln!("trained G={} N={} in {:.0}s", cfg.oversampling, cfg.subblock, t0.elapsed().as_secs_f64());
    let tmp = path.with_extension("partial");
    model.save(&tmp).unwrap();
    std::fs::rename(&tmp, &path).unwrap();
    model
}

/// The desk-scale inner code of the end-to-end experiments.
pub fn desk(oversampling: usize) -> AeConfig {
    AeConfig {
        oversampling,
        ..AeConfig::default()
    }
}
