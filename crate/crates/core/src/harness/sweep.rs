use std::borrow::Cow;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scheme, CONFIDENT_ERRORS};
use super::pipeline::{baseline_llrs, concat_channel, concat_decode, concat_encode, fnv1a, model_checksum};
use crate::ae::{calibrate_residual, AeModel, Calibration};
use crate::rf::{derive_seed, snr_penalty_db, Modulation};
use crate::stats::Proportion;
use crate::turbo::{TurboCodec, TurboSpec};
use crate::{Error, Result};

/// Blocks simulated between two checks of the stopping rule. Fixed, so the
/// number of simulated blocks does not depend on the worker count.
pub const BATCH_BLOCKS: usize = 16;
/// A point stops early once the Wilson upper bound falls below this.
pub const BER_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub scheme: Scheme,
    pub modulation: Modulation,
    pub ebn0_db: f64,
    /// Bandwidth penalty applied to the noise level (proposed scheme only).
    pub penalty_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    /// Fewer than 100 bit errors behind the estimate.
    pub low_confidence: bool,
}

/// Everything a worker needs to simulate one block.
struct Context<'a> {
    cfg: &'a ExperimentConfig,
    codec: TurboCodec,
}

impl Context<'_> {
    fn block(
        &self,
        model: Option<&AeModel>,
        ebn0_db: f64,
        cal: Option<&Calibration>,
        seed: u64,
    ) -> Result<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.cfg.block_length;
        let info: Vec<u8> = (0..k).map(|_| (rng.next_u32() & 1) as u8).collect();
        let decoded = match self.cfg.scheme {
            Scheme::Proposed => {
                let model = model.ok_or(Error::Untrained)?;
                let tx = concat_encode(&info, &self.codec, model)?;
                let rx = concat_channel(&tx, model, ebn0_db, &mut rng)?;
                concat_decode(&rx, &self.codec, model, cal, ebn0_db)?
            }
            Scheme::TurboSoftUnquantized | Scheme::TurboHardOnebit => {
                let coded = self.codec.encode(&info)?.to_bits();
                let llr = baseline_llrs(
                    &coded,
                    self.cfg.modulation(),
                    ebn0_db,
                    self.cfg.ae.code_rate,
                    self.cfg.scheme == Scheme::TurboHardOnebit,
                    &mut rng,
                )?;
                self.codec.decode(&llr)?
            }
        };
        Ok(decoded.bits.iter().zip(&info).filter(|(a, b)| a != b).count() as u64)
    }
}

/// Seed of grid point `index` under the master seed.
pub fn point_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64 + 1);
    rng.next_u64()
}

/// Residual-model fit at one SNR, cached under `cache_dir` by a hash of the
/// model parameters, SNR, block count and seed.
pub fn calibration_for(
    model: &AeModel,
    ebn0_db: f64,
    blocks: usize,
    seed: u64,
    cache_dir: Option<&Path>,
) -> Result<Calibration> {
    let key = fnv1a(
        model_checksum(model)
            .to_le_bytes()
            .into_iter()
            .chain(ebn0_db.to_bits().to_le_bytes())
            .chain((blocks as u64).to_le_bytes())
            .chain(seed.to_le_bytes()),
    );
    let path = cache_dir.map(|d| d.join(format!("calibration-{key:016x}.json")));
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            if let Ok(cal) = serde_json::from_str(&text) {
                return Ok(cal);
            }
            log::warn!("ignoring unreadable calibration cache {}", p.display());
        }
    }
    let cal = calibrate_residual(model, ebn0_db, blocks, seed)?;
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(p, serde_json::to_string(&cal)?)?;
    }
    Ok(cal)
}

/// BER Monte Carlo over the grid. Each point simulates batches of blocks in
/// parallel, block b seeded from the point seed and b, and stops after
/// `min_bit_errors` errors, `max_bits` bits, or once the upper confidence
/// bound is below [`BER_FLOOR`]. `on_record` sees every finished point, so
/// callers can persist partial results. The proposed scheme uses `model` at
/// every point.
pub fn run_ber_sweep(
    cfg: &ExperimentConfig,
    model: Option<&AeModel>,
    cache_dir: Option<&Path>,
    on_record: impl FnMut(&BerRecord) -> Result<()>,
) -> Result<Vec<BerRecord>> {
    sweep(cfg, &mut |_| Ok(model.map(Cow::Borrowed)), cache_dir, on_record)
}

/// [`run_ber_sweep`] with a separate inner model for each operating point.
/// `model_at` receives the point's Eb/N0 in dB and is only called for the
/// proposed scheme.
pub fn run_ber_sweep_per_point(
    cfg: &ExperimentConfig,
    mut model_at: impl FnMut(f64) -> Result<AeModel>,
    cache_dir: Option<&Path>,
    on_record: impl FnMut(&BerRecord) -> Result<()>,
) -> Result<Vec<BerRecord>> {
    let proposed = cfg.scheme == Scheme::Proposed;
    sweep(
        cfg,
        &mut |ebn0| if proposed { model_at(ebn0).map(|m| Some(Cow::Owned(m))) } else { Ok(None) },
        cache_dir,
        on_record,
    )
}

type ModelAt<'m, 'a> = dyn FnMut(f64) -> Result<Option<Cow<'a, AeModel>>> + 'm;

fn sweep(
    cfg: &ExperimentConfig,
    model_at: &mut ModelAt<'_, '_>,
    cache_dir: Option<&Path>,
    mut on_record: impl FnMut(&BerRecord) -> Result<()>,
) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    let mut spec = TurboSpec::lte(cfg.block_length, cfg.turbo_iterations)?;
    spec.algo = cfg.decoding;
    let ctx = Context {
        cfg,
        codec: TurboCodec::new(spec)?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let k = cfg.block_length as u64;
    let mut records = Vec::with_capacity(cfg.ebn0_grid.len());
    for (pi, &ebn0_db) in cfg.ebn0_grid.iter().enumerate() {
        let seed = point_seed(cfg.seed, pi);
        let model = match cfg.scheme {
            Scheme::Proposed => {
                let m = model_at(ebn0_db)?.ok_or(Error::Untrained)?;
                if m.config.modulation != cfg.modulation() {
                    return Err(Error::Config(
                        "inner model modulation differs from the experiment".into(),
                    ));
                }
                Some(m)
            }
            _ => None,
        };
        let (cal, penalty_db) = match model.as_deref() {
            Some(m) => (
                Some(calibration_for(m, ebn0_db, cfg.calibration_blocks, seed, cache_dir)?),
                snr_penalty_db(m.config.oversampling, m.config.alpha),
            ),
            _ => (None, 0.0),
        };
        let stop = |errors: u64, bits: u64| {
            errors >= cfg.min_bit_errors
                || bits >= cfg.max_bits
                || Proportion::new(errors, bits).ci_high < BER_FLOOR
        };
        let (mut bits, mut errors, mut next) = (0u64, 0u64, 0u64);
        'point: loop {
            let batch: Vec<u64> = pool.install(|| {
                (next..next + BATCH_BLOCKS as u64)
                    .into_par_iter()
                    .map(|b| ctx.block(model.as_deref(), ebn0_db, cal.as_ref(), derive_seed(seed, b)))
                    .collect::<Result<Vec<_>>>()
            })?;
            // merge in block order, stopping exactly where a serial run would
            for e in batch {
                bits += k;
                errors += e;
                next += 1;
                if stop(errors, bits) {
                    break 'point;
                }
            }
        }
        let p = Proportion::new(errors, bits);
        let rec = BerRecord {
            scheme: cfg.scheme,
            modulation: cfg.modulation(),
            ebn0_db,
            penalty_db,
            bits,
            errors,
            ber: p.estimate,
            ci_low: p.ci_low,
            ci_high: p.ci_high,
            seed,
            low_confidence: errors < CONFIDENT_ERRORS,
        };
        log::info!(
            "{} {} {:.2} dB: {} / {} bits, BER {:.3e}",
            rec.scheme.name(),
            rec.modulation.name(),
            ebn0_db,
            errors,
            bits,
            rec.ber
        );
        on_record(&rec)?;
        records.push(rec);
    }
    Ok(records)
}
