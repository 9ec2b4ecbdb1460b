use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use onebit_core::ae::{train, AeConfig, AeModel};
use onebit_core::capacity::{capacity_curve, min_snr_for_rate, CapacityPoint, MinSnr};
use onebit_core::harness::{
    emit_outputs, run_ber_sweep, run_ber_sweep_per_point, started_utc, version_string, BerRecord,
    ExperimentConfig, ResultFile, Scheme, TrainMode,
};
use onebit_core::oracle::{
    arcsine_kernel_check, exact_ml_error, gaussianity_test, theorem1_gap, GapBudget, GapReport,
    GpArchitecture, KernelReport, TinyCode,
};
use onebit_core::rf::derive_seed;
use onebit_core::turbo::{TurboCodec, TurboSpec};
use onebit_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser, Debug)]
#[command(name = "onebit-codec", version, about = "One-bit quantized channel autoencoder simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key = value experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// K = 1024 defaults (the default).
    #[arg(long, global = true, conflicts_with = "paper_scale")]
    desk_scale: bool,
    /// K = 6144 with a bit budget that reaches BER 1e-6.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One-bit capacity bound and minimum SNR for given rates.
    Capacity {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0 / 3.0, 0.5])]
        rates: Vec<f64>,
        /// Grid points between -10 and 30 dB.
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Two-step training of the inner autoencoder.
    Train,
    /// BER sweep of the configured scheme.
    Ber {
        /// Overrides the scheme of the config file.
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Ground-truth checks on small problems.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
    /// Round trip and waterfall sanity of the turbo codec.
    TurboSelftest {
        #[arg(long, default_value_t = 100)]
        blocks: usize,
    },
}

#[derive(Subcommand, Debug)]
enum OracleCommand {
    /// Trained one-hot decoder against exact ML on a random codebook.
    MlGap {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 6.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
    },
    /// Arcsine kernel and output Gaussianity at initialisation.
    Gp {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [64, 128, 256, 512, 1024])]
        widths: Vec<usize>,
    },
}

#[derive(Serialize)]
struct Stamped<T: Serialize> {
    report: T,
    version: String,
    started_utc: String,
}

fn stamped<T: Serialize>(body: T) -> Stamped<T> {
    Stamped {
        report: body,
        version: version_string(),
        started_utc: started_utc(),
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(path)
}

fn experiment(common: &Common) -> Result<ExperimentConfig> {
    let base = if common.paper_scale {
        ExperimentConfig::paper_scale()
    } else {
        ExperimentConfig::desk_scale()
    };
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::parse_onto(base, &std::fs::read_to_string(p)?)?,
        None => base,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
        cfg.ae.seed = s;
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Inner model trained at `ebn0_db`, kept under `dir` so a rerun of an
/// interrupted sweep skips the points already trained.
fn point_model(ae: &AeConfig, ebn0_db: f64, dir: &Path) -> Result<AeModel> {
    let cfg = AeConfig {
        train_ebn0_db: ebn0_db,
        ..ae.clone()
    };
    let path = dir.join(format!("model_{ebn0_db:+.2}dB.ckpt"));
    if let Ok(m) = AeModel::load(&path) {
        if m.config == cfg {
            return Ok(m);
        }
    }
    log::info!("training the inner code at {ebn0_db} dB");
    let (m, _) = train(&cfg)?;
    std::fs::create_dir_all(dir)?;
    m.save(&path)?;
    Ok(m)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = experiment(&cli.common)?;
    if let Some(w) = cli.common.workers {
        // shared pool for the Monte Carlo code that does not take a worker count
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let out = cfg.out_dir.clone();
    match cli.command {
        Command::Capacity {
            samples,
            rates,
            points,
        } => {
            #[derive(Serialize)]
            struct Report {
                samples: usize,
                seed: u64,
                curve: Vec<CapacityPoint>,
                min_snr: Vec<MinSnr>,
            }
            let grid: Vec<f64> = (0..points)
                .map(|i| -10.0 + 40.0 * i as f64 / (points.max(2) - 1) as f64)
                .collect();
            let curve = capacity_curve(&grid, 1.0 / 3.0, samples, cfg.seed)?;
            let min_snr = rates
                .iter()
                .map(|&r| min_snr_for_rate(r, 1e-3, samples, cfg.seed))
                .collect::<Result<Vec<_>>>()?;
            for m in &min_snr {
                println!("rate {:.4}: minimum Eb/N0 {:.3} dB", m.rate, m.ebn0_db);
            }
            let path = write_json(
                &out,
                "capacity.json",
                &stamped(Report {
                    samples,
                    seed: cfg.seed,
                    curve,
                    min_snr,
                }),
            )?;
            println!("wrote {}", path.display());
        }
        Command::Train => {
            let (model, _) = train(&cfg.ae)?;
            std::fs::create_dir_all(&out)?;
            let ckpt = out.join("model.ckpt");
            model.save(&ckpt)?;
            write_json(&out, "training.json", &stamped(&model.history))?;
            println!(
                "step-1 loss {:.4}, step-2 loss {:.4}; wrote {}",
                model.history.step1_loss.last().copied().unwrap_or(f64::NAN),
                model.history.step2_loss.last().copied().unwrap_or(f64::NAN),
                ckpt.display()
            );
        }
        Command::Ber { scheme } => {
            let mut cfg = cfg;
            if let Some(s) = scheme {
                cfg.scheme = Scheme::parse(&s)?;
            }
            let model = match (cfg.scheme, &cfg.model_path, cfg.train_mode) {
                (Scheme::Proposed, Some(p), _) => Some(AeModel::load(p)?),
                (Scheme::Proposed, None, TrainMode::Single) => {
                    log::info!("no model_path given; training the inner code");
                    let (m, _) = train(&cfg.ae)?;
                    std::fs::create_dir_all(&out)?;
                    m.save(&out.join("model.ckpt"))?;
                    Some(m)
                }
                _ => None,
            };
            let mut result = ResultFile {
                config: cfg.clone(),
                records: Vec::new(),
                version: version_string(),
                started_utc: started_utc(),
            };
            let cache = out.join("calibration");
            let report = |rec: &BerRecord| {
                println!(
                    "{} {} {:>6.2} dB  BER {:.3e}  [{:.3e}, {:.3e}]  ({} / {})",
                    rec.scheme.name(),
                    rec.modulation.name(),
                    rec.ebn0_db,
                    rec.ber,
                    rec.ci_low,
                    rec.ci_high,
                    rec.errors,
                    rec.bits
                );
                // persist after every point so an interrupted sweep keeps its results
                result.records.push(rec.clone());
                emit_outputs(&result, &out)
            };
            let per_point = cfg.scheme == Scheme::Proposed && model.is_none();
            if per_point {
                let models = out.join("models");
                let model_at = |ebn0_db: f64| point_model(&cfg.ae, ebn0_db, &models);
                run_ber_sweep_per_point(&cfg, model_at, Some(&cache), report)?;
            } else {
                run_ber_sweep(&cfg, model.as_ref(), Some(&cache), report)?;
            }
            println!("wrote {}", out.display());
        }
        Command::Oracle { which } => match which {
            OracleCommand::MlGap {
                k,
                n,
                snr_db,
                epochs,
            } => {
                #[derive(Serialize)]
                struct Report {
                    code: TinyCode,
                    ml_error: f64,
                    gap: GapReport,
                }
                let code = TinyCode::random_gaussian(k, n, 10f64.powf(snr_db / 10.0), cfg.seed)?;
                let ml = exact_ml_error(&code)?;
                let gap = theorem1_gap(
                    &code,
                    &GapBudget {
                        epochs,
                        seed: cfg.seed,
                        ..GapBudget::default()
                    },
                )?;
                println!(
                    "exact ML error {:.5}, trained {:.5}, relative gap {:.4}",
                    ml.ml_error_prob, gap.trained_error_exact, gap.gap
                );
                let path = write_json(
                    &out,
                    "ml_gap.json",
                    &stamped(Report {
                        code,
                        ml_error: ml.ml_error_prob,
                        gap,
                    }),
                )?;
                println!("wrote {}", path.display());
            }
            OracleCommand::Gp {
                samples,
                draws,
                widths,
            } => {
                #[derive(Serialize)]
                struct Report {
                    kernel: KernelReport,
                    gaussianity: KernelReport,
                }
                let rhos: Vec<f64> = (-9..=9).map(|i| i as f64 / 10.0).collect();
                let kernel = arcsine_kernel_check(&rhos, samples, cfg.seed)?;
                let gaussianity =
                    gaussianity_test(GpArchitecture::ReluHidden, &widths, draws, 8, cfg.seed)?;
                let worst = kernel
                    .points
                    .iter()
                    .map(|p| (p.empirical - p.analytic).abs())
                    .fold(0.0, f64::max);
                println!("worst arcsine deviation {worst:.5}");
                for w in &gaussianity.widths {
                    println!("width {:>5}: excess kurtosis {:+.4}", w.width, w.excess_kurtosis);
                }
                let path = write_json(&out, "gp.json", &stamped(Report { kernel, gaussianity }))?;
                println!("wrote {}", path.display());
            }
        },
        Command::TurboSelftest { blocks } => {
            #[derive(Serialize)]
            struct Case {
                block_length: usize,
                blocks: usize,
                noiseless_errors: u64,
            }
            let mut cases = Vec::new();
            for k in [40, cfg.block_length] {
                let codec = TurboCodec::new(TurboSpec::lte(k, cfg.turbo_iterations)?)?;
                let mut errors = 0u64;
                for b in 0..blocks {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, b as u64));
                    let info: Vec<u8> = (0..k).map(|_| rng.random_range(0..2u8)).collect();
                    let llr: Vec<f64> = codec
                        .encode(&info)?
                        .to_bits()
                        .iter()
                        .map(|&c| if c == 0 { 10.0 } else { -10.0 })
                        .collect();
                    let out = codec.decode(&llr)?;
                    errors += out.bits.iter().zip(&info).filter(|(a, b)| a != b).count() as u64;
                }
                println!("K = {k}: {errors} errors over {blocks} noiseless blocks");
                cases.push(Case {
                    block_length: k,
                    blocks,
                    noiseless_errors: errors,
                });
            }
            let failed = cases.iter().any(|c| c.noiseless_errors != 0);
            let path = write_json(&out, "turbo_selftest.json", &stamped(cases))?;
            println!("wrote {}", path.display());
            if failed {
                return Err(onebit_core::Error::InvalidParameter(
                    "turbo self-test found errors".into(),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
