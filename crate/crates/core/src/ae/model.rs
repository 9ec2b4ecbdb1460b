use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::chain::{add, quantize, shape_backward, shape_forward, RfChain};
use super::{AeConfig, Step2Noise, ThetaInit};
use crate::nn::{
    load_checkpoint, mse_with_grad, save_checkpoint, Activation, DenseLayer, LayerSpec, Mode,
    Network, Optimizer, OptimizerConfig, Tensor,
};
use crate::rf::{derive_seed, IqSignal};
use crate::{Error, Result};

// RNG streams, one per purpose
const STREAM_THETA: u64 = 1;
const STREAM_DECODER_INIT: u64 = 2;
const STREAM_STEP1: u64 = 4;
const STREAM_EQUALIZER_INIT: u64 = 5;
const STREAM_STEP2: u64 = 6;
const STREAM_PROBE: u64 = 7;

/// Rows per chunk when precomputing store-wide chain outputs.
const CHUNK: usize = 512;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingStage {
    Initialized,
    DecoderTrained,
    Complete,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Decoder reconstruction MSE per step-1 epoch.
    pub step1_loss: Vec<f64>,
    /// Encoder MSE against the stored targets per step-2 epoch.
    pub step2_loss: Vec<f64>,
    /// Fraction of zero precoder units on random inputs, per step-2 epoch.
    pub sparsity: Vec<f64>,
}

/// Inputs l0, quantized step-1 encoder outputs l1 and the seed of the noise
/// realization that produced each l1.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPairStore {
    pub l0: Tensor,
    pub l1: Tensor,
    pub noise_seeds: Vec<u64>,
    /// Per-rail noise std-dev the pairs were drawn at.
    pub sigma: f64,
}

impl TrainingPairStore {
    pub fn len(&self) -> usize {
        self.l0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Precoder W_e1 (ReLU, no bias), receiver-side W_e2 (linear, then sign)
/// and the decoder stack, plus the frozen step-1 encoder θ1.
#[derive(Clone, Debug)]
pub struct AeModel {
    pub config: AeConfig,
    pub precoder: Network,
    pub equalizer: Network,
    pub decoder: Network,
    pub theta1: Tensor,
    pub history: TrainingHistory,
    pub stage: TrainingStage,
    chain: RfChain,
}

impl AeModel {
    /// Fresh model: time-local random θ1 (row i only sees input i div G),
    /// fan-in Gaussian decoder and equalizer.
    pub fn new(config: AeConfig) -> Result<Self> {
        config.validate()?;
        let (n, gn, kn) = (config.subblock, config.encoded_dim(), config.hidden_dim());
        let g = config.oversampling;
        let mut rng = stream_rng(config.seed, STREAM_THETA);
        let mut theta1 = Tensor::zeros(gn, n);
        for i in 0..gn {
            let z: f64 = match config.theta_init {
                ThetaInit::Gaussian => rng.sample(StandardNormal),
                ThetaInit::Rademacher => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            theta1.set(i, i / g, z);
        }
        let precoder = Network::from_layers(vec![DenseLayer::new(
            LayerSpec::new(n, gn, Activation::Relu).without_bias(),
            theta1.clone(),
            vec![0.0; gn],
        )?])?;
        let decoder = Network::with_fan_in_init(
            &[
                LayerSpec::new(gn, kn, Activation::Relu).with_batch_norm(),
                LayerSpec::new(kn, kn, Activation::Relu).with_batch_norm(),
                LayerSpec::new(kn, kn, Activation::Relu).with_batch_norm(),
                LayerSpec::new(kn, n, Activation::Linear),
            ],
            stream_rng(config.seed, STREAM_DECODER_INIT).random(),
        )?;
        let equalizer = Network::with_fan_in_init(
            &[LayerSpec::new(gn, gn, Activation::Linear)],
            stream_rng(config.seed, STREAM_EQUALIZER_INIT).random(),
        )?;
        let chain = RfChain::new(config.alpha, g, gn)?;
        Ok(Self {
            config,
            precoder,
            equalizer,
            decoder,
            theta1,
            history: TrainingHistory::default(),
            stage: TrainingStage::Initialized,
            chain,
        })
    }

    pub fn chain(&self) -> &RfChain {
        &self.chain
    }

    /// Random AE inputs: every rail drawn uniformly from the input levels.
    pub fn random_inputs<R: Rng>(&self, rows: usize, rng: &mut R) -> Tensor {
        let levels = self.config.input_levels();
        let data = (0..rows * self.config.subblock)
            .map(|_| levels[rng.random_range(0..levels.len())].0)
            .collect();
        Tensor::from_vec(rows, self.config.subblock, data).expect("sizes agree")
    }

    /// Step-1 encoder φ1 up to the channel input, with θ1 fixed.
    fn step1_transmit(&self, l0: &Tensor) -> Result<Tensor> {
        let a = l0.matmul_t(&self.theta1)?.map(|x| x.max(0.0));
        Ok(shape_forward(&a).0)
    }

    /// Step-1 decoder output for inputs `l0` sent through the frozen step-1
    /// encoder at `ebn0_db` with fresh noise.
    pub fn step1_reconstruct<R: Rng>(&self, l0: &Tensor, ebn0_db: f64, rng: &mut R) -> Result<Tensor> {
        let clean = self.chain.forward(&self.step1_transmit(l0)?)?;
        let nu = self
            .chain
            .random_filtered_noise(l0.rows(), self.config.noise_sigma(ebn0_db), rng)?;
        self.decoder.infer(&quantize(&add(&clean, &nu)))
    }

    /// Re-runs the frozen step-1 encoder on stored pairs `idx` at their stored
    /// noise realizations.
    pub fn replay_l1(&self, store: &TrainingPairStore, idx: &[usize]) -> Result<Tensor> {
        let l0 = store.l0.select_rows(idx);
        let seeds: Vec<u64> = idx.iter().map(|&i| store.noise_seeds[i]).collect();
        let clean = self.chain.forward(&self.step1_transmit(&l0)?)?;
        let nu = self.chain.seeded_filtered_noise(&seeds, store.sigma)?;
        Ok(quantize(&add(&clean, &nu)))
    }

    /// Transmit samples (rows of interleaved I/Q, unit power per complex sample).
    pub fn encode_batch(&self, s: &Tensor) -> Result<Tensor> {
        self.require_complete()?;
        Ok(shape_forward(&self.precoder.infer(s)?).0)
    }

    /// Quantized receiver samples for transmit rows `t` and filtered noise `nu`.
    pub fn receive(&self, t: &Tensor, nu: &Tensor) -> Result<Tensor> {
        Ok(quantize(&add(&self.chain.forward(t)?, nu)))
    }

    /// Soft estimates from one-bit receiver samples: W_e2, sign, decoder.
    pub fn decode_batch(&self, r: &Tensor) -> Result<Tensor> {
        self.require_complete()?;
        if r.data().iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidParameter("receiver samples must be ±1".into()));
        }
        let l1 = quantize(&self.equalizer.infer(r)?);
        self.decoder.infer(&l1)
    }

    /// Encode, transmit at `ebn0_db` with noise from `rng`, quantize, decode.
    pub fn transceive<R: Rng>(&self, s: &Tensor, ebn0_db: f64, rng: &mut R) -> Result<Tensor> {
        let t = self.encode_batch(s)?;
        let nu = self
            .chain
            .random_filtered_noise(s.rows(), self.config.noise_sigma(ebn0_db), rng)?;
        self.decode_batch(&self.receive(&t, &nu)?)
    }

    /// Fraction of precoder units that are exactly zero on inputs `s`.
    pub fn zero_fraction(&self, s: &Tensor) -> Result<f64> {
        let a = self.precoder.infer(s)?;
        Ok(a.data().iter().filter(|&&x| x == 0.0).count() as f64 / a.data().len() as f64)
    }

    fn require_complete(&self) -> Result<()> {
        if self.stage == TrainingStage::Complete {
            Ok(())
        } else {
            Err(Error::Untrained)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let theta = Network::from_layers(vec![DenseLayer::new(
            LayerSpec::new(self.config.subblock, self.config.encoded_dim(), Activation::Linear)
                .without_bias(),
            self.theta1.clone(),
            vec![0.0; self.config.encoded_dim()],
        )?])?;
        let meta = serde_json::json!({
            "config": self.config,
            "history": self.history,
            "stage": self.stage,
        });
        save_checkpoint(
            path,
            &[
                ("precoder", &self.precoder),
                ("equalizer", &self.equalizer),
                ("decoder", &self.decoder),
                ("theta1", &theta),
            ],
            &meta,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (nets, meta) = load_checkpoint(path)?;
        let config: AeConfig = serde_json::from_value(meta["config"].clone())?;
        let mut model = Self::new(config)?;
        model.history = serde_json::from_value(meta["history"].clone())?;
        model.stage = serde_json::from_value(meta["stage"].clone())?;
        for (name, net) in nets {
            let slot = match name.as_str() {
                "precoder" => &mut model.precoder,
                "equalizer" => &mut model.equalizer,
                "decoder" => &mut model.decoder,
                "theta1" => {
                    model.theta1 = net.layers[0].weights.clone();
                    continue;
                }
                other => return Err(Error::Checkpoint(format!("unknown network {other:?}"))),
            };
            if slot.specs() != net.specs() {
                return Err(Error::Checkpoint(format!("network {name} does not match the config")));
            }
            *slot = net;
        }
        Ok(model)
    }
}

/// One-block inference API: encode `s` (length N) to transmit samples at
/// period T/G.
pub fn ae_encode(model: &AeModel, s: &[f64]) -> Result<IqSignal> {
    let x = Tensor::from_vec(1, s.len(), s.to_vec())?;
    let t = model.encode_batch(&x)?;
    IqSignal::from_pairs(t.data(), 1.0 / model.config.oversampling as f64)
}

/// One-block inference API: soft estimates (length N) from one-bit samples.
pub fn ae_decode(model: &AeModel, received: &IqSignal) -> Result<Vec<f64>> {
    let r = received.to_pairs();
    if r.len() != model.config.encoded_dim() {
        return Err(Error::Shape(format!(
            "expected {} receiver values, got {}",
            model.config.encoded_dim(),
            r.len()
        )));
    }
    Ok(model.decode_batch(&Tensor::from_vec(1, r.len(), r)?)?.into_vec())
}

fn check_loss(epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { epoch, loss })
    }
}

/// Step 1: freeze the random encoder and train the decoder on fresh inputs
/// and noise every batch. An epoch is `store_size` samples; the pairs of the
/// first epoch, with the seeds of their noise realizations, form the store.
pub fn train_decoder_step1(config: &AeConfig) -> Result<(AeModel, TrainingPairStore)> {
    let mut model = AeModel::new(config.clone())?;
    let sigma = config.noise_sigma(config.train_ebn0_db);
    let p = config.store_size;
    let mut store = TrainingPairStore {
        l0: Tensor::zeros(p, config.subblock),
        l1: Tensor::zeros(p, config.encoded_dim()),
        noise_seeds: Vec::with_capacity(p),
        sigma,
    };

    let mut rng = stream_rng(config.seed, STREAM_STEP1);
    let noise_master: u64 = rng.random();
    let mut opt = Optimizer::new(OptimizerConfig::adam(config.step1_learning_rate))?;
    let mut next = 0u64;
    for epoch in 0..config.step1_epochs {
        let (mut total, mut count) = (0.0, 0);
        let mut done = 0;
        while done < p {
            let rows = config.batch_size.min(p - done);
            done += rows;
            if rows < 2 {
                // batch norm needs two rows
                break;
            }
            let l0 = model.random_inputs(rows, &mut rng);
            let seeds: Vec<u64> = (next..next + rows as u64).map(|j| derive_seed(noise_master, j)).collect();
            let clean = model.chain.forward(&model.step1_transmit(&l0)?)?;
            let l1 = quantize(&add(&clean, &model.chain.seeded_filtered_noise(&seeds, sigma)?));
            if epoch == 0 {
                for k in 0..rows {
                    let i = next as usize + k;
                    store.l0.row_mut(i).copy_from_slice(l0.row(k));
                    store.l1.row_mut(i).copy_from_slice(l1.row(k));
                }
                store.noise_seeds.extend(&seeds);
            }
            next += rows as u64;
            let cache = model.decoder.forward(&l1, Mode::Train)?;
            let (loss, grad) = mse_with_grad(cache.output(), &l0)?;
            check_loss(epoch, loss)?;
            let grads = model.decoder.backward(&cache, &grad)?;
            opt.step(&mut model.decoder.params_mut(), &grads.slices())?;
            total += loss * rows as f64;
            count += rows;
        }
        model.history.step1_loss.push(total / count.max(1) as f64);
    }
    if store.noise_seeds.len() < p {
        // a trailing single row or zero epochs: fill the store without training on it
        let start = store.noise_seeds.len();
        let l0 = model.random_inputs(p - start, &mut rng);
        let seeds: Vec<u64> = (next..next + (p - start) as u64).map(|j| derive_seed(noise_master, j)).collect();
        let clean = model.chain.forward(&model.step1_transmit(&l0)?)?;
        let l1 = quantize(&add(&clean, &model.chain.seeded_filtered_noise(&seeds, sigma)?));
        for k in 0..p - start {
            store.l0.row_mut(start + k).copy_from_slice(l0.row(k));
            store.l1.row_mut(start + k).copy_from_slice(l1.row(k));
        }
        store.noise_seeds.extend(&seeds);
    }
    model.stage = TrainingStage::DecoderTrained;
    Ok((model, store))
}

/// Step 2: fit W_e1 and W_e2 jointly so the physical chain reproduces the
/// stored l1 targets at their stored noise realizations. The in-chain sign
/// uses a straight-through gradient on [-1, 1].
pub fn train_encoder_step2(mut model: AeModel, store: &TrainingPairStore) -> Result<AeModel> {
    if model.stage != TrainingStage::DecoderTrained {
        return Err(Error::InvalidParameter("step 2 requires a model fresh from step 1".into()));
    }
    let cfg = model.config.clone();
    let p = store.len();
    if store.l0.cols() != cfg.subblock || store.l1.cols() != cfg.encoded_dim() {
        return Err(Error::Shape("pair store does not match the model".into()));
    }
    let mut nu = Tensor::zeros(p, cfg.encoded_dim());
    let idx: Vec<usize> = (0..p).collect();
    for chunk in idx.chunks(CHUNK) {
        let seeds: Vec<u64> = chunk.iter().map(|&i| store.noise_seeds[i]).collect();
        let n = model.chain.seeded_filtered_noise(&seeds, store.sigma)?;
        for (k, &i) in chunk.iter().enumerate() {
            nu.row_mut(i).copy_from_slice(n.row(k));
        }
    }

    let mut opt = Optimizer::new(OptimizerConfig::adam(cfg.step2_learning_rate))?;
    let mut rng = stream_rng(cfg.seed, STREAM_STEP2);
    let probe = model.random_inputs(256, &mut stream_rng(cfg.seed, STREAM_PROBE));
    let mut order = idx;
    for epoch in 0..cfg.step2_epochs {
        order.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0);
        for b in order.chunks(cfg.batch_size) {
            let l0 = store.l0.select_rows(b);
            let target = store.l1.select_rows(b);
            let pc = model.precoder.forward(&l0, Mode::Train)?;
            let (t, scale) = shape_forward(pc.output());
            let noise = match cfg.step2_noise {
                Step2Noise::Replay => nu.select_rows(b),
                Step2Noise::Fresh => model.chain.random_filtered_noise(b.len(), store.sigma, &mut rng)?,
            };
            let y = add(&model.chain.forward(&t)?, &noise);
            let r = quantize(&y);
            let ec = model.equalizer.forward(&r, Mode::Train)?;
            let (loss, du) = mse_with_grad(ec.output(), &target)?;
            check_loss(epoch, loss)?;
            let eg = model.equalizer.backward(&ec, &du)?;
            let mut dy = eg.input.clone();
            dy.data_mut()
                .iter_mut()
                .zip(y.data())
                .for_each(|(g, v)| {
                    if v.abs() > 1.0 {
                        *g = 0.0
                    }
                });
            let da = shape_backward(&t, &scale, &model.chain.adjoint(&dy)?);
            let pg = model.precoder.backward(&pc, &da)?;
            let mut grads = pg.slices();
            grads.extend(eg.slices());
            let mut params = model.precoder.params_mut();
            params.extend(model.equalizer.params_mut());
            opt.step(&mut params, &grads)?;
            total += loss * b.len() as f64;
            count += b.len();
        }
        model.history.step2_loss.push(total / count.max(1) as f64);
        model.history.sparsity.push(model.zero_fraction(&probe)?);
    }
    model.stage = TrainingStage::Complete;
    Ok(model)
}

/// Both training steps.
pub fn train(config: &AeConfig) -> Result<(AeModel, TrainingPairStore)> {
    let (model, store) = train_decoder_step1(config)?;
    Ok((train_encoder_step2(model, &store)?, store))
}
