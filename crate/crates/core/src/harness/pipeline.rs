use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ae::{calibrate_residual, extract_llr, AeConfig, AeModel, Calibration};
use crate::nn::{Network, Tensor};
use crate::rf::{map_bits_to_symbols, one_bit_quantize, IqSignal, Modulation, SnrSpec};
use crate::turbo::{hard_crossover, llr_from_hard, llr_from_soft, DecodeOutput, TurboCodec};
use crate::{Error, Result};

/// Subblocks needed for `coded_bits`, the last one zero-padded.
pub fn subblock_count(coded_bits: usize, ae: &AeConfig) -> usize {
    coded_bits.div_ceil(ae.bits_per_subblock())
}

/// Maps coded bits onto AE inputs, `bits_per_rail` consecutive bits per
/// input value, one subblock per row. Padding bits are zero.
pub fn ae_inputs(bits: &[u8], ae: &AeConfig) -> Result<Tensor> {
    let bpr = ae.modulation.bits_per_rail();
    let rows = subblock_count(bits.len(), ae);
    let mut padded = bits.to_vec();
    padded.resize(rows * ae.bits_per_subblock(), 0);
    let data = padded
        .chunks(bpr)
        .map(|c| ae.rail_input(c))
        .collect::<Result<Vec<_>>>()?;
    Tensor::from_vec(rows, ae.subblock, data)
}

/// FNV-1a over a byte stream.
pub fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn network_bytes(net: &Network) -> impl Iterator<Item = u8> + '_ {
    net.layers.iter().flat_map(|l| {
        let bn = l.bn.iter().flat_map(|b| {
            b.gamma
                .iter()
                .chain(&b.beta)
                .chain(&b.running_mean)
                .chain(&b.running_var)
        });
        l.weights
            .data()
            .iter()
            .chain(&l.bias)
            .chain(bn)
            .flat_map(|x| x.to_bits().to_le_bytes())
    })
}

/// Checksum of every inference parameter of the inner code.
pub fn model_checksum(model: &AeModel) -> u64 {
    fnv1a(
        network_bytes(&model.precoder)
            .chain(network_bytes(&model.equalizer))
            .chain(network_bytes(&model.decoder)),
    )
}

/// Turbo encode, map onto AE inputs, run every subblock through the same
/// precoder, and concatenate the transmit samples (period T/G).
pub fn concat_encode(info: &[u8], codec: &TurboCodec, model: &AeModel) -> Result<IqSignal> {
    let coded = codec.encode(info)?.to_bits();
    let s = ae_inputs(&coded, &model.config)?;
    let t = model.encode_batch(&s)?;
    IqSignal::from_pairs(t.data(), 1.0 / model.config.oversampling as f64)
}

/// Per-subblock RF chain at `ebn0_db` followed by the one-bit receiver.
pub fn concat_channel<R: Rng>(tx: &IqSignal, model: &AeModel, ebn0_db: f64, rng: &mut R) -> Result<IqSignal> {
    let t = subblock_rows(tx, &model.config)?;
    let nu = model
        .chain()
        .random_filtered_noise(t.rows(), model.config.noise_sigma(ebn0_db), rng)?;
    let r = model.receive(&t, &nu)?;
    IqSignal::from_pairs(r.data(), tx.sample_period)
}

fn subblock_rows(sig: &IqSignal, ae: &AeConfig) -> Result<Tensor> {
    let x = sig.to_pairs();
    let d = ae.encoded_dim();
    if x.len() % d != 0 {
        return Err(Error::Shape(format!("{} samples do not fill subblocks of {d}", x.len())));
    }
    Tensor::from_vec(x.len() / d, d, x)
}

/// Soft estimates per subblock, LLRs under the residual model, padding
/// stripped, turbo decoding. Without a calibration one is fitted at
/// `ebn0_db` first.
pub fn concat_decode(
    received: &IqSignal,
    codec: &TurboCodec,
    model: &AeModel,
    calibration: Option<&Calibration>,
    ebn0_db: f64,
) -> Result<DecodeOutput> {
    let fitted;
    let cal = match calibration {
        Some(c) => c,
        None => {
            log::warn!("no calibration for {ebn0_db} dB; fitting one now");
            fitted = calibrate_residual(model, ebn0_db, 4000, model.config.seed)?;
            &fitted
        }
    };
    let r = subblock_rows(received, &model.config)?;
    let shat = model.decode_batch(&r)?;
    let mut llr = extract_llr(shat.data(), cal, &model.config.input_levels())?;
    let n = codec.spec.coded_len();
    if llr.len() < n {
        return Err(Error::Shape(format!("{} LLRs for {n} coded bits", llr.len())));
    }
    llr.truncate(n);
    codec.decode(&llr)
}

/// Channel LLRs of the Nyquist-rate baselines: Gray-mapped symbols, AWGN at
/// `ebn0_db` for rate-1/3 coding, then either the unquantized max-log
/// demapper or one-bit samples with the crossover of the sign decision.
pub fn baseline_llrs<R: Rng>(
    coded: &[u8],
    m: Modulation,
    ebn0_db: f64,
    rate: f64,
    quantized: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let snr = SnrSpec {
        ebn0_db,
        code_rate: rate,
        bits_per_symbol: m.bits_per_symbol(),
    };
    snr.validate()?;
    let x = map_bits_to_symbols(coded, m)?;
    let sigma = snr.noise_sigma();
    let noisy: Vec<f64> = x
        .samples()
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v + sigma * z
        })
        .collect();
    let y = IqSignal::new(noisy, 1.0)?;
    if quantized {
        Ok(llr_from_hard(&one_bit_quantize(&y), m, hard_crossover(m, snr.esn0())))
    } else {
        llr_from_soft(&y, m, 2.0 * sigma * sigma)
    }
}
