use crate::capacity::q_function;
use crate::rf::{IqSignal, Modulation};
use crate::{Error, Result};

/// Range the hard-input crossover probability is clamped to.
pub const CROSSOVER_MIN: f64 = 1e-6;
pub const CROSSOVER_MAX: f64 = 0.5 - 1e-6;

/// Bitwise channel LLRs (positive ⇒ 0) under complex AWGN of total variance
/// `noise_var` = N0, i.e. N0/2 per rail. Bits come out in the order consumed
/// by [`crate::rf::map_bits_to_symbols`]. 16-QAM uses the max-log metric.
pub fn llr_from_soft(received: &IqSignal, m: Modulation, noise_var: f64) -> Result<Vec<f64>> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise variance must be positive, got {noise_var}")));
    }
    let levels = m.rail_levels();
    let rail = |y: f64| -> Vec<f64> {
        match m {
            Modulation::Qpsk => vec![2.0 * std::f64::consts::SQRT_2 * y / noise_var],
            Modulation::Qam16 => (0..2)
                .map(|b| {
                    let (mut d0, mut d1) = (f64::INFINITY, f64::INFINITY);
                    for (x, bits) in &levels {
                        let d = (y - x).powi(2);
                        if bits[b] == 0 {
                            d0 = d0.min(d);
                        } else {
                            d1 = d1.min(d);
                        }
                    }
                    (d1 - d0) / noise_var
                })
                .collect(),
        }
    };
    Ok(assemble(received, m, rail))
}

/// Probability that the sign of one rail flips at symbol SNR `esn0` (linear).
/// For 16-QAM this is averaged over the inner and outer levels.
pub fn hard_crossover(m: Modulation, esn0: f64) -> f64 {
    match m {
        Modulation::Qpsk => q_function(esn0.sqrt()),
        Modulation::Qam16 => {
            0.5 * (q_function((0.2 * esn0).sqrt()) + q_function((1.8 * esn0).sqrt()))
        }
    }
}

/// LLRs for one-bit samples seen through a binary symmetric channel with
/// crossover `p`. Only the sign bit of each rail is observable; 16-QAM
/// magnitude bits get LLR 0.
pub fn llr_from_hard(quantized: &IqSignal, m: Modulation, p: f64) -> Vec<f64> {
    let p = if p.is_nan() { CROSSOVER_MAX } else { p.clamp(CROSSOVER_MIN, CROSSOVER_MAX) };
    let mag = ((1.0 - p) / p).ln();
    let rail = |y: f64| -> Vec<f64> {
        let l = if y < 0.0 { -mag } else { mag };
        match m {
            Modulation::Qpsk => vec![l],
            Modulation::Qam16 => vec![l, 0.0],
        }
    };
    assemble(quantized, m, rail)
}

fn assemble(sig: &IqSignal, m: Modulation, rail: impl Fn(f64) -> Vec<f64>) -> Vec<f64> {
    let (ipos, qpos) = m.rail_bit_positions();
    let bps = m.bits_per_symbol();
    let mut out = vec![0.0; sig.len() * bps];
    for (n, (yi, yq)) in sig.i().iter().zip(sig.q()).enumerate() {
        let sym = &mut out[n * bps..(n + 1) * bps];
        for (p, l) in ipos.iter().zip(rail(*yi)) {
            sym[*p] = l;
        }
        for (p, l) in qpos.iter().zip(rail(*yq)) {
            sym[*p] = l;
        }
    }
    out
}
