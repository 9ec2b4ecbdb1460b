use serde::{Deserialize, Serialize};

use super::IqSignal;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    pub fn bits_per_rail(self) -> usize {
        self.bits_per_symbol() / 2
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "qam16",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Modulation::Qpsk),
            "qam16" | "16qam" | "16-qam" => Ok(Modulation::Qam16),
            _ => Err(Error::Config(format!("unknown modulation {s:?}"))),
        }
    }

    /// Per-rail amplitude levels with their bit labels, unit average
    /// complex-symbol power. Labels are (sign bit, magnitude bit) for 16-QAM.
    pub fn rail_levels(self) -> Vec<(f64, Vec<u8>)> {
        match self {
            Modulation::Qpsk => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                vec![(a, vec![0]), (-a, vec![1])]
            }
            Modulation::Qam16 => {
                let s = 10f64.sqrt();
                vec![
                    (3.0 / s, vec![0, 1]),
                    (1.0 / s, vec![0, 0]),
                    (-1.0 / s, vec![1, 0]),
                    (-3.0 / s, vec![1, 1]),
                ]
            }
        }
    }

    /// All constellation points with their bit labels.
    pub fn constellation(self) -> Vec<((f64, f64), Vec<u8>)> {
        let mut pts = Vec::new();
        for code in 0..(1usize << self.bits_per_symbol()) {
            let bits: Vec<u8> = (0..self.bits_per_symbol())
                .map(|k| ((code >> (self.bits_per_symbol() - 1 - k)) & 1) as u8)
                .collect();
            let (i, q) = self.map_symbol(&bits);
            pts.push(((i, q), bits));
        }
        pts
    }

    /// Bit order per symbol: QPSK (b0 → I, b1 → Q); 16-QAM (b0, b2 → I and
    /// b1, b3 → Q, sign bit first).
    fn map_symbol(self, bits: &[u8]) -> (f64, f64) {
        match self {
            Modulation::Qpsk => (self.rail_value(&bits[0..1]), self.rail_value(&bits[1..2])),
            Modulation::Qam16 => (
                self.rail_value(&[bits[0], bits[2]]),
                self.rail_value(&[bits[1], bits[3]]),
            ),
        }
    }

    /// Rail amplitude for its bits (sign bit first).
    pub fn rail_value(self, bits: &[u8]) -> f64 {
        match self {
            Modulation::Qpsk => {
                if bits[0] == 0 {
                    std::f64::consts::FRAC_1_SQRT_2
                } else {
                    -std::f64::consts::FRAC_1_SQRT_2
                }
            }
            Modulation::Qam16 => {
                let sign = if bits[0] == 0 { 1.0 } else { -1.0 };
                let mag = if bits[1] == 0 { 1.0 } else { 3.0 };
                sign * mag / 10f64.sqrt()
            }
        }
    }

    /// Nearest-level hard decision on one rail.
    pub fn rail_bits(self, y: f64) -> Vec<u8> {
        match self {
            Modulation::Qpsk => vec![u8::from(y < 0.0)],
            Modulation::Qam16 => {
                let thr = 2.0 / 10f64.sqrt();
                vec![u8::from(y < 0.0), u8::from(y.abs() > thr)]
            }
        }
    }

    /// Bit positions (within one symbol) carried by the I and Q rails.
    pub fn rail_bit_positions(self) -> (Vec<usize>, Vec<usize>) {
        match self {
            Modulation::Qpsk => (vec![0], vec![1]),
            Modulation::Qam16 => (vec![0, 2], vec![1, 3]),
        }
    }
}

/// Gray-maps bits to unit-power symbols at one sample per symbol.
pub fn map_bits_to_symbols(bits: &[u8], m: Modulation) -> Result<IqSignal> {
    let bps = m.bits_per_symbol();
    if bits.len() % bps != 0 {
        return Err(Error::Shape(format!(
            "{} bits do not fill whole {}-bit symbols",
            bits.len(),
            bps
        )));
    }
    let (mut i, mut q) = (Vec::new(), Vec::new());
    for sym in bits.chunks(bps) {
        let (a, b) = m.map_symbol(sym);
        i.push(a);
        q.push(b);
    }
    IqSignal::from_rails(&i, &q, 1.0)
}

/// Hard nearest-point demapping, inverse of [`map_bits_to_symbols`].
pub fn demap_hard(sig: &IqSignal, m: Modulation) -> Vec<u8> {
    let (ipos, qpos) = m.rail_bit_positions();
    let mut out = Vec::with_capacity(sig.len() * m.bits_per_symbol());
    for (yi, yq) in sig.i().iter().zip(sig.q()) {
        let mut sym = vec![0u8; m.bits_per_symbol()];
        for (p, b) in ipos.iter().zip(m.rail_bits(*yi)) {
            sym[*p] = b;
        }
        for (p, b) in qpos.iter().zip(m.rail_bits(*yq)) {
            sym[*p] = b;
        }
        out.extend(sym);
    }
    out
}
