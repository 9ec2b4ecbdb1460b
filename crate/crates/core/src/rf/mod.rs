//! Analog front end: RRC pulses, faster-than-Nyquist oversampling, AWGN,
//! matched filtering, one-bit quantization and modulation mapping.

mod channel;
mod modulation;
mod pulse;
mod signal;

pub use channel::{transmit_chain, FtnChannel, SnrSpec};
pub use modulation::{demap_hard, map_bits_to_symbols, Modulation};
pub use pulse::{convolve, convolve_adjoint, rrc_taps, rrc_value, snr_penalty_db, PulseSpec};
pub use signal::{one_bit_quantize, power_normalize, IqSignal};

/// Per-block seed derived from a master seed, `master ⊕ index`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    master ^ index
}
