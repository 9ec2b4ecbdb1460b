//! Rate-1/3 turbo code with the LTE constituent encoders and QPP interleaver.

mod codec;
mod llr;
mod qpp;
pub mod trellis;

pub use codec::{max_star, CodedBlock, DecodeOutput, DecodingAlgo, TurboCodec, TurboSpec, TAIL_BITS};
pub use llr::{hard_crossover, llr_from_hard, llr_from_soft, CROSSOVER_MAX, CROSSOVER_MIN};
pub use qpp::{invert_permutation, qpp_interleave, qpp_params, qpp_permutation, QPP_TABLE};
