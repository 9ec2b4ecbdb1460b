//! Simulator for channel autoencoders over AWGN channels with one-bit
//! receivers, concatenated with an LTE turbo outer code.

mod error;
pub mod ae;
pub mod capacity;
pub mod harness;
pub mod nn;
pub mod oracle;
pub mod rf;
pub mod stats;
pub mod turbo;

pub use error::{Error, Result};
