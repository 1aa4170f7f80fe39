//! Double-chirp preamble design and ML multiuser preamble detection for LoRa-style
//! uplinks received by an L-antenna gateway, together with the per-sample sliding-DFT
//! receiver and a Monte Carlo preamble-error-rate harness.
//!
//! Modules:
//! - [`css`]: chirp alphabet, dechirping, windowed DFT demodulation, square-law combining
//! - [`sliding_dft`]: O(M)-per-sample recursive update of the dechirped-window DFT
//! - [`preamble`]: double-chirp preamble symbols and collision-free chirp-pair assignment
//! - [`channel`]: asynchronous multiuser uplink synthesis over Rayleigh block fading
//! - [`detector`]: bin-correlation preamble statistic, Gaussian likelihoods, decision rule,
//!   and the streaming detection loop
//! - [`harness`]: Monte Carlo experiments, scoring, configuration, and CSV output

pub mod channel;
pub mod css;
pub mod detector;
pub mod error;
pub mod harness;
pub mod preamble;
pub mod sliding_dft;

pub use error::{Error, Result};
