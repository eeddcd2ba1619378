//! Simulation and analysis toolkit for massive MIMO uplinks whose base station
//! digitizes every antenna with a pair of one-bit ADCs.
//!
//! The crate is organized the way a link is simulated:
//!
//! - [`channel`]: system parameters, Rayleigh channels (i.i.d. and spatially
//!   correlated), DFT pilots and unquantized received signals.
//! - [`quantization`]: the one-bit quantizer and its Bussgang linearization
//!   (gain, arcsine-law output covariance, quantizer-noise covariance).
//! - [`estimators`]: Bussgang LMMSE channel estimation for flat and OFDM
//!   channels together with least-squares, uncorrelated-noise LMMSE and
//!   near-ML baselines.
//! - [`rate`]: MRC/ZF combining, the Monte Carlo ergodic-rate lower bound and
//!   the closed-form low-SNR rate approximations.
//! - [`allocation`]: power scaling laws, pilot/data energy allocation and the
//!   one-bit vs. conventional antenna ratio.
//! - [`experiments`]: the figure registry driven by the `onebit-mimo` CLI.

// `!(x > 0.0)` guards deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod channel;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod mc;
pub mod quantization;
pub mod rate;

pub use error::{Error, Result};
pub use linalg::CMat;

/// 1 − 2/π, the per-entry quantizer-noise power of a one-bit ADC driven by a
/// Gaussian input.
pub const QUANTIZER_NOISE_POWER: f64 = 1.0 - std::f64::consts::FRAC_2_PI;

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to dB.
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}
