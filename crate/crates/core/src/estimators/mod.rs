//! Channel estimators for the one-bit training phase.
//!
//! All linear estimators here share one construction: for a training model
//! `y = Φ̄ h + n` with `h ~ CN(0, C_h)` and `r = Q(y)`, the estimate is
//! `ĥ = W r`. Since `W` does not depend on the observation it is built once
//! per configuration by [`LinearEstimator`] and applied to every trial.

mod flat;
mod nml;
mod ofdm;

pub(crate) use flat::sigma_sq_of as flat_sigma_sq;
pub use flat::{
    blmmse_fast, blmmse_flat, estimate_variance, lmmse_uncorrelated, ls_estimate, mse_closed_form,
    mse_floor, LinearEstimator, QuantizerNoiseModel,
};
pub use nml::{nml_estimate, NmlEstimate, NmlOptions, NmlRadius};
pub use ofdm::{
    blmmse_ofdm, ofdm_pilot_matrix, ofdm_training_signal, qpsk_pilots, OfdmConfig, OfdmEstimator,
};

use crate::linalg::CMat;

/// Estimated channel with its per-element variance and, where available,
/// the model-predicted normalized MSE.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// M×K estimate.
    pub h_hat: CMat,
    /// Per-element estimate variance, in [0, 1].
    pub sigma_sq: f64,
    /// Normalized MSE `E‖h − ĥ‖² / tr(C_h)` predicted by the Bussgang model.
    pub predicted_mse: Option<f64>,
    /// The covariance solve needed a ridge or pseudo-inverse.
    pub regularized: bool,
}

impl ChannelEstimate {
    /// `‖H − Ĥ‖²_F / (MK)` against a known channel.
    pub fn realized_mse(&self, h: &CMat) -> f64 {
        normalized_error(h, &self.h_hat)
    }
}

/// `‖a − b‖²_F / len(a)`.
pub fn normalized_error(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm_squared() / a.len() as f64
}
