//! Flat-fading estimators: BLMMSE (general and τ = K fast path), the
//! uncorrelated-quantizer-noise LMMSE variant and least squares.

use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;

use super::ChannelEstimate;
use crate::channel::{ChannelCovariance, PilotMatrix, SystemConfig};
use crate::linalg::{self, CMat, CVec};
use crate::quantization::{alpha_p, BussgangModel};
use crate::{Error, Result, QUANTIZER_NOISE_POWER};

/// Output covariance assumed when building an LMMSE estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantizerNoiseModel {
    /// Exact arcsine-law C_r (correlated quantizer noise).
    Arcsine,
    /// `C_r ≈ A C_y A + (1 − 2/π) I`, i.e. C_q forced diagonal.
    Diagonal,
}

/// Second-order description of a linear training model `y = op·h + n`,
/// `n ~ CN(0, I)`, `r = Q(y)`.
#[derive(Debug, Clone)]
pub(crate) struct TrainingModel {
    c_h: CMat,
    c_y: CMat,
    /// E{r hᴴ} = A·op·C_h
    c_rh: CMat,
    bussgang: BussgangModel,
}

impl TrainingModel {
    pub(crate) fn new(op: &CMat, c_h: &CMat) -> Result<Self> {
        if c_h.nrows() != op.ncols() || !c_h.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "channel covariance is {}x{} but the training operator has {} columns",
                c_h.nrows(),
                c_h.ncols(),
                op.ncols()
            )));
        }
        let op_ch = op * c_h;
        let c_y = &op_ch * op.adjoint() + linalg::identity(op.nrows());
        let bussgang = BussgangModel::new(&c_y)?;
        let mut c_rh = op_ch;
        for (i, mut row) in c_rh.row_iter_mut().enumerate() {
            row *= Complex64::from(bussgang.gain[i]);
        }
        Ok(TrainingModel {
            c_h: c_h.clone(),
            c_y,
            c_rh,
            bussgang,
        })
    }

    fn assumed_c_r(&self, noise: QuantizerNoiseModel) -> CMat {
        match noise {
            QuantizerNoiseModel::Arcsine => self.bussgang.c_r.clone(),
            QuantizerNoiseModel::Diagonal => {
                let g = &self.bussgang.gain;
                let n = self.c_y.nrows();
                CMat::from_fn(n, n, |r, c| {
                    let v = self.c_y[(r, c)] * (g[r] * g[c]);
                    if r == c {
                        v + QUANTIZER_NOISE_POWER
                    } else {
                        v
                    }
                })
            }
        }
    }

    /// LMMSE matrix `W = C_hr C_r⁻¹` under the chosen noise model.
    pub(crate) fn lmmse(&self, noise: QuantizerNoiseModel) -> (CMat, bool) {
        let sol = linalg::hermitian_solve(&self.assumed_c_r(noise), &self.c_rh);
        (sol.x.adjoint(), sol.regularized)
    }

    fn trace_ch(&self) -> f64 {
        self.c_h.diagonal().iter().map(|z| z.re).sum()
    }

    /// `tr(W C_r Wᴴ)` under the true arcsine covariance.
    fn estimate_power(&self, w: &CMat) -> f64 {
        let wc = w * &self.bussgang.c_r;
        wc.iter()
            .zip(w.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    /// Normalized MSE `E‖h − W r‖² / tr(C_h)` of any linear estimator, exact
    /// for Gaussian `y`.
    pub(crate) fn mse(&self, w: &CMat) -> f64 {
        let cross: f64 = w
            .row_iter()
            .enumerate()
            .map(|(i, row)| (row * self.c_rh.column(i)).to_scalar().re)
            .sum();
        (self.trace_ch() - 2.0 * cross + self.estimate_power(w)) / self.trace_ch()
    }

    /// Per-element estimate variance `tr(W C_r Wᴴ) / tr(C_h)`, clipped to [0, 1].
    pub(crate) fn sigma_sq(&self, w: &CMat) -> f64 {
        (self.estimate_power(w) / self.trace_ch()).clamp(0.0, 1.0)
    }
}

/// Precomputed linear estimator `vec(Ĥ) = W r_p` for a flat-fading
/// configuration.
#[derive(Debug, Clone)]
pub struct LinearEstimator {
    w: CMat,
    m: usize,
    k: usize,
    sigma_sq: f64,
    predicted_mse: f64,
    regularized: bool,
}

fn check_pilots(phi: &PilotMatrix, cfg: &SystemConfig) -> Result<()> {
    cfg.validate()?;
    if phi.users() != cfg.k || phi.tau() != cfg.tau {
        return Err(Error::DimensionMismatch(format!(
            "pilot matrix is {}x{} but the configuration has tau={}, K={}",
            phi.tau(),
            phi.users(),
            cfg.tau,
            cfg.k
        )));
    }
    Ok(())
}

fn check_observation(r: &CVec, cfg: &SystemConfig) -> Result<()> {
    if r.len() != cfg.m * cfg.tau {
        return Err(Error::DimensionMismatch(format!(
            "training vector has length {} but M*tau = {}",
            r.len(),
            cfg.m * cfg.tau
        )));
    }
    Ok(())
}

impl LinearEstimator {
    fn bussgang_lmmse(
        phi: &PilotMatrix,
        cfg: &SystemConfig,
        cov: &ChannelCovariance,
        noise: QuantizerNoiseModel,
    ) -> Result<Self> {
        check_pilots(phi, cfg)?;
        let c_h = cov.full(cfg.m, cfg.k);
        let model = TrainingModel::new(&phi.operator(cfg.rho_p, cfg.m), &c_h)?;
        let (w, regularized) = model.lmmse(noise);
        Ok(LinearEstimator {
            sigma_sq: model.sigma_sq(&w),
            predicted_mse: model.mse(&w),
            w,
            m: cfg.m,
            k: cfg.k,
            regularized,
        })
    }

    /// BLMMSE: `C_h (A Φ̄)ᴴ C_r⁻¹` with C_r from the arcsine law.
    pub fn blmmse(phi: &PilotMatrix, cfg: &SystemConfig, cov: &ChannelCovariance) -> Result<Self> {
        Self::bussgang_lmmse(phi, cfg, cov, QuantizerNoiseModel::Arcsine)
    }

    /// LMMSE that models the quantizer noise as white with power 1 − 2/π.
    pub fn uncorrelated_lmmse(
        phi: &PilotMatrix,
        cfg: &SystemConfig,
        cov: &ChannelCovariance,
    ) -> Result<Self> {
        Self::bussgang_lmmse(phi, cfg, cov, QuantizerNoiseModel::Diagonal)
    }

    /// Least squares `(Φ̄ᴴΦ̄)⁻¹Φ̄ᴴ` applied directly to the quantized output.
    ///
    /// The predicted MSE assumes an i.i.d. unit-variance channel.
    pub fn least_squares(phi: &PilotMatrix, cfg: &SystemConfig) -> Result<Self> {
        check_pilots(phi, cfg)?;
        if !(cfg.rho_p > 0.0) {
            return Err(Error::RankDeficient(
                "least squares needs positive pilot power".into(),
            ));
        }
        // Φ̄ᴴΦ̄ = ρ_p (ΦᴴΦ) ⊗ I_M, so only the K×K Gram matrix is inverted
        let p = phi.matrix();
        let gram = p.adjoint() * p * Complex64::from(cfg.rho_p);
        let inv = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::RankDeficient("pilot Gram matrix is singular".into()))?
            .inverse();
        let op = phi.operator(cfg.rho_p, cfg.m);
        let w = linalg::kron_identity(&inv, cfg.m) * op.adjoint();
        let model = TrainingModel::new(&op, &linalg::identity(cfg.m * cfg.k))?;
        Ok(LinearEstimator {
            sigma_sq: model.sigma_sq(&w),
            predicted_mse: model.mse(&w),
            w,
            m: cfg.m,
            k: cfg.k,
            regularized: false,
        })
    }

    pub fn matrix(&self) -> &CMat {
        &self.w
    }

    pub fn predicted_mse(&self) -> f64 {
        self.predicted_mse
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn regularized(&self) -> bool {
        self.regularized
    }

    /// Applies the estimator to any length-Mτ observation.
    pub fn apply(&self, r: &CVec) -> Result<ChannelEstimate> {
        if r.len() != self.w.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "observation has length {} but the estimator expects {}",
                r.len(),
                self.w.ncols()
            )));
        }
        Ok(ChannelEstimate {
            h_hat: linalg::unvec(&(&self.w * r), self.m, self.k)?,
            sigma_sq: self.sigma_sq,
            predicted_mse: Some(self.predicted_mse),
            regularized: self.regularized,
        })
    }
}

/// BLMMSE estimate from a quantized training vector.
pub fn blmmse_flat(
    r_p: &CVec,
    phi: &PilotMatrix,
    cfg: &SystemConfig,
    cov: &ChannelCovariance,
) -> Result<ChannelEstimate> {
    check_observation(r_p, cfg)?;
    LinearEstimator::blmmse(phi, cfg, cov)?.apply(r_p)
}

/// BLMMSE for τ = K with orthogonal unit-modulus pilots and C_h = I:
/// `Ĥ = α_p √ρ_p R Φ*` with `R = unvec(r_p)`, no matrix inversion.
pub fn blmmse_fast(r_p: &CVec, phi: &PilotMatrix, cfg: &SystemConfig) -> Result<ChannelEstimate> {
    check_pilots(phi, cfg)?;
    if cfg.tau != cfg.k {
        return Err(Error::InvalidConfig(format!(
            "the fast BLMMSE path needs tau = K, got tau={}, K={}",
            cfg.tau, cfg.k
        )));
    }
    check_observation(r_p, cfg)?;
    let r = linalg::unvec(r_p, cfg.m, cfg.tau)?;
    let scale = Complex64::from(alpha_p(cfg) * cfg.rho_p.sqrt());
    let h_hat = r * phi.matrix().map(|z| z.conj()) * scale;
    Ok(ChannelEstimate {
        h_hat,
        sigma_sq: estimate_variance(cfg),
        predicted_mse: Some(mse_closed_form(cfg)),
        regularized: false,
    })
}

/// Least-squares estimate from a quantized training vector.
pub fn ls_estimate(r_p: &CVec, phi: &PilotMatrix, cfg: &SystemConfig) -> Result<ChannelEstimate> {
    check_observation(r_p, cfg)?;
    LinearEstimator::least_squares(phi, cfg)?.apply(r_p)
}

/// LMMSE with the quantizer noise modeled as uncorrelated, C_q = (1 − 2/π) I.
pub fn lmmse_uncorrelated(
    r_p: &CVec,
    phi: &PilotMatrix,
    cfg: &SystemConfig,
    cov: &ChannelCovariance,
) -> Result<ChannelEstimate> {
    check_observation(r_p, cfg)?;
    LinearEstimator::uncorrelated_lmmse(phi, cfg, cov)?.apply(r_p)
}

/// Normalized BLMMSE MSE for τ = K: `1 − 2Kρ_p / (π(Kρ_p + 1))`.
pub fn mse_closed_form(cfg: &SystemConfig) -> f64 {
    let kr = cfg.k as f64 * cfg.rho_p;
    1.0 - 2.0 * kr / (PI * (kr + 1.0))
}

/// High-SNR error floor `1 − 2/π`.
pub fn mse_floor() -> f64 {
    QUANTIZER_NOISE_POWER
}

/// Per-element BLMMSE estimate variance
/// `σ² = α_p²τρ_p / (α_p²τρ_p + α_p² + 1 − 2/π)`.
pub fn estimate_variance(cfg: &SystemConfig) -> f64 {
    sigma_sq_of(cfg.k as f64, cfg.tau as f64, cfg.rho_p)
}

/// [`estimate_variance`] for real-valued dimensions.
pub(crate) fn sigma_sq_of(k: f64, tau: f64, rho_p: f64) -> f64 {
    let a2 = FRAC_2_PI / (k * rho_p + 1.0);
    let s = a2 * tau * rho_p;
    s / (s + a2 + QUANTIZER_NOISE_POWER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{dft_pilots, iid_channel, training_signal_with};
    use crate::estimators::normalized_error;
    use crate::mc::{run_trials, seeded_rng, Estimate};
    use crate::quantization::one_bit_quantize;
    use crate::{db_to_linear, linear_to_db};

    fn setup(m: usize, k: usize, tau: usize, rho: f64) -> (SystemConfig, PilotMatrix) {
        (
            SystemConfig::new(m, k, tau, 200, rho, rho).unwrap(),
            dft_pilots(tau, k).unwrap(),
        )
    }

    fn quantized_training(
        rng: &mut crate::mc::McRng,
        cfg: &SystemConfig,
        phi: &PilotMatrix,
    ) -> (CMat, CVec) {
        let h = iid_channel(rng, cfg.m, cfg.k);
        let y = training_signal_with(rng, &h, phi, cfg.rho_p).unwrap();
        (h, one_bit_quantize(&y))
    }

    #[test]
    fn closed_forms() {
        let (cfg, _) = setup(16, 4, 4, 10.0);
        assert!((mse_closed_form(&cfg) - (1.0 - 80.0 / (41.0 * PI))).abs() < 1e-15);
        assert!((mse_closed_form(&cfg) - 0.37891).abs() < 5e-6);
        assert_eq!(mse_closed_form(&cfg.with_snr(0.0)), 1.0);
        assert!((linear_to_db(mse_floor()) + 4.3963).abs() < 1e-4);

        let (cfg, _) = setup(128, 8, 8, 0.1);
        assert!((estimate_variance(&cfg) - 0.28294).abs() < 5e-5);
        assert_eq!(estimate_variance(&cfg.with_snr(0.0)), 0.0);
        for rho in [1e-3, 0.1, 1.0, 10.0, 1e4] {
            let c = cfg.with_snr(rho);
            assert!((estimate_variance(&c) - (1.0 - mse_closed_form(&c))).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_path_equals_general_path() {
        for (m, k, rho, seed) in [(4, 2, 0.3, 1), (8, 4, 10.0, 2), (3, 3, 1e-3, 3)] {
            let (cfg, phi) = setup(m, k, k, rho);
            let (_, r) = quantized_training(&mut seeded_rng(seed), &cfg, &phi);
            let fast = blmmse_fast(&r, &phi, &cfg).unwrap();
            let general = blmmse_flat(&r, &phi, &cfg, &ChannelCovariance::Identity).unwrap();
            let rel = (&fast.h_hat - &general.h_hat).norm() / fast.h_hat.norm();
            assert!(rel < 1e-10, "rel {rel}");
            assert!(!general.regularized);
            assert!((general.predicted_mse.unwrap() - mse_closed_form(&cfg)).abs() < 1e-12);
            assert!((general.sigma_sq - fast.sigma_sq).abs() < 1e-12);
        }
        let (cfg, phi) = setup(4, 2, 3, 1.0);
        let r = CVec::zeros(12);
        assert!(blmmse_fast(&r, &phi, &cfg).is_err());
    }

    #[test]
    fn fast_path_mse_matches_closed_form() {
        let (cfg, phi) = setup(16, 4, 4, 10.0);
        let mse = run_trials(10_000, 31, |rng| {
            let (h, r) = quantized_training(rng, &cfg, &phi);
            blmmse_fast(&r, &phi, &cfg).unwrap().realized_mse(&h)
        });
        let e = Estimate::from_samples(&mse);
        assert!((e.mean - 0.37891).abs() < 0.005, "{e:?}");
    }

    #[test]
    fn zero_pilot_power_gives_zero_estimate() {
        let (cfg, phi) = setup(4, 2, 5, 0.0);
        let (_, r) = quantized_training(&mut seeded_rng(0), &cfg, &phi);
        let est = blmmse_flat(&r, &phi, &cfg, &ChannelCovariance::Identity).unwrap();
        assert_eq!(est.h_hat.norm(), 0.0);
        assert_eq!(est.sigma_sq, 0.0);
        assert!((est.predicted_mse.unwrap() - 1.0).abs() < 1e-15);
        assert!(ls_estimate(&r, &phi, &cfg).is_err());
    }

    #[test]
    fn least_squares_inverts_clean_training() {
        let (cfg, phi) = setup(3, 2, 5, 2.0);
        let h = iid_channel(&mut seeded_rng(4), 3, 2);
        let clean = phi.operator(2.0, 3) * linalg::vec(&h);
        let est = ls_estimate(&clean, &phi, &cfg).unwrap();
        assert!(normalized_error(&h, &est.h_hat) < 1e-24);
        assert_eq!(est.h_hat, ls_estimate(&clean, &phi, &cfg).unwrap().h_hat);
    }

    #[test]
    fn predicted_ordering_at_high_snr() {
        for snr_db in [10.0, 15.0, 20.0] {
            let (cfg, phi) = setup(16, 4, 20, db_to_linear(snr_db));
            let cov = ChannelCovariance::Identity;
            let b = LinearEstimator::blmmse(&phi, &cfg, &cov)
                .unwrap()
                .predicted_mse();
            let u = LinearEstimator::uncorrelated_lmmse(&phi, &cfg, &cov)
                .unwrap()
                .predicted_mse();
            let l = LinearEstimator::least_squares(&phi, &cfg)
                .unwrap()
                .predicted_mse();
            assert!(b < u && u < l, "{snr_db} dB: {b} {u} {l}");
        }
    }

    #[test]
    fn predicted_mse_matches_monte_carlo() {
        let (cfg, phi) = setup(8, 2, 6, db_to_linear(10.0));
        let cov = ChannelCovariance::Identity;
        for est in [
            LinearEstimator::blmmse(&phi, &cfg, &cov).unwrap(),
            LinearEstimator::uncorrelated_lmmse(&phi, &cfg, &cov).unwrap(),
            LinearEstimator::least_squares(&phi, &cfg).unwrap(),
        ] {
            let mse = run_trials(4000, 8, |rng| {
                let (h, r) = quantized_training(rng, &cfg, &phi);
                est.apply(&r).unwrap().realized_mse(&h)
            });
            let e = Estimate::from_samples(&mse);
            assert!(
                (e.mean - est.predicted_mse()).abs() < 4.0 * e.std_error + 1e-3,
                "{e:?} vs {}",
                est.predicted_mse()
            );
        }
    }

    #[test]
    fn estimate_is_orthogonal_to_error() {
        let (cfg, phi) = setup(4, 2, 6, 3.0);
        let est = LinearEstimator::blmmse(&phi, &cfg, &ChannelCovariance::Identity).unwrap();
        let n = 20_000;
        let cross = run_trials(n, 12, |rng| {
            let (h, r) = quantized_training(rng, &cfg, &phi);
            let hh = est.apply(&r).unwrap().h_hat;
            let e = &hh - &h;
            let num: Complex64 = hh.iter().zip(e.iter()).map(|(a, b)| a * b.conj()).sum();
            num.re
        });
        // E[ĥᴴe] = 0; the ratio of per-trial normalized products is not
        let e = Estimate::from_samples(&cross);
        assert!(e.mean.abs() < 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn fast_output_variance_matches_sigma_sq_at_low_snr() {
        for snr_db in [-10.0, 0.0] {
            let (cfg, phi) = setup(16, 8, 8, db_to_linear(snr_db));
            let p = run_trials(4000, 5, |rng| {
                let (_, r) = quantized_training(rng, &cfg, &phi);
                blmmse_fast(&r, &phi, &cfg).unwrap().h_hat.norm_squared() / (16.0 * 8.0)
            });
            let e = Estimate::from_samples(&p);
            let s2 = estimate_variance(&cfg);
            assert!(
                (e.mean / s2 - 1.0).abs() < 0.03,
                "{snr_db}: {} vs {s2}",
                e.mean
            );
        }
    }

    #[test]
    fn dimension_checks() {
        let (cfg, phi) = setup(4, 2, 4, 1.0);
        let short = CVec::zeros(15);
        assert!(blmmse_flat(&short, &phi, &cfg, &ChannelCovariance::Identity).is_err());
        let other = dft_pilots(5, 2).unwrap();
        assert!(LinearEstimator::blmmse(&other, &cfg, &ChannelCovariance::Identity).is_err());
    }
}
