//! Linear receivers and achievable uplink rates.
//!
//! The Monte Carlo path evaluates the ergodic lower bound with BLMMSE channel
//! estimates, the hardening gain `A_d = α_d I` and the exact per-realization
//! quantizer-noise covariance. The closed forms are the low-SNR
//! approximations obtained by treating the effective noise as Gaussian and
//! the quantizer noise as white.

use std::f64::consts::FRAC_2_PI;

use num_complex::Complex64;

use crate::channel::{
    dft_pilots, iid_channel, training_signal_with, ChannelCovariance, SystemConfig,
};
use crate::estimators::{blmmse_fast, estimate_variance, LinearEstimator};
use crate::linalg::{self, CMat};
use crate::mc::{run_trials, Estimate};
use crate::quantization::{alpha_d, one_bit_quantize, quantizer_noise_cov};
use crate::{Error, Result, QUANTIZER_NOISE_POWER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Receiver {
    Mrc,
    Zf,
}

impl Receiver {
    pub fn name(self) -> &'static str {
        match self {
            Receiver::Mrc => "mrc",
            Receiver::Zf => "zf",
        }
    }
}

/// Channel knowledge used to build the combiner in Monte Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Csi {
    /// BLMMSE estimate from one-bit training.
    Blmmse,
    /// The true channel.
    Perfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMethod {
    McLowerBound,
    Moments,
    ClosedMrc,
    ClosedZf,
    ConventionalMrc,
    ConventionalZf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Per-user rate in bits/s/Hz.
    pub per_user_rate: Vec<f64>,
    /// `(T − τ)/T · Σ_k R_k`.
    pub sum_spectral_efficiency: f64,
    pub method: RateMethod,
    /// Standard error of the sum spectral efficiency (Monte Carlo only).
    pub std_error: Option<f64>,
    /// Set for ZF with M − K < 8, where the Wishart-mean approximation is poor.
    pub low_accuracy: bool,
}

impl RateReport {
    fn new(per_user_rate: Vec<f64>, cfg: &SystemConfig, method: RateMethod) -> Self {
        RateReport {
            sum_spectral_efficiency: sum_se(&per_user_rate, cfg),
            per_user_rate,
            method,
            std_error: None,
            low_accuracy: false,
        }
    }
}

/// `(T − τ)/T · Σ rates`.
pub fn sum_se(per_user_rates: &[f64], cfg: &SystemConfig) -> f64 {
    prelog(cfg.t as f64, cfg.tau as f64) * per_user_rates.iter().sum::<f64>()
}

pub(crate) fn prelog(t: f64, tau: f64) -> f64 {
    (t - tau) / t
}

/// MRC combiner `Wᵀ = Ĥᴴ` (K×M).
pub fn mrc_matrix(h_hat: &CMat) -> CMat {
    h_hat.adjoint()
}

/// ZF combiner `Wᵀ = (ĤᴴĤ)⁻¹Ĥᴴ` (K×M).
pub fn zf_matrix(h_hat: &CMat) -> Result<CMat> {
    let (m, k) = h_hat.shape();
    if m < k {
        return Err(Error::RankDeficient(format!(
            "zero forcing needs M >= K, got M={m}, K={k}"
        )));
    }
    let ha = h_hat.adjoint();
    let gram = &ha * h_hat;
    let ch = gram
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("estimated channel Gram matrix is singular".into()))?;
    Ok(ch.solve(&ha))
}

pub fn combiner(receiver: Receiver, h_hat: &CMat) -> Result<CMat> {
    match receiver {
        Receiver::Mrc => Ok(mrc_matrix(h_hat)),
        Receiver::Zf => zf_matrix(h_hat),
    }
}

fn zf_low_accuracy(receiver: Receiver, m: usize, k: usize) -> bool {
    receiver == Receiver::Zf && m < k + 8
}

/// Per-user SINR terms of the ergodic bound for one channel draw.
fn draw_sinrs(
    wt: &CMat,
    h_hat: &CMat,
    err: &CMat,
    c_qd: &CMat,
    alpha: f64,
    rho_d: f64,
) -> Vec<f64> {
    let k = wt.nrows();
    let g = wt * h_hat;
    let e = wt * err;
    let a2 = alpha * alpha;
    (0..k)
        .map(|u| {
            let row = wt.row(u);
            let desired = rho_d * a2 * g[(u, u)].norm_sqr();
            let interference: f64 = (0..k)
                .filter(|&i| i != u)
                .map(|i| g[(u, i)].norm_sqr())
                .sum();
            let estimation: f64 = (0..k).map(|i| e[(u, i)].norm_sqr()).sum();
            let awgn = a2 * row.norm_squared();
            // w_kᵀ C_q w_k*
            let quant = (row * c_qd * row.adjoint()).to_scalar().re;
            desired / (rho_d * a2 * (interference + estimation) + awgn + quant)
        })
        .collect()
}

/// Monte Carlo ergodic rate bound with BLMMSE CSI over i.i.d. Rayleigh
/// channels and DFT pilots.
pub fn ergodic_rate_mc(
    cfg: &SystemConfig,
    receiver: Receiver,
    n_trials: usize,
    seed: u64,
) -> Result<RateReport> {
    ergodic_rate_mc_with(cfg, receiver, Csi::Blmmse, n_trials, seed)
}

pub fn ergodic_rate_mc_with(
    cfg: &SystemConfig,
    receiver: Receiver,
    csi: Csi,
    n_trials: usize,
    seed: u64,
) -> Result<RateReport> {
    cfg.validate()?;
    if n_trials < 1 {
        return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
    }
    if receiver == Receiver::Zf && cfg.m <= cfg.k {
        return Err(Error::Domain(format!(
            "ZF needs M > K, got M={}, K={}",
            cfg.m, cfg.k
        )));
    }
    let phi = dft_pilots(cfg.tau, cfg.k)?;
    let general = if cfg.tau == cfg.k {
        None
    } else {
        Some(LinearEstimator::blmmse(
            &phi,
            cfg,
            &ChannelCovariance::Identity,
        )?)
    };
    let alpha = alpha_d(cfg);
    let (m, k, rho_d) = (cfg.m, cfg.k, cfg.rho_d);

    let draws = run_trials(n_trials, seed, |rng| -> Result<Vec<f64>> {
        let h = iid_channel(rng, m, k);
        let h_hat = match csi {
            Csi::Perfect => h.clone(),
            Csi::Blmmse => {
                let r = one_bit_quantize(&training_signal_with(rng, &h, &phi, cfg.rho_p)?);
                match &general {
                    None => blmmse_fast(&r, &phi, cfg)?.h_hat,
                    Some(est) => est.apply(&r)?.h_hat,
                }
            }
        };
        if rho_d == 0.0 || h_hat.norm() == 0.0 {
            return Ok(vec![0.0; k]);
        }
        let err = &h - &h_hat;
        let c_y = &h * h.adjoint() * Complex64::from(rho_d) + linalg::identity(m);
        let c_qd = quantizer_noise_cov(&c_y)?;
        let wt = match combiner(receiver, &h_hat) {
            Ok(w) => w,
            // a singular estimate carries no usable information this block
            Err(Error::RankDeficient(_)) => return Ok(vec![0.0; k]),
            Err(e) => return Err(e),
        };
        Ok(draw_sinrs(&wt, &h_hat, &err, &c_qd, alpha, rho_d)
            .into_iter()
            .map(|s| (1.0 + s).log2())
            .collect())
    });

    let mut per_user = vec![0.0; k];
    let mut sums = Vec::with_capacity(n_trials);
    for d in draws {
        let rates = d?;
        for (acc, r) in per_user.iter_mut().zip(&rates) {
            *acc += r;
        }
        sums.push(sum_se(&rates, cfg));
    }
    per_user.iter_mut().for_each(|r| *r /= n_trials as f64);
    let mut report = RateReport::new(per_user, cfg, RateMethod::McLowerBound);
    report.std_error = Some(Estimate::from_samples(&sums).std_error);
    report.low_accuracy = zf_low_accuracy(receiver, m, k);
    Ok(report)
}

/// Receiver moments entering the low-SNR rate approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverMoments {
    /// E{w_kᵀh_k}.
    pub mean: Complex64,
    /// Var(w_kᵀh_k).
    pub variance: f64,
    /// `ρ_d α_d² Σ_{i≠k} E|w_kᵀh_i|²`.
    pub ui: f64,
    /// `(α_d² + 1 − 2/π) E‖w_k‖²`.
    pub aqn: f64,
}

impl ReceiverMoments {
    /// MRC moments under the Gaussian approximation of the estimate.
    pub fn mrc_closed(cfg: &SystemConfig) -> Self {
        let s2 = estimate_variance(cfg);
        let a2 = alpha_d(cfg).powi(2);
        let m = cfg.m as f64;
        ReceiverMoments {
            mean: Complex64::from(m * s2),
            variance: m * s2,
            ui: (cfg.k as f64 - 1.0) * cfg.rho_d * a2 * m * s2,
            aqn: (a2 + QUANTIZER_NOISE_POWER) * m * s2,
        }
    }

    /// ZF moments using the inverse-Wishart mean `1/(σ²(M − K))`.
    pub fn zf_closed(cfg: &SystemConfig) -> Result<Self> {
        if cfg.m <= cfg.k {
            return Err(Error::Domain(format!(
                "ZF moments need M > K, got M={}, K={}",
                cfg.m, cfg.k
            )));
        }
        let s2 = estimate_variance(cfg);
        let a2 = alpha_d(cfg).powi(2);
        let wishart = 1.0 / (s2 * (cfg.m - cfg.k) as f64);
        let eta = 1.0 - s2;
        Ok(ReceiverMoments {
            mean: Complex64::ONE,
            variance: eta * wishart,
            ui: (cfg.k as f64 - 1.0) * cfg.rho_d * a2 * eta * wishart,
            aqn: (a2 + QUANTIZER_NOISE_POWER) * wishart,
        })
    }

    /// Sample moments from BLMMSE-estimated channels, averaged over users.
    pub fn monte_carlo(
        cfg: &SystemConfig,
        receiver: Receiver,
        n_trials: usize,
        seed: u64,
    ) -> Result<(Self, Estimate)> {
        cfg.validate()?;
        if n_trials < 2 {
            return Err(Error::InvalidConfig(
                "moment estimation needs n_trials >= 2".into(),
            ));
        }
        let phi = dft_pilots(cfg.tau, cfg.k)?;
        let general = if cfg.tau == cfg.k {
            None
        } else {
            Some(LinearEstimator::blmmse(
                &phi,
                cfg,
                &ChannelCovariance::Identity,
            )?)
        };
        let (m, k) = (cfg.m, cfg.k);
        // per draw: (w_kᵀh_k per user, Σ_{i≠k}|w_kᵀh_i|² per user, ‖w_k‖² per user)
        let draws = run_trials(
            n_trials,
            seed,
            |rng| -> Result<Vec<(Complex64, f64, f64)>> {
                let h = iid_channel(rng, m, k);
                let r = one_bit_quantize(&training_signal_with(rng, &h, &phi, cfg.rho_p)?);
                let h_hat = match &general {
                    None => blmmse_fast(&r, &phi, cfg)?.h_hat,
                    Some(est) => est.apply(&r)?.h_hat,
                };
                let wt = combiner(receiver, &h_hat)?;
                let g = &wt * &h;
                Ok((0..k)
                    .map(|u| {
                        let cross = (0..k)
                            .filter(|&i| i != u)
                            .map(|i| g[(u, i)].norm_sqr())
                            .sum();
                        (g[(u, u)], cross, wt.row(u).norm_squared())
                    })
                    .collect())
            },
        );
        let draws: Vec<Vec<(Complex64, f64, f64)>> = draws.into_iter().collect::<Result<_>>()?;
        let n = (n_trials * k) as f64;
        let flat = || draws.iter().flatten();
        let mean: Complex64 = flat().map(|d| d.0).sum::<Complex64>() / n;
        let variance = flat().map(|d| (d.0 - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        let a2 = alpha_d(cfg).powi(2);
        let ui = cfg.rho_d * a2 * flat().map(|d| d.1).sum::<f64>() / n;
        let aqn = (a2 + QUANTIZER_NOISE_POWER) * flat().map(|d| d.2).sum::<f64>() / n;
        let desired: Vec<f64> = flat().map(|d| d.0.re).collect();
        Ok((
            ReceiverMoments {
                mean,
                variance,
                ui,
                aqn,
            },
            Estimate::from_samples(&desired),
        ))
    }
}

/// `log₂(1 + ρ_dα_d²|E|² / (ρ_dα_d² Var + UI + AQN))`.
pub fn rate_from_moments(cfg: &SystemConfig, moments: &ReceiverMoments) -> f64 {
    let a2 = alpha_d(cfg).powi(2);
    let num = cfg.rho_d * a2 * moments.mean.norm_sqr();
    if num == 0.0 {
        return 0.0;
    }
    let den = cfg.rho_d * a2 * moments.variance + moments.ui + moments.aqn;
    (1.0 + num / den).log2()
}

/// One-bit SINR of the closed forms with real-valued dimensions, so that
/// M can be treated as continuous. ZF returns 0 for M ≤ K.
pub fn one_bit_sinr(receiver: Receiver, m: f64, k: f64, tau: f64, rho_p: f64, rho_d: f64) -> f64 {
    let s2 = crate::estimators::flat_sigma_sq(k, tau, rho_p);
    let a2 = FRAC_2_PI / (k * rho_d + 1.0);
    match receiver {
        Receiver::Mrc => rho_d * a2 * m * s2,
        Receiver::Zf => {
            if m <= k {
                return 0.0;
            }
            rho_d * a2 * s2 * (m - k) / (rho_d * a2 * k * (1.0 - s2) + a2 + QUANTIZER_NOISE_POWER)
        }
    }
}

/// Conventional (infinite-resolution) SINR with MMSE estimation.
pub fn conventional_sinr(
    receiver: Receiver,
    m: f64,
    k: f64,
    tau: f64,
    rho_p: f64,
    rho_d: f64,
) -> f64 {
    match receiver {
        Receiver::Mrc => rho_d * tau * rho_p * m / ((1.0 + k * rho_d) * (1.0 + tau * rho_p)),
        Receiver::Zf => {
            if m <= k {
                return 0.0;
            }
            rho_d * tau * rho_p * (m - k) / (k * rho_d + tau * rho_p + 1.0)
        }
    }
}

fn uniform_report(rate: f64, cfg: &SystemConfig, method: RateMethod) -> RateReport {
    RateReport::new(vec![rate; cfg.k], cfg, method)
}

fn dims(cfg: &SystemConfig) -> (f64, f64, f64) {
    (cfg.m as f64, cfg.k as f64, cfg.tau as f64)
}

/// Per-user MRC rate `log₂(1 + ρ_d α_d² M σ²)`.
pub fn rate_mrc_closed(cfg: &SystemConfig) -> f64 {
    let (m, k, tau) = dims(cfg);
    (1.0 + one_bit_sinr(Receiver::Mrc, m, k, tau, cfg.rho_p, cfg.rho_d)).log2()
}

/// Per-user ZF rate with `η = 1 − σ²`.
pub fn rate_zf_closed(cfg: &SystemConfig) -> Result<f64> {
    if cfg.m <= cfg.k {
        return Err(Error::Domain(format!(
            "ZF closed form needs M > K, got M={}, K={}",
            cfg.m, cfg.k
        )));
    }
    let (m, k, tau) = dims(cfg);
    Ok((1.0 + one_bit_sinr(Receiver::Zf, m, k, tau, cfg.rho_p, cfg.rho_d)).log2())
}

/// Closed-form one-bit rates for either receiver.
pub fn closed_form_rates(cfg: &SystemConfig, receiver: Receiver) -> Result<RateReport> {
    cfg.validate()?;
    let mut report = match receiver {
        Receiver::Mrc => uniform_report(rate_mrc_closed(cfg), cfg, RateMethod::ClosedMrc),
        Receiver::Zf => uniform_report(rate_zf_closed(cfg)?, cfg, RateMethod::ClosedZf),
    };
    report.low_accuracy = zf_low_accuracy(receiver, cfg.m, cfg.k);
    Ok(report)
}

/// Conventional-system rates with `m_conv` antennas.
pub fn conventional_rates(
    cfg: &SystemConfig,
    m_conv: usize,
    receiver: Receiver,
) -> Result<RateReport> {
    cfg.validate()?;
    if receiver == Receiver::Zf && m_conv <= cfg.k {
        return Err(Error::Domain(format!(
            "conventional ZF needs M_conv > K, got M_conv={m_conv}, K={}",
            cfg.k
        )));
    }
    let (_, k, tau) = dims(cfg);
    let sinr = conventional_sinr(receiver, m_conv as f64, k, tau, cfg.rho_p, cfg.rho_d);
    let method = match receiver {
        Receiver::Mrc => RateMethod::ConventionalMrc,
        Receiver::Zf => RateMethod::ConventionalZf,
    };
    Ok(uniform_report((1.0 + sinr).log2(), cfg, method))
}
