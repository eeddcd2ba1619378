//! BLMMSE estimation of time-domain channel taps from one-bit OFDM training.
//!
//! After CP removal, antenna m receives `y_m = Σ_k √ρ_p Φ_{k,L} h_mk + n_m`
//! where `Φ_{k,L}` holds the first L columns of the circulant matrix whose
//! first column is the unitary IFFT of user k's frequency-domain pilots.
//! Stacking antennas gives `y = (I_M ⊗ √ρ_p Φ_L) h` with
//! `h = [h_11; …; h_1K; h_21; …; h_MK]`, each `h_mk` holding L taps.

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use super::flat::{QuantizerNoiseModel, TrainingModel};
use crate::channel::SystemConfig;
use crate::linalg::{self, CMat, CVec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfdmConfig {
    /// Subcarriers.
    pub n_c: usize,
    /// Cyclic-prefix length.
    pub n_cp: usize,
    /// Channel taps.
    pub l: usize,
}

impl OfdmConfig {
    pub fn new(n_c: usize, n_cp: usize, l: usize) -> Result<Self> {
        let c = OfdmConfig { n_c, n_cp, l };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 1 || self.n_c < 1 {
            return Err(Error::InvalidConfig(
                "OFDM needs at least one subcarrier and one tap".into(),
            ));
        }
        if self.n_cp + 1 < self.l || self.n_cp > self.n_c {
            return Err(Error::InvalidConfig(format!(
                "cyclic prefix must satisfy L-1 <= N_cp <= N_c, got L={}, N_cp={}, N_c={}",
                self.l, self.n_cp, self.n_c
            )));
        }
        Ok(())
    }
}

/// Unit-modulus QPSK pilots, one column per user.
pub fn qpsk_pilots<R: Rng + ?Sized>(rng: &mut R, n_c: usize, k: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(n_c, k, |_, _| {
        let re = if rng.random::<bool>() { s } else { -s };
        let im = if rng.random::<bool>() { s } else { -s };
        Complex64::new(re, im)
    })
}

/// Unitary IFFT of every column.
fn unitary_ifft(x: &CMat) -> CMat {
    let n = x.nrows();
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mut buf: Vec<Complex64> = col.iter().copied().collect();
        fft.process(&mut buf);
        for (dst, v) in col.iter_mut().zip(buf) {
            *dst = v * scale;
        }
    }
    out
}

/// `Φ_L = [Φ_{1,L}, …, Φ_{K,L}]`, N_c × LK.
pub fn ofdm_pilot_matrix(pilots_fd: &CMat, ofdm: &OfdmConfig) -> Result<CMat> {
    ofdm.validate()?;
    if pilots_fd.nrows() != ofdm.n_c {
        return Err(Error::DimensionMismatch(format!(
            "pilots have {} rows but N_c = {}",
            pilots_fd.nrows(),
            ofdm.n_c
        )));
    }
    let (n, l) = (ofdm.n_c, ofdm.l);
    let td = unitary_ifft(pilots_fd);
    Ok(CMat::from_fn(n, l * pilots_fd.ncols(), |i, c| {
        let (k, j) = (c / l, c % l);
        td[((i + n - j) % n, k)]
    }))
}

fn default_tap_covariance(dim: usize, l: usize) -> CMat {
    linalg::identity(dim) * Complex64::from(1.0 / l as f64)
}

/// Precomputed OFDM tap estimator `ĥ = W r`.
#[derive(Debug, Clone)]
pub struct OfdmEstimator {
    w: CMat,
    op: CMat,
    predicted_mse: f64,
    regularized: bool,
}

impl OfdmEstimator {
    /// `c_h_td` defaults to a uniform power-delay profile, `(1/L) I`.
    pub fn new(
        pilots_fd: &CMat,
        ofdm: &OfdmConfig,
        cfg: &SystemConfig,
        c_h_td: Option<&CMat>,
        noise: QuantizerNoiseModel,
    ) -> Result<Self> {
        cfg.validate()?;
        if pilots_fd.ncols() != cfg.k {
            return Err(Error::DimensionMismatch(format!(
                "pilots cover {} users but K = {}",
                pilots_fd.ncols(),
                cfg.k
            )));
        }
        if ofdm.n_c < ofdm.l * cfg.k {
            return Err(Error::InvalidConfig(format!(
                "taps are not identifiable with N_c={} < L*K={}",
                ofdm.n_c,
                ofdm.l * cfg.k
            )));
        }
        let phi_l = ofdm_pilot_matrix(pilots_fd, ofdm)? * Complex64::from(cfg.rho_p.sqrt());
        let op = linalg::identity_kron(cfg.m, &phi_l);
        let dim = cfg.m * cfg.k * ofdm.l;
        let c_h = match c_h_td {
            Some(c) => c.clone(),
            None => default_tap_covariance(dim, ofdm.l),
        };
        let model = TrainingModel::new(&op, &c_h)?;
        let (w, regularized) = model.lmmse(noise);
        Ok(OfdmEstimator {
            predicted_mse: model.mse(&w),
            w,
            op,
            regularized,
        })
    }

    /// Noiseless training operator `I_M ⊗ √ρ_p Φ_L`.
    pub fn operator(&self) -> &CMat {
        &self.op
    }

    pub fn predicted_mse(&self) -> f64 {
        self.predicted_mse
    }

    pub fn regularized(&self) -> bool {
        self.regularized
    }

    pub fn apply(&self, r_td: &CVec) -> Result<CVec> {
        if r_td.len() != self.w.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "time-domain observation has length {} but M*N_c = {}",
                r_td.len(),
                self.w.ncols()
            )));
        }
        Ok(&self.w * r_td)
    }
}

/// BLMMSE estimate of the M·K·L time-domain taps.
pub fn blmmse_ofdm(
    r_td: &CVec,
    pilots_fd: &CMat,
    ofdm: &OfdmConfig,
    cfg: &SystemConfig,
    c_h_td: Option<&CMat>,
) -> Result<CVec> {
    OfdmEstimator::new(pilots_fd, ofdm, cfg, c_h_td, QuantizerNoiseModel::Arcsine)?.apply(r_td)
}

/// Unquantized time-domain training signal (after CP removal) for taps
/// `h_td`, computed by circular convolution on every antenna.
pub fn ofdm_training_signal<R: Rng + ?Sized>(
    rng: &mut R,
    h_td: &CVec,
    pilots_fd: &CMat,
    ofdm: &OfdmConfig,
    cfg: &SystemConfig,
) -> Result<CVec> {
    ofdm.validate()?;
    let (m, k, l, n) = (cfg.m, cfg.k, ofdm.l, ofdm.n_c);
    if h_td.len() != m * k * l || pilots_fd.ncols() != k || pilots_fd.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {} taps and an {n}x{k} pilot block",
            m * k * l
        )));
    }
    let td = unitary_ifft(pilots_fd);
    let amp = cfg.rho_p.sqrt();
    let mut y = linalg::cn_vector(rng, m * n);
    for a in 0..m {
        for u in 0..k {
            for j in 0..l {
                let tap = h_td[(a * k + u) * l + j] * amp;
                for i in 0..n {
                    y[a * n + i] += tap * td[((i + n - j) % n, u)];
                }
            }
        }
    }
    Ok(y)
}
