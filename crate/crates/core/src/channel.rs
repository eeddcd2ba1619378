//! System parameters, channel and pilot generation, and the unquantized
//! received signals of the training and data phases.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;

use crate::linalg::{self, CMat, CVec};
use crate::mc::{seeded_rng, McRng};
use crate::{Error, Result};

/// Parameter record of one uplink experiment. SNRs are linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    /// Base-station antennas.
    pub m: usize,
    /// Single-antenna users.
    pub k: usize,
    /// Training length in symbols.
    pub tau: usize,
    /// Coherence interval in symbols.
    pub t: usize,
    pub rho_p: f64,
    pub rho_d: f64,
}

impl SystemConfig {
    pub fn new(m: usize, k: usize, tau: usize, t: usize, rho_p: f64, rho_d: f64) -> Result<Self> {
        let cfg = SystemConfig {
            m,
            k,
            tau,
            t,
            rho_p,
            rho_d,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidConfig("M must be at least 1".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if self.tau < self.k {
            return Err(Error::InvalidConfig(format!(
                "training length tau={} must satisfy tau >= K={}",
                self.tau, self.k
            )));
        }
        if self.t < self.tau {
            return Err(Error::InvalidConfig(format!(
                "coherence interval T={} must satisfy T >= tau={}",
                self.t, self.tau
            )));
        }
        for (name, v) in [("rho_p", self.rho_p), ("rho_d", self.rho_d)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Same configuration with the training and data SNR set to `rho`.
    pub fn with_snr(mut self, rho: f64) -> Self {
        self.rho_p = rho;
        self.rho_d = rho;
        self
    }
}

/// Covariance of the vectorized channel vec(H).
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelCovariance {
    /// i.i.d. unit-variance entries.
    Identity,
    /// Every user sees the same M×M spatial covariance; users are independent.
    Spatial(CMat),
    /// Full MK×MK covariance of vec(H).
    Full(CMat),
}

impl ChannelCovariance {
    /// MK×MK covariance of vec(H).
    pub fn full(&self, m: usize, k: usize) -> CMat {
        match self {
            ChannelCovariance::Identity => linalg::identity(m * k),
            ChannelCovariance::Spatial(r) => linalg::identity_kron(k, r),
            ChannelCovariance::Full(c) => c.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, ChannelCovariance::Identity)
    }
}

/// Channel realization together with the covariance it was drawn from.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    /// M×K channel.
    pub h: CMat,
    pub covariance: ChannelCovariance,
}

impl ChannelMatrix {
    pub fn antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn users(&self) -> usize {
        self.h.ncols()
    }
}

/// M×K matrix of i.i.d. CN(0, 1) entries.
pub fn iid_channel<R: Rng + ?Sized>(rng: &mut R, m: usize, k: usize) -> CMat {
    linalg::cn_matrix(rng, m, k)
}

/// i.i.d. Rayleigh channel, deterministic in `seed`.
pub fn gen_iid_channel(cfg: &SystemConfig, seed: u64) -> Result<ChannelMatrix> {
    cfg.validate()?;
    let mut rng = seeded_rng(seed);
    Ok(ChannelMatrix {
        h: iid_channel(&mut rng, cfg.m, cfg.k),
        covariance: ChannelCovariance::Identity,
    })
}

/// Spatially correlated Rayleigh channel generator with a precomputed
/// covariance square root.
#[derive(Debug, Clone)]
pub struct CorrelatedChannel {
    cov: CMat,
    sqrt: CMat,
}

impl CorrelatedChannel {
    pub fn new(cov: &CMat) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let sqrt = linalg::psd_sqrt(cov, 1e-8)?;
        Ok(CorrelatedChannel {
            cov: cov.clone(),
            sqrt,
        })
    }

    pub fn covariance(&self) -> &CMat {
        &self.cov
    }

    /// Draws an M×K channel whose columns are cov^{1/2}·CN(0, I).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> CMat {
        &self.sqrt * linalg::cn_matrix(rng, self.cov.nrows(), k)
    }
}

/// Correlated channel with per-user covariance `cov`, deterministic in `seed`.
pub fn gen_correlated_channel(cov: &CMat, k: usize, seed: u64) -> Result<ChannelMatrix> {
    let gen = CorrelatedChannel::new(cov)?;
    let mut rng = seeded_rng(seed);
    Ok(ChannelMatrix {
        h: gen.draw(&mut rng, k),
        covariance: ChannelCovariance::Spatial(cov.clone()),
    })
}

/// Angle samples used to integrate the power-angle spectrum.
pub const LAPLACIAN_GRID: usize = 3600;

/// Spatial covariance of a half-wavelength uniform linear array under a
/// Laplacian power-angle spectrum.
///
/// `[R]_{a,b} = ∫ p(θ) exp(jπ(a−b) sin θ) dθ` with
/// `p(θ) ∝ exp(−√2 |θ − θ₀| / σ)`, θ measured from broadside and integrated
/// over one full turn centred on θ₀ by the midpoint rule. The spectrum is
/// normalized on the grid so the diagonal is exactly one.
pub fn laplacian_covariance(m: usize, mean_angle_deg: f64, spread_deg: f64) -> Result<CMat> {
    if m < 1 {
        return Err(Error::Domain("array needs at least one antenna".into()));
    }
    if !(spread_deg > 0.0 && spread_deg.is_finite()) {
        return Err(Error::Domain(format!(
            "angle spread must be positive, got {spread_deg}"
        )));
    }
    let mean = mean_angle_deg.to_radians();
    let spread = spread_deg.to_radians();
    let step = 2.0 * PI / LAPLACIAN_GRID as f64;
    let (angles, mut weights): (Vec<f64>, Vec<f64>) = (0..LAPLACIAN_GRID)
        .map(|i| {
            let offset = -PI + (i as f64 + 0.5) * step;
            (mean + offset, (-SQRT_2 * offset.abs() / spread).exp())
        })
        .unzip();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let lags: Vec<Complex64> = (0..m)
        .map(|d| {
            angles
                .iter()
                .zip(&weights)
                .map(|(&th, &w)| Complex64::from_polar(w, PI * d as f64 * th.sin()))
                .sum()
        })
        .collect();
    let r = CMat::from_fn(m, m, |a, b| {
        if a >= b {
            lags[a - b]
        } else {
            lags[b - a].conj()
        }
    });
    let min = linalg::min_eigenvalue(&r);
    if min < -1e-8 {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
        });
    }
    Ok(r)
}

/// τ×K pilot matrix with unit-modulus entries and ΦᵀΦ* = τ·I_K.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    phi: CMat,
}

impl PilotMatrix {
    /// First K columns of the τ×τ DFT matrix, entries e^{−j2πmn/τ}.
    pub fn dft(tau: usize, k: usize) -> Result<Self> {
        if k < 1 || tau < k {
            return Err(Error::InvalidConfig(format!(
                "DFT pilots need 1 <= K <= tau, got K={k}, tau={tau}"
            )));
        }
        let phi = CMat::from_fn(tau, k, |m, n| {
            // reduce the exponent modulo tau so large tau keeps exact phases
            let e = (m * n) % tau;
            Complex64::from_polar(1.0, -2.0 * PI * e as f64 / tau as f64)
        });
        Ok(PilotMatrix { phi })
    }

    /// Wraps an arbitrary pilot matrix after checking unit modulus and column
    /// orthogonality.
    pub fn from_matrix(phi: CMat) -> Result<Self> {
        let (tau, k) = phi.shape();
        if k < 1 || tau < k {
            return Err(Error::InvalidConfig(format!(
                "pilot matrix must be tau x K with tau >= K >= 1, got {tau}x{k}"
            )));
        }
        if let Some(z) = phi.iter().find(|z| (z.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidConfig(format!(
                "pilot entries must have unit modulus, found |{z}| = {}",
                z.norm()
            )));
        }
        let gram = phi.transpose() * phi.map(|z| z.conj());
        let dev = linalg::frobenius(&(gram - linalg::identity(k) * Complex64::from(tau as f64)));
        if dev > 1e-9 * tau as f64 {
            return Err(Error::InvalidConfig(format!(
                "pilot columns are not orthogonal (deviation {dev:e})"
            )));
        }
        Ok(PilotMatrix { phi })
    }

    pub fn matrix(&self) -> &CMat {
        &self.phi
    }

    pub fn tau(&self) -> usize {
        self.phi.nrows()
    }

    pub fn users(&self) -> usize {
        self.phi.ncols()
    }

    /// Φ̄ = Φ ⊗ √ρ_p·I_M, mapping vec(H) to the vectorized noiseless training
    /// signal.
    pub fn operator(&self, rho_p: f64, m: usize) -> CMat {
        linalg::kron_identity(&(self.phi.clone() * Complex64::from(rho_p.sqrt())), m)
    }
}

/// First K columns of the τ×τ DFT matrix.
pub fn dft_pilots(tau: usize, k: usize) -> Result<PilotMatrix> {
    PilotMatrix::dft(tau, k)
}

fn check_training_dims(h: &CMat, phi: &PilotMatrix) -> Result<()> {
    if h.ncols() != phi.users() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} users but the pilot matrix has {} columns",
            h.ncols(),
            phi.users()
        )));
    }
    Ok(())
}

/// Vectorized training signal `y_p = (Φ ⊗ √ρ_p I_M) vec(H) + n_p` drawing the
/// noise from `rng`.
pub fn training_signal_with<R: Rng + ?Sized>(
    rng: &mut R,
    h: &CMat,
    phi: &PilotMatrix,
    rho_p: f64,
) -> Result<CVec> {
    check_training_dims(h, phi)?;
    // (Φ ⊗ I) vec(H) = vec(H Φᵀ)
    let clean = h * phi.matrix().transpose() * Complex64::from(rho_p.sqrt());
    let noise = linalg::cn_matrix(rng, h.nrows(), phi.tau());
    Ok(linalg::vec(&(clean + noise)))
}

pub fn training_signal(
    h: &ChannelMatrix,
    phi: &PilotMatrix,
    rho_p: f64,
    noise_seed: u64,
) -> Result<CVec> {
    training_signal_with(&mut seeded_rng(noise_seed), &h.h, phi, rho_p)
}

/// Data-phase signal `y = √ρ_d H s + n` drawing the noise from `rng`.
pub fn data_signal_with<R: Rng + ?Sized>(
    rng: &mut R,
    h: &CMat,
    s: &CVec,
    rho_d: f64,
) -> Result<CVec> {
    if s.len() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "symbol vector has length {} but the channel has {} users",
            s.len(),
            h.ncols()
        )));
    }
    let noise = linalg::cn_vector(rng, h.nrows());
    Ok(h * s * Complex64::from(rho_d.sqrt()) + noise)
}

pub fn data_signal(h: &ChannelMatrix, s: &CVec, rho_d: f64, noise_seed: u64) -> Result<CVec> {
    data_signal_with(&mut seeded_rng(noise_seed), &h.h, s, rho_d)
}

/// CN(0, 1) symbols (Gaussian codebook).
pub fn gaussian_symbols(rng: &mut McRng, k: usize) -> CVec {
    linalg::cn_vector(rng, k)
}

/// Unit-energy QPSK symbols.
pub fn qpsk_symbols<R: Rng + ?Sized>(rng: &mut R, k: usize) -> CVec {
    CVec::from_iterator(
        k,
        (0..k).map(|_| {
            let re = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let im = if rng.random::<bool>() { 1.0 } else { -1.0 };
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::run_trials;

    fn cfg(m: usize, k: usize) -> SystemConfig {
        SystemConfig::new(m, k, k, 200, 1.0, 1.0).unwrap()
    }

    #[test]
    fn config_invariants() {
        assert!(SystemConfig::new(0, 1, 1, 1, 0.0, 0.0).is_err());
        assert!(SystemConfig::new(4, 3, 2, 10, 1.0, 1.0).is_err());
        assert!(SystemConfig::new(4, 2, 3, 2, 1.0, 1.0).is_err());
        assert!(SystemConfig::new(4, 2, 2, 2, -1.0, 1.0).is_err());
        assert!(SystemConfig::new(4, 2, 2, 2, 1.0, f64::NAN).is_err());
        assert!(SystemConfig::new(1, 1, 1, 1, 0.0, 0.0).is_ok());
    }

    #[test]
    fn iid_channel_is_deterministic_and_zero_mean() {
        let c = cfg(2, 2);
        assert_eq!(
            gen_iid_channel(&c, 5).unwrap().h,
            gen_iid_channel(&c, 5).unwrap().h
        );
        assert_ne!(
            gen_iid_channel(&c, 5).unwrap().h,
            gen_iid_channel(&c, 6).unwrap().h
        );

        let draws = run_trials(100_000, 11, |rng| iid_channel(rng, 2, 2));
        let mut mean = CMat::zeros(2, 2);
        for h in &draws {
            mean += h;
        }
        mean /= Complex64::from(draws.len() as f64);
        assert!(mean.iter().all(|z| z.norm() < 0.02), "{mean}");
    }

    #[test]
    fn iid_channel_column_power() {
        let m = 16;
        let powers = run_trials(10_000, 3, |rng| {
            let h = iid_channel(rng, m, 1);
            h.column(0).norm_squared() / m as f64
        });
        let mean = powers.iter().sum::<f64>() / powers.len() as f64;
        assert!((mean - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn dft_pilots_are_orthogonal() {
        for (tau, k) in [(4, 2), (1, 1), (20, 4), (1024, 7), (7, 7)] {
            let p = dft_pilots(tau, k).unwrap();
            let gram = p.matrix().transpose() * p.matrix().map(|z| z.conj());
            let err =
                linalg::frobenius(&(gram - linalg::identity(k) * Complex64::from(tau as f64)));
            assert!(err <= 1e-12 * tau as f64, "tau={tau} err={err}");
            assert!(p.matrix().iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        }
        assert_eq!(dft_pilots(1, 1).unwrap().matrix()[(0, 0)], Complex64::ONE);
        assert!(dft_pilots(2, 3).is_err());
        assert!(PilotMatrix::from_matrix(CMat::from_element(2, 2, Complex64::ONE)).is_err());
        assert!(PilotMatrix::from_matrix(dft_pilots(8, 3).unwrap().matrix().clone()).is_ok());
    }

    #[test]
    fn laplacian_scalar_and_hermitian() {
        let r1 = laplacian_covariance(1, 0.0, 10.0).unwrap();
        assert!((r1[(0, 0)] - Complex64::ONE).norm() < 1e-14);

        let r = laplacian_covariance(16, 20.0, 10.0).unwrap();
        assert_eq!(linalg::hermitian_defect(&r), 0.0);
        for i in 0..16 {
            assert!((r[(i, i)] - Complex64::ONE).norm() < 1e-12);
        }
        assert!(linalg::min_eigenvalue(&r) > -1e-8);
        assert!(laplacian_covariance(4, 0.0, 0.0).is_err());
    }

    #[test]
    fn laplacian_matches_independent_quadrature() {
        // composite Simpson on the Laplacian density with the angle written
        // relative to the mean, normalized analytically on [-π, π]
        let (m, mean, spread) = (6usize, 25.0f64, 10.0f64);
        let r = laplacian_covariance(m, mean, spread).unwrap();
        let b = spread.to_radians() / SQRT_2;
        let norm = 2.0 * b * (1.0 - (-PI / b).exp());
        let n = 20_000;
        let hstep = 2.0 * PI / n as f64;
        for d in 0..m {
            let mut acc = Complex64::ZERO;
            for i in 0..=n {
                let x = -PI + i as f64 * hstep;
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let th = mean.to_radians() + x;
                acc += Complex64::from_polar(w * (-x.abs() / b).exp(), PI * d as f64 * th.sin());
            }
            let oracle = acc * (hstep / 3.0) / norm;
            assert!(
                (r[(d, 0)] - oracle).norm() < 2e-4,
                "lag {d}: {} vs {oracle}",
                r[(d, 0)]
            );
        }
    }

    #[test]
    fn laplacian_wide_spread_decorrelates() {
        let narrow = laplacian_covariance(16, 0.0, 10.0).unwrap();
        let wide = laplacian_covariance(16, 0.0, 180.0).unwrap();
        let max_off = |r: &CMat| {
            let mut w = 0.0f64;
            for a in 0..16 {
                for b in 0..16 {
                    if a != b {
                        w = w.max(r[(a, b)].norm());
                    }
                }
            }
            w
        };
        // a uniform spectrum gives |J0(π d)| ≈ 0.30 at d = 1, so even the
        // widest Laplacian cannot push adjacent correlations much lower
        assert!(max_off(&narrow) > 0.8);
        assert!(max_off(&wide) < 0.3, "{}", max_off(&wide));
        let uniform_lag1 = 0.304242; // |J0(π)|
        assert!(max_off(&wide) > 0.5 * uniform_lag1);
    }

    #[test]
    fn correlated_channel_identity_and_covariance() {
        let m = 8;
        let id = linalg::identity(m);
        let a = gen_correlated_channel(&id, 3, 4).unwrap();
        assert_eq!(a.h, gen_correlated_channel(&id, 3, 4).unwrap().h);
        assert!(gen_correlated_channel(&(-id.clone()), 1, 0).is_err());

        let r = laplacian_covariance(m, 10.0, 10.0).unwrap();
        let gen = CorrelatedChannel::new(&r).unwrap();
        let draws = run_trials(10_000, 21, |rng| gen.draw(rng, 1));
        let mut emp = CMat::zeros(m, m);
        for h in &draws {
            emp += h * h.adjoint();
        }
        emp /= Complex64::from(draws.len() as f64);
        let err = linalg::frobenius(&(emp - &r));
        assert!(err < 0.05 * m as f64, "{err}");
    }

    #[test]
    fn correlated_identity_matches_iid_moments() {
        let m = 4;
        let gen = CorrelatedChannel::new(&linalg::identity(m)).unwrap();
        let corr = run_trials(20_000, 8, |rng| gen.draw(rng, 1));
        let iid = run_trials(20_000, 9, |rng| iid_channel(rng, m, 1));
        let moments = |v: &[CMat]| {
            let n = v.len() as f64;
            let mean: Complex64 = v.iter().map(|h| h.sum()).sum::<Complex64>() / (n * m as f64);
            let power = v.iter().map(|h| h.norm_squared()).sum::<f64>() / (n * m as f64);
            (mean, power)
        };
        let (m1, p1) = moments(&corr);
        let (m2, p2) = moments(&iid);
        assert!((m1 - m2).norm() < 0.03);
        assert!((p1 - p2).abs() < 0.03);
    }

    #[test]
    fn training_signal_structure() {
        let c = SystemConfig::new(3, 2, 4, 10, 2.0, 2.0).unwrap();
        let h = gen_iid_channel(&c, 1).unwrap();
        let phi = dft_pilots(4, 2).unwrap();
        let y1 = training_signal(&h, &phi, 2.0, 9).unwrap();
        assert_eq!(y1, training_signal(&h, &phi, 2.0, 9).unwrap());
        assert_eq!(y1.len(), 12);

        // noise-free part equals Φ̄ vec(H)
        let noise = training_signal(&h, &phi, 0.0, 9).unwrap();
        let clean = &y1 - &noise;
        let direct = phi.operator(2.0, 3) * linalg::vec(&h.h);
        assert!((clean - direct).norm() < 1e-12);

        let wrong = dft_pilots(4, 3).unwrap();
        assert!(training_signal(&h, &wrong, 1.0, 0).is_err());
    }

    #[test]
    fn training_noise_only_at_zero_power() {
        let h = iid_channel(&mut seeded_rng(0), 4, 2);
        let phi = dft_pilots(2, 2).unwrap();
        let p = run_trials(5000, 2, |rng| {
            training_signal_with(rng, &h, &phi, 0.0)
                .unwrap()
                .norm_squared()
                / 8.0
        });
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        assert!((mean - 1.0).abs() < 0.03);
    }

    #[test]
    fn training_covariance_diagonal() {
        let (m, k, rho) = (4, 4, 2.0);
        let phi = dft_pilots(k, k).unwrap();
        let ys = run_trials(10_000, 17, |rng| {
            let h = iid_channel(rng, m, k);
            training_signal_with(rng, &h, &phi, rho).unwrap()
        });
        let n = ys.len() as f64;
        for i in 0..m * k {
            let v = ys.iter().map(|y| y[i].norm_sqr()).sum::<f64>() / n;
            let expect = k as f64 * rho + 1.0;
            assert!((v / expect - 1.0).abs() < 0.03, "entry {i}: {v}");
        }
    }

    #[test]
    fn data_signal_cases() {
        let one = ChannelMatrix {
            h: CMat::from_element(1, 1, Complex64::ONE),
            covariance: ChannelCovariance::Identity,
        };
        let s = CVec::from_element(1, Complex64::ONE);
        let y = data_signal_with(&mut seeded_rng(0), &one.h, &s, 4.0).unwrap();
        let n = data_signal_with(&mut seeded_rng(0), &one.h, &CVec::zeros(1), 4.0).unwrap();
        assert!((y[0] - n[0] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert_eq!(
            data_signal(&one, &s, 4.0, 3).unwrap(),
            data_signal(&one, &s, 4.0, 3).unwrap()
        );
        assert!(data_signal(&one, &CVec::zeros(2), 1.0, 0).is_err());
    }

    #[test]
    fn data_signal_covariance() {
        let (m, k, rho) = (3, 2, 1.5);
        let h = iid_channel(&mut seeded_rng(5), m, k);
        let ys = run_trials(40_000, 6, |rng| {
            let s = gaussian_symbols(rng, k);
            data_signal_with(rng, &h, &s, rho).unwrap()
        });
        let mut emp = CMat::zeros(m, m);
        for y in &ys {
            emp += y * y.adjoint();
        }
        emp /= Complex64::from(ys.len() as f64);
        let expect = &h * h.adjoint() * Complex64::from(rho) + linalg::identity(m);
        let scale = linalg::frobenius(&expect);
        assert!(linalg::frobenius(&(emp - expect)) < 0.03 * scale);
    }
}
