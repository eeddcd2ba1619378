//! One-bit quantizer and its Bussgang linearization `r = A y + q`.
//!
//! For a zero-mean circularly-symmetric Gaussian input with covariance C_y the
//! gain that decorrelates `q` from `y` is the real diagonal
//! `A = √(2/π) diag(C_y)^{-1/2}`, the output covariance follows the arcsine law
//! and `C_q = C_r − A C_y Aᴴ`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_PI};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::SystemConfig;
use crate::linalg::{self, CMat, CVec};
use crate::{Error, Result, QUANTIZER_NOISE_POWER};

/// Normalized correlations beyond 1 by more than this are rejected.
pub const CORRELATION_SLACK: f64 = 1e-12;

/// Tolerance on the minimum eigenvalue when checking covariances for PSD.
pub const PSD_TOLERANCE: f64 = 1e-8;

fn sign(x: f64) -> f64 {
    // sign(0) = +1 so the quantizer is total
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Quantizes one complex sample to `(±1 ± j)/√2`.
pub fn quantize_sample(z: Complex64) -> Complex64 {
    Complex64::new(sign(z.re), sign(z.im)) * FRAC_1_SQRT_2
}

/// Applies the one-bit ADC pair to every entry.
pub fn one_bit_quantize(y: &CVec) -> CVec {
    y.map(quantize_sample)
}

fn check_square(c: &CMat) -> Result<()> {
    if !c.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(())
}

fn positive_diagonal(c_y: &CMat) -> Result<DVector<f64>> {
    check_square(c_y)?;
    let d = c_y.diagonal().map(|z| z.re);
    if let Some((index, &value)) = d.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositiveDiagonal { index, value });
    }
    Ok(d)
}

/// Diagonal of the Bussgang gain `√(2/π) diag(C_y)^{-1/2}`.
pub fn bussgang_gain(c_y: &CMat) -> Result<DVector<f64>> {
    let scale = FRAC_2_PI.sqrt();
    Ok(positive_diagonal(c_y)?.map(|v| scale / v.sqrt()))
}

/// Output covariance of the one-bit quantizer by the arcsine law.
pub fn arcsine_covariance(c_y: &CMat) -> Result<CMat> {
    let d = positive_diagonal(c_y)?;
    let inv_sqrt = d.map(|v| 1.0 / v.sqrt());
    let n = c_y.nrows();
    let mut out = CMat::zeros(n, n);
    let clamp = |x: f64, row: usize, col: usize| -> Result<f64> {
        if x.abs() > 1.0 + CORRELATION_SLACK || x.is_nan() {
            return Err(Error::CorrelationBound {
                row,
                col,
                value: x.abs(),
            });
        }
        Ok(x.clamp(-1.0, 1.0))
    };
    for c in 0..n {
        for r in 0..n {
            if r == c {
                out[(r, c)] = Complex64::ONE;
                continue;
            }
            let z = c_y[(r, c)] * (inv_sqrt[r] * inv_sqrt[c]);
            let re = clamp(z.re, r, c)?.asin();
            let im = clamp(z.im, r, c)?.asin();
            out[(r, c)] = Complex64::new(re, im) * FRAC_2_PI;
        }
    }
    Ok(out)
}

/// `C_q = C_r − A C_y Aᴴ` with the Bussgang gain of `c_y`.
pub fn quantizer_noise_cov(c_y: &CMat) -> Result<CMat> {
    Ok(BussgangModel::new(c_y)?.c_q)
}

/// `(1 − 2/π) I`, the quantizer-noise covariance when correlations between
/// quantizer inputs are ignored.
pub fn low_snr_cq(dim: usize) -> CMat {
    linalg::identity(dim) * Complex64::from(QUANTIZER_NOISE_POWER)
}

/// Bussgang gain for a quantizer input of power `k·ρ + 1` per entry.
fn hardening_gain(k: usize, rho: f64) -> f64 {
    (FRAC_2_PI / (k as f64 * rho + 1.0)).sqrt()
}

/// Training-phase gain α_p (DFT pilots).
pub fn alpha_p(cfg: &SystemConfig) -> f64 {
    hardening_gain(cfg.k, cfg.rho_p)
}

/// Data-phase gain α_d under channel hardening.
pub fn alpha_d(cfg: &SystemConfig) -> f64 {
    hardening_gain(cfg.k, cfg.rho_d)
}

/// Bussgang linearization of the one-bit quantizer for a given input
/// covariance.
#[derive(Debug, Clone)]
pub struct BussgangModel {
    /// Diagonal of the gain matrix A.
    pub gain: DVector<f64>,
    pub c_r: CMat,
    pub c_q: CMat,
}

impl BussgangModel {
    pub fn new(c_y: &CMat) -> Result<Self> {
        let gain = bussgang_gain(c_y)?;
        let c_r = arcsine_covariance(c_y)?;
        let n = c_y.nrows();
        let c_q = CMat::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::from(1.0 - gain[r] * gain[r] * c_y[(r, r)].re)
            } else {
                c_r[(r, c)] - c_y[(r, c)] * (gain[r] * gain[c])
            }
        });
        Ok(BussgangModel { gain, c_r, c_q })
    }

    /// Minimum eigenvalues of C_r and C_q.
    pub fn min_eigenvalues(&self) -> (f64, f64) {
        (
            linalg::min_eigenvalue(&self.c_r),
            linalg::min_eigenvalue(&self.c_q),
        )
    }

    /// Whether both covariances are PSD within [`PSD_TOLERANCE`].
    pub fn is_psd(&self) -> bool {
        let (r, q) = self.min_eigenvalues();
        r >= -PSD_TOLERANCE && q >= -PSD_TOLERANCE
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{run_trials, seeded_rng};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quantizer_signs() {
        let s = FRAC_1_SQRT_2;
        assert_eq!(quantize_sample(c(0.3, -0.7)), c(s, -s));
        assert_eq!(quantize_sample(c(0.0, 0.0)), c(s, s));
        assert_eq!(quantize_sample(c(-2.0, 1e-300)), c(-s, s));
        let y = CVec::from_vec(vec![c(1.0, 2.0), c(-0.1, -5.0), c(0.0, -0.0)]);
        assert!(one_bit_quantize(&y)
            .iter()
            .all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn gain_of_scaled_identity() {
        let g = bussgang_gain(&(linalg::identity(3) * c(4.0, 0.0))).unwrap();
        let expect = (2.0 / (PI * 4.0)).sqrt();
        assert!(g.iter().all(|&a| (a - expect).abs() < 1e-15));

        // K = 8, ρ_p = 0.1: α_p² = (2/π)/1.8
        let g = bussgang_gain(&(linalg::identity(2) * c(1.8, 0.0))).unwrap();
        assert!((g[0] * g[0] - 0.353_677_651_315_323).abs() < 1e-12);

        let bad = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        assert!(matches!(
            bussgang_gain(&bad),
            Err(Error::NonPositiveDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn arcsine_simple_cases() {
        let id = arcsine_covariance(&linalg::identity(4)).unwrap();
        assert_eq!(id, linalg::identity(4));

        let cy = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0)]);
        let cr = arcsine_covariance(&cy).unwrap();
        assert!((cr[(0, 1)].re - 1.0 / 3.0).abs() < 1e-15);

        let bad = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.5, 0.0), c(1.5, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            arcsine_covariance(&bad),
            Err(Error::CorrelationBound { .. })
        ));
        // rounding just past the bound is clamped
        let edge = CMat::from_row_slice(
            2,
            2,
            &[
                c(1.0, 0.0),
                c(1.0 + 1e-14, 0.0),
                c(1.0 + 1e-14, 0.0),
                c(1.0, 0.0),
            ],
        );
        assert_eq!(arcsine_covariance(&edge).unwrap()[(0, 1)], c(1.0, 0.0));
    }

    #[test]
    fn quantizer_noise_of_identity() {
        let cq = quantizer_noise_cov(&linalg::identity(3)).unwrap();
        assert!(linalg::frobenius(&(cq - low_snr_cq(3))) < 1e-15);
        assert!((low_snr_cq(1)[(0, 0)].re - 0.36338).abs() < 5e-6);
    }

    fn random_cov(seed: u64, n: usize, rank: usize, rho: f64) -> CMat {
        let g = linalg::cn_matrix(&mut seeded_rng(seed), n, rank);
        &g * g.adjoint() * c(rho, 0.0) + linalg::identity(n)
    }

    #[test]
    fn noise_diagonal_and_psd_on_random_inputs() {
        for seed in 0..20 {
            let cy = random_cov(seed, 6, 3, 0.3 + seed as f64);
            let model = BussgangModel::new(&cy).unwrap();
            for i in 0..6 {
                assert!((model.c_q[(i, i)].re - QUANTIZER_NOISE_POWER).abs() < 1e-12);
                assert_eq!(model.c_r[(i, i)], Complex64::ONE);
            }
            assert!(linalg::hermitian_defect(&model.c_q) < 1e-14);
            assert!(model.is_psd(), "seed {seed}: {:?}", model.min_eigenvalues());
        }
    }

    #[test]
    fn low_snr_approximation_improves_as_snr_falls() {
        let k = 4;
        let g = linalg::cn_matrix(&mut seeded_rng(2), 8, k);
        let dist = |rho: f64| {
            let cy = &g * g.adjoint() * c(rho, 0.0) + linalg::identity(8);
            linalg::frobenius(&(quantizer_noise_cov(&cy).unwrap() - low_snr_cq(8)))
        };
        let sweep: Vec<f64> = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0]
            .iter()
            .map(|&r| dist(r))
            .collect();
        assert!(sweep.windows(2).all(|w| w[0] < w[1]), "{sweep:?}");

        // near-identity input at ρ = 0.01
        let cy = &g * g.adjoint() * c(0.01, 0.0)
            + linalg::identity(8) * c(1.0 + k as f64 * 0.01, 0.0)
            - linalg::identity(8) * c(k as f64 * 0.01, 0.0);
        let diff = quantizer_noise_cov(&cy).unwrap() - low_snr_cq(8);
        assert!(diff.iter().all(|z| z.norm() < 0.02));
    }

    #[test]
    fn alphas() {
        let cfg = SystemConfig::new(8, 1, 1, 10, 0.0, 0.0).unwrap();
        assert!((alpha_p(&cfg) - (2.0 / PI).sqrt()).abs() < 1e-15);
        let cfg = SystemConfig::new(8, 8, 8, 10, 0.1, 0.1).unwrap();
        assert!((alpha_d(&cfg) - 0.594_708).abs() < 1e-6);
    }

    #[test]
    fn hardening_gain_matches_exact_gain() {
        let (m, k, rho) = (128, 32, 0.1);
        let cfg = SystemConfig::new(m, k, k, 200, rho, rho).unwrap();
        let h = linalg::cn_matrix(&mut seeded_rng(4), m, k);
        let cy = &h * h.adjoint() * c(rho, 0.0) + linalg::identity(m);
        let exact = bussgang_gain(&cy).unwrap();
        let a = alpha_d(&cfg);
        // per-antenna powers fluctuate by about √K·ρ around Kρ + 1
        let mean = exact.mean();
        assert!((mean / a - 1.0).abs() < 0.01, "{mean} vs {a}");
        assert!(exact.iter().all(|&g| (g / a - 1.0).abs() < 0.25));
    }

    #[test]
    fn regression_recovers_gain() {
        // least-squares fit of Re r_i on Re y_i per coordinate
        let cy = random_cov(7, 3, 2, 2.0);
        let sqrt = linalg::psd_sqrt(&cy, 1e-10).unwrap();
        let samples = run_trials(100_000, 5, |rng| {
            let y = &sqrt * linalg::cn_vector(rng, 3);
            let r = one_bit_quantize(&y);
            (y, r)
        });
        let gain = bussgang_gain(&cy).unwrap();
        for i in 0..3 {
            let (mut num, mut den) = (Complex64::ZERO, 0.0);
            for (y, r) in &samples {
                num += r[i] * y[i].conj();
                den += y[i].norm_sqr();
            }
            let fit = num / den;
            assert!(
                (fit.re / gain[i] - 1.0).abs() < 0.02,
                "{i}: {fit} vs {}",
                gain[i]
            );
            assert!(fit.im.abs() < 0.02 * gain[i]);
        }
    }

    #[test]
    fn scale_invariance() {
        let y = linalg::cn_vector(&mut seeded_rng(1), 50);
        for s in [1e-6, 0.3, 7.0, 1e8] {
            assert_eq!(one_bit_quantize(&(&y * c(s, 0.0))), one_bit_quantize(&y));
        }
    }
}
