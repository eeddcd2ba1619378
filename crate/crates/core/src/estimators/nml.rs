//! Near-maximum-likelihood channel estimation from one-bit training data.
//!
//! With `y = Φ̄h + n`, `n ~ CN(0, I)`, every real component of `y` carries
//! noise of variance 1/2, so the probability of the observed sign `s_i` is
//! `F(√2 s_i (Φ̄_R h_R)_i)` with `F` the standard normal CDF. The estimator
//! maximizes the concave log-likelihood over a norm ball by projected gradient
//! ascent with backtracking.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use super::ChannelEstimate;
use crate::channel::{PilotMatrix, SystemConfig};
use crate::linalg::{self, CMat, CVec};
use crate::{Error, Result};

/// Radius of the constraint `‖h_R‖² ≤ radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NmlRadius {
    /// M·K, the expected squared norm of a unit-variance channel.
    Mk,
    /// K.
    K,
    Custom(f64),
}

impl NmlRadius {
    fn value(self, m: usize, k: usize) -> f64 {
        match self {
            NmlRadius::Mk => (m * k) as f64,
            NmlRadius::K => k as f64,
            NmlRadius::Custom(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmlOptions {
    pub radius: NmlRadius,
    /// Stop when the projected-gradient norm drops below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NmlOptions {
    fn default() -> Self {
        NmlOptions {
            radius: NmlRadius::Mk,
            tol: 1e-6,
            max_iters: 500,
        }
    }
}

/// Result of [`nml_estimate`].
#[derive(Debug, Clone)]
pub struct NmlEstimate {
    pub estimate: ChannelEstimate,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the final projected-gradient step divided by its step size.
    pub grad_norm: f64,
    /// Objective after each accepted iterate, starting with the initial point.
    pub objective: Vec<f64>,
}

/// `ln F(z)` for the standard normal CDF `F`.
pub(crate) fn log_norm_cdf(z: f64) -> f64 {
    if z < -30.0 {
        // asymptotic expansion of the Mills ratio
        let z2 = z * z;
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    } else {
        (0.5 * libm::erfc(-z / SQRT_2)).ln()
    }
}

/// `f(z)/F(z)`, the derivative of [`log_norm_cdf`].
pub(crate) fn inverse_mills(z: f64) -> f64 {
    if z < -30.0 {
        let z2 = z * z;
        -z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2))
    } else {
        let pdf = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        pdf / (0.5 * libm::erfc(-z / SQRT_2))
    }
}

struct Likelihood<'a> {
    /// √ρ_p Φᵀ, so that the noiseless training block is `H·pt`.
    pt: CMat,
    /// Quantized training block as signs (±1 ± j).
    signs: CMat,
    phi_conj: &'a CMat,
    scale: f64,
}

impl Likelihood<'_> {
    fn objective(&self, h: &CMat) -> f64 {
        let z = h * &self.pt;
        z.iter()
            .zip(self.signs.iter())
            .map(|(z, s)| log_norm_cdf(SQRT_2 * s.re * z.re) + log_norm_cdf(SQRT_2 * s.im * z.im))
            .sum()
    }

    /// Gradient with respect to (Re H, Im H), packed as a complex matrix.
    fn gradient(&self, h: &CMat) -> CMat {
        let z = h * &self.pt;
        let w = z.zip_map(&self.signs, |z, s| {
            Complex64::new(
                SQRT_2 * s.re * inverse_mills(SQRT_2 * s.re * z.re),
                SQRT_2 * s.im * inverse_mills(SQRT_2 * s.im * z.im),
            )
        });
        // Φ̄_Rᵀ w_R corresponds to Φ̄ᴴ w, i.e. √ρ_p W Φ*
        w * self.phi_conj * Complex64::from(self.scale)
    }
}

fn project(h: &mut CMat, radius: f64) {
    let n2 = h.norm_squared();
    if n2 > radius {
        *h *= Complex64::from((radius / n2).sqrt());
    }
}

fn inner(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Near-ML estimate from a quantized training vector.
///
/// Non-convergence within `opts.max_iters` is reported through
/// [`NmlEstimate::converged`] rather than as an error.
pub fn nml_estimate(
    r_p: &CVec,
    phi: &PilotMatrix,
    cfg: &SystemConfig,
    opts: &NmlOptions,
) -> Result<NmlEstimate> {
    cfg.validate()?;
    if phi.users() != cfg.k || phi.tau() != cfg.tau || r_p.len() != cfg.m * cfg.tau {
        return Err(Error::DimensionMismatch(format!(
            "nML needs a {}x{} pilot matrix and a length-{} observation",
            cfg.tau,
            cfg.k,
            cfg.m * cfg.tau
        )));
    }
    let radius = opts.radius.value(cfg.m, cfg.k);
    if !(radius > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidConfig(
            "nML radius and tolerance must be positive".into(),
        ));
    }
    let signs = linalg::unvec(r_p, cfg.m, cfg.tau)?.map(|z| {
        Complex64::new(
            if z.re >= 0.0 { 1.0 } else { -1.0 },
            if z.im >= 0.0 { 1.0 } else { -1.0 },
        )
    });
    let scale = cfg.rho_p.sqrt();
    let phi_conj = phi.matrix().map(|z| z.conj());
    let lik = Likelihood {
        pt: phi.matrix().transpose() * Complex64::from(scale),
        signs,
        phi_conj: &phi_conj,
        scale,
    };

    let mut h = CMat::zeros(cfg.m, cfg.k);
    let mut f = lik.objective(&h);
    let mut objective = vec![f];
    // Lipschitz bound of the gradient: 2‖Φ̄‖² with ‖Φ̄‖² ≤ ρ_p·‖Φ‖²
    let lip = 2.0 * cfg.rho_p * phi.matrix().norm_squared().max(1e-300);
    let mut step = 1.0 / lip;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let g = lik.gradient(&h);
        let mut t = step * 4.0;
        let (next, f_next, diff) = loop {
            let mut cand = &h + &g * Complex64::from(t);
            project(&mut cand, radius);
            let d = &cand - &h;
            let fc = lik.objective(&cand);
            // sufficient-increase test for the projected step
            if fc >= f + inner(&g, &d) - d.norm_squared() / (2.0 * t) || t < 1e-300 {
                break (cand, fc, d);
            }
            t *= 0.5;
        };
        iterations += 1;
        grad_norm = diff.norm() / t;
        step = t;
        if f_next >= f {
            h = next;
            f = f_next;
        }
        objective.push(f);
        if grad_norm < opts.tol {
            converged = true;
            break;
        }
    }

    let mse_scale = (cfg.m * cfg.k) as f64;
    Ok(NmlEstimate {
        estimate: ChannelEstimate {
            sigma_sq: (h.norm_squared() / mse_scale).clamp(0.0, 1.0),
            h_hat: h,
            predicted_mse: None,
            regularized: false,
        },
        iterations,
        converged,
        grad_norm,
        objective,
    })
}
