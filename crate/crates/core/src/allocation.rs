//! Power scaling, pilot/data energy allocation and the antenna ratio between
//! one-bit and conventional arrays.
//!
//! With a per-block energy budget `P = ρT` split as `γP = τρ_p` and
//! `(1 − γ)P = (T − τ)ρ_d`, the closed-form sum spectral efficiency of the
//! one-bit system becomes
//! `S(γ, τ) = (T − τ)/T · K · log₂(1 + a₁τ / (a₂τ² + a₃τ + a₄))`.

use std::f64::consts::PI;

use crate::channel::SystemConfig;
use crate::estimators::flat_sigma_sq;
use crate::rate::{conventional_sinr, one_bit_sinr, prelog, Receiver};
use crate::{Error, Result};

/// Average transmit power and the implied per-block budget `P = ρT`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    pub rho: f64,
    pub p: f64,
}

impl PowerBudget {
    pub fn new(rho: f64, t: usize) -> Result<Self> {
        let p = rho * t as f64;
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "power budget must be positive, got rho={rho}, T={t}"
            )));
        }
        Ok(PowerBudget { rho, p })
    }

    /// Pilot and data SNR for energy fraction `gamma` and training length `tau`.
    pub fn split(&self, gamma: f64, tau: f64, t: f64) -> (f64, f64) {
        (gamma * self.p / tau, (1.0 - gamma) * self.p / (t - tau))
    }
}

/// Receiver front end being optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    OneBit,
    /// Infinite-resolution ADCs with MMSE channel estimation.
    Conventional,
}

/// Coefficients of the rational form of `S(γ, τ)` at fixed γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl SurfaceCoefficients {
    pub fn new(gamma: f64, p: f64, m: f64, k: f64, t: f64, receiver: Receiver) -> Self {
        let g1 = gamma * (1.0 - gamma);
        let (gain, quad) = match receiver {
            Receiver::Mrc => (m, 2.0 * PI),
            Receiver::Zf => (m - k, 2.0 * PI - 4.0),
        };
        SurfaceCoefficients {
            a1: 4.0 * gain * p * p * g1,
            a2: -PI * (PI + 2.0 * p * gamma),
            a3: PI * PI * (k * p + t) + 2.0 * PI * p * gamma * t + 2.0 * PI * k * p * gamma
                - 2.0 * PI * PI * k * p * gamma
                + quad * k * p * p * g1,
            a4: PI * k * p * (PI - 2.0) * gamma * (k * p * (1.0 - gamma) + t),
        }
    }

    /// `a₁τ / (a₂τ² + a₃τ + a₄)`, the per-user SINR.
    pub fn sinr(&self, tau: f64) -> f64 {
        self.a1 * tau / (self.a2 * tau * tau + self.a3 * tau + self.a4)
    }
}

fn check_surface_domain(gamma: f64, tau: usize, cfg: &SystemConfig) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    if tau < cfg.k || tau > cfg.t {
        return Err(Error::Domain(format!(
            "training length must satisfy K <= tau <= T, got tau={tau}, K={}, T={}",
            cfg.k, cfg.t
        )));
    }
    Ok(())
}

/// Sum spectral efficiency from the coefficient form. Uses `cfg.m`, `cfg.k`
/// and `cfg.t`; `tau` overrides `cfg.tau`.
pub fn se_surface(
    gamma: f64,
    tau: usize,
    budget: &PowerBudget,
    cfg: &SystemConfig,
    receiver: Receiver,
) -> Result<f64> {
    check_surface_domain(gamma, tau, cfg)?;
    if tau == cfg.t {
        return Ok(0.0);
    }
    let (m, k, t) = (cfg.m as f64, cfg.k as f64, cfg.t as f64);
    let c = SurfaceCoefficients::new(gamma, budget.p, m, k, t, receiver);
    let tau = tau as f64;
    Ok(prelog(t, tau) * k * (1.0 + c.sinr(tau)).log2())
}

/// The same quantity by substituting the split powers into the per-user
/// closed forms. Also defined for the conventional system.
#[allow(clippy::too_many_arguments)]
pub fn se_direct(
    system: System,
    gamma: f64,
    tau: f64,
    p: f64,
    m: f64,
    k: f64,
    t: f64,
    receiver: Receiver,
) -> f64 {
    if tau >= t {
        return 0.0;
    }
    let rho_p = gamma * p / tau;
    let rho_d = (1.0 - gamma) * p / (t - tau);
    se_at(system, m, k, tau, t, rho_p, rho_d, receiver)
}

/// Sum spectral efficiency at explicit powers.
#[allow(clippy::too_many_arguments)]
pub fn se_at(
    system: System,
    m: f64,
    k: f64,
    tau: f64,
    t: f64,
    rho_p: f64,
    rho_d: f64,
    receiver: Receiver,
) -> f64 {
    let sinr = match system {
        System::OneBit => one_bit_sinr(receiver, m, k, tau, rho_p, rho_d),
        System::Conventional => conventional_sinr(receiver, m, k, tau, rho_p, rho_d),
    };
    prelog(t, tau) * k * (1.0 + sinr).log2()
}

/// Which training lengths the optimizer may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauPolicy {
    /// Every integer in [K, T − 1].
    Scan,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationSolution {
    pub gamma_star: f64,
    pub tau_star: usize,
    pub rho_p_star: f64,
    pub rho_d_star: f64,
    pub se_star: f64,
    pub receiver: Receiver,
    pub system: System,
    /// Coherence interval the solution refers to.
    pub t: usize,
}

impl AllocationSolution {
    /// `τρ_p + (T − τ)ρ_d`, equal to the budget P.
    pub fn energy(&self) -> f64 {
        self.tau_star as f64 * self.rho_p_star + (self.t - self.tau_star) as f64 * self.rho_d_star
    }
}

/// γ grid points scanned before the golden-section refinement.
pub const GAMMA_GRID: usize = 200;
/// Final bracket width of the golden-section search.
pub const GAMMA_TOL: f64 = 1e-6;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Best γ for fixed τ: grid pre-scan, then golden section around the best
/// grid point.
fn best_gamma(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let step = 1.0 / GAMMA_GRID as f64;
    let grid: Vec<(f64, f64)> = (0..GAMMA_GRID)
        .map(|i| {
            let g = (i as f64 + 0.5) * step;
            (g, f(g))
        })
        .collect();
    let (i, &(g0, f0)) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty grid");
    let lo = if i == 0 { 1e-12 } else { grid[i - 1].0 };
    let hi = if i + 1 == GAMMA_GRID {
        1.0 - 1e-12
    } else {
        grid[i + 1].0
    };
    let (g, v) = golden_max(&f, lo, hi, GAMMA_TOL);
    if v >= f0 {
        (g, v)
    } else {
        (g0, f0)
    }
}

/// Maximizes the sum spectral efficiency over (γ, τ) with real-valued M.
pub fn optimize_allocation_with(
    system: System,
    budget: &PowerBudget,
    m: f64,
    k: usize,
    t: usize,
    receiver: Receiver,
    policy: TauPolicy,
) -> Result<AllocationSolution> {
    if k < 1 || t <= k {
        return Err(Error::InvalidConfig(format!(
            "allocation needs 1 <= K < T, got K={k}, T={t}"
        )));
    }
    let taus: Vec<usize> = match policy {
        TauPolicy::Scan => (k..t).collect(),
        TauPolicy::Fixed(tau) => {
            if tau < k || tau >= t {
                return Err(Error::InvalidConfig(format!(
                    "fixed training length {tau} outside [K, T-1] = [{k}, {}]",
                    t - 1
                )));
            }
            vec![tau]
        }
    };
    let (kf, tf) = (k as f64, t as f64);
    let mut best: Option<(usize, f64, f64)> = None;
    for tau in taus {
        let tau_f = tau as f64;
        let (g, v) = best_gamma(|g| se_direct(system, g, tau_f, budget.p, m, kf, tf, receiver));
        if best.is_none_or(|(_, _, bv)| v > bv) {
            best = Some((tau, g, v));
        }
    }
    let (tau, gamma, se) = best.expect("at least one training length");
    let (rho_p, rho_d) = budget.split(gamma, tau as f64, tf);
    Ok(AllocationSolution {
        gamma_star: gamma,
        tau_star: tau,
        rho_p_star: rho_p,
        rho_d_star: rho_d,
        se_star: se,
        receiver,
        system,
        t,
    })
}

/// Optimal (γ, τ) for the one-bit system described by `cfg` (M, K, T).
pub fn optimize_allocation(
    budget: &PowerBudget,
    cfg: &SystemConfig,
    receiver: Receiver,
) -> Result<AllocationSolution> {
    cfg.validate()?;
    optimize_allocation_with(
        System::OneBit,
        budget,
        cfg.m as f64,
        cfg.k,
        cfg.t,
        receiver,
        TauPolicy::Scan,
    )
}

/// Scaling regime of the user powers with the array size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingCase {
    /// ρ_p fixed, ρ_d = E_u / M.
    I,
    /// ρ_p = ρ_d = E_u / √M.
    II,
}

/// Large-M limit of the sum spectral efficiency; MRC and ZF coincide.
pub fn power_scaling_limit(case: ScalingCase, cfg: &SystemConfig, e_u: f64) -> f64 {
    let (k, tau, t) = (cfg.k as f64, cfg.tau as f64, cfg.t as f64);
    let snr = match case {
        ScalingCase::I => 2.0 / PI * flat_sigma_sq(k, tau, cfg.rho_p) * e_u,
        ScalingCase::II => 4.0 / (PI * PI) * tau * e_u * e_u,
    };
    prelog(t, tau) * k * (1.0 + snr).log2()
}

/// Closed-form sum spectral efficiency at finite M under the scaling law.
pub fn power_scaling_se(
    case: ScalingCase,
    cfg: &SystemConfig,
    e_u: f64,
    m: f64,
    receiver: Receiver,
) -> f64 {
    let (rho_p, rho_d) = match case {
        ScalingCase::I => (cfg.rho_p, e_u / m),
        ScalingCase::II => (e_u / m.sqrt(), e_u / m.sqrt()),
    };
    se_at(
        System::OneBit,
        m,
        cfg.k as f64,
        cfg.tau as f64,
        cfg.t as f64,
        rho_p,
        rho_d,
        receiver,
    )
}

/// Transmit energy per bit, `(τρ_p + (T − τ)ρ_d) / S`.
pub fn bit_energy(allocation: &AllocationSolution, se: f64) -> Result<f64> {
    if !(se > 0.0) {
        return Err(Error::Domain(format!(
            "bit energy needs a positive spectral efficiency, got {se}"
        )));
    }
    Ok(allocation.energy() / se)
}

/// How the two systems choose their powers in the antenna comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMode {
    /// τ = K and ρ_p = ρ_d = ρ for both systems.
    Benchmark,
    /// Conventional: optimal γ at τ = K. One-bit: optimal (γ, τ).
    Optimized,
}

/// Outcome of [`antenna_ratio`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AntennaRatio {
    Finite {
        kappa: f64,
        /// Continuous solution of the equal-SE condition.
        m_one: f64,
        /// `m_one` rounded up.
        m_one_rounded: usize,
        se_target: f64,
    },
    /// No array up to [`MAX_ANTENNAS`] reaches the conventional SE.
    Unbounded { se_target: f64 },
}

impl AntennaRatio {
    pub fn kappa(&self) -> f64 {
        match self {
            AntennaRatio::Finite { kappa, .. } => *kappa,
            AntennaRatio::Unbounded { .. } => f64::INFINITY,
        }
    }
}

/// Largest one-bit array considered by [`antenna_ratio`].
pub const MAX_ANTENNAS: f64 = 1e9;
/// Relative equal-SE tolerance.
pub const RATIO_TOL: f64 = 1e-4;

/// Benchmark or optimized sum SE of `system` with `m` antennas.
pub fn best_se(
    system: System,
    mode: RatioMode,
    budget: &PowerBudget,
    m: f64,
    k: usize,
    t: usize,
    receiver: Receiver,
) -> Result<f64> {
    match mode {
        RatioMode::Benchmark => Ok(se_at(
            system, m, k as f64, k as f64, t as f64, budget.rho, budget.rho, receiver,
        )),
        RatioMode::Optimized => {
            let policy = match system {
                System::OneBit => TauPolicy::Scan,
                System::Conventional => TauPolicy::Fixed(k),
            };
            Ok(optimize_allocation_with(system, budget, m, k, t, receiver, policy)?.se_star)
        }
    }
}

/// Smallest continuous x in (lo, MAX] with `f(x) ≥ target`, for nondecreasing f.
fn bisect_increasing(
    f: impl Fn(f64) -> Result<f64>,
    target: f64,
    lo: f64,
    start: f64,
) -> Result<Option<f64>> {
    let mut lo = lo;
    let mut hi = start.max(lo + 1.0);
    while f(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_ANTENNAS {
            return Ok(None);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if (v - target).abs() <= RATIO_TOL * target || hi - lo < 1e-9 * hi {
            return Ok(Some(mid));
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// κ = M_one / M_conv for equal sum spectral efficiency. Uses `cfg.k` and
/// `cfg.t`.
pub fn antenna_ratio(
    budget: &PowerBudget,
    cfg: &SystemConfig,
    receiver: Receiver,
    m_conv: usize,
    mode: RatioMode,
) -> Result<AntennaRatio> {
    cfg.validate()?;
    let (k, t) = (cfg.k, cfg.t);
    if receiver == Receiver::Zf && m_conv <= k {
        return Err(Error::Domain(format!(
            "conventional ZF needs M_conv > K, got {m_conv}"
        )));
    }
    let target = best_se(
        System::Conventional,
        mode,
        budget,
        m_conv as f64,
        k,
        t,
        receiver,
    )?;
    let lo = match receiver {
        Receiver::Mrc => 0.0,
        Receiver::Zf => k as f64,
    };
    let one_bit = |m: f64| best_se(System::OneBit, mode, budget, m, k, t, receiver);
    Ok(
        match bisect_increasing(one_bit, target, lo, m_conv as f64)? {
            Some(m_one) => AntennaRatio::Finite {
                kappa: m_one / m_conv as f64,
                m_one,
                m_one_rounded: m_one.ceil() as usize,
                se_target: target,
            },
            None => AntennaRatio::Unbounded { se_target: target },
        },
    )
}

/// Smallest budget P whose optimal (or benchmark) one-bit sum SE reaches
/// `target`. Returns the solution at that budget.
pub fn budget_for_se(
    target: f64,
    cfg: &SystemConfig,
    receiver: Receiver,
    mode: RatioMode,
) -> Result<AllocationSolution> {
    cfg.validate()?;
    let (m, k, t) = (cfg.m as f64, cfg.k, cfg.t);
    let solve = |rho: f64| -> Result<AllocationSolution> {
        let budget = PowerBudget::new(rho, t)?;
        match mode {
            RatioMode::Optimized => optimize_allocation_with(
                System::OneBit,
                &budget,
                m,
                k,
                t,
                receiver,
                TauPolicy::Scan,
            ),
            RatioMode::Benchmark => {
                let se = se_at(
                    System::OneBit,
                    m,
                    k as f64,
                    k as f64,
                    t as f64,
                    rho,
                    rho,
                    receiver,
                );
                Ok(AllocationSolution {
                    gamma_star: k as f64 / t as f64,
                    tau_star: k,
                    rho_p_star: rho,
                    rho_d_star: rho,
                    se_star: se,
                    receiver,
                    system: System::OneBit,
                    t,
                })
            }
        }
    };
    // bracket in log ρ
    let (mut lo, mut hi) = (1e-6f64, 1e-6f64);
    while solve(hi)?.se_star < target {
        lo = hi;
        hi *= 4.0;
        if hi > 1e8 {
            return Err(Error::Domain(format!(
                "spectral efficiency {target} is not reachable with this array"
            )));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let sol = solve(mid)?;
        if (sol.se_star - target).abs() <= RATIO_TOL * target || hi / lo < 1.0 + 1e-12 {
            return Ok(sol);
        }
        if sol.se_star < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    solve(hi)
}
