//! Per-figure experiment pipelines.

use rayon::prelude::*;

use super::{ExperimentSpec, ResultTable};
use crate::allocation::{
    antenna_ratio, best_se, bit_energy, budget_for_se, optimize_allocation_with,
    power_scaling_limit, power_scaling_se, PowerBudget, RatioMode, ScalingCase, System, TauPolicy,
};
use crate::channel::{
    dft_pilots, iid_channel, laplacian_covariance, training_signal_with, ChannelCovariance,
    CorrelatedChannel, SystemConfig,
};
use crate::estimators::{nml_estimate, normalized_error, LinearEstimator, NmlOptions};
use crate::mc::{run_trials, Estimate};
use crate::quantization::one_bit_quantize;
use crate::rate::{closed_form_rates, ergodic_rate_mc, Receiver};
use crate::{db_to_linear, linear_to_db, Error, Result};

/// Seed of grid point `index`, so points never share noise streams.
fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn names(prefix: &str, receivers: &[Receiver], suffixes: &[&str]) -> Vec<String> {
    receivers
        .iter()
        .flat_map(|r| {
            suffixes.iter().map(move |s| {
                let mut name = format!("{prefix}{s}_{}", r.name());
                if name.starts_with('_') {
                    name.remove(0);
                }
                name
            })
        })
        .collect()
}

fn mean_and_error(samples: &[f64]) -> (f64, f64) {
    let e = Estimate::from_samples(samples);
    (e.mean, e.std_error)
}

/// Maps unreachable targets to +∞ and keeps every other error.
fn or_infinite(r: Result<f64>) -> Result<f64> {
    match r {
        Err(Error::Domain(_)) => Ok(f64::INFINITY),
        other => other,
    }
}

pub(super) fn fig2(spec: &ExperimentSpec) -> Result<ResultTable> {
    let metrics: Vec<String> = [
        "mse_blmmse",
        "mse_ls",
        "mse_nml",
        "mse_uncorr",
        "se_mse_blmmse",
        "se_mse_ls",
        "se_mse_nml",
        "se_mse_uncorr",
        "pred_blmmse",
        "pred_ls",
        "pred_uncorr",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut table = ResultTable::new(&["M", "snr_db"], &metrics);
    let opts = NmlOptions {
        radius: spec.nml_radius,
        ..NmlOptions::default()
    };
    let mut index = 0;
    for &m in &spec.m {
        for &snr in &spec.snr_db {
            let rho = spec.rho_p(snr);
            let cfg = SystemConfig::new(m, spec.k, spec.tau, spec.t[0], rho, rho)?;
            let phi = dft_pilots(cfg.tau, cfg.k)?;
            let cov = ChannelCovariance::Identity;
            let blmmse = LinearEstimator::blmmse(&phi, &cfg, &cov)?;
            let uncorr = LinearEstimator::uncorrelated_lmmse(&phi, &cfg, &cov)?;
            let ls = LinearEstimator::least_squares(&phi, &cfg).ok();
            let draws = run_trials(
                spec.n_trials,
                point_seed(spec.seed, index),
                |rng| -> Result<[f64; 4]> {
                    let h = iid_channel(rng, cfg.m, cfg.k);
                    let r = one_bit_quantize(&training_signal_with(rng, &h, &phi, cfg.rho_p)?);
                    let ls_err = match &ls {
                        Some(e) => normalized_error(&h, &e.apply(&r)?.h_hat),
                        None => f64::NAN,
                    };
                    Ok([
                        blmmse.apply(&r)?.realized_mse(&h),
                        ls_err,
                        nml_estimate(&r, &phi, &cfg, &opts)?
                            .estimate
                            .realized_mse(&h),
                        uncorr.apply(&r)?.realized_mse(&h),
                    ])
                },
            );
            index += 1;
            let draws: Vec<[f64; 4]> = draws.into_iter().collect::<Result<_>>()?;
            let stats: Vec<(f64, f64)> = (0..4)
                .map(|j| mean_and_error(&draws.iter().map(|d| d[j]).collect::<Vec<_>>()))
                .collect();
            let mut row = vec![m as f64, snr];
            row.extend(stats.iter().map(|s| s.0));
            row.extend(stats.iter().map(|s| s.1));
            row.push(blmmse.predicted_mse());
            row.push(ls.as_ref().map_or(f64::NAN, |e| e.predicted_mse()));
            row.push(uncorr.predicted_mse());
            table.push(row);
        }
    }
    Ok(table)
}

pub(super) fn fig3(spec: &ExperimentSpec) -> Result<ResultTable> {
    let metrics: Vec<String> = [
        "mse_blmmse",
        "mse_uncorr",
        "se_mse_blmmse",
        "se_mse_uncorr",
        "pred_blmmse",
        "pred_uncorr",
        "gap_db",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut table = ResultTable::new(&["M", "snr_db"], &metrics);
    let mut index = 0;
    for &m in &spec.m {
        let r = laplacian_covariance(m, spec.mean_angle_deg, spec.spread_deg)?;
        let channel = CorrelatedChannel::new(&r)?;
        let cov = ChannelCovariance::Spatial(r);
        for &snr in &spec.snr_db {
            let rho = spec.rho_p(snr);
            let cfg = SystemConfig::new(m, spec.k, spec.tau, spec.t[0], rho, rho)?;
            let phi = dft_pilots(cfg.tau, cfg.k)?;
            let blmmse = LinearEstimator::blmmse(&phi, &cfg, &cov)?;
            let uncorr = LinearEstimator::uncorrelated_lmmse(&phi, &cfg, &cov)?;
            let draws = run_trials(
                spec.n_trials,
                point_seed(spec.seed, index),
                |rng| -> Result<[f64; 2]> {
                    let h = channel.draw(rng, cfg.k);
                    let y = training_signal_with(rng, &h, &phi, cfg.rho_p)?;
                    let r = one_bit_quantize(&y);
                    // trace of the per-user covariance is M, so this matches tr C_h
                    Ok([
                        blmmse.apply(&r)?.realized_mse(&h),
                        uncorr.apply(&r)?.realized_mse(&h),
                    ])
                },
            );
            index += 1;
            let draws: Vec<[f64; 2]> = draws.into_iter().collect::<Result<_>>()?;
            let (b, sb) = mean_and_error(&draws.iter().map(|d| d[0]).collect::<Vec<_>>());
            let (u, su) = mean_and_error(&draws.iter().map(|d| d[1]).collect::<Vec<_>>());
            let (pb, pu) = (blmmse.predicted_mse(), uncorr.predicted_mse());
            table.push(vec![
                m as f64,
                snr,
                b,
                u,
                sb,
                su,
                pb,
                pu,
                linear_to_db(pu / pb),
            ]);
        }
    }
    Ok(table)
}

pub(super) fn fig4(spec: &ExperimentSpec) -> Result<ResultTable> {
    let metrics = names("", &spec.receivers, &["closed", "mc", "se_mc"]);
    let mut table = ResultTable::new(&["M", "snr_db"], &metrics);
    let mut index = 0;
    for &m in &spec.m {
        for &snr in &spec.snr_db {
            let rho = db_to_linear(snr);
            let cfg = SystemConfig::new(m, spec.k, spec.tau, spec.t[0], spec.rho_p(snr), rho)?;
            let mut row = vec![m as f64, snr];
            for &receiver in &spec.receivers {
                let closed = closed_form_rates(&cfg, receiver)?.sum_spectral_efficiency;
                let mc =
                    ergodic_rate_mc(&cfg, receiver, spec.n_trials, point_seed(spec.seed, index))?;
                index += 1;
                row.extend([
                    closed,
                    mc.sum_spectral_efficiency,
                    mc.std_error.unwrap_or(f64::NAN),
                ]);
            }
            table.push(row);
        }
    }
    Ok(table)
}

pub(super) fn fig5(spec: &ExperimentSpec) -> Result<ResultTable> {
    let mut metrics = names("case1", &spec.receivers, &[""]);
    metrics.extend(names("case2", &spec.receivers, &[""]));
    metrics.extend(["case1_limit".to_string(), "case2_limit".to_string()]);
    let mut table = ResultTable::new(&["M"], &metrics);
    let e_u = db_to_linear(spec.e_u_db);
    let rho_p = spec.rho_p(spec.snr_db[0]);
    let cfg = SystemConfig::new(1.max(spec.k), spec.k, spec.tau, spec.t[0], rho_p, rho_p)?;
    for &m in &spec.m {
        let mut row = vec![m as f64];
        for case in [ScalingCase::I, ScalingCase::II] {
            for &receiver in &spec.receivers {
                row.push(power_scaling_se(case, &cfg, e_u, m as f64, receiver));
            }
        }
        row.push(power_scaling_limit(ScalingCase::I, &cfg, e_u));
        row.push(power_scaling_limit(ScalingCase::II, &cfg, e_u));
        table.push(row);
    }
    Ok(table)
}

pub(super) fn fig6(spec: &ExperimentSpec) -> Result<ResultTable> {
    let metrics = names(
        "",
        &spec.receivers,
        &["zeta_opt", "zeta_bench", "zeta_ratio"],
    );
    let mut table = ResultTable::new(&["M", "se_target"], &metrics);
    let points: Vec<(usize, f64)> = spec
        .m
        .iter()
        .flat_map(|&m| spec.se_targets.iter().map(move |&s| (m, s)))
        .collect();
    let rows: Vec<Result<Vec<f64>>> = points
        .par_iter()
        .map(|&(m, target)| {
            let cfg = SystemConfig::new(m, spec.k, spec.k, spec.t[0], 1.0, 1.0)?;
            let mut row = vec![m as f64, target];
            for &receiver in &spec.receivers {
                let zeta = |mode| {
                    or_infinite(
                        budget_for_se(target, &cfg, receiver, mode)
                            .and_then(|sol| bit_energy(&sol, sol.se_star)),
                    )
                };
                let (opt, bench) = (zeta(RatioMode::Optimized)?, zeta(RatioMode::Benchmark)?);
                row.extend([opt, bench, bench / opt]);
            }
            Ok(row)
        })
        .collect();
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}

pub(super) fn fig7(spec: &ExperimentSpec) -> Result<ResultTable> {
    let metrics = names(
        "",
        &spec.receivers,
        &[
            "tau_onebit",
            "tau_conv",
            "gamma_onebit",
            "gamma_conv",
            "sumse_onebit",
            "sumse_conv",
        ],
    );
    let mut table = ResultTable::new(&["M", "snr_db", "T"], &metrics);
    let mut points = Vec::new();
    for &m in &spec.m {
        for &snr in &spec.snr_db {
            for &t in &spec.t {
                points.push((m, snr, t));
            }
        }
    }
    let rows: Vec<Result<Vec<f64>>> = points
        .par_iter()
        .map(|&(m, snr, t)| {
            let budget = PowerBudget::new(db_to_linear(snr), t)?;
            let mut row = vec![m as f64, snr, t as f64];
            for &receiver in &spec.receivers {
                let solve = |system| {
                    optimize_allocation_with(
                        system,
                        &budget,
                        m as f64,
                        spec.k,
                        t,
                        receiver,
                        TauPolicy::Scan,
                    )
                };
                let (one, conv) = (solve(System::OneBit)?, solve(System::Conventional)?);
                row.extend([
                    one.tau_star as f64,
                    conv.tau_star as f64,
                    one.gamma_star,
                    conv.gamma_star,
                    one.se_star,
                    conv.se_star,
                ]);
            }
            Ok(row)
        })
        .collect();
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}

pub(super) fn fig8(spec: &ExperimentSpec) -> Result<ResultTable> {
    let metrics = names(
        "",
        &spec.receivers,
        &[
            "onebit_bench",
            "onebit_opt",
            "conv_bench",
            "conv_opt",
            "onebit_mc",
            "se_onebit_mc",
        ],
    );
    let mut table = ResultTable::new(&["snr_db", "M"], &metrics);
    let mut index = 0;
    for &snr in &spec.snr_db {
        let rho = db_to_linear(snr);
        for &m in &spec.m {
            let budget = PowerBudget::new(rho, spec.t[0])?;
            let bench_cfg = SystemConfig::new(m, spec.k, spec.k, spec.t[0], rho, rho)?;
            let mut row = vec![snr, m as f64];
            for &receiver in &spec.receivers {
                let se = |system, mode| {
                    best_se(system, mode, &budget, m as f64, spec.k, spec.t[0], receiver)
                };
                let mc = ergodic_rate_mc(
                    &bench_cfg,
                    receiver,
                    spec.n_trials,
                    point_seed(spec.seed, index),
                )?;
                index += 1;
                row.extend([
                    se(System::OneBit, RatioMode::Benchmark)?,
                    se(System::OneBit, RatioMode::Optimized)?,
                    se(System::Conventional, RatioMode::Benchmark)?,
                    se(System::Conventional, RatioMode::Optimized)?,
                    mc.sum_spectral_efficiency,
                    mc.std_error.unwrap_or(f64::NAN),
                ]);
            }
            table.push(row);
        }
    }
    Ok(table)
}

pub(super) fn fig9(spec: &ExperimentSpec) -> Result<ResultTable> {
    let metrics = names("", &spec.receivers, &["kappa_bench", "kappa_opt"]);
    let mut table = ResultTable::new(&["snr_db"], &metrics);
    let cfg = SystemConfig::new(spec.m_conv, spec.k, spec.k, spec.t[0], 1.0, 1.0)?;
    let rows: Vec<Result<Vec<f64>>> = spec
        .snr_db
        .par_iter()
        .map(|&snr| {
            let budget = PowerBudget::new(db_to_linear(snr), spec.t[0])?;
            let mut row = vec![snr];
            for &receiver in &spec.receivers {
                for mode in [RatioMode::Benchmark, RatioMode::Optimized] {
                    row.push(antenna_ratio(&budget, &cfg, receiver, spec.m_conv, mode)?.kappa());
                }
            }
            Ok(row)
        })
        .collect();
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}
