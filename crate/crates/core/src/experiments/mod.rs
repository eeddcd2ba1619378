//! Figure registry behind the `onebit-mimo` command line.
//!
//! Each [`FigureId`] names one experiment. A run resolves an
//! [`ExperimentSpec`] from a configuration file, computes a [`ResultTable`]
//! and writes it as CSV next to a re-runnable manifest and a gnuplot stub.
//! All dB quantities are converted to linear scale here and nowhere else.

mod config;
mod figures;
mod output;

use std::fmt;
use std::str::FromStr;

pub use config::{parse_config, validate_config, ExperimentSpec};
pub use output::{
    format_float, manifest_path, manifest_text, plot_path, plot_script, write_outputs,
};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig2Mse,
    Fig3CorrMse,
    Fig4SeVsSnr,
    Fig5PowerEff,
    Fig6BitEnergy,
    Fig7OptTau,
    Fig8SeVsM,
    Fig9Kappa,
}

impl FigureId {
    pub const ALL: [FigureId; 8] = [
        FigureId::Fig2Mse,
        FigureId::Fig3CorrMse,
        FigureId::Fig4SeVsSnr,
        FigureId::Fig5PowerEff,
        FigureId::Fig6BitEnergy,
        FigureId::Fig7OptTau,
        FigureId::Fig8SeVsM,
        FigureId::Fig9Kappa,
    ];

    pub fn id(self) -> &'static str {
        match self {
            FigureId::Fig2Mse => "fig2_mse",
            FigureId::Fig3CorrMse => "fig3_corr_mse",
            FigureId::Fig4SeVsSnr => "fig4_se_vs_snr",
            FigureId::Fig5PowerEff => "fig5_power_eff",
            FigureId::Fig6BitEnergy => "fig6_bit_energy",
            FigureId::Fig7OptTau => "fig7_opt_tau",
            FigureId::Fig8SeVsM => "fig8_se_vs_m",
            FigureId::Fig9Kappa => "fig9_kappa",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            FigureId::Fig2Mse => "channel-estimation MSE vs pilot SNR, i.i.d. channel",
            FigureId::Fig3CorrMse => {
                "channel-estimation MSE vs pilot SNR, Laplacian-correlated channel"
            }
            FigureId::Fig4SeVsSnr => "sum SE vs SNR: closed form and Monte Carlo, MRC and ZF",
            FigureId::Fig5PowerEff => "sum SE vs M under the two power-scaling laws",
            FigureId::Fig6BitEnergy => {
                "bit energy vs sum-SE target, optimal vs benchmark allocation"
            }
            FigureId::Fig7OptTau => "optimal training length vs coherence interval",
            FigureId::Fig8SeVsM => "sum SE vs M, one-bit and conventional, benchmark and optimal",
            FigureId::Fig9Kappa => "one-bit to conventional antenna ratio vs SNR",
        }
    }

    pub fn parse(s: &str) -> Result<FigureId> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.id() == s.trim())
            .ok_or_else(|| Error::UnknownFigure(s.trim().to_string()))
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::parse(s)
    }
}

/// Rectangular numeric table. Columns prefixed `se_` hold the standard error
/// of the metric named by the rest of the header.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    /// Columns that are swept parameters rather than metrics.
    pub parameters: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultTable {
    fn new(parameters: &[&str], metrics: &[String]) -> Self {
        let parameters: Vec<String> = parameters.iter().map(|s| s.to_string()).collect();
        let mut columns = parameters.clone();
        columns.extend(metrics.iter().cloned());
        ResultTable {
            columns,
            parameters,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Computes the table for `spec` without touching the filesystem.
pub fn compute_table(spec: &ExperimentSpec) -> Result<ResultTable> {
    match spec.figure {
        FigureId::Fig2Mse => figures::fig2(spec),
        FigureId::Fig3CorrMse => figures::fig3(spec),
        FigureId::Fig4SeVsSnr => figures::fig4(spec),
        FigureId::Fig5PowerEff => figures::fig5(spec),
        FigureId::Fig6BitEnergy => figures::fig6(spec),
        FigureId::Fig7OptTau => figures::fig7(spec),
        FigureId::Fig8SeVsM => figures::fig8(spec),
        FigureId::Fig9Kappa => figures::fig9(spec),
    }
}

/// Runs the experiment and writes CSV, manifest and plot stub.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    let table = compute_table(spec)?;
    write_outputs(spec, &table)?;
    Ok(table)
}
