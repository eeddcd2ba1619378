//! CSV, manifest and plot-script writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentSpec, ResultTable};
use crate::{db_to_linear, Result};

/// Formats `x` with 15 significant digits in the shortest of fixed or
/// exponent notation, `%g` style. Infinities print as `inf`/`-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.14e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..15).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    trim_zeros(&format!("{x:.*}", (14 - exp) as usize)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ResultTable {
    /// RFC 4180 text with LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.columns.iter().map(|c| csv_field(c)).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Path of the manifest written next to `csv`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest")
}

/// Path of the gnuplot stub written next to `csv`.
pub fn plot_path(csv: &Path) -> PathBuf {
    csv.with_extension("gp")
}

/// Manifest text: the resolved configuration followed by `meta.*` records.
///
/// The file is itself a valid configuration; running it reproduces the CSV.
pub fn manifest_text(spec: &ExperimentSpec, table: &ResultTable) -> String {
    let mut out = String::from("# onebit-mimo run manifest\n");
    for (k, v) in spec.resolved() {
        let _ = writeln!(out, "{k} = {v}");
    }
    let _ = writeln!(out, "meta.version = {}", env!("CARGO_PKG_VERSION"));
    let snr_lin: Vec<String> = spec
        .snr_db
        .iter()
        .map(|&db| format_float(db_to_linear(db)))
        .collect();
    let _ = writeln!(out, "meta.snr_linear = {}", snr_lin.join(", "));
    if let Some(p) = spec.rho_p_db {
        let _ = writeln!(out, "meta.rho_p_linear = {}", format_float(db_to_linear(p)));
    }
    let _ = writeln!(out, "meta.rows = {}", table.rows.len());
    let _ = writeln!(out, "meta.columns = {}", table.columns.join(", "));
    // largest standard error of each Monte Carlo metric
    for (j, col) in table.columns.iter().enumerate() {
        if let Some(metric) = col.strip_prefix("se_") {
            let worst =
                table
                    .rows
                    .iter()
                    .map(|r| r[j])
                    .fold(0.0f64, |a, b| if b.is_nan() { a } else { a.max(b) });
            let _ = writeln!(out, "meta.stderr.{metric} = {}", format_float(worst));
        }
    }
    out
}

/// gnuplot script plotting every metric column against the innermost swept
/// parameter.
pub fn plot_script(spec: &ExperimentSpec, table: &ResultTable) -> String {
    let csv_name = spec
        .output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut out = String::new();
    let _ = writeln!(out, "# {}", spec.figure.description());
    out.push_str("set datafile separator ','\nset key autotitle columnhead\nset grid\n");
    // the innermost swept parameter is the abscissa
    let x = table.parameters.len().max(1);
    let _ = writeln!(out, "set xlabel '{}'", table.columns[x - 1]);
    let series: Vec<String> = table
        .columns
        .iter()
        .enumerate()
        .skip(table.parameters.len())
        .filter(|(_, c)| !c.starts_with("se_"))
        .map(|(j, _)| format!("'{csv_name}' using {x}:{} with linespoints", j + 1))
        .collect();
    let _ = writeln!(out, "plot {}", series.join(", \\\n     "));
    out
}

/// Writes the CSV, manifest and plot stub for a finished run.
pub fn write_outputs(spec: &ExperimentSpec, table: &ResultTable) -> Result<()> {
    if let Some(dir) = spec.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&spec.output, table.to_csv())?;
    fs::write(manifest_path(&spec.output), manifest_text(spec, table))?;
    fs::write(plot_path(&spec.output), plot_script(spec, table))?;
    Ok(())
}
