//! Flat key-value experiment configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. Lists are written
//! `a, b, c` and inclusive ranges `start:step:stop`. Keys starting with
//! `meta.` are ignored so that run manifests can be fed back in.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `figure` | figure id (see `list-figures`) | required |
//! | `seed` | base seed | 1 |
//! | `n_trials` | Monte Carlo trials per point | per figure |
//! | `output` | CSV path | `<figure>.csv` |
//! | `M` | antenna count(s) | per figure |
//! | `K` | users | per figure |
//! | `tau` | training length | K |
//! | `T` | coherence interval(s) | 200 |
//! | `snr_db` | SNR grid in dB (ρ_p = ρ_d, or average ρ for allocation) | per figure |
//! | `rho_p_db` | pilot SNR override in dB | none |
//! | `mean_angle_deg`, `spread_deg` | Laplacian spectrum | 90, 10 |
//! | `m_conv` | conventional array size | 200 |
//! | `e_u_db` | scaled energy E_u in dB | 0 |
//! | `se_targets` | sum-SE targets for bit energy | per figure |
//! | `receivers` | `mrc`, `zf` | both |
//! | `nml_radius` | `mk` or `k` | `mk` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::FigureId;
use crate::estimators::NmlRadius;
use crate::rate::Receiver;
use crate::{db_to_linear, Error, Result};

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub figure: FigureId,
    pub seed: u64,
    pub n_trials: usize,
    pub output: PathBuf,
    pub m: Vec<usize>,
    pub k: usize,
    pub tau: usize,
    pub t: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub rho_p_db: Option<f64>,
    pub mean_angle_deg: f64,
    pub spread_deg: f64,
    pub m_conv: usize,
    pub e_u_db: f64,
    pub se_targets: Vec<f64>,
    pub receivers: Vec<Receiver>,
    pub nml_radius: NmlRadius,
}

impl ExperimentSpec {
    /// Registry defaults for `figure`.
    pub fn defaults(figure: FigureId) -> Self {
        let range = |a: f64, s: f64, b: f64| expand_range(a, s, b).expect("static range");
        let mut spec = ExperimentSpec {
            figure,
            seed: 1,
            n_trials: 1000,
            output: PathBuf::from(format!("{}.csv", figure.id())),
            m: vec![128],
            k: 8,
            tau: 8,
            t: vec![200],
            snr_db: range(-20.0, 5.0, 10.0),
            rho_p_db: None,
            mean_angle_deg: 90.0,
            spread_deg: 10.0,
            m_conv: 200,
            e_u_db: 0.0,
            se_targets: range(2.0, 2.0, 16.0),
            receivers: vec![Receiver::Mrc, Receiver::Zf],
            nml_radius: NmlRadius::Mk,
        };
        match figure {
            FigureId::Fig2Mse => {
                spec.m = vec![16];
                spec.k = 4;
                spec.tau = 20;
                spec.snr_db = range(-20.0, 5.0, 20.0);
            }
            FigureId::Fig3CorrMse => {
                spec.m = vec![16];
                spec.k = 1;
                spec.tau = 2;
                spec.snr_db = range(-20.0, 5.0, 30.0);
                spec.n_trials = 5000;
            }
            FigureId::Fig4SeVsSnr => {
                spec.m = vec![32, 64, 128];
                spec.n_trials = 500;
            }
            FigureId::Fig5PowerEff => {
                spec.m = [1e1, 3e1, 1e2, 3e2, 1e3, 3e3, 1e4, 3e4, 1e5]
                    .iter()
                    .map(|&v| v as usize)
                    .collect();
                spec.rho_p_db = Some(10.0);
            }
            FigureId::Fig6BitEnergy => {
                spec.m = vec![128, 256];
            }
            FigureId::Fig7OptTau => {
                spec.snr_db = vec![-15.0, -6.0];
                spec.t = (1..=20).map(|i| 20 * i).collect();
            }
            FigureId::Fig8SeVsM => {
                spec.m = (1..=12).map(|i| 50 * i).collect();
                spec.snr_db = vec![-10.0];
                spec.n_trials = 100;
            }
            FigureId::Fig9Kappa => {
                spec.snr_db = range(-20.0, 2.5, 10.0);
            }
        }
        spec
    }

    /// ρ_p in linear scale for grid SNR `snr_db`.
    pub fn rho_p(&self, snr_db: f64) -> f64 {
        db_to_linear(self.rho_p_db.unwrap_or(snr_db))
    }

    /// Resolved parameters as `key = value` pairs, in schema order.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format_value(*x))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let ints = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut out = vec![
            ("figure".to_string(), self.figure.id().to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("n_trials".to_string(), self.n_trials.to_string()),
            ("output".to_string(), self.output.display().to_string()),
            ("M".to_string(), ints(&self.m)),
            ("K".to_string(), self.k.to_string()),
            ("tau".to_string(), self.tau.to_string()),
            ("T".to_string(), ints(&self.t)),
            ("snr_db".to_string(), list(&self.snr_db)),
        ];
        if let Some(p) = self.rho_p_db {
            out.push(("rho_p_db".to_string(), format_value(p)));
        }
        out.extend([
            (
                "mean_angle_deg".to_string(),
                format_value(self.mean_angle_deg),
            ),
            ("spread_deg".to_string(), format_value(self.spread_deg)),
            ("m_conv".to_string(), self.m_conv.to_string()),
            ("e_u_db".to_string(), format_value(self.e_u_db)),
            ("se_targets".to_string(), list(&self.se_targets)),
            (
                "receivers".to_string(),
                self.receivers
                    .iter()
                    .map(|r| r.name())
                    .collect::<Vec<_>>()
                    .join(", "),
            ),
            (
                "nml_radius".to_string(),
                match self.nml_radius {
                    NmlRadius::K => "k".to_string(),
                    NmlRadius::Custom(v) => format_value(v),
                    NmlRadius::Mk => "mk".to_string(),
                },
            ),
        ]);
        out
    }
}

fn format_value(x: f64) -> String {
    super::output::format_float(x)
}

/// Expands an inclusive `start:step:stop` range.
fn expand_range(start: f64, step: f64, stop: f64) -> std::result::Result<Vec<f64>, String> {
    if !(step != 0.0 && step.is_finite()) || (stop - start) / step < 0.0 {
        return Err(format!(
            "range {start}:{step}:{stop} is empty or has a zero step"
        ));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > 100_000 {
        return Err(format!("range {start}:{step}:{stop} has too many points"));
    }
    // index-based so long ranges do not accumulate rounding error
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

fn parse_list(value: &str) -> std::result::Result<Vec<f64>, String> {
    let value = value.trim();
    if value.is_empty() {
        return Err("empty value".into());
    }
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("range `{value}` must be start:step:stop"));
        }
        return expand_range(
            parse_f64(parts[0])?,
            parse_f64(parts[1])?,
            parse_f64(parts[2])?,
        );
    }
    value.split(',').map(|p| parse_f64(p.trim())).collect()
}

fn to_count(v: f64, what: &str) -> std::result::Result<usize, String> {
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(format!("{what} must be a nonnegative integer, got {v}"));
    }
    Ok(v as usize)
}

fn parse_counts(value: &str, what: &str) -> std::result::Result<Vec<usize>, String> {
    parse_list(value)?
        .into_iter()
        .map(|v| to_count(v, what))
        .collect()
}

fn parse_single(value: &str) -> std::result::Result<f64, String> {
    let v = parse_list(value)?;
    if v.len() != 1 {
        return Err(format!("expected a single value, got {}", v.len()));
    }
    Ok(v[0])
}

const KEYS: &[&str] = &[
    "figure",
    "seed",
    "n_trials",
    "output",
    "M",
    "K",
    "tau",
    "T",
    "snr_db",
    "rho_p_db",
    "mean_angle_deg",
    "spread_deg",
    "m_conv",
    "e_u_db",
    "se_targets",
    "receivers",
    "nml_radius",
];

/// Parses configuration text; `label` names the source in error messages.
pub fn parse_config(text: &str, label: &str) -> Result<ExperimentSpec> {
    let err = |line: usize, message: String| Error::Config {
        path: label.to_string(),
        line,
        message,
    };
    let mut entries: BTreeMap<&str, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        if key.starts_with("meta.") {
            continue;
        }
        let key = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| err(line_no, format!("unknown key `{key}`")))?;
        if entries
            .insert(key, (line_no, value.trim().to_string()))
            .is_some()
        {
            return Err(err(line_no, format!("duplicate key `{key}`")));
        }
    }

    let (fig_line, fig_value) = entries
        .get("figure")
        .ok_or_else(|| err(0, "missing required key `figure`".into()))?;
    let figure = FigureId::parse(fig_value).map_err(|e| err(*fig_line, e.to_string()))?;
    let mut spec = ExperimentSpec::defaults(figure);
    let mut tau_set = false;

    for (key, (line, value)) in &entries {
        let line = *line;
        let at = |m: String| err(line, format!("{key}: {m}"));
        match *key {
            "figure" => {}
            "seed" => {
                spec.seed = value
                    .parse()
                    .map_err(|_| err(line, format!("seed: `{value}` is not an unsigned integer")))?
            }
            "n_trials" => {
                spec.n_trials = parse_single(value)
                    .and_then(|v| to_count(v, "n_trials"))
                    .map_err(&at)?
            }
            "output" => {
                if value.is_empty() {
                    return Err(err(line, "output: empty path".into()));
                }
                spec.output = PathBuf::from(value)
            }
            "M" => spec.m = parse_counts(value, "M").map_err(&at)?,
            "K" => {
                spec.k = parse_single(value)
                    .and_then(|v| to_count(v, "K"))
                    .map_err(&at)?
            }
            "tau" => {
                spec.tau = parse_single(value)
                    .and_then(|v| to_count(v, "tau"))
                    .map_err(&at)?;
                tau_set = true;
            }
            "T" => spec.t = parse_counts(value, "T").map_err(&at)?,
            "snr_db" => spec.snr_db = parse_list(value).map_err(&at)?,
            "rho_p_db" => spec.rho_p_db = Some(parse_single(value).map_err(&at)?),
            "mean_angle_deg" => spec.mean_angle_deg = parse_single(value).map_err(&at)?,
            "spread_deg" => spec.spread_deg = parse_single(value).map_err(&at)?,
            "m_conv" => {
                spec.m_conv = parse_single(value)
                    .and_then(|v| to_count(v, "m_conv"))
                    .map_err(&at)?
            }
            "e_u_db" => spec.e_u_db = parse_single(value).map_err(&at)?,
            "se_targets" => spec.se_targets = parse_list(value).map_err(&at)?,
            "receivers" => {
                spec.receivers = value
                    .split(',')
                    .map(|r| match r.trim().to_ascii_lowercase().as_str() {
                        "mrc" => Ok(Receiver::Mrc),
                        "zf" => Ok(Receiver::Zf),
                        other => Err(err(line, format!("receivers: unknown receiver `{other}`"))),
                    })
                    .collect::<Result<_>>()?
            }
            "nml_radius" => {
                spec.nml_radius = match value.to_ascii_lowercase().as_str() {
                    "mk" => NmlRadius::Mk,
                    "k" => NmlRadius::K,
                    other => NmlRadius::Custom(parse_f64(other).map_err(|_| {
                        err(
                            line,
                            format!("nml_radius: expected mk, k or a number, got `{value}`"),
                        )
                    })?),
                }
            }
            _ => unreachable!("key list is closed"),
        }
    }
    // an explicit K without tau trains for exactly K symbols
    if !tau_set && entries.contains_key("K") {
        spec.tau = spec.k;
    }

    let line_of = |key: &str| entries.get(key).map(|e| e.0).unwrap_or(0);
    validate_spec(&spec).map_err(|(key, msg)| err(line_of(key), msg))?;
    Ok(spec)
}

/// Checks cross-key invariants; the error names the offending key.
fn validate_spec(spec: &ExperimentSpec) -> std::result::Result<(), (&'static str, String)> {
    if spec.n_trials < 1 {
        return Err(("n_trials", "n_trials must be at least 1".into()));
    }
    if spec.k < 1 {
        return Err(("K", "K must be at least 1".into()));
    }
    if spec.m.is_empty() || spec.m.contains(&0) {
        return Err(("M", "M values must be at least 1".into()));
    }
    if spec.tau < spec.k {
        return Err((
            "tau",
            format!(
                "constraint tau >= K violated: tau={}, K={}",
                spec.tau, spec.k
            ),
        ));
    }
    if let Some(&t) = spec.t.iter().find(|&&t| t <= spec.tau) {
        return Err((
            "T",
            format!("constraint T > tau violated: T={t}, tau={}", spec.tau),
        ));
    }
    if spec.snr_db.is_empty() {
        return Err(("snr_db", "SNR grid is empty".into()));
    }
    if !(spec.spread_deg > 0.0) {
        return Err(("spread_deg", "angle spread must be positive".into()));
    }
    if spec.receivers.is_empty() {
        return Err(("receivers", "at least one receiver is required".into()));
    }
    let zf = spec.receivers.contains(&Receiver::Zf);
    let needs_zf_margin = matches!(
        spec.figure,
        FigureId::Fig4SeVsSnr
            | FigureId::Fig5PowerEff
            | FigureId::Fig6BitEnergy
            | FigureId::Fig8SeVsM
    );
    if zf && needs_zf_margin {
        if let Some(&m) = spec.m.iter().find(|&&m| m <= spec.k) {
            return Err(("M", format!("ZF needs M > K, got M={m}, K={}", spec.k)));
        }
    }
    if zf && spec.figure == FigureId::Fig9Kappa && spec.m_conv <= spec.k {
        return Err((
            "m_conv",
            format!("ZF needs m_conv > K, got {}", spec.m_conv),
        ));
    }
    if spec.figure == FigureId::Fig6BitEnergy && spec.se_targets.iter().any(|&s| !(s > 0.0)) {
        return Err(("se_targets", "sum-SE targets must be positive".into()));
    }
    if let NmlRadius::Custom(r) = spec.nml_radius {
        if !(r > 0.0) {
            return Err(("nml_radius", "radius must be positive".into()));
        }
    }
    Ok(())
}

/// Reads and validates a configuration file.
pub fn validate_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentSpec> {
        parse_config(text, "test.cfg")
    }

    #[test]
    fn defaults_and_overrides() {
        let s = parse("figure = fig4_se_vs_snr\nM = 32, 64\n").unwrap();
        assert_eq!(s.t, vec![200]);
        assert_eq!(s.m, vec![32, 64]);
        assert_eq!(s.tau, 8);
        assert_eq!(s.rho_p(-10.0), 0.1);

        let s = parse("figure = fig2_mse\nsnr_db = -10:10:10  # three points\n").unwrap();
        assert_eq!(s.snr_db, vec![-10.0, 0.0, 10.0]);
        assert_eq!((s.m[0], s.k, s.tau), (16, 4, 20));

        let s = parse("figure = fig4_se_vs_snr\nK = 4\n").unwrap();
        assert_eq!(s.tau, 4);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse("figure = fig2_mse\nK = 4\ntau = 2\n")
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("test.cfg:3:"), "{e}");
        assert!(e.contains("tau >= K"), "{e}");

        let e = parse("# comment\nfigure = fig2_mse\nbogus = 1\n")
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("test.cfg:3:") && e.contains("bogus"), "{e}");

        let e = parse("figure = fig2_mse\nM = sixteen\n")
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("test.cfg:2:"), "{e}");

        let e = parse("figure = nope\n").unwrap_err().to_string();
        assert!(e.contains("nope"), "{e}");

        let e = parse("seed = 1\n").unwrap_err().to_string();
        assert!(e.contains("figure"), "{e}");

        let e = parse("figure = fig2_mse\nfigure = fig3_corr_mse\n")
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("test.cfg:2:"), "{e}");

        assert!(parse("figure = fig2_mse\nn_trials = 0\n").is_err());
        assert!(parse("figure = fig2_mse\nsnr_db = 0:-1:5\n").is_err());
        assert!(parse("figure = fig4_se_vs_snr\nM = 8\n").is_err());
        assert!(parse("figure = fig7_opt_tau\nT = 8, 100\n").is_err());
    }

    #[test]
    fn meta_keys_are_ignored_and_resolved_round_trips() {
        let s = parse("figure = fig9_kappa\nmeta.version = 9\nsnr_db = -20, -10\n").unwrap();
        let text: String = s
            .resolved()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        assert_eq!(parse(&text).unwrap(), s);
    }

    #[test]
    fn ranges_are_inclusive() {
        assert_eq!(parse_list("-20:2.5:10").unwrap().len(), 13);
        assert_eq!(parse_list("1:1:1").unwrap(), vec![1.0]);
        assert!(parse_list("1:0:3").is_err());
        assert!(parse_list("1:2").is_err());
    }
}
