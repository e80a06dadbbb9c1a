//! Structured check reports with byte-deterministic JSON output.
//!
//! Numbers are serialized with 17 significant digits so identical runs
//! produce identical bytes; the wall-time field is the one exception callers
//! are expected to mask when diffing.

use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

/// Aggregated residual statistics for one named check.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub name: String,
    pub tol: f64,
    /// `true` when the tolerance is a lower bound the statistic must exceed
    /// (negative controls).
    pub lower_bound: bool,
    pub max: f64,
    pub mean: f64,
    pub points: usize,
    pub skipped: usize,
    /// Diagnostics for skipped points (degenerate eigenvalues, margins).
    pub skip_notes: Vec<String>,
    pub pass: bool,
    pub residuals: Vec<f64>,
}

impl ResidualReport {
    /// Builds from per-point outcomes; `None` marks a skipped point
    /// (degenerate metric, dualization margin). A check fails when more than
    /// 10% of its points were skipped.
    pub fn from_samples(name: &str, tol: f64, outcomes: Vec<Option<f64>>) -> Self {
        let total = outcomes.len();
        let residuals: Vec<f64> = outcomes.iter().filter_map(|o| *o).collect();
        let skipped = total - residuals.len();
        let max = if residuals.is_empty() {
            0.0
        } else {
            residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        };
        let mean = if residuals.is_empty() {
            0.0
        } else {
            residuals.iter().sum::<f64>() / residuals.len() as f64
        };
        let pass = !residuals.is_empty() && max <= tol && 10 * skipped <= total;
        ResidualReport {
            name: name.to_string(),
            tol,
            lower_bound: false,
            max,
            mean,
            points: total,
            skipped,
            skip_notes: Vec::new(),
            pass,
            residuals,
        }
    }

    /// Attaches diagnostics describing why points were skipped.
    pub fn with_skip_notes(mut self, notes: Vec<String>) -> Self {
        self.skip_notes = notes;
        self
    }

    /// A control check: passes when every statistic EXCEEDS the threshold.
    pub fn from_control(name: &str, threshold: f64, values: Vec<f64>) -> Self {
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        let pass = !values.is_empty() && min > threshold;
        ResidualReport {
            name: name.to_string(),
            tol: threshold,
            lower_bound: true,
            max: min,
            mean,
            points: values.len(),
            skipped: 0,
            skip_notes: Vec::new(),
            pass,
            residuals: values,
        }
    }

    pub fn one_line(&self) -> String {
        let cmp = if self.lower_bound { ">" } else { "<=" };
        format!(
            "{} {} ({} {} {:.3e}, {} pts, {} skipped, max {:.3e}, mean {:.3e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            if self.lower_bound { "min" } else { "max" },
            cmp,
            self.tol,
            self.points,
            self.skipped,
            self.max,
            self.mean,
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportConfig {
    pub inputs: Vec<String>,
    pub points: usize,
    pub seed: u64,
    pub engine: String,
    pub tol_overrides: BTreeMap<String, f64>,
    pub side: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ReportConfig,
    pub checks: Vec<ResidualReport>,
    pub pass: bool,
    pub wall_ms: f64,
}

impl Report {
    pub fn new(command: &str, config: ReportConfig, checks: Vec<ResidualReport>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Report {
            tool: "gcinf".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            checks,
            pass,
            wall_ms: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
        self.serialize(&mut ser).expect("report serializes");
        out.push(b'\n');
        String::from_utf8(out).expect("json is utf-8")
    }

    /// JSON with the wall-time field zeroed; byte-identical across runs with
    /// the same inputs, seed and engine.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.wall_ms = 0.0;
        c.to_json()
    }
}

/// Compact JSON with floats at 17 significant digits.
struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_aggregation_and_skip_policy() {
        let r = ResidualReport::from_samples(
            "demo",
            1e-8,
            vec![Some(1e-9), Some(2e-9), None, Some(3e-9)],
        );
        assert!(r.pass == false, "25% skipped must fail");
        assert_eq!(r.skipped, 1);
        assert_eq!(r.points, 4);
        assert!(r.max >= r.mean && r.mean >= 0.0);

        let ok = ResidualReport::from_samples("demo", 1e-8, vec![Some(1e-9); 12]);
        assert!(ok.pass);
        let bad = ResidualReport::from_samples("demo", 1e-10, vec![Some(1e-9); 12]);
        assert!(!bad.pass);
    }

    #[test]
    fn control_checks_use_lower_bound() {
        let r = ResidualReport::from_control("control", 1e-3, vec![0.02, 0.3]);
        assert!(r.pass);
        assert!(r.one_line().contains("PASS"));
        let r = ResidualReport::from_control("control", 1e-3, vec![0.02, 1e-5]);
        assert!(!r.pass);
    }

    #[test]
    fn json_is_deterministic_and_17_digits() {
        let config = ReportConfig {
            inputs: vec!["builtin:flat2".into()],
            points: 4,
            seed: 7,
            engine: "ad".into(),
            tol_overrides: BTreeMap::new(),
            side: None,
        };
        let checks = vec![ResidualReport::from_samples(
            "x",
            1e-8,
            vec![Some(1.0 / 3.0)],
        )];
        let mut a = Report::new("curvature", config.clone(), checks.clone());
        a.wall_ms = 12.5;
        let mut b = Report::new("curvature", config, checks);
        b.wall_ms = 99.0;
        assert_ne!(a.to_json(), b.to_json());
        assert_eq!(a.canonical_json(), b.canonical_json());
        assert!(a.to_json().contains("3.3333333333333331e-1"));
    }
}
