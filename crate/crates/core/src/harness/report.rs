//! Report files: `report.csv` and `diagnostics.csv` are deterministic
//! (fixed columns, `{:.16e}` floats, no timings); `report.json` and
//! `summary.txt` carry everything, timings included.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::pipeline::{ConvergenceReport, DiagnosticRecord, EpsilonRow};
use crate::error::{HomogError, Result};

pub const REPORT_COLUMNS: [&str; 13] = [
    "epsilon",
    "n",
    "steps",
    "error_zeroth",
    "error_first",
    "two_scale_residual",
    "corrector_residual",
    "limit_residual",
    "mass_drift",
    "macro_mass_drift",
    "l2q",
    "l2h1",
    "first_over_zeroth",
];

pub const DIAGNOSTIC_COLUMNS: [&str; 8] = [
    "diagnostic",
    "epsilon",
    "value_re",
    "value_im",
    "reference_re",
    "reference_im",
    "residual",
    "relative_residual",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// `report.csv` and `diagnostics.csv`
    Csv,
    /// `summary.txt`
    Text,
    /// `report.json`
    Json,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Text, ReportFormat::Json];
}

impl std::str::FromStr for ReportFormat {
    type Err = HomogError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "text" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            other => Err(HomogError::InvalidProblem(format!(
                "unknown report format `{other}` (expected csv, text or json)"
            ))),
        }
    }
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_string(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn report_csv(rows: &[EpsilonRow]) -> String {
    csv_string(
        &REPORT_COLUMNS,
        rows.iter().map(|r| {
            vec![
                sci(r.epsilon),
                r.n.to_string(),
                r.steps.to_string(),
                sci(r.error_zeroth),
                sci(r.error_first),
                sci(r.two_scale_residual),
                sci(r.corrector_residual),
                sci(r.limit_residual),
                sci(r.mass_drift),
                sci(r.macro_mass_drift),
                sci(r.l2q),
                sci(r.l2h1),
                sci(r.error_first / r.error_zeroth),
            ]
        }),
    )
}

pub fn diagnostics_csv(records: &[DiagnosticRecord]) -> String {
    csv_string(
        &DIAGNOSTIC_COLUMNS,
        records.iter().map(|d| {
            let scale = d.reference.norm();
            let relative = if scale > 0.0 { d.residual / scale } else { f64::NAN };
            vec![
                d.diagnostic.clone(),
                sci(d.epsilon),
                sci(d.value.re),
                sci(d.value.im),
                sci(d.reference.re),
                sci(d.reference.im),
                sci(d.residual),
                sci(relative),
            ]
        }),
    )
}

fn parse_error(message: String) -> HomogError {
    HomogError::Format(message)
}

fn records(text: &str, expected: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| parse_error(e.to_string()))?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(parse_error(format!("unexpected header {header:?}")));
    }
    r.records()
        .map(|rec| rec.map_err(|e| parse_error(e.to_string())))
        .collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec[i]
        .parse()
        .map_err(|_| parse_error(format!("cannot parse `{}` in column {i}", &rec[i])))
}

/// Inverse of [`report_csv`]; the derived last column is ignored.
pub fn parse_report_csv(text: &str) -> Result<Vec<EpsilonRow>> {
    records(text, &REPORT_COLUMNS)?
        .iter()
        .map(|r| {
            Ok(EpsilonRow {
                epsilon: field(r, 0)?,
                n: field(r, 1)?,
                steps: field(r, 2)?,
                error_zeroth: field(r, 3)?,
                error_first: field(r, 4)?,
                two_scale_residual: field(r, 5)?,
                corrector_residual: field(r, 6)?,
                limit_residual: field(r, 7)?,
                mass_drift: field(r, 8)?,
                macro_mass_drift: field(r, 9)?,
                l2q: field(r, 10)?,
                l2h1: field(r, 11)?,
            })
        })
        .collect()
}

/// Inverse of [`diagnostics_csv`]; the relative residual column is ignored.
pub fn parse_diagnostics_csv(text: &str) -> Result<Vec<DiagnosticRecord>> {
    records(text, &DIAGNOSTIC_COLUMNS)?
        .iter()
        .map(|r| {
            let value = Complex64::new(field(r, 2)?, field(r, 3)?);
            let reference = Complex64::new(field(r, 4)?, field(r, 5)?);
            Ok(DiagnosticRecord {
                diagnostic: r[0].to_string(),
                epsilon: field(r, 1)?,
                value,
                reference,
                residual: field(r, 6)?,
            })
        })
        .collect()
}

fn verdict(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "n/a (single eps)",
    }
}

pub fn summary_text(r: &ConvergenceReport) -> String {
    let mut s = String::new();
    let m = &r.model;
    let _ = writeln!(s, "effective model (d = {})", m.dim());
    for row in &m.q {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.10}")).collect();
        let _ = writeln!(s, "  q   = [{}]", cells.join(", "));
    }
    let b: Vec<String> = m.b.iter().map(|v| format!("{v:.3e}")).collect();
    let _ = writeln!(s, "  b   = [{}]", b.join(", "));
    let _ = writeln!(s, "  mu  = {:.10}", m.mu);
    let _ = writeln!(
        s,
        "  coefficient range [{:.6}, {:.6}], potential sup {:.6}",
        r.coefficient.alpha_eff, r.coefficient.c1, r.potential.sup_norm
    );
    let _ = writeln!(
        s,
        "  macro operator: q in [{:.6}, {:.6}], drift antisymmetry defect {:.3e}",
        r.spectrum.q_min, r.spectrum.q_max, r.spectrum.drift_antisymmetry_defect
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:>10} {:>6} {:>6} {:>11} {:>11} {:>11} {:>11} {:>11} {:>10} {:>9} {:>8}",
        "eps", "n", "steps", "e0", "e1", "two-scale", "corrector", "limit", "mass", "l2h1", "seconds"
    );
    for (i, row) in r.rows.iter().enumerate() {
        let secs = r.timings.per_epsilon_seconds.get(i).copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            s,
            "{:>10.6} {:>6} {:>6} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>10.2e} {:>9.4} {:>8.2}",
            row.epsilon,
            row.n,
            row.steps,
            row.error_zeroth,
            row.error_first,
            row.two_scale_residual,
            row.corrector_residual,
            row.limit_residual,
            row.mass_drift,
            row.l2h1,
            secs
        );
    }
    let _ = writeln!(s);
    let v = &r.verdicts;
    let _ = writeln!(
        s,
        "zeroth-order error decreasing: {}",
        verdict(v.zeroth_order_decreasing)
    );
    let _ = writeln!(
        s,
        "first-order error not worse:   {}",
        verdict(v.first_order_not_worse)
    );
    let _ = writeln!(
        s,
        "l2h1 within factor two:        {}",
        verdict(v.l2h1_within_factor_two)
    );
    if !v.observed_orders.is_empty() {
        let orders: Vec<String> = v.observed_orders.iter().map(|o| format!("{o:.3}")).collect();
        let _ = writeln!(s, "observed orders (zeroth):      {}", orders.join(", "));
    }
    let _ = writeln!(
        s,
        "cell stage {:.2} s, total {:.2} s",
        r.timings.cell_seconds, r.timings.total_seconds
    );
    s
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| HomogError::io(&path, e))?;
    Ok(path)
}

/// Writes the requested formats into `dir` and returns the files written.
pub fn emit_report(
    r: &ConvergenceReport,
    dir: impl AsRef<Path>,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| HomogError::io(dir, e))?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Csv => {
                written.push(write(dir.join("report.csv"), &report_csv(&r.rows))?);
                written.push(write(
                    dir.join("diagnostics.csv"),
                    &diagnostics_csv(&r.diagnostics),
                )?);
            }
            ReportFormat::Text => written.push(write(dir.join("summary.txt"), &summary_text(r))?),
            ReportFormat::Json => {
                let json = serde_json::to_string_pretty(r).map_err(|e| HomogError::Format(e.to_string()))?;
                written.push(write(dir.join("report.json"), &json)?);
            }
        }
    }
    Ok(written)
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<ConvergenceReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HomogError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HomogError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(eps: f64) -> EpsilonRow {
        EpsilonRow {
            epsilon: eps,
            n: 15,
            steps: 8,
            error_zeroth: 0.1 * eps,
            error_first: std::f64::consts::PI * 1e-300,
            two_scale_residual: 1.0 / 3.0,
            corrector_residual: 0.0,
            limit_residual: -0.0,
            mass_drift: 2e-15,
            macro_mass_drift: 1e-16,
            l2q: 0.7,
            l2h1: 2.48,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(report_csv(&[]), format!("{}\n", REPORT_COLUMNS.join(",")));
        assert!(parse_report_csv(&report_csv(&[])).unwrap().is_empty());
    }

    #[test]
    fn report_csv_round_trips_exactly() {
        let rows = vec![row(0.125), row(1.0 / 3.0)];
        let text = report_csv(&rows);
        assert!(!text.contains('\r'));
        assert_eq!(parse_report_csv(&text).unwrap(), rows);
    }

    #[test]
    fn diagnostics_round_trip() {
        let recs = vec![DiagnosticRecord {
            diagnostic: "two_scale[0]".into(),
            epsilon: 0.0625,
            value: Complex64::new(0.1, -0.2),
            reference: Complex64::new(0.1, -0.19),
            residual: 0.01,
        }];
        assert_eq!(parse_diagnostics_csv(&diagnostics_csv(&recs)).unwrap(), recs);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(parse_report_csv("eps,n\n1,2\n").is_err());
    }

    #[test]
    fn format_names_parse() {
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
