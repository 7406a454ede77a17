//! CSV, JSON and eigenvalue writers.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::run::SolveReport;
use crate::harness::sweep::SweepReport;

pub const CSV_COLUMNS: [&str; 20] = [
    "parameter",
    "value",
    "method",
    "p",
    "q",
    "h",
    "N",
    "M",
    "error",
    "stability_norm",
    "sigma_max_E",
    "sigma_min_D",
    "kappa_D",
    "kappa_E",
    "max_local_condition",
    "normal_condition",
    "refinement_steps",
    "R1_seconds",
    "R2_seconds",
    "failure",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn record(
    parameter: &str,
    value: f64,
    report: Option<&SolveReport>,
    failure: Option<&str>,
) -> Vec<String> {
    let mut out = vec![parameter.to_string(), value.to_string()];
    match report {
        Some(report) => out.extend([
            report.method.clone(),
            report.degree.to_string(),
            report.oversampling.to_string(),
            report.spacing.to_string(),
            report.trial_nodes.to_string(),
            report.evaluation_points.to_string(),
            format!("{:e}", report.error),
            opt(report.stability_norm),
            opt(report.sigma_max_e),
            opt(report.sigma_min_d),
            opt(report.kappa_d),
            opt(report.kappa_e),
            format!("{:e}", report.max_local_condition),
            opt(report.solve.normal_condition),
            report.solve.refinement_steps.to_string(),
            report.r1_seconds.to_string(),
            report.r2_seconds.to_string(),
        ]),
        None => out.extend(std::iter::repeat_n(String::new(), CSV_COLUMNS.len() - 3)),
    }
    out.push(failure.unwrap_or_default().to_string());
    out
}

fn config_header<W: Write>(w: &mut W, cfg: &ExperimentConfig) -> Result<()> {
    for line in cfg.to_toml().lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// Writes a sweep as CSV: the configuration as `#` comment lines, a header
/// row, then one row per sweep point. Missing values are empty fields.
pub fn write_sweep_csv<W: Write>(
    mut w: W,
    cfg: &ExperimentConfig,
    sweep: &SweepReport,
) -> Result<()> {
    config_header(&mut w, cfg)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(CSV_COLUMNS)?;
    for row in &sweep.rows {
        csv.write_record(record(
            &sweep.parameter,
            row.value,
            row.report.as_ref(),
            row.failure.as_deref(),
        ))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_solve_csv<W: Write>(
    mut w: W,
    cfg: &ExperimentConfig,
    report: &SolveReport,
) -> Result<()> {
    config_header(&mut w, cfg)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(CSV_COLUMNS)?;
    csv.write_record(record("h", report.spacing, Some(report), None))?;
    csv.flush()?;
    Ok(())
}

/// One `re im` line per eigenvalue.
pub fn write_eigenvalues<W: Write>(mut w: W, eigenvalues: &[(f64, f64)]) -> Result<()> {
    for (re, im) in eigenvalues {
        writeln!(w, "{re:e} {im:e}")?;
    }
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::SweepRow;

    #[test]
    fn failed_rows_keep_all_columns() {
        let cfg = ExperimentConfig::default();
        let sweep = SweepReport {
            parameter: "q".into(),
            rows: vec![SweepRow {
                value: 2.0,
                report: None,
                failure: Some("solve: singular".into()),
            }],
            fit: None,
        };
        let mut out = Vec::new();
        write_sweep_csv(&mut out, &cfg, &sweep).unwrap();
        let text = String::from_utf8(out).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 2);
        assert_eq!(data[1].matches(',').count(), CSV_COLUMNS.len() - 1);
        assert!(data[1].starts_with("q,2,,"));
        assert!(data[1].ends_with("solve: singular"));
    }
}
