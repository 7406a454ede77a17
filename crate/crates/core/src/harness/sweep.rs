//! Parameter sweeps over h, p and q. A failing row is recorded and the
//! sweep continues.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::run::{run_solve, spacing_for_count, SolveReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Swept parameter value.
    pub value: f64,
    pub report: Option<SolveReport>,
    pub failure: Option<String>,
}

/// Least-squares line through `(log h, log err)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    /// Root mean square residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// `h`, `p` or `q`.
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    pub fit: Option<RateFit>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.report.is_none()).count()
    }

    pub fn reports(&self) -> impl Iterator<Item = &SolveReport> {
        self.rows.iter().filter_map(|r| r.report.as_ref())
    }
}

/// Fits `log err = rate · log h + c` over the finest `max(4, ⌈len/2⌉)`
/// samples. Nonpositive or nonfinite samples are skipped.
pub fn fit_rate(samples: &[(f64, f64)]) -> Option<RateFit> {
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0 && h.is_finite() && e.is_finite())
        .map(|&(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let keep = 4.max(pts.len().div_ceil(2)).min(pts.len());
    let pts = &pts[..keep];
    let count = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / count;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let rate = sxy / sxx;
    let intercept = my - rate * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - rate * p.0 - intercept).powi(2))
        .sum::<f64>()
        / count)
        .sqrt();
    Some(RateFit {
        rate,
        intercept,
        residual,
        points: pts.len(),
    })
}

fn row(value: f64, result: Result<SolveReport>) -> SweepRow {
    match result {
        Ok(report) => SweepRow {
            value,
            report: Some(report),
            failure: None,
        },
        Err(e) => {
            log::warn!("sweep point {value}: {e}");
            SweepRow {
                value,
                report: None,
                failure: Some(e.to_string()),
            }
        }
    }
}

/// Spacings of an h-sweep: `cfg.spacings`, or the spacings that hit `cfg.n_targets`.
pub fn sweep_spacings(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    if cfg.n_targets.is_empty() {
        return Ok(cfg.spacings.clone());
    }
    let domain = cfg.domain()?;
    let mode = match cfg.pde {
        crate::harness::config::PdeKind::Advection => crate::geometry::BcMode::Inflow,
        crate::harness::config::PdeKind::Poisson => cfg.bc_mode,
    };
    cfg.n_targets
        .iter()
        .map(|&target| spacing_for_count(&domain, target, cfg.seed, mode))
        .collect()
}

pub fn run_h_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let spacings = sweep_spacings(cfg)?;
    let rows: Vec<SweepRow> = spacings
        .iter()
        .map(|&spacing| row(spacing, run_solve(cfg, spacing)))
        .collect();
    let samples: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.report.as_ref().map(|s| (s.spacing, s.error)))
        .collect();
    Ok(SweepReport {
        parameter: "h".into(),
        fit: fit_rate(&samples),
        rows,
    })
}

pub fn run_p_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let spacing = cfg.spacings[0];
    let rows = cfg
        .degrees
        .iter()
        .map(|&degree| {
            let variant = ExperimentConfig {
                degree,
                ..cfg.clone()
            };
            row(degree as f64, run_solve(&variant, spacing))
        })
        .collect();
    Ok(SweepReport {
        parameter: "p".into(),
        rows,
        fit: None,
    })
}

pub fn run_q_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let spacing = cfg.spacings[0];
    let rows = cfg
        .oversampling_values
        .iter()
        .map(|&oversampling| {
            let variant = ExperimentConfig {
                oversampling,
                ..cfg.clone()
            };
            row(oversampling, run_solve(&variant, spacing))
        })
        .collect();
    Ok(SweepReport {
        parameter: "q".into(),
        rows,
        fit: None,
    })
}
