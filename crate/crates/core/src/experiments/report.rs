use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::SdeSpec;
use crate::solvers::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Variance,
    Trsp,
    Steps,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Variance => "variance",
            SweepKind::Trsp => "trsp",
            SweepKind::Steps => "steps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// Finished, but the estimate is far from the posterior mean.
    HighResidual,
    Failed,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::HighResidual => "high_residual",
            RowStatus::Failed => "failed",
        }
    }
}

/// One (SDE, sampler) configuration averaged over the task draws. Carries
/// everything needed to rerun it alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sde: SdeSpec,
    pub sampler: SamplerConfig,
    pub draws: usize,
    pub na_db: Option<f64>,
    pub proxy_db: Option<f64>,
    pub residual: Option<f64>,
    pub prior_mismatch: Option<f64>,
    pub external: Option<f64>,
    /// Step sweep only: this row minus the row with the most steps.
    pub delta_na_db: Option<f64>,
    pub delta_proxy_db: Option<f64>,
    pub delta_residual: Option<f64>,
    pub status: RowStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub sweep: SweepKind,
    pub version: String,
    pub seed: u64,
    pub task: String,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidArgument(format!(
                "unknown report format {other:?}"
            ))),
        }
    }
}

pub const REPORT_CSV_COLUMNS: [&str; 22] = [
    "sweep",
    "sde",
    "gamma",
    "c",
    "k",
    "T",
    "t_rsp",
    "n_steps",
    "seed",
    "denoise_final",
    "draws",
    "na_db",
    "proxy_db",
    "residual",
    "prior_mismatch",
    "external",
    "delta_na_db",
    "delta_proxy_db",
    "delta_residual",
    "status",
    "error",
    "wall_time_s",
];

/// Six significant digits, the precision of every reported metric.
pub fn round_sig6(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format!("{v:.5e}").parse().unwrap_or(v)
}

fn metric(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.5e}")).unwrap_or_default()
}

/// Serialises the report. Column order and float formatting are fixed, so
/// equal reports give equal bytes.
pub fn render_report(report: &SweepReport, format: ReportFormat) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::InvalidArgument("report has no rows".into()));
    }
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let timed = report.rows.iter().any(|r| r.wall_time_s.is_some());
            let ncols = if timed {
                REPORT_CSV_COLUMNS.len()
            } else {
                REPORT_CSV_COLUMNS.len() - 1
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
            w.write_record(&REPORT_CSV_COLUMNS[..ncols]).map_err(io)?;
            for r in &report.rows {
                let mut rec = vec![
                    report.sweep.as_str().to_string(),
                    r.sde.kind().to_string(),
                    r.sde.gamma().to_string(),
                    r.sde.c().to_string(),
                    r.sde.k().to_string(),
                    r.sde.t_end().to_string(),
                    r.sampler.t_rsp.to_string(),
                    r.sampler.n_steps.to_string(),
                    r.sampler.seed.to_string(),
                    r.sampler.denoise_final.to_string(),
                    r.draws.to_string(),
                    metric(r.na_db),
                    metric(r.proxy_db),
                    metric(r.residual),
                    metric(r.prior_mismatch),
                    metric(r.external),
                    metric(r.delta_na_db),
                    metric(r.delta_proxy_db),
                    metric(r.delta_residual),
                    r.status.as_str().to_string(),
                    r.error.clone().unwrap_or_default(),
                ];
                if timed {
                    rec.push(metric(r.wall_time_s));
                }
                w.write_record(&rec).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
    }
}

pub fn emit_report(report: &SweepReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(report, format)?;
    std::fs::write(path, text)?;
    Ok(())
}
