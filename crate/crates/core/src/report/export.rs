//! File exports.
//!
//! * `report.json`: the full [`RunReport`].
//! * `requests.csv`: one row per request, columns in [`REQUEST_COLUMNS`] order.
//! * `cdf_<metric>.csv`: `value,cumulative_fraction`, one row per sample.
//! * `cdf_<metric>.svg`: CDF plot.
//!
//! Comparisons write `comparison.json`, `comparison.csv` and one SVG per
//! metric with one curve per run.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::svg::cdf_svg;
use super::{Comparison, MetricKind, ReportError, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Json,
    Csv,
    Svg,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(format!("unknown export format {other:?}")),
        }
    }
}

pub const REQUEST_COLUMNS: [&str; 14] = [
    "request_id",
    "prompt_tokens",
    "requested_tokens",
    "output_tokens",
    "ttft_s",
    "ttlt_s",
    "scheduling_delay_s",
    "tpot_s",
    "normalized_latency_s_per_token",
    "max_tbt_s",
    "fluidity_index",
    "deadlines_met",
    "deadlines_missed",
    "slo_attained",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExportedFiles {
    pub paths: Vec<PathBuf>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> ReportError {
    ReportError::Io(std::io::Error::other(e.to_string()))
}

fn write_cdf_csv(path: &Path, points: &[f64]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["value", "cumulative_fraction"])
        .map_err(csv_err)?;
    let n = points.len() as f64;
    for (i, v) in points.iter().enumerate() {
        w.write_record([format!("{v:.9}"), format!("{:.9}", (i + 1) as f64 / n)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export(
    report: &RunReport,
    dir: &Path,
    formats: &[ExportFormat],
) -> Result<ExportedFiles, ReportError> {
    fs::create_dir_all(dir)?;
    let mut files = ExportedFiles::default();
    if formats.contains(&ExportFormat::Json) {
        let p = dir.join("report.json");
        fs::write(&p, report.to_json()?)?;
        files.paths.push(p);
    }
    if formats.contains(&ExportFormat::Csv) {
        let p = dir.join("requests.csv");
        let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
        w.write_record(REQUEST_COLUMNS).map_err(csv_err)?;
        for r in &report.requests {
            w.write_record([
                r.request_id.to_string(),
                r.prompt_tokens.to_string(),
                r.requested_tokens.to_string(),
                r.output_tokens.to_string(),
                format!("{:.9}", r.ttft_s),
                format!("{:.9}", r.ttlt_s),
                opt(r.scheduling_delay_s),
                opt(r.tpot_s),
                format!("{:.9}", r.normalized_latency_s_per_token),
                opt(r.max_tbt_s),
                format!("{:.9}", r.fluidity_index),
                r.deadlines_met.to_string(),
                r.deadlines_missed.to_string(),
                r.slo_attained.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        files.paths.push(p);
        for (kind, summary) in &report.metrics {
            if let Some(points) = &summary.cdf_points {
                let p = dir.join(format!("cdf_{kind}.csv"));
                write_cdf_csv(&p, points)?;
                files.paths.push(p);
            }
        }
    }
    if formats.contains(&ExportFormat::Svg) {
        for (kind, summary) in &report.metrics {
            if let Some(points) = &summary.cdf_points {
                let p = dir.join(format!("cdf_{kind}.svg"));
                fs::write(
                    &p,
                    cdf_svg(
                        &format!("{kind} CDF"),
                        kind.unit(),
                        &[("run".to_string(), points.clone())],
                    ),
                )?;
                files.paths.push(p);
            }
        }
    }
    Ok(files)
}

/// Writes comparison outputs; `labels` name the runs in plots.
pub fn export_comparison(
    reports: &[RunReport],
    labels: &[String],
    comparison: &Comparison,
    dir: &Path,
    formats: &[ExportFormat],
) -> Result<ExportedFiles, ReportError> {
    fs::create_dir_all(dir)?;
    let mut files = ExportedFiles::default();
    if formats.contains(&ExportFormat::Json) {
        let p = dir.join("comparison.json");
        fs::write(&p, serde_json::to_string_pretty(comparison)?)?;
        files.paths.push(p);
    }
    if formats.contains(&ExportFormat::Csv) {
        let p = dir.join("comparison.csv");
        let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
        w.write_record([
            "run",
            "metric",
            "stat",
            "baseline",
            "value",
            "ratio",
            "direction",
        ])
        .map_err(csv_err)?;
        for r in &comparison.rows {
            w.write_record([
                r.run.to_string(),
                r.metric.to_string(),
                r.stat.clone(),
                format!("{:.9}", r.baseline),
                format!("{:.9}", r.value),
                opt(r.ratio),
                format!("{:?}", r.direction).to_lowercase(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        files.paths.push(p);
    }
    if formats.contains(&ExportFormat::Svg) {
        for kind in MetricKind::ALL {
            let series: Vec<(String, Vec<f64>)> = reports
                .iter()
                .enumerate()
                .filter_map(|(i, r)| {
                    let pts = r.metric(kind)?.cdf_points.clone()?;
                    let label = labels.get(i).cloned().unwrap_or_else(|| format!("run {i}"));
                    Some((label, pts))
                })
                .collect();
            if series.len() == reports.len() {
                let p = dir.join(format!("cdf_{kind}.svg"));
                fs::write(&p, cdf_svg(&format!("{kind} CDF"), kind.unit(), &series))?;
                files.paths.push(p);
            }
        }
    }
    Ok(files)
}
