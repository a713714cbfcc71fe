//! Run aggregation: distribution summaries, SLO attainment, lint findings and
//! multi-run comparison.

mod compare;
mod export;
mod lint;
mod svg;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::deadline::{make_deadlines, DeadlinePolicy};
use crate::metrics::{
    compute_request_metrics, summarize, DistributionSummary, MetricsError, RequestMetrics,
};
use crate::model::{FinishReason, RunRecord};
use crate::slo::SloSpec;

pub use compare::{compare, stat_label, Comparison, ComparisonRow, Direction, TradeOffFlag};
pub use export::{export, export_comparison, ExportFormat, ExportedFiles};
pub use lint::{manual_checklist, LintFinding, Severity};
pub use svg::cdf_svg;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no finished requests inside the steady-state window")]
    NoFinishedRequests,
    #[error("reports cover different workloads ({0} vs {1})")]
    WorkloadMismatch(String, String),
    #[error("comparison needs at least two reports and a valid baseline index")]
    NotEnoughReports,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Ttft,
    Ttlt,
    Tbt,
    Tpot,
    NormalizedLatency,
    SchedulingDelay,
    Fluidity,
}

impl MetricKind {
    pub const ALL: [MetricKind; 7] = [
        MetricKind::Ttft,
        MetricKind::Ttlt,
        MetricKind::Tbt,
        MetricKind::Tpot,
        MetricKind::NormalizedLatency,
        MetricKind::SchedulingDelay,
        MetricKind::Fluidity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Ttft => "ttft",
            MetricKind::Ttlt => "ttlt",
            MetricKind::Tbt => "tbt",
            MetricKind::Tpot => "tpot",
            MetricKind::NormalizedLatency => "normalized_latency",
            MetricKind::SchedulingDelay => "scheduling_delay",
            MetricKind::Fluidity => "fluidity",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            MetricKind::NormalizedLatency => "s/token",
            MetricKind::Fluidity => "",
            _ => "s",
        }
    }

    /// Values contributed by one request.
    fn values(self, m: &RequestMetrics) -> Vec<f64> {
        match self {
            MetricKind::Ttft => vec![m.ttft_s],
            MetricKind::Ttlt => vec![m.ttlt_s],
            MetricKind::Tbt => m.tbt_s.clone(),
            MetricKind::Tpot => m.tpot_s.into_iter().collect(),
            MetricKind::NormalizedLatency => vec![m.normalized_latency_s_per_token],
            MetricKind::SchedulingDelay => m.scheduling_delay_s.into_iter().collect(),
            MetricKind::Fluidity => vec![m.fluidity_index],
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub percentiles: Vec<f64>,
    /// Metrics presented as headline numbers; used by the normalization lint.
    pub headline: Vec<MetricKind>,
    pub keep_cdf: bool,
    pub practical_ttft_bound_s: f64,
    pub practical_tbt_bound_s: f64,
    /// Median scheduling delay above which normalized latency is flagged.
    pub normalization_delay_threshold_s: f64,
    /// Gap length counted as a generation stall; defaults to `max(5*D_d, 1 s)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stall_threshold_s: Option<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            percentiles: vec![50.0, 90.0, 99.0],
            headline: MetricKind::ALL.to_vec(),
            keep_cdf: true,
            practical_ttft_bound_s: 10.0,
            practical_tbt_bound_s: 1.0,
            normalization_delay_threshold_s: 1.0,
            stall_threshold_s: None,
        }
    }
}

/// Per-request row of the CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRow {
    pub request_id: u64,
    pub prompt_tokens: u64,
    pub requested_tokens: u64,
    pub output_tokens: u64,
    pub ttft_s: f64,
    pub ttlt_s: f64,
    pub scheduling_delay_s: Option<f64>,
    pub tpot_s: Option<f64>,
    pub normalized_latency_s_per_token: f64,
    pub max_tbt_s: Option<f64>,
    pub fluidity_index: f64,
    pub deadlines_met: u64,
    pub deadlines_missed: u64,
    pub slo_attained: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenAccounting {
    /// Sum of requested output lengths over requests that finished by length.
    pub requested_tokens: u64,
    /// Tokens observed for those same requests.
    pub generated_tokens: u64,
    /// Provider-reported counts for those same requests, when reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_reported_tokens: Option<u64>,
}

impl TokenAccounting {
    pub fn conserved(&self) -> bool {
        self.requested_tokens == self.generated_tokens
            && self
                .provider_reported_tokens
                .is_none_or(|p| p == self.generated_tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub workload_fingerprint: String,
    pub config_fingerprint: String,
    pub seed: u64,
    /// Finished requests inside the steady-state window.
    pub request_count: usize,
    pub excluded_by_window: usize,
    pub unfinished: usize,
    /// TBT and TPOT counts differ from `request_count`: TBT counts gaps and
    /// TPOT skips single-token outputs. Scheduling delay is absent unless the
    /// scheduler boundary was observable.
    pub metrics: BTreeMap<MetricKind, DistributionSummary>,
    pub slo: SloSpec,
    pub slo_attainment: f64,
    pub slo_attained: bool,
    pub deadlines: DeadlinePolicy,
    pub stall_threshold_s: f64,
    pub stall_count: usize,
    pub tokens: TokenAccounting,
    /// TBT reflects streaming events rather than individual tokens.
    pub event_level_tbt: bool,
    pub percentiles: Vec<f64>,
    pub lints: Vec<LintFinding>,
    pub manual_checklist: Vec<String>,
    pub requests: Vec<RequestRow>,
}

impl RunReport {
    pub fn metric(&self, kind: MetricKind) -> Option<&DistributionSummary> {
        self.metrics.get(&kind)
    }

    pub fn has_failures(&self) -> bool {
        self.lints.iter().any(|l| l.severity == Severity::Fail)
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Per-request metrics for finished, steady-state requests.
pub fn steady_state_metrics(
    run: &RunRecord,
    deadlines: &DeadlinePolicy,
) -> Result<Vec<(u64, RequestMetrics)>, MetricsError> {
    let mut out = Vec::new();
    for (spec, t) in run.pairs() {
        if !t.finished || t.token_times.is_empty() || !run.in_steady_state(spec, t) {
            continue;
        }
        let d = make_deadlines(deadlines, spec);
        out.push((spec.prompt_tokens, compute_request_metrics(t, spec, &d)?));
    }
    Ok(out)
}

pub fn build_report(
    run: &RunRecord,
    deadlines: &DeadlinePolicy,
    slo: &SloSpec,
    opts: &ReportOptions,
) -> Result<RunReport, ReportError> {
    let pairs = run.pairs();
    let mut rows = Vec::new();
    let mut metrics = Vec::new();
    let mut excluded = 0usize;
    let mut unfinished = 0usize;
    let mut tokens = TokenAccounting {
        requested_tokens: 0,
        generated_tokens: 0,
        provider_reported_tokens: None,
    };
    let mut event_level = false;
    for (spec, t) in &pairs {
        if !t.finished || t.token_times.is_empty() || t.finish_reason == Some(FinishReason::Error) {
            unfinished += 1;
            continue;
        }
        if !run.in_steady_state(spec, t) {
            excluded += 1;
            continue;
        }
        let d = make_deadlines(deadlines, spec);
        let m = compute_request_metrics(t, spec, &d)?;
        if t.finish_reason == Some(FinishReason::Length) {
            tokens.requested_tokens += spec.decode_tokens;
            tokens.generated_tokens += t.total_tokens();
            if let Some(p) = t.provider_tokens {
                *tokens.provider_reported_tokens.get_or_insert(0) += p;
            }
        }
        event_level |= t.event_level_only;
        rows.push(RequestRow {
            request_id: spec.id,
            prompt_tokens: spec.prompt_tokens,
            requested_tokens: spec.decode_tokens,
            output_tokens: m.output_tokens,
            ttft_s: m.ttft_s,
            ttlt_s: m.ttlt_s,
            scheduling_delay_s: m.scheduling_delay_s,
            tpot_s: m.tpot_s,
            normalized_latency_s_per_token: m.normalized_latency_s_per_token,
            max_tbt_s: m.tbt_s.iter().copied().reduce(f64::max),
            fluidity_index: m.fluidity_index,
            deadlines_met: m.deadlines_met,
            deadlines_missed: m.deadlines_missed,
            slo_attained: slo.request_attains(&m),
        });
        metrics.push(m);
    }
    if metrics.is_empty() {
        return Err(ReportError::NoFinishedRequests);
    }

    let mut summaries = BTreeMap::new();
    for kind in MetricKind::ALL {
        let values: Vec<f64> = metrics.iter().flat_map(|m| kind.values(m)).collect();
        if values.is_empty() {
            continue;
        }
        summaries.insert(kind, summarize(&values, &opts.percentiles, opts.keep_cdf)?);
    }

    let stall_threshold_s = opts
        .stall_threshold_s
        .unwrap_or_else(|| (5.0 * deadlines.decode_deadline_s).max(1.0));
    let stall_count = metrics
        .iter()
        .flat_map(|m| m.tbt_s.iter())
        .filter(|&&g| g > stall_threshold_s)
        .count();
    let slo_attainment = slo.attainment(&metrics);
    let lints = lint::evaluate(&metrics, opts);

    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        workload_fingerprint: run.workload_fingerprint(),
        config_fingerprint: run.config_fingerprint.clone(),
        seed: run.seed,
        request_count: metrics.len(),
        excluded_by_window: excluded,
        unfinished,
        metrics: summaries,
        slo: *slo,
        slo_attainment,
        slo_attained: slo.run_attains(&metrics),
        deadlines: deadlines.clone(),
        stall_threshold_s,
        stall_count,
        tokens,
        event_level_tbt: event_level,
        percentiles: opts.percentiles.clone(),
        lints,
        manual_checklist: manual_checklist(),
        requests: rows,
    })
}

#[cfg(test)]
mod tests;
