//! Per-request latency metrics, the deadline-based fluidity index and
//! distribution summaries.

use serde::{Deserialize, Serialize};

use crate::model::{ModelError, RequestSpec, TokenTimeline};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("request {0} has not finished")]
    UnfinishedTimeline(u64),
    #[error("request {0} produced no tokens")]
    ZeroTokens(u64),
    #[error("cannot summarize an empty sample")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFiniteSample,
    #[error("percentile {0} outside [0, 100]")]
    BadPercentile(f64),
    #[error("deadlines must be positive and finite (prefill={prefill}, decode={decode})")]
    BadDeadline { prefill: f64, decode: f64 },
    #[error(transparent)]
    Timeline(#[from] ModelError),
}

/// Fluidity targets for one request: a deadline for the first token measured
/// from submission, then one deadline per subsequent token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadlineSpec {
    pub prefill_deadline_s: f64,
    pub decode_deadline_s: f64,
}

impl DeadlineSpec {
    pub fn new(prefill_deadline_s: f64, decode_deadline_s: f64) -> Result<Self, MetricsError> {
        let d = Self {
            prefill_deadline_s,
            decode_deadline_s,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(self.prefill_deadline_s) && ok(self.decode_deadline_s) {
            Ok(())
        } else {
            Err(MetricsError::BadDeadline {
                prefill: self.prefill_deadline_s,
                decode: self.decode_deadline_s,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fluidity {
    pub index: f64,
    pub met: u64,
    pub missed: u64,
}

/// Runs the deadline automaton over per-token arrival times.
///
/// The first deadline sits `prefill_deadline_s` after submission. A token at
/// or before its deadline counts as met and the next deadline is one decode
/// interval later, so early tokens bank slack. A late token is charged one
/// miss for every deadline that elapsed before it arrived, and the schedule
/// restarts one decode interval after the late token.
pub fn fluidity_index(t: &TokenTimeline, d: &DeadlineSpec) -> Result<Fluidity, MetricsError> {
    t.validate()?;
    d.validate()?;
    if !t.finished {
        return Err(MetricsError::UnfinishedTimeline(t.request_id));
    }
    if t.token_times.is_empty() {
        return Err(MetricsError::ZeroTokens(t.request_id));
    }
    Ok(fluidity_from_arrivals(
        t.submit_time,
        t.token_times
            .iter()
            .zip(&t.tokens_per_event)
            .flat_map(|(&a, &k)| std::iter::repeat_n(a, k as usize)),
        d,
    ))
}

pub(crate) fn fluidity_from_arrivals(
    submit: f64,
    arrivals: impl IntoIterator<Item = f64>,
    d: &DeadlineSpec,
) -> Fluidity {
    let step = d.decode_deadline_s;
    let mut deadline = submit + d.prefill_deadline_s;
    let (mut met, mut missed) = (0u64, 0u64);
    for a in arrivals {
        if a <= deadline {
            met += 1;
            deadline += step;
        } else {
            missed += ((a - deadline) / step).floor() as u64 + 1;
            deadline = a + step;
        }
    }
    let total = met + missed;
    let index = if total == 0 {
        1.0
    } else {
        met as f64 / total as f64
    };
    Fluidity { index, met, missed }
}

/// Derived scalars and series for one finished request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestMetrics {
    pub request_id: u64,
    pub output_tokens: u64,
    pub ttft_s: f64,
    pub ttlt_s: f64,
    pub scheduling_delay_s: Option<f64>,
    pub prefill_time_s: Option<f64>,
    pub decode_time_s: f64,
    /// Per-token gaps after burst expansion.
    pub tbt_s: Vec<f64>,
    /// `decode_time_s / (output_tokens - 1)`; absent for single-token outputs.
    pub tpot_s: Option<f64>,
    pub normalized_latency_s_per_token: f64,
    pub fluidity_index: f64,
    pub deadlines_met: u64,
    pub deadlines_missed: u64,
}

pub fn compute_request_metrics(
    t: &TokenTimeline,
    spec: &RequestSpec,
    d: &DeadlineSpec,
) -> Result<RequestMetrics, MetricsError> {
    debug_assert_eq!(t.request_id, spec.id);
    t.validate()?;
    if !t.finished {
        return Err(MetricsError::UnfinishedTimeline(t.request_id));
    }
    let (Some(first), Some(last)) = (t.first_token_time(), t.last_token_time()) else {
        return Err(MetricsError::ZeroTokens(t.request_id));
    };
    let per_token = t.per_token_times();
    let n = per_token.len() as u64;
    let tbt_s: Vec<f64> = per_token.windows(2).map(|w| w[1] - w[0]).collect();
    let decode_time_s = last - first;
    let ttlt_s = last - t.submit_time;
    let fl = fluidity_index(t, d)?;
    Ok(RequestMetrics {
        request_id: t.request_id,
        output_tokens: n,
        ttft_s: first - t.submit_time,
        ttlt_s,
        scheduling_delay_s: t.scheduling_delay(),
        prefill_time_s: t.schedule_time.map(|s| first - s),
        decode_time_s,
        tbt_s,
        tpot_s: (n > 1).then(|| decode_time_s / (n - 1) as f64),
        normalized_latency_s_per_token: ttlt_s / n as f64,
        fluidity_index: fl.index,
        deadlines_met: fl.met,
        deadlines_missed: fl.missed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileValue {
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub percentiles: Vec<PercentileValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdf_points: Option<Vec<f64>>,
}

impl DistributionSummary {
    pub fn get(&self, p: f64) -> Option<f64> {
        self.percentiles
            .iter()
            .find(|pv| (pv.p - p).abs() < 1e-9)
            .map(|pv| pv.value)
    }

    pub fn median(&self) -> Option<f64> {
        self.get(50.0)
    }
}

/// 1-based nearest rank `ceil(p/100 * n)`, clamped to `[1, n]`.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    // Guard against p*n/100 landing a hair above an integer.
    let raw = (p * n as f64 / 100.0 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n)
}

/// Nearest-rank percentile of an already sorted sample.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    sorted[nearest_rank(p, sorted.len()) - 1]
}

pub fn summarize(
    values: &[f64],
    percentiles: &[f64],
    keep_cdf: bool,
) -> Result<DistributionSummary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFiniteSample);
    }
    if let Some(&p) = percentiles.iter().find(|p| !(0.0..=100.0).contains(*p)) {
        return Err(MetricsError::BadPercentile(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut ps = percentiles.to_vec();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    Ok(DistributionSummary {
        count: n,
        mean: sorted.iter().sum::<f64>() / n as f64,
        min: sorted[0],
        max: sorted[n - 1],
        percentiles: ps
            .into_iter()
            .map(|p| PercentileValue {
                p,
                value: percentile_sorted(&sorted, p),
            })
            .collect(),
        cdf_points: keep_cdf.then_some(sorted),
    })
}
