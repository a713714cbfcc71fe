//! Executable checks for evaluation practices that can be decided from run
//! data alone.
//!
//! | rule | fires when                                                           | severity |
//! |------|----------------------------------------------------------------------|----------|
//! | L1   | exactly one percentile was requested                                 | warn     |
//! | L2   | scheduling delay observed, its median exceeds the threshold, and     | fail     |
//! |      | normalized latency is a headline metric                              |          |
//! | L3   | P99 TTFT or P99 TBT exceeds the practical bound                      | fail     |
//! | L4   | a comparison spans a single workload                                 | warn     |

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MetricKind, ReportOptions};
use crate::metrics::{percentile_sorted, RequestMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintFinding {
    pub rule_id: String,
    pub severity: Severity,
    pub message: String,
    pub evidence: BTreeMap<String, f64>,
}

fn p(values: impl Iterator<Item = f64>, pct: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(percentile_sorted(&v, pct))
}

pub(super) fn evaluate(metrics: &[RequestMetrics], opts: &ReportOptions) -> Vec<LintFinding> {
    let mut out = Vec::new();

    if opts.percentiles.len() == 1 {
        out.push(LintFinding {
            rule_id: "L1".into(),
            severity: Severity::Warn,
            message: "only one percentile requested; a single statistic hides the shape of the latency distribution".into(),
            evidence: BTreeMap::from([("requested_percentile".into(), opts.percentiles[0])]),
        });
    }

    let delays: Vec<f64> = metrics
        .iter()
        .filter_map(|m| m.scheduling_delay_s)
        .collect();
    if let Some(p50_delay) = p(delays.iter().copied(), 50.0) {
        if p50_delay > opts.normalization_delay_threshold_s
            && opts.headline.contains(&MetricKind::NormalizedLatency)
        {
            let p50_norm = p(
                metrics.iter().map(|m| m.normalized_latency_s_per_token),
                50.0,
            )
            .unwrap_or(0.0);
            let over = delays
                .iter()
                .filter(|&&d| d > opts.normalization_delay_threshold_s)
                .count();
            out.push(LintFinding {
                rule_id: "L2".into(),
                severity: Severity::Fail,
                message: format!(
                    "normalized latency masks scheduling delay: median delay {p50_delay:.3} s while median normalized latency is {p50_norm:.4} s/token; report scheduling delay and TTFT alongside it"
                ),
                evidence: BTreeMap::from([
                    ("p50_scheduling_delay_s".into(), p50_delay),
                    ("p50_normalized_latency_s_per_token".into(), p50_norm),
                    ("fraction_delay_over_threshold".into(), over as f64 / delays.len() as f64),
                    ("threshold_s".into(), opts.normalization_delay_threshold_s),
                ]),
            });
        }
    }

    let p99_ttft = p(metrics.iter().map(|m| m.ttft_s), 99.0);
    let p99_tbt = p(metrics.iter().flat_map(|m| m.tbt_s.iter().copied()), 99.0);
    let ttft_over = p99_ttft.is_some_and(|v| v > opts.practical_ttft_bound_s);
    let tbt_over = p99_tbt.is_some_and(|v| v > opts.practical_tbt_bound_s);
    if ttft_over || tbt_over {
        let mut evidence = BTreeMap::from([
            ("ttft_bound_s".into(), opts.practical_ttft_bound_s),
            ("tbt_bound_s".into(), opts.practical_tbt_bound_s),
        ]);
        if let Some(v) = p99_ttft {
            evidence.insert("p99_ttft_s".into(), v);
        }
        if let Some(v) = p99_tbt {
            evidence.insert("p99_tbt_s".into(), v);
        }
        out.push(LintFinding {
            rule_id: "L3".into(),
            severity: Severity::Fail,
            message: "operating point is impractical for interactive use: tail latency exceeds the configured bounds".into(),
            evidence,
        });
    }
    out
}

pub(super) fn single_workload(run_count: usize) -> LintFinding {
    LintFinding {
        rule_id: "L4".into(),
        severity: Severity::Warn,
        message: "comparison covers a single workload; check conclusions against workloads with different prompt/output length mixes".into(),
        evidence: BTreeMap::from([("workloads".into(), 1.0), ("runs".into(), run_count as f64)]),
    }
}

/// Reminders for practices that cannot be checked from run data.
pub fn manual_checklist() -> Vec<String> {
    [
        "Baselines: was the baseline run with the same engineering optimizations (kernels, batching, caching) so that only the technique under test differs?",
        "Baselines: is the baseline a current, well-tuned system rather than an outdated or handicapped configuration?",
        "Setup: do model size, parallelism and hardware match a realistic deployment for the claimed use case?",
        "Setup: were memory-dependent results checked at realistic context lengths and batch sizes?",
        "Setup: were several workloads with different prompt and output length distributions evaluated?",
        "Metrics: do the chosen metrics reflect the application's actual requirements (interactivity, completion time or throughput)?",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}
