use serde::{Deserialize, Serialize};

use super::lint::{single_workload, LintFinding};
use super::{MetricKind, ReportError, RunReport};

/// Relative change below which two values count as equal.
const SAME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Lower,
    Same,
    Higher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub run: usize,
    pub metric: MetricKind,
    /// `"mean"` or a percentile label such as `"p50"`.
    pub stat: String,
    pub baseline: f64,
    pub value: f64,
    /// `value / baseline`; absent when the baseline is zero.
    pub ratio: Option<f64>,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeOffFlag {
    pub run: usize,
    pub metric: MetricKind,
    pub median_direction: Direction,
    pub tail_direction: Direction,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: usize,
    pub workload_fingerprint: String,
    pub rows: Vec<ComparisonRow>,
    pub trade_offs: Vec<TradeOffFlag>,
    pub lints: Vec<LintFinding>,
}

impl Comparison {
    pub fn row(&self, run: usize, metric: MetricKind, stat: &str) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.run == run && r.metric == metric && r.stat == stat)
    }
}

fn direction(baseline: f64, value: f64) -> Direction {
    let scale = baseline.abs().max(value.abs()).max(f64::MIN_POSITIVE);
    let diff = (value - baseline) / scale;
    if diff > SAME_EPS {
        Direction::Higher
    } else if diff < -SAME_EPS {
        Direction::Lower
    } else {
        Direction::Same
    }
}

pub fn stat_label(p: f64) -> String {
    if p.fract() == 0.0 {
        format!("p{}", p as u64)
    } else {
        format!("p{p}")
    }
}

/// Ratios of every metric statistic against the baseline run.
///
/// A metric whose median and highest reported percentile move in opposite
/// directions is flagged as a distributional trade-off.
pub fn compare(reports: &[RunReport], baseline: usize) -> Result<Comparison, ReportError> {
    if reports.len() < 2 || baseline >= reports.len() {
        return Err(ReportError::NotEnoughReports);
    }
    let base = &reports[baseline];
    for r in reports {
        if r.workload_fingerprint != base.workload_fingerprint {
            return Err(ReportError::WorkloadMismatch(
                base.workload_fingerprint.clone(),
                r.workload_fingerprint.clone(),
            ));
        }
    }
    let mut rows = Vec::new();
    let mut trade_offs = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        if i == baseline {
            continue;
        }
        for kind in MetricKind::ALL {
            let (Some(b), Some(v)) = (base.metric(kind), r.metric(kind)) else {
                continue;
            };
            let mut push = |stat: String, bv: f64, vv: f64| {
                rows.push(ComparisonRow {
                    run: i,
                    metric: kind,
                    stat,
                    baseline: bv,
                    value: vv,
                    ratio: (bv != 0.0).then(|| vv / bv),
                    direction: direction(bv, vv),
                });
            };
            push("mean".into(), b.mean, v.mean);
            for pv in &b.percentiles {
                if let Some(x) = v.get(pv.p) {
                    push(stat_label(pv.p), pv.value, x);
                }
            }
            let tail_p = b
                .percentiles
                .iter()
                .map(|pv| pv.p)
                .filter(|&p| p > 50.0)
                .fold(None, |m: Option<f64>, p| Some(m.map_or(p, |m| m.max(p))));
            if let (Some(bm), Some(vm), Some(tp)) = (b.median(), v.median(), tail_p) {
                let (Some(bt), Some(vt)) = (b.get(tp), v.get(tp)) else {
                    continue;
                };
                let md = direction(bm, vm);
                let td = direction(bt, vt);
                let opposite = matches!(
                    (md, td),
                    (Direction::Lower, Direction::Higher) | (Direction::Higher, Direction::Lower)
                );
                if opposite {
                    trade_offs.push(TradeOffFlag {
                        run: i,
                        metric: kind,
                        median_direction: md,
                        tail_direction: td,
                        message: format!(
                            "distributional trade-off: median {kind} is {} ({:.3}x) while {} {kind} is {} ({:.3}x)",
                            if md == Direction::Lower { "lower" } else { "higher" },
                            vm / bm,
                            stat_label(tp),
                            if td == Direction::Lower { "lower" } else { "higher" },
                            vt / bt,
                        ),
                    });
                }
            }
        }
    }
    Ok(Comparison {
        baseline,
        workload_fingerprint: base.workload_fingerprint.clone(),
        rows,
        trade_offs,
        lints: vec![single_workload(reports.len())],
    })
}
