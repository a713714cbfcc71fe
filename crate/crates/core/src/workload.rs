//! Workload construction: JSONL trace ingestion, log-normal synthesis from
//! published trace quantiles, length filters and arrival processes.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::metrics::percentile_sorted;
use crate::model::RequestSpec;
use crate::rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WorkloadError {
    #[error("trace line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("no requests left after filtering ({dropped} dropped)")]
    EmptyAfterFilter { dropped: usize },
    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),
    #[error("arrival process uses trace timestamps but the trace has none")]
    MissingTimestamps,
    #[error("invalid workload config: {0}")]
    InvalidConfig(String),
    #[error("unknown profile {0:?} (expected azure-code-2024, azure-conv-2024 or mooncake)")]
    UnknownProfile(String),
    #[error("io error reading {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Median / interquartile range / 99th percentile of a token-length distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthQuantiles {
    pub median: f64,
    pub iqr: f64,
    pub p99: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioQuantiles {
    pub median: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub prefill: LengthQuantiles,
    pub decode: LengthQuantiles,
    pub pd_ratio: RatioQuantiles,
}

impl TraceStats {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        for (name, q) in [("prefill", self.prefill), ("decode", self.decode)] {
            if !(q.median > 0.0 && q.iqr >= 0.0 && q.p99 > 0.0) || !q.p99.is_finite() {
                return Err(WorkloadError::InfeasibleProfile(format!(
                    "{name} quantiles must be positive"
                )));
            }
            if q.p99 < q.median {
                return Err(WorkloadError::InfeasibleProfile(format!(
                    "{name} p99 {} is below median {}",
                    q.p99, q.median
                )));
            }
        }
        Ok(())
    }
}

/// Production trace statistics (token counts).
pub const AZURE_CODE_2024: TraceStats = TraceStats {
    prefill: LengthQuantiles {
        median: 1928.0,
        iqr: 2393.0,
        p99: 7685.0,
    },
    decode: LengthQuantiles {
        median: 8.0,
        iqr: 15.0,
        p99: 276.0,
    },
    pd_ratio: RatioQuantiles {
        median: 238.0,
        iqr: 686.0,
    },
};

pub const AZURE_CONV_2024: TraceStats = TraceStats {
    prefill: LengthQuantiles {
        median: 928.0,
        iqr: 1811.0,
        p99: 6683.0,
    },
    decode: LengthQuantiles {
        median: 41.0,
        iqr: 94.0,
        p99: 694.0,
    },
    pd_ratio: RatioQuantiles {
        median: 21.0,
        iqr: 63.0,
    },
};

pub const MOONCAKE: TraceStats = TraceStats {
    prefill: LengthQuantiles {
        median: 6345.0,
        iqr: 4243.0,
        p99: 61616.0,
    },
    decode: LengthQuantiles {
        median: 30.0,
        iqr: 343.0,
        p99: 898.0,
    },
    pd_ratio: RatioQuantiles {
        median: 163.5,
        iqr: 602.0,
    },
};

pub const BUILTIN_PROFILES: [(&str, TraceStats); 3] = [
    ("azure-code-2024", AZURE_CODE_2024),
    ("azure-conv-2024", AZURE_CONV_2024),
    ("mooncake", MOONCAKE),
];

pub fn profile(name: &str) -> Result<TraceStats, WorkloadError> {
    BUILTIN_PROFILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| WorkloadError::UnknownProfile(name.to_string()))
}

/// Length filter; a request is kept only when strictly below each limit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_prefill_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_decode_tokens: Option<u64>,
}

impl LengthFilter {
    /// Prefill below 16K tokens and decode below 1K tokens.
    pub const STANDARD: LengthFilter = LengthFilter {
        max_prefill_tokens: Some(16 * 1024),
        max_decode_tokens: Some(1024),
    };

    pub fn accepts(&self, prompt_tokens: u64, decode_tokens: u64) -> bool {
        self.max_prefill_tokens.is_none_or(|m| prompt_tokens < m)
            && self.max_decode_tokens.is_none_or(|m| decode_tokens < m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadSource {
    TraceFile { path: PathBuf },
    Profile { name: String },
    Stats { stats: TraceStats },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalProcess {
    Poisson,
    Uniform,
    TraceTimestamps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub source: WorkloadSource,
    pub count: usize,
    pub qps: f64,
    pub arrival: ArrivalProcess,
    #[serde(default)]
    pub filter: LengthFilter,
    pub seed: u64,
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.count == 0 {
            return Err(WorkloadError::InvalidConfig(
                "count must be at least 1".into(),
            ));
        }
        if self.arrival != ArrivalProcess::TraceTimestamps
            && !(self.qps > 0.0 && self.qps.is_finite())
        {
            return Err(WorkloadError::InvalidConfig(format!(
                "qps must be positive, got {}",
                self.qps
            )));
        }
        Ok(())
    }
}

/// A request population plus what is known about where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub requests: Vec<RequestSpec>,
    /// True when every request carries an arrival time from its source trace.
    pub has_timestamps: bool,
    /// Rows removed by the length filter.
    pub dropped: usize,
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    #[serde(default)]
    arrival_s: Option<f64>,
    prompt_tokens: u64,
    decode_tokens: u64,
    #[serde(default)]
    prompt_text: Option<String>,
}

/// Parses JSONL trace rows `{arrival_s?, prompt_tokens, decode_tokens, prompt_text?}`.
///
/// Blank lines are skipped. Line numbers in errors are 1-based. Arrival
/// times are kept only if every row has one.
pub fn parse_trace<R: BufRead>(
    reader: R,
    filter: &LengthFilter,
) -> Result<Workload, WorkloadError> {
    let mut requests = Vec::new();
    let mut stamps = Vec::new();
    let mut dropped = 0usize;
    let mut all_stamped = true;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| WorkloadError::ParseError {
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: TraceRow =
            serde_json::from_str(trimmed).map_err(|e| WorkloadError::ParseError {
                line: line_no,
                message: e.to_string(),
            })?;
        let bad = |message: &str| WorkloadError::ParseError {
            line: line_no,
            message: message.to_string(),
        };
        if row.prompt_tokens == 0 || row.decode_tokens == 0 {
            return Err(bad("token counts must be at least 1"));
        }
        if let Some(a) = row.arrival_s {
            if !a.is_finite() || a < 0.0 {
                return Err(bad("arrival_s must be finite and non-negative"));
            }
        }
        if !filter.accepts(row.prompt_tokens, row.decode_tokens) {
            dropped += 1;
            continue;
        }
        all_stamped &= row.arrival_s.is_some();
        stamps.push(row.arrival_s.unwrap_or(0.0));
        requests.push(RequestSpec {
            id: requests.len() as u64,
            arrival_time: 0.0,
            prompt_tokens: row.prompt_tokens,
            decode_tokens: row.decode_tokens,
            prompt_text: row.prompt_text,
        });
    }
    if requests.is_empty() {
        return Err(WorkloadError::EmptyAfterFilter { dropped });
    }
    if all_stamped {
        for (r, s) in requests.iter_mut().zip(stamps) {
            r.arrival_time = s;
        }
    }
    Ok(Workload {
        requests,
        has_timestamps: all_stamped,
        dropped,
    })
}

pub fn load_trace(path: &Path, filter: &LengthFilter) -> Result<Workload, WorkloadError> {
    let f = File::open(path).map_err(|e| WorkloadError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_trace(BufReader::new(f), filter)
}

/// Log-normal parameters `(mu, sigma)` whose median and 99th percentile match.
pub fn fit_lognormal(median: f64, p99: f64) -> Result<(f64, f64), WorkloadError> {
    if !(median > 0.0 && p99 >= median && p99.is_finite()) {
        return Err(WorkloadError::InfeasibleProfile(format!(
            "need 0 < median <= p99 (median={median}, p99={p99})"
        )));
    }
    let mu = median.ln();
    let sigma = (p99.ln() - mu) / z_99();
    Ok((mu, sigma))
}

fn z_99() -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(0.99)
}

struct LengthSampler {
    prefill: LogNormal<f64>,
    decode: LogNormal<f64>,
}

impl LengthSampler {
    fn new(profile: &TraceStats) -> Result<Self, WorkloadError> {
        profile.validate()?;
        let mk = |q: LengthQuantiles| -> Result<LogNormal<f64>, WorkloadError> {
            let (mu, sigma) = fit_lognormal(q.median, q.p99)?;
            LogNormal::new(mu, sigma).map_err(|e| WorkloadError::InfeasibleProfile(e.to_string()))
        };
        Ok(Self {
            prefill: mk(profile.prefill)?,
            decode: mk(profile.decode)?,
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> (u64, u64) {
        let round = |x: f64| x.round().max(1.0) as u64;
        (
            round(self.prefill.sample(rng)),
            round(self.decode.sample(rng)),
        )
    }
}

/// Draws `count` requests whose prompt and output lengths follow log-normals
/// fitted to the profile's median and P99. Arrival times are left at zero.
pub fn synthesize(
    profile: &TraceStats,
    count: usize,
    seed: u64,
) -> Result<Vec<RequestSpec>, WorkloadError> {
    synthesize_filtered(profile, count, seed, &LengthFilter::default())
}

/// Like [`synthesize`], redrawing any sample the filter rejects.
pub fn synthesize_filtered(
    profile: &TraceStats,
    count: usize,
    seed: u64,
    filter: &LengthFilter,
) -> Result<Vec<RequestSpec>, WorkloadError> {
    let sampler = LengthSampler::new(profile)?;
    let mut rng = rng::stream(seed, rng::WORKLOAD);
    let mut out = Vec::with_capacity(count);
    let max_draws = count.saturating_mul(100).max(1000);
    let mut draws = 0usize;
    while out.len() < count {
        if draws >= max_draws {
            return Err(WorkloadError::EmptyAfterFilter {
                dropped: draws - out.len(),
            });
        }
        draws += 1;
        let (p, d) = sampler.draw(&mut rng);
        if filter.accepts(p, d) {
            out.push(RequestSpec::new(out.len() as u64, 0.0, p, d));
        }
    }
    Ok(out)
}

/// Sets arrival times: exponential gaps (Poisson), fixed gaps, or the trace's own.
pub fn assign_arrivals(
    workload: &mut Workload,
    arrival: ArrivalProcess,
    qps: f64,
    seed: u64,
) -> Result<(), WorkloadError> {
    match arrival {
        ArrivalProcess::TraceTimestamps => {
            if !workload.has_timestamps {
                return Err(WorkloadError::MissingTimestamps);
            }
            workload.requests.sort_by(|a, b| {
                a.arrival_time
                    .total_cmp(&b.arrival_time)
                    .then(a.id.cmp(&b.id))
            });
            Ok(())
        }
        ArrivalProcess::Uniform | ArrivalProcess::Poisson => {
            if !(qps > 0.0 && qps.is_finite()) {
                return Err(WorkloadError::InvalidConfig(format!(
                    "qps must be positive, got {qps}"
                )));
            }
            let mut now = 0.0;
            if arrival == ArrivalProcess::Uniform {
                for (i, r) in workload.requests.iter_mut().enumerate() {
                    r.arrival_time = i as f64 / qps;
                }
            } else {
                let exp = Exp::new(qps).map_err(|e| WorkloadError::InvalidConfig(e.to_string()))?;
                let mut rng = rng::stream(seed, rng::ARRIVALS);
                for (i, r) in workload.requests.iter_mut().enumerate() {
                    if i > 0 {
                        now += exp.sample(&mut rng);
                    }
                    r.arrival_time = now;
                }
            }
            Ok(())
        }
    }
}

/// Builds a complete, arrival-sorted workload from a config.
pub fn build_workload(cfg: &WorkloadConfig) -> Result<Workload, WorkloadError> {
    cfg.validate()?;
    let mut w = match &cfg.source {
        WorkloadSource::TraceFile { path } => {
            let mut w = load_trace(path, &cfg.filter)?;
            w.requests.truncate(cfg.count);
            w
        }
        WorkloadSource::Profile { name } => Workload {
            requests: synthesize_filtered(&profile(name)?, cfg.count, cfg.seed, &cfg.filter)?,
            has_timestamps: false,
            dropped: 0,
        },
        WorkloadSource::Stats { stats } => Workload {
            requests: synthesize_filtered(stats, cfg.count, cfg.seed, &cfg.filter)?,
            has_timestamps: false,
            dropped: 0,
        },
    };
    assign_arrivals(&mut w, cfg.arrival, cfg.qps, cfg.seed)?;
    Ok(w)
}

/// Achieved quantiles of a synthesized population next to the targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub target: TraceStats,
    pub achieved: TraceStats,
}

impl FitDiagnostics {
    pub fn relative_errors(&self) -> [(&'static str, f64); 6] {
        let rel = |a: f64, t: f64| (a - t) / t;
        let (a, t) = (&self.achieved, &self.target);
        [
            ("prefill_median", rel(a.prefill.median, t.prefill.median)),
            ("prefill_iqr", rel(a.prefill.iqr, t.prefill.iqr)),
            ("prefill_p99", rel(a.prefill.p99, t.prefill.p99)),
            ("decode_median", rel(a.decode.median, t.decode.median)),
            ("decode_iqr", rel(a.decode.iqr, t.decode.iqr)),
            ("decode_p99", rel(a.decode.p99, t.decode.p99)),
        ]
    }
}

pub fn observed_stats(requests: &[RequestSpec]) -> Option<TraceStats> {
    if requests.is_empty() {
        return None;
    }
    let quant = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        LengthQuantiles {
            median: percentile_sorted(&v, 50.0),
            iqr: percentile_sorted(&v, 75.0) - percentile_sorted(&v, 25.0),
            p99: percentile_sorted(&v, 99.0),
        }
    };
    let prefill = quant(requests.iter().map(|r| r.prompt_tokens as f64).collect());
    let decode = quant(requests.iter().map(|r| r.decode_tokens as f64).collect());
    let ratio = quant(
        requests
            .iter()
            .map(|r| r.prompt_tokens as f64 / r.decode_tokens as f64)
            .collect(),
    );
    Some(TraceStats {
        prefill,
        decode,
        pd_ratio: RatioQuantiles {
            median: ratio.median,
            iqr: ratio.iqr,
        },
    })
}

pub fn fit_diagnostics(
    target: &TraceStats,
    count: usize,
    seed: u64,
) -> Result<FitDiagnostics, WorkloadError> {
    let reqs = synthesize(target, count, seed)?;
    Ok(FitDiagnostics {
        target: *target,
        achieved: observed_stats(&reqs).expect("count >= 1"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, f: &LengthFilter) -> Result<Workload, WorkloadError> {
        parse_trace(s.as_bytes(), f)
    }

    #[test]
    fn oversized_prefill_dropped() {
        let w = parse(
            "{\"prompt_tokens\":20000,\"decode_tokens\":10}\n{\"prompt_tokens\":100,\"decode_tokens\":10}\n",
            &LengthFilter::STANDARD,
        )
        .unwrap();
        assert_eq!(w.requests.len(), 1);
        assert_eq!(w.dropped, 1);
        assert_eq!(w.requests[0].prompt_tokens, 100);
    }

    #[test]
    fn rows_kept_in_file_order() {
        let w = parse(
            "{\"prompt_tokens\":3,\"decode_tokens\":1}\n{\"prompt_tokens\":1,\"decode_tokens\":2}\n{\"prompt_tokens\":2,\"decode_tokens\":3}\n",
            &LengthFilter::default(),
        )
        .unwrap();
        let lens: Vec<_> = w
            .requests
            .iter()
            .map(|r| (r.id, r.prompt_tokens, r.decode_tokens))
            .collect();
        assert_eq!(lens, vec![(0, 3, 1), (1, 1, 2), (2, 2, 3)]);
        assert!(!w.has_timestamps);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let mut s = String::new();
        for _ in 0..6 {
            s.push_str("{\"prompt_tokens\":3,\"decode_tokens\":1}\n");
        }
        s.push_str("{\"prompt_tokens\":\"x\"\n");
        match parse(&s, &LengthFilter::default()) {
            Err(WorkloadError::ParseError { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn everything_filtered_is_an_error() {
        assert_eq!(
            parse(
                "{\"prompt_tokens\":20000,\"decode_tokens\":10}\n",
                &LengthFilter::STANDARD
            ),
            Err(WorkloadError::EmptyAfterFilter { dropped: 1 })
        );
    }

    #[test]
    fn timestamps_passthrough() {
        let mut w = parse(
            "{\"arrival_s\":0.0,\"prompt_tokens\":3,\"decode_tokens\":1}\n{\"arrival_s\":2.5,\"prompt_tokens\":3,\"decode_tokens\":1}\n",
            &LengthFilter::default(),
        )
        .unwrap();
        assign_arrivals(&mut w, ArrivalProcess::TraceTimestamps, 0.0, 0).unwrap();
        let a: Vec<_> = w.requests.iter().map(|r| r.arrival_time).collect();
        assert_eq!(a, vec![0.0, 2.5]);
    }

    #[test]
    fn missing_timestamps_rejected() {
        let mut w = parse(
            "{\"prompt_tokens\":3,\"decode_tokens\":1}\n",
            &LengthFilter::default(),
        )
        .unwrap();
        assert_eq!(
            assign_arrivals(&mut w, ArrivalProcess::TraceTimestamps, 1.0, 0),
            Err(WorkloadError::MissingTimestamps)
        );
    }

    #[test]
    fn uniform_spacing() {
        let mut w = Workload {
            requests: (0..4).map(|i| RequestSpec::new(i, 0.0, 1, 1)).collect(),
            has_timestamps: false,
            dropped: 0,
        };
        assign_arrivals(&mut w, ArrivalProcess::Uniform, 2.0, 0).unwrap();
        let a: Vec<_> = w.requests.iter().map(|r| r.arrival_time).collect();
        assert_eq!(a, vec![0.0, 0.5, 1.0, 1.5]);
    }

    #[test]
    fn poisson_mean_gap() {
        let n = 10_000;
        let mut w = Workload {
            requests: (0..n).map(|i| RequestSpec::new(i, 0.0, 1, 1)).collect(),
            has_timestamps: false,
            dropped: 0,
        };
        assign_arrivals(&mut w, ArrivalProcess::Poisson, 0.25, 11).unwrap();
        let mean_gap = w.requests.last().unwrap().arrival_time / (n - 1) as f64;
        assert!((mean_gap - 4.0).abs() / 4.0 < 0.05, "mean gap {mean_gap}");
        assert_eq!(w.requests[0].arrival_time, 0.0);
    }

    #[test]
    fn collapsed_profile_is_constant() {
        let q = LengthQuantiles {
            median: 100.0,
            iqr: 0.0,
            p99: 100.0,
        };
        let stats = TraceStats {
            prefill: q,
            decode: q,
            pd_ratio: RatioQuantiles {
                median: 1.0,
                iqr: 0.0,
            },
        };
        let reqs = synthesize(&stats, 500, 3).unwrap();
        assert!(reqs
            .iter()
            .all(|r| r.prompt_tokens == 100 && r.decode_tokens == 100));
    }

    #[test]
    fn inverted_profile_rejected() {
        let mut stats = AZURE_CODE_2024;
        stats.prefill.p99 = 10.0;
        assert!(matches!(
            synthesize(&stats, 10, 0),
            Err(WorkloadError::InfeasibleProfile(_))
        ));
    }

    #[test]
    fn synthesis_is_deterministic() {
        let a = synthesize(&MOONCAKE, 1000, 42).unwrap();
        let b = synthesize(&MOONCAKE, 1000, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synthesize(&MOONCAKE, 1000, 43).unwrap());
    }

    #[test]
    fn filtered_synthesis_respects_filter() {
        let reqs = synthesize_filtered(&MOONCAKE, 2000, 5, &LengthFilter::STANDARD).unwrap();
        assert!(reqs
            .iter()
            .all(|r| LengthFilter::STANDARD.accepts(r.prompt_tokens, r.decode_tokens)));
    }

    #[test]
    fn lognormal_fit_hits_both_quantiles() {
        let (mu, sigma) = fit_lognormal(1928.0, 7685.0).unwrap();
        assert!((mu.exp() - 1928.0).abs() < 1e-9);
        assert!(((mu + sigma * z_99()).exp() - 7685.0).abs() < 1e-6);
    }
}
