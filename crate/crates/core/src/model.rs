//! Request anatomy shared by every subsystem.
//!
//! A request waits in a queue (scheduling delay), has its prompt processed in
//! one parallel pass (prefill) and then produces output tokens one engine step
//! at a time (decode). [`RequestSpec`] describes what was asked for,
//! [`TokenTimeline`] what was observed, and [`RunRecord`] bundles both for a
//! whole run so every derived number can be recomputed offline.
//!
//! All times are seconds (`f64`) relative to the start of the run.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Identifier of a request within one run.
pub type RequestId = u64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("request {id}: token counts must be at least 1 (prompt={prompt}, decode={decode})")]
    ZeroTokens {
        id: RequestId,
        prompt: u64,
        decode: u64,
    },
    #[error("request {id}: arrival time {time} is negative or not finite")]
    BadArrival { id: RequestId, time: f64 },
    #[error("request {id}: timestamps decrease at event {index}")]
    NonMonotonicTimestamps { id: RequestId, index: usize },
    #[error("request {id}: finished timeline has no token events")]
    EmptyTimeline { id: RequestId },
    #[error("request {id}: negative or non-finite timestamp")]
    NegativeTime { id: RequestId },
    #[error("request {id}: schedule time outside [submit, first token]")]
    ScheduleOutOfRange { id: RequestId },
    #[error("request {id}: {times} token times but {counts} per-event token counts")]
    EventCountMismatch {
        id: RequestId,
        times: usize,
        counts: usize,
    },
    #[error("request {id}: event {index} carries zero tokens")]
    ZeroTokenEvent { id: RequestId, index: usize },
    #[error("timeline for request {0} has no matching request spec")]
    OrphanTimeline(RequestId),
    #[error("request id {0} appears more than once")]
    DuplicateId(RequestId),
    #[error("warmup cutoff {warmup} is after cooldown cutoff {cooldown}")]
    BadCutoffs { warmup: f64, cooldown: f64 },
    #[error("serialization: {0}")]
    Serde(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<serde_json::Error> for ModelError {
    fn from(e: serde_json::Error) -> Self {
        ModelError::Serde(e.to_string())
    }
}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        ModelError::Io(e.to_string())
    }
}

/// One inference request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSpec {
    pub id: RequestId,
    pub arrival_time: f64,
    pub prompt_tokens: u64,
    pub decode_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_text: Option<String>,
}

impl RequestSpec {
    pub fn new(id: RequestId, arrival_time: f64, prompt_tokens: u64, decode_tokens: u64) -> Self {
        Self {
            id,
            arrival_time,
            prompt_tokens,
            decode_tokens,
            prompt_text: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.prompt_tokens == 0 || self.decode_tokens == 0 {
            return Err(ModelError::ZeroTokens {
                id: self.id,
                prompt: self.prompt_tokens,
                decode: self.decode_tokens,
            });
        }
        if !self.arrival_time.is_finite() || self.arrival_time < 0.0 {
            return Err(ModelError::BadArrival {
                id: self.id,
                time: self.arrival_time,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Length,
    Stop,
    Error,
}

/// Observed emission times for one request.
///
/// `token_times[i]` is when event `i` arrived and `tokens_per_event[i]` how
/// many tokens it carried; a streaming chunk or a speculative verify step can
/// carry more than one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTimeline {
    pub request_id: RequestId,
    pub submit_time: f64,
    /// Only observable inside the simulator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_time: Option<f64>,
    pub token_times: Vec<f64>,
    pub tokens_per_event: Vec<u32>,
    pub finished: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finish_reason: Option<FinishReason>,
    /// Late dispatch relative to the scheduled arrival (live client only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispatch_skew_s: Option<f64>,
    /// Token count reported by the provider, when it differs in origin from the trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_tokens: Option<u64>,
    /// True when per-event token counts were inferred (one per content delta)
    /// rather than reported by the endpoint.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub event_level_only: bool,
}

impl TokenTimeline {
    pub fn new(request_id: RequestId, submit_time: f64) -> Self {
        Self {
            request_id,
            submit_time,
            schedule_time: None,
            token_times: Vec::new(),
            tokens_per_event: Vec::new(),
            finished: false,
            finish_reason: None,
            dispatch_skew_s: None,
            provider_tokens: None,
            event_level_only: false,
        }
    }

    pub fn push_event(&mut self, time: f64, tokens: u32) {
        self.token_times.push(time);
        self.tokens_per_event.push(tokens);
    }

    pub fn finish(&mut self, reason: FinishReason) {
        self.finished = true;
        self.finish_reason = Some(reason);
    }

    pub fn event_count(&self) -> usize {
        self.token_times.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.tokens_per_event.iter().map(|&k| u64::from(k)).sum()
    }

    pub fn first_token_time(&self) -> Option<f64> {
        self.token_times.first().copied()
    }

    pub fn last_token_time(&self) -> Option<f64> {
        self.token_times.last().copied()
    }

    /// Scheduling delay, when a scheduler boundary was observed.
    pub fn scheduling_delay(&self) -> Option<f64> {
        self.schedule_time.map(|s| s - self.submit_time)
    }

    /// Per-token arrival times with bursts expanded: an event carrying `k`
    /// tokens contributes `k` entries at the same timestamp.
    pub fn per_token_times(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_tokens() as usize);
        for (&t, &k) in self.token_times.iter().zip(&self.tokens_per_event) {
            out.extend(std::iter::repeat_n(t, k as usize));
        }
        out
    }

    /// Returns the same timeline with every timestamp moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        let mut t = self.clone();
        t.submit_time += delta;
        t.schedule_time = t.schedule_time.map(|s| s + delta);
        for x in &mut t.token_times {
            *x += delta;
        }
        t
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let id = self.request_id;
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !finite_nonneg(self.submit_time)
            || self.schedule_time.is_some_and(|s| !finite_nonneg(s))
            || self.token_times.iter().any(|&x| !finite_nonneg(x))
        {
            return Err(ModelError::NegativeTime { id });
        }
        if self.token_times.len() != self.tokens_per_event.len() {
            return Err(ModelError::EventCountMismatch {
                id,
                times: self.token_times.len(),
                counts: self.tokens_per_event.len(),
            });
        }
        if let Some(index) = self.tokens_per_event.iter().position(|&k| k == 0) {
            return Err(ModelError::ZeroTokenEvent { id, index });
        }
        if let Some(&first) = self.token_times.first() {
            if first < self.submit_time {
                return Err(ModelError::NonMonotonicTimestamps { id, index: 0 });
            }
        }
        if let Some(i) = self.token_times.windows(2).position(|w| w[1] < w[0]) {
            return Err(ModelError::NonMonotonicTimestamps { id, index: i + 1 });
        }
        if let Some(s) = self.schedule_time {
            let upper = self.token_times.first().copied().unwrap_or(f64::INFINITY);
            if s < self.submit_time || s > upper {
                return Err(ModelError::ScheduleOutOfRange { id });
            }
        }
        if self.finished && self.token_times.is_empty() {
            return Err(ModelError::EmptyTimeline { id });
        }
        Ok(())
    }

    /// Validating constructor-style wrapper: returns the timeline unchanged.
    pub fn validated(self) -> Result<Self, ModelError> {
        self.validate()?;
        Ok(self)
    }
}

/// Everything produced by one run: inputs, observations and steady-state window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_fingerprint: String,
    pub seed: u64,
    pub requests: Vec<RequestSpec>,
    pub timelines: Vec<TokenTimeline>,
    pub warmup_cutoff: f64,
    pub cooldown_cutoff: f64,
}

/// Share of the arrival window dropped at each end by default.
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.05;

impl RunRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.warmup_cutoff > self.cooldown_cutoff {
            return Err(ModelError::BadCutoffs {
                warmup: self.warmup_cutoff,
                cooldown: self.cooldown_cutoff,
            });
        }
        let mut ids = HashSet::with_capacity(self.requests.len());
        for r in &self.requests {
            r.validate()?;
            if !ids.insert(r.id) {
                return Err(ModelError::DuplicateId(r.id));
            }
        }
        let mut seen = HashSet::with_capacity(self.timelines.len());
        for t in &self.timelines {
            if !ids.contains(&t.request_id) {
                return Err(ModelError::OrphanTimeline(t.request_id));
            }
            if !seen.insert(t.request_id) {
                return Err(ModelError::DuplicateId(t.request_id));
            }
            t.validate()?;
        }
        Ok(())
    }

    pub fn request(&self, id: RequestId) -> Option<&RequestSpec> {
        self.requests.iter().find(|r| r.id == id)
    }

    /// Pairs each timeline with its request spec.
    pub fn pairs(&self) -> Vec<(&RequestSpec, &TokenTimeline)> {
        let by_id: std::collections::HashMap<RequestId, &RequestSpec> =
            self.requests.iter().map(|r| (r.id, r)).collect();
        self.timelines
            .iter()
            .filter_map(|t| by_id.get(&t.request_id).map(|r| (*r, t)))
            .collect()
    }

    /// Whether a request counts toward steady-state aggregates.
    pub fn in_steady_state(&self, spec: &RequestSpec, t: &TokenTimeline) -> bool {
        let completed_before_warmup = t
            .last_token_time()
            .is_some_and(|end| end < self.warmup_cutoff);
        !completed_before_warmup && spec.arrival_time <= self.cooldown_cutoff
    }

    /// Fingerprint of the request population (lengths and arrivals).
    pub fn workload_fingerprint(&self) -> String {
        workload_fingerprint(&self.requests)
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let rec: RunRecord = serde_json::from_str(s)?;
        rec.validate()?;
        Ok(rec)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, ModelError> {
        let rec: RunRecord = serde_json::from_reader(r)?;
        rec.validate()?;
        Ok(rec)
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), ModelError> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Writes one CSV row per token event: `request_id,event_index,time_s,tokens`.
    pub fn write_events_csv<W: Write>(&self, w: W) -> Result<(), ModelError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["request_id", "event_index", "time_s", "tokens"])
            .map_err(|e| ModelError::Io(e.to_string()))?;
        for t in &self.timelines {
            for (i, (&time, &k)) in t.token_times.iter().zip(&t.tokens_per_event).enumerate() {
                out.write_record([
                    t.request_id.to_string(),
                    i.to_string(),
                    format!("{time:.6}"),
                    k.to_string(),
                ])
                .map_err(|e| ModelError::Io(e.to_string()))?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Default steady-state window: drop the first and last `fraction` of the
/// arrival span.
pub fn steady_state_window(requests: &[RequestSpec], fraction: f64) -> (f64, f64) {
    let (lo, hi) = requests
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.arrival_time), hi.max(r.arrival_time))
        });
    if !lo.is_finite() {
        return (0.0, 0.0);
    }
    let span = hi - lo;
    (lo + fraction * span, hi - fraction * span)
}

pub fn workload_fingerprint(requests: &[RequestSpec]) -> String {
    let mut h = Sha256::new();
    for r in requests {
        h.update(r.id.to_le_bytes());
        h.update(r.arrival_time.to_bits().to_le_bytes());
        h.update(r.prompt_tokens.to_le_bytes());
        h.update(r.decode_tokens.to_le_bytes());
    }
    hex_prefix(&h.finalize())
}

/// Stable digest of any serializable configuration.
pub fn config_fingerprint<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_vec(cfg).unwrap_or_default();
    hex_prefix(&Sha256::digest(&json))
}

fn hex_prefix(bytes: &[u8]) -> String {
    bytes[..12].iter().map(|b| format!("{b:02x}")).collect()
}
