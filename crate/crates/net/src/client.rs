//! Open-loop streaming load generator.
//!
//! Requests leave at their scheduled arrival times regardless of how many
//! are still in flight, up to `max_concurrency`. A request that has to wait
//! for a slot, or that the local runtime dispatches late, carries the delay
//! in `dispatch_skew_s`. Every chunk is timestamped as soon as it comes off
//! the socket and only then decoded.

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use futures::StreamExt;
use infermeter_core::metrics::percentile_sorted;
use infermeter_core::model::{
    config_fingerprint, steady_state_window, FinishReason, RequestSpec, RunRecord, TokenTimeline,
    DEFAULT_WARMUP_FRACTION,
};
use reqwest::header::CONTENT_TYPE;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tokio::time::Instant;

use crate::protocol::{filler_prompt, parse_chunk, ChatRequest, COMPLETIONS_PATH};
use crate::sse::SseDecoder;

pub const API_KEY_ENV: &str = "INFERMETER_API_KEY";
pub const DEFAULT_MAX_DISPATCH_SKEW_S: f64 = 0.010;

fn default_skew_bound() -> f64 {
    DEFAULT_MAX_DISPATCH_SKEW_S
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    /// Never serialized; falls back to `INFERMETER_API_KEY`.
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    pub model_name: String,
    pub request_timeout_s: f64,
    pub max_concurrency: usize,
    #[serde(default)]
    pub retries: u32,
    #[serde(default = "default_skew_bound")]
    pub max_dispatch_skew_s: f64,
}

impl fmt::Debug for EndpointConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EndpointConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("model_name", &self.model_name)
            .field("request_timeout_s", &self.request_timeout_s)
            .field("max_concurrency", &self.max_concurrency)
            .field("retries", &self.retries)
            .field("max_dispatch_skew_s", &self.max_dispatch_skew_s)
            .finish()
    }
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            model_name: model_name.into(),
            request_timeout_s: 300.0,
            max_concurrency: 256,
            retries: 0,
            max_dispatch_skew_s: DEFAULT_MAX_DISPATCH_SKEW_S,
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let url = url::Url::parse(&self.base_url).map_err(|e| {
            ClientError::InvalidConfig(format!("base_url {:?}: {e}", self.base_url))
        })?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(ClientError::InvalidConfig(format!(
                "unsupported scheme {:?}",
                url.scheme()
            )));
        }
        if !(self.request_timeout_s > 0.0 && self.request_timeout_s.is_finite()) {
            return Err(ClientError::InvalidConfig(format!(
                "request_timeout_s must be positive, got {}",
                self.request_timeout_s
            )));
        }
        if self.max_concurrency == 0 {
            return Err(ClientError::InvalidConfig(
                "max_concurrency must be at least 1".into(),
            ));
        }
        if !(self.max_dispatch_skew_s > 0.0 && self.max_dispatch_skew_s.is_finite()) {
            return Err(ClientError::InvalidConfig(
                "max_dispatch_skew_s must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn resolved_api_key(&self) -> Option<String> {
        self.api_key
            .clone()
            .or_else(|| std::env::var(API_KEY_ENV).ok())
            .filter(|k| !k.is_empty())
    }

    pub fn completions_url(&self) -> String {
        format!(
            "{}{}",
            self.base_url.trim_end_matches('/'),
            COMPLETIONS_PATH
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClientError {
    #[error("invalid endpoint configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("cannot reach endpoint: {0}")]
    Connect(String),
    #[error("request {0} timed out")]
    Timeout(u64),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("load generator saturated: p99 dispatch skew {p99_skew_s:.4} s exceeds {bound_s} s")]
    SaturatedGenerator { p99_skew_s: f64, bound_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Connect,
    Timeout,
    Protocol,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestFailure {
    pub request_id: u64,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOutcome {
    pub record: RunRecord,
    pub failures: Vec<RequestFailure>,
    pub p99_dispatch_skew_s: f64,
    pub saturated: bool,
}

impl LoadOutcome {
    pub fn protocol_errors(&self) -> usize {
        self.failures
            .iter()
            .filter(|f| f.kind == FailureKind::Protocol)
            .count()
    }

    /// Errors if the generator could not keep to the arrival schedule.
    pub fn check_saturation(&self, bound_s: f64) -> Result<(), ClientError> {
        if self.p99_dispatch_skew_s > bound_s {
            return Err(ClientError::SaturatedGenerator {
                p99_skew_s: self.p99_dispatch_skew_s,
                bound_s,
            });
        }
        Ok(())
    }
}

fn classify(e: &ClientError) -> FailureKind {
    match e {
        ClientError::Timeout(_) => FailureKind::Timeout,
        ClientError::Http { .. } => FailureKind::Http,
        ClientError::Connect(_) => FailureKind::Connect,
        _ => FailureKind::Protocol,
    }
}

fn map_reqwest(e: reqwest::Error) -> ClientError {
    if e.is_connect() || e.is_request() {
        ClientError::Connect(e.to_string())
    } else {
        ClientError::Protocol(e.to_string())
    }
}

fn finish_reason(s: &str) -> FinishReason {
    match s {
        "length" => FinishReason::Length,
        "stop" | "eos" | "end_turn" => FinishReason::Stop,
        _ => FinishReason::Error,
    }
}

pub fn http_client() -> Result<reqwest::Client, ClientError> {
    reqwest::Client::builder()
        .tcp_nodelay(true)
        .build()
        .map_err(|e| ClientError::InvalidConfig(e.to_string()))
}

/// Sends one streaming request and records its events into `timeline`.
///
/// Times are seconds since `t0`. On error the timeline keeps whatever was
/// observed and stays unfinished.
pub async fn stream_request(
    client: &reqwest::Client,
    ep: &EndpointConfig,
    spec: &RequestSpec,
    t0: Instant,
    timeline: &mut TokenTimeline,
) -> Result<(), ClientError> {
    let prompt = spec
        .prompt_text
        .clone()
        .unwrap_or_else(|| filler_prompt(spec.id, spec.prompt_tokens));
    let body = ChatRequest::streaming(&ep.model_name, prompt, spec.decode_tokens);
    let mut req = client.post(ep.completions_url()).json(&body);
    if let Some(key) = ep.resolved_api_key() {
        req = req.bearer_auth(key);
    }
    let resp = req.send().await.map_err(map_reqwest)?;
    let status = resp.status();
    if !status.is_success() {
        let mut body = resp.text().await.unwrap_or_default();
        body.truncate(512);
        return Err(ClientError::Http {
            status: status.as_u16(),
            body,
        });
    }
    let ctype = resp
        .headers()
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    if !ctype.starts_with("text/event-stream") {
        return Err(ClientError::Protocol(format!(
            "expected a text/event-stream response, got {ctype:?}"
        )));
    }

    let mut decoder = SseDecoder::new();
    let mut stream = resp.bytes_stream();
    let mut cumulative = 0u64;
    let mut reason: Option<FinishReason> = None;
    let mut done = false;
    while let Some(chunk) = stream.next().await {
        let at = Instant::now().duration_since(t0).as_secs_f64();
        let chunk = chunk.map_err(map_reqwest)?;
        for ev in decoder
            .feed(&chunk)
            .map_err(|e| ClientError::Protocol(e.to_string()))?
        {
            if ev.is_done() {
                done = true;
                break;
            }
            let c = parse_chunk(&ev.data)
                .map_err(|e| ClientError::Protocol(format!("bad chunk: {e}")))?;
            let has_content = c.content().is_some_and(|s| !s.is_empty());
            match c.usage {
                Some(u) => {
                    let delta = u.completion_tokens.saturating_sub(cumulative);
                    cumulative = cumulative.max(u.completion_tokens);
                    timeline.provider_tokens = Some(cumulative);
                    if has_content && delta > 0 {
                        timeline.push_event(at, delta.min(u64::from(u32::MAX)) as u32);
                    }
                }
                None if has_content => {
                    timeline.push_event(at, 1);
                    timeline.event_level_only = true;
                }
                None => {}
            }
            if let Some(r) = c.finish_reason() {
                reason = Some(finish_reason(r));
            }
        }
        if done {
            break;
        }
    }
    if !done && reason.is_none() {
        return Err(ClientError::Protocol(
            "stream ended without a terminal event".into(),
        ));
    }
    if timeline.token_times.is_empty() {
        return Err(ClientError::Protocol("stream carried no tokens".into()));
    }
    timeline.finish(reason.unwrap_or(FinishReason::Stop));
    Ok(())
}

/// One request with the configured timeout and retry count.
async fn run_one(
    client: &reqwest::Client,
    ep: &EndpointConfig,
    spec: &RequestSpec,
    t0: Instant,
    submit: f64,
) -> (TokenTimeline, Result<(), ClientError>) {
    let timeout = Duration::from_secs_f64(ep.request_timeout_s);
    let mut attempt = 0;
    loop {
        let mut t = TokenTimeline::new(spec.id, submit);
        let res = match tokio::time::timeout(timeout, stream_request(client, ep, spec, t0, &mut t))
            .await
        {
            Ok(r) => r,
            Err(_) => Err(ClientError::Timeout(spec.id)),
        };
        let retryable = matches!(res, Err(ClientError::Connect(_) | ClientError::Http { .. }))
            && t.token_times.is_empty();
        if res.is_ok() || !retryable || attempt >= ep.retries {
            if res.is_err() {
                t.finish_reason = Some(FinishReason::Error);
            }
            return (t, res);
        }
        attempt += 1;
    }
}

/// Sends a one-word, one-token request to confirm the endpoint speaks the protocol.
pub async fn preflight(client: &reqwest::Client, ep: &EndpointConfig) -> Result<(), ClientError> {
    let spec = RequestSpec::new(u64::MAX, 0.0, 1, 1);
    let t0 = Instant::now();
    let mut t = TokenTimeline::new(spec.id, 0.0);
    let timeout = Duration::from_secs_f64(ep.request_timeout_s);
    match tokio::time::timeout(timeout, stream_request(client, ep, &spec, t0, &mut t)).await {
        Ok(Ok(())) => Ok(()),
        Ok(Err(e)) => Err(e),
        Err(_) => Err(ClientError::Connect("preflight request timed out".into())),
    }
}

/// Timer ticks are a millisecond apart, so sleep to just short of the target
/// and yield for the rest.
async fn wait_until(target: Instant) {
    let coarse = target
        .checked_sub(Duration::from_millis(2))
        .unwrap_or(target);
    tokio::time::sleep_until(coarse).await;
    while Instant::now() < target {
        tokio::task::yield_now().await;
    }
}

/// Replays `workload` against the endpoint on an open-loop schedule.
///
/// Per-request failures are collected in the outcome rather than aborting
/// the run; their timelines stay unfinished.
pub async fn run_load(
    workload: &[RequestSpec],
    ep: &EndpointConfig,
    seed: u64,
) -> Result<LoadOutcome, ClientError> {
    ep.validate()?;
    if workload.is_empty() {
        return Err(ClientError::InvalidWorkload("workload is empty".into()));
    }
    if workload
        .windows(2)
        .any(|w| w[1].arrival_time < w[0].arrival_time)
    {
        return Err(ClientError::InvalidWorkload(
            "arrivals must be sorted".into(),
        ));
    }
    for r in workload {
        r.validate()
            .map_err(|e| ClientError::InvalidWorkload(e.to_string()))?;
    }
    let client = http_client()?;
    preflight(&client, ep).await?;

    let ep = Arc::new(ep.clone());
    let slots = Arc::new(Semaphore::new(ep.max_concurrency));
    let t0 = Instant::now();
    let mut handles = Vec::with_capacity(workload.len());
    for spec in workload {
        let scheduled = t0 + Duration::from_secs_f64(spec.arrival_time);
        wait_until(scheduled).await;
        let (client, ep, slots, spec) = (
            client.clone(),
            Arc::clone(&ep),
            Arc::clone(&slots),
            spec.clone(),
        );
        handles.push(tokio::spawn(async move {
            let _permit = slots.acquire_owned().await.expect("semaphore never closed");
            let dispatched = Instant::now();
            let skew = dispatched
                .saturating_duration_since(scheduled)
                .as_secs_f64();
            let submit = dispatched.duration_since(t0).as_secs_f64();
            let (mut t, res) = run_one(&client, &ep, &spec, t0, submit).await;
            t.dispatch_skew_s = Some(skew);
            (t, res)
        }));
    }

    let mut timelines = Vec::with_capacity(handles.len());
    let mut failures = Vec::new();
    for h in handles {
        let (t, res) = h
            .await
            .map_err(|e| ClientError::Protocol(format!("request task panicked: {e}")))?;
        if let Err(e) = res {
            failures.push(RequestFailure {
                request_id: t.request_id,
                kind: classify(&e),
                message: e.to_string(),
            });
        }
        timelines.push(t);
    }
    let mut skews: Vec<f64> = timelines.iter().filter_map(|t| t.dispatch_skew_s).collect();
    skews.sort_by(f64::total_cmp);
    let p99 = percentile_sorted(&skews, 99.0);
    let (warmup_cutoff, cooldown_cutoff) = steady_state_window(workload, DEFAULT_WARMUP_FRACTION);
    Ok(LoadOutcome {
        record: RunRecord {
            config_fingerprint: config_fingerprint(&*ep),
            seed,
            requests: workload.to_vec(),
            timelines,
            warmup_cutoff,
            cooldown_cutoff,
        },
        failures,
        p99_dispatch_skew_s: p99,
        saturated: p99 > ep.max_dispatch_skew_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let ok = EndpointConfig::new("http://127.0.0.1:8000", "m");
        assert!(ok.validate().is_ok());
        for bad in [
            EndpointConfig::new("not a url", "m"),
            EndpointConfig::new("ftp://host", "m"),
            EndpointConfig {
                request_timeout_s: 0.0,
                ..ok.clone()
            },
            EndpointConfig {
                max_concurrency: 0,
                ..ok.clone()
            },
        ] {
            assert!(
                matches!(bad.validate(), Err(ClientError::InvalidConfig(_))),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn api_key_is_not_serialized_or_printed() {
        let ep = EndpointConfig {
            api_key: Some("sk-secret".into()),
            ..EndpointConfig::new("http://h", "m")
        };
        assert!(!serde_json::to_string(&ep).unwrap().contains("sk-secret"));
        assert!(!format!("{ep:?}").contains("sk-secret"));
        assert_eq!(ep.resolved_api_key().as_deref(), Some("sk-secret"));
    }

    #[test]
    fn url_joining() {
        assert_eq!(
            EndpointConfig::new("http://h:1/", "m").completions_url(),
            "http://h:1/v1/chat/completions"
        );
    }
}
