//! Discrete-event model of an LLM serving engine.
//!
//! Time advances one engine iteration at a time. Prefill of `n` prompt
//! tokens costs `alpha*n + beta*n^2`; a decode step over `b` sequences costs
//! `gamma0 + gamma1*b` and emits one token per sequence. Three schedulers are
//! modelled:
//!
//! * `prefill_priority` runs every pending prefill before any decode step, so
//!   in-flight requests stall while newcomers are prefilled.
//! * `chunked_prefill` piggybacks at most `chunk_tokens` prompt tokens onto
//!   each decode step.
//! * `speculative` schedules like `prefill_priority` but each decode step
//!   drafts `k` tokens, verifies them, and releases the accepted prefix plus
//!   one token in a single burst.

mod engine;

use serde::{Deserialize, Serialize};

pub use engine::{simulate, simulate_isolated, simulate_with_window};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("policy/config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("workload is empty")]
    WorkloadEmpty,
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeculativeConfig {
    /// Draft tokens proposed per step (`k`).
    pub draft_len: u32,
    /// Independent survival probability of each draft token.
    pub accept_prob: f64,
    pub draft_step_s: f64,
    pub verify_step_s: f64,
    /// Prefill cost multiplier covering the draft model's own prefill.
    #[serde(default = "default_draft_prefill_factor")]
    pub draft_prefill_factor: f64,
    /// When set, each request draws its own acceptance probability from a
    /// Beta distribution with mean `accept_prob` and this concentration
    /// (`alpha + beta`). Smaller values spread requests further apart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accept_concentration: Option<f64>,
}

fn default_draft_prefill_factor() -> f64 {
    1.2
}

pub const DEFAULT_ACCEPT_CONCENTRATION: f64 = 2.0;

impl Default for SpeculativeConfig {
    fn default() -> Self {
        Self {
            draft_len: 3,
            accept_prob: 0.7,
            draft_step_s: 0.003,
            verify_step_s: 0.040,
            draft_prefill_factor: default_draft_prefill_factor(),
            accept_concentration: Some(DEFAULT_ACCEPT_CONCENTRATION),
        }
    }
}

impl SpeculativeConfig {
    /// Every request uses `accept_prob` exactly.
    pub fn uniform(draft_len: u32, accept_prob: f64) -> Self {
        Self {
            draft_len,
            accept_prob,
            accept_concentration: None,
            ..Self::default()
        }
    }

    /// Expected accepted drafts per step at `accept_prob`: `sum_{i=1..k} p^i`.
    pub fn expected_accepted(&self) -> f64 {
        (1..=self.draft_len)
            .map(|i| self.accept_prob.powi(i as i32))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModelConfig {
    pub prefill_linear_s_per_token: f64,
    pub prefill_quad_s_per_token_sq: f64,
    pub decode_base_s: f64,
    pub decode_per_seq_s: f64,
    pub max_batch_seqs: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speculative: Option<SpeculativeConfig>,
}

impl Default for LatencyModelConfig {
    /// Reference cost model. Absolute values are illustrative; the ratios are
    /// chosen so the scheduler phenomena (stalls, bursts, draft overhead) are
    /// visible at desk scale.
    fn default() -> Self {
        Self {
            prefill_linear_s_per_token: 1e-4,
            prefill_quad_s_per_token_sq: 5e-9,
            decode_base_s: 0.025,
            decode_per_seq_s: 0.0005,
            max_batch_seqs: 64,
            chunk_tokens: None,
            speculative: None,
        }
    }
}

impl LatencyModelConfig {
    pub fn prefill_cost(&self, tokens: u64) -> f64 {
        let n = tokens as f64;
        self.prefill_linear_s_per_token * n + self.prefill_quad_s_per_token_sq * n * n
    }

    /// Cost of prefilling prompt positions `[done, done + chunk)`; chunk costs
    /// over a whole prompt sum to [`Self::prefill_cost`].
    pub fn prefill_chunk_cost(&self, done: u64, chunk: u64) -> f64 {
        let (p, c) = (done as f64, chunk as f64);
        self.prefill_linear_s_per_token * c
            + self.prefill_quad_s_per_token_sq * ((p + c) * (p + c) - p * p)
    }

    pub fn decode_step_cost(&self, batch: usize) -> f64 {
        self.decode_base_s + self.decode_per_seq_s * batch as f64
    }

    fn validate(&self) -> Result<(), SimError> {
        let times = [
            self.prefill_linear_s_per_token,
            self.prefill_quad_s_per_token_sq,
            self.decode_base_s,
            self.decode_per_seq_s,
        ];
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(SimError::ConfigMismatch(
                "latency coefficients must be finite and >= 0".into(),
            ));
        }
        if self.max_batch_seqs == 0 {
            return Err(SimError::ConfigMismatch(
                "max_batch_seqs must be >= 1".into(),
            ));
        }
        if self.chunk_tokens == Some(0) {
            return Err(SimError::ConfigMismatch("chunk_tokens must be >= 1".into()));
        }
        if let Some(s) = &self.speculative {
            if s.draft_len == 0 {
                return Err(SimError::ConfigMismatch("draft_len must be >= 1".into()));
            }
            if !(0.0..=1.0).contains(&s.accept_prob) {
                return Err(SimError::ConfigMismatch(
                    "accept_prob must lie in [0, 1]".into(),
                ));
            }
            if s.accept_concentration
                .is_some_and(|c| !(c.is_finite() && c > 0.0))
            {
                return Err(SimError::ConfigMismatch(
                    "accept_concentration must be positive".into(),
                ));
            }
            let ok = |x: f64| x.is_finite() && x >= 0.0;
            if !(ok(s.draft_step_s) && ok(s.verify_step_s) && ok(s.draft_prefill_factor)) {
                return Err(SimError::ConfigMismatch(
                    "speculative timings must be finite and >= 0".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    PrefillPriority,
    ChunkedPrefill,
    Speculative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub policy: Policy,
    pub latency: LatencyModelConfig,
}

impl PolicyConfig {
    pub fn prefill_priority(latency: LatencyModelConfig) -> Self {
        Self {
            policy: Policy::PrefillPriority,
            latency: LatencyModelConfig {
                chunk_tokens: None,
                speculative: None,
                ..latency
            },
        }
    }

    pub fn chunked(latency: LatencyModelConfig, chunk_tokens: u64) -> Self {
        Self {
            policy: Policy::ChunkedPrefill,
            latency: LatencyModelConfig {
                chunk_tokens: Some(chunk_tokens),
                speculative: None,
                ..latency
            },
        }
    }

    pub fn speculative(latency: LatencyModelConfig, spec: SpeculativeConfig) -> Self {
        Self {
            policy: Policy::Speculative,
            latency: LatencyModelConfig {
                chunk_tokens: None,
                speculative: Some(spec),
                ..latency
            },
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.latency.validate()?;
        let chunked = self.policy == Policy::ChunkedPrefill;
        if chunked != self.latency.chunk_tokens.is_some() {
            return Err(SimError::ConfigMismatch(
                "chunk_tokens must be set exactly when the policy is chunked_prefill".into(),
            ));
        }
        let spec = self.policy == Policy::Speculative;
        if spec != self.latency.speculative.is_some() {
            return Err(SimError::ConfigMismatch(
                "speculative parameters must be set exactly when the policy is speculative".into(),
            ));
        }
        Ok(())
    }

    /// Time to first token for a lone request of `prompt_tokens`.
    pub fn isolated_prefill_cost(&self, prompt_tokens: u64) -> f64 {
        let base = self.latency.prefill_cost(prompt_tokens);
        match (self.policy, &self.latency.speculative) {
            (Policy::Speculative, Some(s)) => base * s.draft_prefill_factor,
            _ => base,
        }
    }

    pub fn from_json(s: &str) -> Result<Self, SimError> {
        let cfg: PolicyConfig =
            serde_json::from_str(s).map_err(|e| SimError::ConfigMismatch(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
