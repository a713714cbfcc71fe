use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, Distribution};

use super::{Policy, PolicyConfig, SimError, SpeculativeConfig};
use crate::model::{
    config_fingerprint, steady_state_window, FinishReason, RequestSpec, RunRecord, TokenTimeline,
    DEFAULT_WARMUP_FRACTION,
};
use crate::rng;

struct Seq {
    slot: usize,
    /// Per-request draft acceptance probability (speculative only).
    accept_prob: f64,
    prompt: u64,
    prefilled: u64,
    remaining: u64,
    timeline: TokenTimeline,
}

impl Seq {
    fn in_prefill(&self) -> bool {
        self.prefilled < self.prompt
    }

    fn emit(&mut self, at: f64, tokens: u64) {
        let k = tokens.min(self.remaining);
        debug_assert!(k > 0);
        self.timeline.push_event(at, k as u32);
        self.remaining -= k;
        if self.remaining == 0 {
            self.timeline.finish(FinishReason::Length);
        }
    }
}

struct Engine<'a> {
    cfg: &'a PolicyConfig,
    rng: ChaCha12Rng,
    now: f64,
    running: Vec<Seq>,
}

impl Engine<'_> {
    fn draw_accept_prob(&mut self) -> f64 {
        let Some(spec) = &self.cfg.latency.speculative else {
            return 0.0;
        };
        let mean = spec.accept_prob;
        match spec.accept_concentration {
            Some(c) if mean > 0.0 && mean < 1.0 => Beta::new(mean * c, (1.0 - mean) * c)
                .expect("validated")
                .sample(&mut self.rng),
            _ => mean,
        }
    }

    /// Runs one iteration and returns its duration.
    fn step(&mut self) -> f64 {
        match self.cfg.policy {
            Policy::PrefillPriority | Policy::Speculative => {
                if self.running.iter().any(Seq::in_prefill) {
                    self.prefill_all()
                } else if let Some(spec) = self.cfg.latency.speculative {
                    self.speculative_decode(&spec)
                } else {
                    self.decode_all()
                }
            }
            Policy::ChunkedPrefill => self.mixed_step(),
        }
    }

    fn prefill_all(&mut self) -> f64 {
        let factor = match (self.cfg.policy, &self.cfg.latency.speculative) {
            (Policy::Speculative, Some(s)) => s.draft_prefill_factor,
            _ => 1.0,
        };
        let start = self.now;
        let mut cost = 0.0;
        for s in self.running.iter_mut().filter(|s| s.in_prefill()) {
            s.timeline.schedule_time.get_or_insert(start);
            cost += self
                .cfg
                .latency
                .prefill_chunk_cost(s.prefilled, s.prompt - s.prefilled);
        }
        cost *= factor;
        let end = start + cost;
        for s in self.running.iter_mut().filter(|s| s.in_prefill()) {
            s.prefilled = s.prompt;
            s.emit(end, 1);
        }
        cost
    }

    fn decode_all(&mut self) -> f64 {
        let cost = self.cfg.latency.decode_step_cost(self.running.len());
        let end = self.now + cost;
        for s in &mut self.running {
            s.emit(end, 1);
        }
        cost
    }

    fn speculative_decode(&mut self, spec: &SpeculativeConfig) -> f64 {
        let cost = f64::from(spec.draft_len) * spec.draft_step_s
            + spec.verify_step_s
            + self.cfg.latency.decode_per_seq_s * self.running.len() as f64;
        let end = self.now + cost;
        for s in &mut self.running {
            let mut accepted = 0u64;
            while accepted < u64::from(spec.draft_len) && self.rng.random_bool(s.accept_prob) {
                accepted += 1;
            }
            s.emit(end, accepted + 1);
        }
        cost
    }

    fn mixed_step(&mut self) -> f64 {
        let lat = &self.cfg.latency;
        let mut budget = lat.chunk_tokens.expect("validated");
        let start = self.now;
        let decoding = self.running.iter().filter(|s| !s.in_prefill()).count();
        let mut cost = if decoding > 0 {
            lat.decode_step_cost(decoding)
        } else {
            0.0
        };
        let mut chunked = Vec::new();
        for (i, s) in self.running.iter_mut().enumerate() {
            if budget == 0 {
                break;
            }
            if !s.in_prefill() {
                continue;
            }
            let take = budget.min(s.prompt - s.prefilled);
            s.timeline.schedule_time.get_or_insert(start);
            cost += lat.prefill_chunk_cost(s.prefilled, take);
            budget -= take;
            chunked.push((i, take));
        }
        let end = start + cost;
        for s in self.running.iter_mut().filter(|s| !s.in_prefill()) {
            s.emit(end, 1);
        }
        for (i, take) in chunked {
            let s = &mut self.running[i];
            s.prefilled += take;
            if !s.in_prefill() {
                s.emit(end, 1);
            }
        }
        cost
    }
}

/// Simulates the workload under `cfg` with the default steady-state window.
pub fn simulate(
    workload: &[RequestSpec],
    cfg: &PolicyConfig,
    seed: u64,
) -> Result<RunRecord, SimError> {
    simulate_with_window(workload, cfg, seed, DEFAULT_WARMUP_FRACTION)
}

pub fn simulate_with_window(
    workload: &[RequestSpec],
    cfg: &PolicyConfig,
    seed: u64,
    warmup_fraction: f64,
) -> Result<RunRecord, SimError> {
    cfg.validate()?;
    if workload.is_empty() {
        return Err(SimError::WorkloadEmpty);
    }
    for r in workload {
        r.validate()
            .map_err(|e| SimError::InvalidWorkload(e.to_string()))?;
    }
    if workload
        .windows(2)
        .any(|w| w[1].arrival_time < w[0].arrival_time)
    {
        return Err(SimError::InvalidWorkload(
            "requests must be sorted by arrival time".into(),
        ));
    }

    let mut engine = Engine {
        cfg,
        rng: rng::stream(seed, rng::SIMULATOR),
        now: 0.0,
        running: Vec::new(),
    };
    let mut next = 0usize;
    let mut waiting: VecDeque<usize> = VecDeque::new();
    let mut done: Vec<Option<TokenTimeline>> = vec![None; workload.len()];
    let cap = cfg.latency.max_batch_seqs as usize;

    loop {
        while next < workload.len() && workload[next].arrival_time <= engine.now {
            waiting.push_back(next);
            next += 1;
        }
        while engine.running.len() < cap {
            let Some(slot) = waiting.pop_front() else {
                break;
            };
            let r = &workload[slot];
            let accept_prob = engine.draw_accept_prob();
            engine.running.push(Seq {
                slot,
                accept_prob,
                prompt: r.prompt_tokens,
                prefilled: 0,
                remaining: r.decode_tokens,
                timeline: TokenTimeline::new(r.id, r.arrival_time),
            });
        }
        if engine.running.is_empty() {
            if next >= workload.len() {
                break;
            }
            engine.now = engine.now.max(workload[next].arrival_time);
            continue;
        }
        let dt = engine.step();
        engine.now += dt;
        let mut i = 0;
        while i < engine.running.len() {
            if engine.running[i].timeline.finished {
                let s = engine.running.remove(i);
                done[s.slot] = Some(s.timeline);
            } else {
                i += 1;
            }
        }
    }

    let (warmup_cutoff, cooldown_cutoff) = steady_state_window(workload, warmup_fraction);
    Ok(RunRecord {
        config_fingerprint: config_fingerprint(cfg),
        seed,
        requests: workload.to_vec(),
        timelines: done
            .into_iter()
            .map(|t| t.expect("every request completes"))
            .collect(),
        warmup_cutoff,
        cooldown_cutoff,
    })
}

/// Runs a single request alone on an idle engine, arriving at time zero.
pub fn simulate_isolated(
    spec: &RequestSpec,
    cfg: &PolicyConfig,
    seed: u64,
) -> Result<TokenTimeline, SimError> {
    let lone = RequestSpec {
        arrival_time: 0.0,
        ..spec.clone()
    };
    let mut rec = simulate_with_window(std::slice::from_ref(&lone), cfg, seed, 0.0)?;
    Ok(rec.timelines.pop().expect("one timeline"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::LatencyModelConfig;

    fn ar(alpha: f64, beta: f64, g0: f64, g1: f64, b: u32) -> LatencyModelConfig {
        LatencyModelConfig {
            prefill_linear_s_per_token: alpha,
            prefill_quad_s_per_token_sq: beta,
            decode_base_s: g0,
            decode_per_seq_s: g1,
            max_batch_seqs: b,
            chunk_tokens: None,
            speculative: None,
        }
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn single_request_hand_trace() {
        let cfg = PolicyConfig::prefill_priority(ar(1e-3, 0.0, 0.02, 0.0, 1));
        let rec = simulate(&[RequestSpec::new(0, 0.0, 100, 3)], &cfg, 0).unwrap();
        let t = &rec.timelines[0];
        assert_eq!(t.schedule_time, Some(0.0));
        assert!(
            close(&t.token_times, &[0.1, 0.12, 0.14]),
            "{:?}",
            t.token_times
        );
        assert_eq!(t.finish_reason, Some(FinishReason::Length));
    }

    #[test]
    fn batch_cap_queues_requests() {
        let cfg = PolicyConfig::prefill_priority(ar(1e-3, 0.0, 0.02, 0.0, 1));
        let w = [
            RequestSpec::new(0, 0.0, 100, 2),
            RequestSpec::new(1, 0.0, 100, 2),
        ];
        let rec = simulate(&w, &cfg, 0).unwrap();
        // second request waits for the first to finish at 0.12
        let t = &rec.timelines[1];
        assert!((t.schedule_time.unwrap() - 0.12).abs() < 1e-12);
        assert!(close(&t.token_times, &[0.22, 0.24]));
    }

    #[test]
    fn prefill_priority_stalls_running_decode() {
        let lat = ar(1e-3, 0.0, 0.02, 0.0, 8);
        let w = [
            RequestSpec::new(0, 0.0, 100, 20),
            RequestSpec::new(1, 0.15, 1000, 2),
        ];
        let rec = simulate(&w, &PolicyConfig::prefill_priority(lat), 0).unwrap();
        let gaps: Vec<f64> = rec.timelines[0]
            .token_times
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect();
        let worst = gaps.iter().copied().fold(0.0, f64::max);
        // request 1's full 1.0 s prefill lands between two of request 0's tokens
        assert!(worst >= 1.0, "{gaps:?}");

        let rec = simulate(&w, &PolicyConfig::chunked(lat, 64), 0).unwrap();
        let gaps: Vec<f64> = rec.timelines[0]
            .token_times
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect();
        let worst = gaps.iter().copied().fold(0.0, f64::max);
        assert!(worst <= 0.02 + 0.064 + 1e-12, "{gaps:?}");
    }

    #[test]
    fn speculative_full_acceptance_bursts() {
        let spec = SpeculativeConfig {
            draft_len: 3,
            accept_prob: 1.0,
            draft_step_s: 0.001,
            verify_step_s: 0.01,
            draft_prefill_factor: 1.2,
            accept_concentration: None,
        };
        let cfg = PolicyConfig::speculative(ar(1e-4, 0.0, 0.02, 0.0, 4), spec);
        let rec = simulate(&[RequestSpec::new(0, 0.0, 100, 1 + 4 * 25)], &cfg, 9).unwrap();
        let t = &rec.timelines[0];
        assert_eq!(t.tokens_per_event[0], 1);
        assert!(t.tokens_per_event[1..].iter().all(|&k| k == 4));
        assert!((t.token_times[0] - 0.01 * 1.2).abs() < 1e-12);
    }

    #[test]
    fn conservation_and_causality() {
        let lat = LatencyModelConfig::default();
        let w: Vec<RequestSpec> = (0..50)
            .map(|i| RequestSpec::new(i, i as f64 * 0.3, 200 + 97 * i, 1 + (i * 7) % 40))
            .collect();
        for cfg in [
            PolicyConfig::prefill_priority(lat),
            PolicyConfig::chunked(lat, 256),
            PolicyConfig::speculative(lat, SpeculativeConfig::default()),
        ] {
            let rec = simulate(&w, &cfg, 4).unwrap();
            rec.validate().unwrap();
            for (r, t) in rec.pairs() {
                assert_eq!(t.total_tokens(), r.decode_tokens);
                assert!(
                    t.token_times[0] + 1e-12 >= r.arrival_time + lat.prefill_cost(r.prompt_tokens)
                );
                assert!(t.schedule_time.is_some());
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let lat = LatencyModelConfig::default();
        let cfg = PolicyConfig::speculative(lat, SpeculativeConfig::default());
        let w: Vec<RequestSpec> = (0..20)
            .map(|i| RequestSpec::new(i, i as f64, 500, 50))
            .collect();
        assert_eq!(
            simulate(&w, &cfg, 1).unwrap(),
            simulate(&w, &cfg, 1).unwrap()
        );
        assert_ne!(
            simulate(&w, &cfg, 1).unwrap(),
            simulate(&w, &cfg, 2).unwrap()
        );
    }

    #[test]
    fn empty_and_unsorted_rejected() {
        let cfg = PolicyConfig::prefill_priority(LatencyModelConfig::default());
        assert_eq!(simulate(&[], &cfg, 0), Err(SimError::WorkloadEmpty));
        let w = [
            RequestSpec::new(0, 1.0, 1, 1),
            RequestSpec::new(1, 0.0, 1, 1),
        ];
        assert!(matches!(
            simulate(&w, &cfg, 0),
            Err(SimError::InvalidWorkload(_))
        ));
    }
}
