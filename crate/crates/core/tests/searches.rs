use infermeter_core::deadline::{DeadlinePolicy, PrefillFit};
use infermeter_core::model::{FinishReason, RequestSpec, TokenTimeline};
use infermeter_core::search::{
    capacity_search, fluid_rate_search, CapacityResult, CapacitySearch, FluidityRequirement,
    ProbeOutcome, SearchError,
};
use infermeter_oracles::{linear_scan_capacity, linear_scan_fluid_rate, FluidCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn step_outcome(q: f64, threshold: f64) -> Result<ProbeOutcome, String> {
    let attained = q <= threshold;
    Ok(ProbeOutcome {
        attained,
        attainment: if attained { 1.0 } else { 0.0 },
    })
}

#[test]
fn capacity_matches_linear_scan() {
    for threshold in [0.35, 1.0, 2.2, 7.3, 13.9, 40.0] {
        let params = CapacitySearch::default();
        let r = capacity_search(&params, |q, _| step_outcome(q, threshold)).unwrap();
        let oracle = linear_scan_capacity(0.1, 64.0, 0.01, |q| q <= threshold + 1e-9).unwrap();
        assert!(r.max_qps <= threshold, "{threshold}: {}", r.max_qps);
        assert!(
            r.max_qps >= oracle * (1.0 - params.tol_rel) - 0.01,
            "{threshold}: {} vs {oracle}",
            r.max_qps
        );
        assert!(r.probes.len() <= CapacityResult::probe_budget(1.0, params.tol_rel));
    }
}

#[test]
fn capacity_step_fixture() {
    let r = capacity_search(&CapacitySearch::default(), |q, _| step_outcome(q, 7.3)).unwrap();
    assert!((6.95..=7.3).contains(&r.max_qps), "{}", r.max_qps);
    assert!(r.probes.len() <= 20 + (1.0f64 / 0.05).log2().ceil() as usize);
}

#[test]
fn probe_errors_surface() {
    let r = capacity_search(&CapacitySearch::default(), |q, _| {
        if q > 3.0 {
            Err("endpoint unreachable")
        } else {
            Ok(ProbeOutcome {
                attained: true,
                attainment: 1.0,
            })
        }
    });
    assert!(matches!(r, Err(SearchError::Probe { .. })));
}

fn policy() -> DeadlinePolicy {
    let fit = PrefillFit {
        c1: 1e-4,
        ..PrefillFit::constant(0.2)
    };
    DeadlinePolicy::new(fit, 0.3, 0.05).unwrap()
}

fn oracle_prefill_deadline(prompt: u64) -> f64 {
    0.2 + 1e-4 * prompt as f64 + 0.3
}

fn random_set(rng: &mut ChaCha8Rng) -> (Vec<(RequestSpec, TokenTimeline)>, Vec<FluidCase>) {
    let n = rng.random_range(1..12);
    let mut pairs = Vec::new();
    let mut cases = Vec::new();
    for id in 0..n {
        let submit = rng.random_range(0.0..20.0);
        let prompt = rng.random_range(1..4000);
        let tokens = rng.random_range(1..200);
        let pace = rng.random_range(0.005..0.06);
        let mut now = submit + rng.random_range(0.05..1.5);
        let mut t = TokenTimeline::new(id, submit);
        let mut arrivals = Vec::new();
        for _ in 0..tokens {
            t.push_event(now, 1);
            arrivals.push(now);
            now += pace * rng.random_range(0.5..1.5);
            if rng.random_bool(0.01) {
                now += rng.random_range(0.1..1.0);
            }
        }
        t.finish(FinishReason::Length);
        pairs.push((RequestSpec::new(id, submit, prompt, tokens), t));
        cases.push(FluidCase {
            submit,
            prefill_deadline: oracle_prefill_deadline(prompt),
            arrivals,
        });
    }
    (pairs, cases)
}

#[test]
fn fluid_rate_matches_linear_scan() {
    const LO: f64 = 0.001;
    const HI: f64 = 0.2;
    const GRID: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut feasible = 0;
    for set in 0..100 {
        let (pairs, cases) = random_set(&mut rng);
        let percentile = [50.0, 90.0, 99.0][set % 3];
        let threshold = rng.random_range(0.5..1.0);
        let req = FluidityRequirement {
            percentile,
            fluidity_threshold: threshold,
        };
        let oracle = linear_scan_fluid_rate(&cases, percentile, threshold, LO, HI, GRID);
        match (
            fluid_rate_search(&pairs, &policy(), &req, LO, HI, 2e-4),
            oracle,
        ) {
            (Ok(r), Some(o)) => {
                feasible += 1;
                assert!(
                    (r.decode_deadline_s - o).abs() <= GRID + 1e-12,
                    "set {set}: {} vs {o}",
                    r.decode_deadline_s
                );
                assert!((r.tokens_per_s * r.decode_deadline_s - 1.0).abs() < 1e-12);
            }
            (Err(SearchError::InfeasibleAtCeiling(_)), None) => {}
            (got, want) => panic!("set {set}: {got:?} vs oracle {want:?}"),
        }
    }
    assert!(feasible > 50, "{feasible}");
}

fn paced(id: u64, gap: f64, stall_at: Option<usize>) -> (RequestSpec, TokenTimeline) {
    let mut t = TokenTimeline::new(id, 0.0);
    let mut now = 0.3;
    for i in 0..300 {
        if Some(i) == stall_at {
            now += 3.0;
        }
        t.push_event(now, 1);
        now += gap;
    }
    t.finish(FinishReason::Length);
    (RequestSpec::new(id, 0.0, 100, 300), t)
}

#[test]
fn paced_tokens_recover_their_pace() {
    let pairs: Vec<_> = (0..20).map(|i| paced(i, 0.020, None)).collect();
    let req = FluidityRequirement {
        percentile: 99.0,
        fluidity_threshold: 1.0,
    };
    let r = fluid_rate_search(&pairs, &policy(), &req, 0.001, 0.2, 0.001).unwrap();
    assert!(
        (r.decode_deadline_s - 0.020).abs() <= 0.05 * 0.020,
        "{}",
        r.decode_deadline_s
    );
}

#[test]
fn stalls_demand_looser_deadlines() {
    let req = FluidityRequirement {
        percentile: 99.0,
        fluidity_threshold: 1.0,
    };
    let clean: Vec<_> = (0..5).map(|i| paced(i, 0.020, None)).collect();
    let mut stalled = clean.clone();
    stalled[2] = paced(2, 0.020, Some(20));
    let a = fluid_rate_search(&clean, &policy(), &req, 0.001, 0.5, 0.001).unwrap();
    let b = fluid_rate_search(&stalled, &policy(), &req, 0.001, 0.5, 0.001).unwrap();
    assert!(b.decode_deadline_s > a.decode_deadline_s);
}
