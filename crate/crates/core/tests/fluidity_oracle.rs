use infermeter_core::metrics::{fluidity_index, DeadlineSpec};
use infermeter_core::model::{FinishReason, TokenTimeline};
use infermeter_oracles::{enumerate_deadlines, expand_events, DeadlineTally};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn timeline(submit: f64, events: &[(f64, u32)]) -> TokenTimeline {
    let mut t = TokenTimeline::new(0, submit);
    for &(a, k) in events {
        t.push_event(a, k);
    }
    t.finish(FinishReason::Length);
    t
}

fn random_events(rng: &mut ChaCha8Rng) -> (f64, Vec<(f64, u32)>) {
    let submit = rng.random_range(0.0..100.0);
    let n = rng.random_range(1..300);
    let mut now = submit + rng.random_range(0.0..3.0);
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let k = if rng.random_bool(0.1) {
            rng.random_range(2..5)
        } else {
            1
        };
        events.push((now, k));
        now += rng.random_range(0.0..0.08);
        if rng.random_bool(0.02) {
            now += rng.random_range(0.2..6.0);
        }
    }
    (submit, events)
}

#[test]
fn matches_brute_force_enumerator() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for case in 0..10_000 {
        let (submit, events) = random_events(&mut rng);
        let d =
            DeadlineSpec::new(rng.random_range(0.05..2.5), rng.random_range(0.005..0.1)).unwrap();
        let got = fluidity_index(&timeline(submit, &events), &d).unwrap();
        let want = enumerate_deadlines(
            submit,
            d.prefill_deadline_s,
            d.decode_deadline_s,
            &expand_events(&events),
        );
        assert_eq!(
            DeadlineTally {
                met: got.met,
                missed: got.missed
            },
            want,
            "case {case}: submit {submit} deadlines {d:?}"
        );
        assert_eq!(got.index, want.fluidity());
        assert_eq!(got.index == 1.0, want.missed == 0);
    }
}

fn stall_events(stall_after: usize) -> Vec<(f64, u32)> {
    (0..2000)
        .map(|i| {
            let stall = if i >= stall_after { 4.0 } else { 0.0 };
            (1.0 + 0.03 * i as f64 + stall, 1)
        })
        .collect()
}

#[test]
fn early_stall_costs_fluidity() {
    let events = stall_events(10);
    let d = DeadlineSpec::new(1.0, 0.04).unwrap();
    let oracle = enumerate_deadlines(0.0, 1.0, 0.04, &expand_events(&events));
    assert_eq!(oracle.met, 1999);
    assert_eq!(oracle.missed, 98);
    let got = fluidity_index(&timeline(0.0, &events), &d).unwrap();
    assert_eq!((got.met, got.missed), (oracle.met, oracle.missed));
    assert!(got.index < 1.0);
    assert!((got.index - 0.95).abs() < 0.005, "{}", got.index);
}

#[test]
fn late_stall_is_absorbed_by_slack() {
    let events = stall_events(500);
    let d = DeadlineSpec::new(1.0, 0.04).unwrap();
    let got = fluidity_index(&timeline(0.0, &events), &d).unwrap();
    assert_eq!(got.index, 1.0);
    assert_eq!(
        enumerate_deadlines(0.0, 1.0, 0.04, &expand_events(&events)).missed,
        0
    );
}
