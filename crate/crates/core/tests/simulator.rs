use infermeter_core::metrics::{compute_request_metrics, percentile_sorted, DeadlineSpec};
use infermeter_core::model::RequestSpec;
use infermeter_core::sim::{simulate, LatencyModelConfig, PolicyConfig, SpeculativeConfig};
use infermeter_core::workload::{
    build_workload, ArrivalProcess, LengthFilter, WorkloadConfig, WorkloadSource,
};

fn zero_gap_fraction(spec: SpeculativeConfig, decode_tokens: u64) -> f64 {
    let cfg = PolicyConfig::speculative(LatencyModelConfig::default(), spec);
    let run = simulate(&[RequestSpec::new(0, 0.0, 64, decode_tokens)], &cfg, 11).unwrap();
    let times = run.timelines[0].per_token_times();
    let gaps = times.len() - 1;
    let zeros = times.windows(2).filter(|w| w[1] == w[0]).count();
    zeros as f64 / gaps as f64
}

#[test]
fn full_acceptance_gives_three_quarters_zero_gaps() {
    let spec = SpeculativeConfig {
        accept_prob: 1.0,
        ..Default::default()
    };
    assert_eq!(zero_gap_fraction(spec, 1 + 4 * 5000), 0.75);
}

#[test]
fn partial_acceptance_matches_geometric_expectation() {
    let spec = SpeculativeConfig::uniform(3, 0.8);
    let accepted = spec.expected_accepted();
    // Independent of the simulator: 0.8 + 0.64 + 0.512.
    assert!((accepted - 1.952).abs() < 1e-12);
    let expected = accepted / (accepted + 1.0);
    // About 100k speculative steps.
    let got = zero_gap_fraction(spec, 300_000);
    assert!(
        (got - expected).abs() < 0.03 * expected,
        "{got} vs {expected}"
    );
    assert!((got - expected).abs() < 0.005, "{got} vs {expected}");
}

fn conv_workload(count: usize, qps: f64) -> Vec<RequestSpec> {
    build_workload(&WorkloadConfig {
        source: WorkloadSource::Profile {
            name: "azure-conv-2024".into(),
        },
        count,
        qps,
        arrival: ArrivalProcess::Poisson,
        filter: LengthFilter::STANDARD,
        seed: 42,
    })
    .unwrap()
    .requests
}

fn p99_tbt(cfg: &PolicyConfig, workload: &[RequestSpec]) -> f64 {
    let run = simulate(workload, cfg, 42).unwrap();
    let d = DeadlineSpec::new(1.0, 0.05).unwrap();
    let mut gaps: Vec<f64> = run
        .pairs()
        .into_iter()
        .flat_map(|(s, t)| compute_request_metrics(t, s, &d).unwrap().tbt_s)
        .collect();
    gaps.sort_by(f64::total_cmp);
    percentile_sorted(&gaps, 99.0)
}

#[test]
fn prefill_priority_stalls_more_than_chunked() {
    let w = conv_workload(400, 2.0);
    let pp = p99_tbt(
        &PolicyConfig::prefill_priority(LatencyModelConfig::default()),
        &w,
    );
    let ch = p99_tbt(
        &PolicyConfig::chunked(LatencyModelConfig::default(), 512),
        &w,
    );
    assert!(pp > ch, "prefill_priority {pp} vs chunked {ch}");
}

#[test]
fn tokens_are_conserved_and_causal() {
    let w = conv_workload(300, 3.0);
    for cfg in [
        PolicyConfig::prefill_priority(LatencyModelConfig::default()),
        PolicyConfig::chunked(LatencyModelConfig::default(), 256),
        PolicyConfig::speculative(LatencyModelConfig::default(), SpeculativeConfig::default()),
    ] {
        let run = simulate(&w, &cfg, 9).unwrap();
        run.validate().unwrap();
        for (s, t) in run.pairs() {
            assert!(t.finished);
            assert_eq!(t.total_tokens(), s.decode_tokens);
            assert!(t.schedule_time.unwrap() >= s.arrival_time);
            assert!(t.first_token_time().unwrap() > t.schedule_time.unwrap());
        }
    }
}

#[test]
fn repeated_runs_are_identical() {
    let w = conv_workload(200, 4.0);
    let cfg =
        PolicyConfig::speculative(LatencyModelConfig::default(), SpeculativeConfig::default());
    assert_eq!(
        simulate(&w, &cfg, 5).unwrap().to_json().unwrap(),
        simulate(&w, &cfg, 5).unwrap().to_json().unwrap()
    );
}
