use super::*;
use crate::deadline::PrefillFit;
use crate::model::{RequestSpec, TokenTimeline};

fn policy() -> DeadlinePolicy {
    DeadlinePolicy::new(PrefillFit::constant(0.5), 0.5, 0.05).unwrap()
}

fn slo() -> SloSpec {
    "p99 ttft<60s".parse().unwrap()
}

/// Requests with a given scheduling delay, zero prefill and 20 ms decode steps.
fn run_with_delays(delays: &[f64], n_tokens: u64) -> RunRecord {
    let mut requests = Vec::new();
    let mut timelines = Vec::new();
    for (i, &d) in delays.iter().enumerate() {
        let arrival = i as f64;
        requests.push(RequestSpec::new(i as u64, arrival, 128, n_tokens));
        let mut t = TokenTimeline::new(i as u64, arrival);
        t.schedule_time = Some(arrival + d);
        for k in 1..=n_tokens {
            t.push_event(arrival + d + 0.02 * k as f64, 1);
        }
        t.finish(FinishReason::Length);
        timelines.push(t);
    }
    RunRecord {
        config_fingerprint: "fixture".into(),
        seed: 0,
        requests,
        timelines,
        warmup_cutoff: 0.0,
        cooldown_cutoff: f64::MAX,
    }
}

fn rule_ids(r: &RunReport) -> Vec<&str> {
    r.lints.iter().map(|l| l.rule_id.as_str()).collect()
}

#[test]
fn normalization_lint_fires_on_long_queueing() {
    let delays = [30.0, 30.0, 30.0, 30.0, 30.0, 30.0, 0.2, 0.2, 0.2, 0.2];
    let r = build_report(
        &run_with_delays(&delays, 1000),
        &policy(),
        &slo(),
        &ReportOptions::default(),
    )
    .unwrap();
    assert!(
        r.metric(MetricKind::NormalizedLatency)
            .unwrap()
            .median()
            .unwrap()
            < 0.1
    );
    let l2 = r
        .lints
        .iter()
        .find(|l| l.rule_id == "L2")
        .expect("L2 fires");
    assert_eq!(l2.severity, Severity::Fail);
    assert_eq!(l2.evidence["p50_scheduling_delay_s"], 30.0);
    assert!(r.has_failures());
}

#[test]
fn normalization_lint_needs_normalized_headline() {
    let delays = [30.0; 4];
    let opts = ReportOptions {
        headline: vec![MetricKind::Ttft, MetricKind::SchedulingDelay],
        practical_ttft_bound_s: 100.0,
        ..Default::default()
    };
    let r = build_report(&run_with_delays(&delays, 100), &policy(), &slo(), &opts).unwrap();
    assert!(!rule_ids(&r).contains(&"L2"));
}

#[test]
fn impractical_ttft_fires_l3() {
    let r = build_report(
        &run_with_delays(&[15.0; 3], 10),
        &policy(),
        &slo(),
        &ReportOptions::default(),
    )
    .unwrap();
    let l3 = r
        .lints
        .iter()
        .find(|l| l.rule_id == "L3")
        .expect("L3 fires");
    assert!(l3.evidence["p99_ttft_s"] > 10.0);
}

#[test]
fn clean_run_has_no_findings() {
    let r = build_report(
        &run_with_delays(&[0.1; 5], 50),
        &policy(),
        &slo(),
        &ReportOptions::default(),
    )
    .unwrap();
    assert!(r.lints.is_empty(), "{:?}", r.lints);
    assert!(r.slo_attained);
    assert!(r.tokens.conserved());
    assert_eq!(r.request_count, 5);
    assert_eq!(r.metric(MetricKind::Ttft).unwrap().count, 5);
    assert_eq!(r.metric(MetricKind::Tbt).unwrap().count, 5 * 49);
}

#[test]
fn single_percentile_fires_l1() {
    let opts = ReportOptions {
        percentiles: vec![50.0],
        ..Default::default()
    };
    let r = build_report(&run_with_delays(&[0.1; 2], 5), &policy(), &slo(), &opts).unwrap();
    assert_eq!(rule_ids(&r), vec!["L1"]);
}

#[test]
fn window_exclusion_and_empty_report() {
    let mut run = run_with_delays(&[0.1; 4], 5);
    run.cooldown_cutoff = 1.5;
    let r = build_report(&run, &policy(), &slo(), &ReportOptions::default()).unwrap();
    assert_eq!((r.request_count, r.excluded_by_window), (2, 2));
    run.cooldown_cutoff = -1.0;
    assert!(matches!(
        build_report(&run, &policy(), &slo(), &ReportOptions::default()),
        Err(ReportError::NoFinishedRequests)
    ));
}

#[test]
fn self_comparison_is_neutral() {
    let r = build_report(
        &run_with_delays(&[0.1, 0.3, 0.2], 20),
        &policy(),
        &slo(),
        &ReportOptions::default(),
    )
    .unwrap();
    let c = compare(&[r.clone(), r], 0).unwrap();
    assert!(c.rows.iter().all(|row| row.ratio.is_none_or(|x| x == 1.0)));
    assert!(c.trade_offs.is_empty());
    assert_eq!(c.lints[0].rule_id, "L4");
}

#[test]
fn mismatched_workloads_rejected() {
    let a = build_report(
        &run_with_delays(&[0.1; 3], 20),
        &policy(),
        &slo(),
        &ReportOptions::default(),
    )
    .unwrap();
    let b = build_report(
        &run_with_delays(&[0.1; 4], 20),
        &policy(),
        &slo(),
        &ReportOptions::default(),
    )
    .unwrap();
    assert!(matches!(
        compare(&[a, b], 0),
        Err(ReportError::WorkloadMismatch(..))
    ));
}

#[test]
fn ratios_invert_under_baseline_swap() {
    let a = build_report(
        &run_with_delays(&[0.1, 0.4, 0.2], 20),
        &policy(),
        &slo(),
        &ReportOptions::default(),
    )
    .unwrap();
    let mut run_b = run_with_delays(&[0.1, 0.4, 0.2], 20);
    run_b.config_fingerprint = "other".into();
    for t in &mut run_b.timelines {
        for (k, x) in t.token_times.iter_mut().enumerate() {
            *x += 0.003 * k as f64;
        }
    }
    let b = build_report(&run_b, &policy(), &slo(), &ReportOptions::default()).unwrap();
    let ab = compare(&[a.clone(), b.clone()], 0).unwrap();
    let ba = compare(&[a, b], 1).unwrap();
    for row in &ab.rows {
        let twin = ba.row(0, row.metric, &row.stat).unwrap();
        if let (Some(x), Some(y)) = (row.ratio, twin.ratio) {
            assert!((x * y - 1.0).abs() < 1e-12, "{row:?} vs {twin:?}");
        }
    }
}

#[test]
fn json_export_roundtrips() {
    let r = build_report(
        &run_with_delays(&[0.1, 0.3], 8),
        &policy(),
        &slo(),
        &ReportOptions::default(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    export(&r, dir.path(), &[ExportFormat::Json]).unwrap();
    let back =
        RunReport::from_json(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(back, r);
}

#[test]
fn cdf_csv_has_one_row_per_request() {
    let n = 7;
    let r = build_report(
        &run_with_delays(&[0.1; 7], 8),
        &policy(),
        &slo(),
        &ReportOptions::default(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    export(&r, dir.path(), &[ExportFormat::Csv]).unwrap();
    for metric in [
        "ttft",
        "ttlt",
        "tpot",
        "normalized_latency",
        "fluidity",
        "scheduling_delay",
    ] {
        let s = std::fs::read_to_string(dir.path().join(format!("cdf_{metric}.csv"))).unwrap();
        assert_eq!(s.lines().count() - 1, n, "{metric}");
    }
    let s = std::fs::read_to_string(dir.path().join("requests.csv")).unwrap();
    assert_eq!(s.lines().count() - 1, n);
}

#[test]
fn comparison_svg_has_one_path_per_run() {
    let runs: Vec<RunReport> = (0..3)
        .map(|i| {
            let mut run = run_with_delays(&[0.1, 0.2 + i as f64], 8);
            run.config_fingerprint = format!("cfg{i}");
            build_report(&run, &policy(), &slo(), &ReportOptions::default()).unwrap()
        })
        .collect();
    let c = compare(&runs, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let labels: Vec<String> = (0..3).map(|i| format!("run{i}")).collect();
    export_comparison(&runs, &labels, &c, dir.path(), &[ExportFormat::Svg]).unwrap();
    let svg = std::fs::read_to_string(dir.path().join("cdf_ttft.svg")).unwrap();
    assert_eq!(svg.matches("<path").count(), 3);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}
