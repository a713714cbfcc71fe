use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_infermeter");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "simulate",
        "--count",
        "120",
        "--qps",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend(extra);
    run(&args)
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = simulate(out, &["--seed", "3"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["run.json", "report.json", "requests.csv"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn manifest_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(simulate(&a, &["--seed", "8", "--policy", "chunked"])
        .status
        .success());
    let manifest = a.join("manifest.json");
    let o = run(&[
        "simulate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(a.join("run.json")).unwrap(),
        std::fs::read(b.join("run.json")).unwrap()
    );
}

#[test]
fn comparing_different_workloads_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(simulate(&a, &["--seed", "1"]).status.success());
    assert!(simulate(&b, &["--seed", "2"]).status.success());
    let o = run(&[
        "compare",
        a.join("report.json").to_str().unwrap(),
        b.join("report.json").to_str().unwrap(),
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("workload"));
}

#[test]
fn strict_lint_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("overload");
    let o = run(&[
        "simulate",
        "--count",
        "200",
        "--qps",
        "20",
        "--strict",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(out.join("report.json").exists());
}

#[test]
fn report_recomputes_from_stored_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(simulate(&a, &[]).status.success());
    let o = run(&[
        "report",
        a.join("run.json").to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(a.join("report.json")).unwrap(),
        std::fs::read(b.join("report.json")).unwrap()
    );
}

#[test]
fn bad_slo_expression_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), &["--slo", "p99 ttft<<1s"]);
    assert_eq!(o.status.code(), Some(2));
}
