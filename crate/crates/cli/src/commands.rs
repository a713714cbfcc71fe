use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use infermeter_core::deadline::{
    default_profile_lengths, profile_prefill, DeadlinePolicy, PrefillFit, PrefillTarget, SimTarget,
};
use infermeter_core::metrics::RequestMetrics;
use infermeter_core::model::{RequestSpec, RunRecord, TokenTimeline};
use infermeter_core::report::{
    build_report, compare, export, export_comparison, stat_label, steady_state_metrics,
    ExportFormat, MetricKind, ReportOptions, RunReport, Severity,
};
use infermeter_core::search::{
    capacity_search, fluid_rate_search, CapacitySearch, FluidityRequirement, ProbeOutcome,
};
use infermeter_core::sim::{simulate, LatencyModelConfig, PolicyConfig, SpeculativeConfig};
use infermeter_core::slo::SloSpec;
use infermeter_core::workload::{
    build_workload, ArrivalProcess, LengthFilter, TraceStats, WorkloadConfig, WorkloadSource,
};
use infermeter_net::client::{run_load, EndpointConfig};
use infermeter_net::mock::{serve_mock, MockOptions};
use infermeter_net::profile::EndpointTarget;
use serde::{Deserialize, Serialize};

use crate::args::*;

/// Prefill allowance used against live endpoints when no fit is supplied.
const DEFAULT_ENDPOINT_PREFILL_S: f64 = 1.0;

const ALL_FORMATS: [ExportFormat; 3] = [ExportFormat::Json, ExportFormat::Csv, ExportFormat::Svg];

pub enum Outcome {
    Ok,
    LintFailure,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

/// Everything needed to reproduce a simulator run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub workload: WorkloadConfig,
    pub policy: PolicyConfig,
    pub deadlines: DeadlinePolicy,
    pub slo: String,
    pub report: ReportOptions,
    pub seed: u64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))
}

fn write_manifest<T: Serialize>(
    out: &Path,
    subcommand: &str,
    seed: u64,
    config: &T,
    outputs: &[PathBuf],
) -> Result<()> {
    let m = Manifest {
        tool: "infermeter".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        seed,
        config: serde_json::to_value(config)?,
        outputs: outputs
            .iter()
            .map(|p| p.strip_prefix(out).unwrap_or(p).display().to_string())
            .collect(),
    };
    write_json(&out.join("manifest.json"), &m)
}

fn workload_config(w: &WorkloadArgs, seed: u64) -> Result<WorkloadConfig> {
    let (kind, rest) = w
        .workload
        .split_once(':')
        .ok_or_else(|| anyhow!("workload must be profile:<name>, trace:<path> or stats:<path>"))?;
    let source = match kind {
        "profile" => WorkloadSource::Profile { name: rest.into() },
        "trace" => WorkloadSource::TraceFile { path: rest.into() },
        "stats" => WorkloadSource::Stats {
            stats: read_json::<TraceStats>(Path::new(rest))?,
        },
        other => bail!("unknown workload source {other:?}"),
    };
    Ok(WorkloadConfig {
        source,
        count: w.count,
        qps: w.qps,
        arrival: match w.arrival {
            ArrivalKind::Poisson => ArrivalProcess::Poisson,
            ArrivalKind::Uniform => ArrivalProcess::Uniform,
            ArrivalKind::Trace => ArrivalProcess::TraceTimestamps,
        },
        filter: match w.filter {
            FilterKind::Standard => LengthFilter::STANDARD,
            FilterKind::None => LengthFilter::default(),
        },
        seed,
    })
}

pub fn policy_config(p: &PolicyArgs) -> Result<PolicyConfig> {
    let cfg = match &p.policy_config {
        Some(path) => {
            let s =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            PolicyConfig::from_json(&s)?
        }
        None => {
            let lat = LatencyModelConfig::default();
            match p.policy {
                PolicyKind::PrefillPriority => PolicyConfig::prefill_priority(lat),
                PolicyKind::Chunked => PolicyConfig::chunked(lat, p.chunk_tokens),
                PolicyKind::Speculative => {
                    PolicyConfig::speculative(lat, SpeculativeConfig::default())
                }
            }
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Deadlines from explicit flags, or from `fallback` when no prefill source was given.
fn deadline_policy(
    d: &DeadlineArgs,
    fallback: impl FnOnce() -> Result<DeadlinePolicy>,
) -> Result<DeadlinePolicy> {
    let fit = match (&d.prefill_fit, d.prefill_deadline) {
        (Some(path), _) => {
            let s =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            PrefillFit::from_json(&s)?
        }
        (None, Some(c)) => PrefillFit::constant(c),
        (None, None) => return fallback(),
    };
    Ok(DeadlinePolicy::new(fit, d.slack, d.decode_deadline)?)
}

fn sim_fitted_deadlines(
    d: &DeadlineArgs,
    cfg: &PolicyConfig,
    seed: u64,
    workload: &[RequestSpec],
) -> Result<DeadlinePolicy> {
    let max_prompt = workload.iter().map(|r| r.prompt_tokens).max().unwrap_or(1);
    let mut target = SimTarget { cfg: *cfg, seed };
    let fit = profile_prefill(&mut target, &default_profile_lengths(max_prompt), 1)?;
    Ok(DeadlinePolicy::new(fit, d.slack, d.decode_deadline)?)
}

fn constant_deadlines(d: &DeadlineArgs) -> Result<DeadlinePolicy> {
    Ok(DeadlinePolicy::new(
        PrefillFit::constant(DEFAULT_ENDPOINT_PREFILL_S),
        d.slack,
        d.decode_deadline,
    )?)
}

fn report_options(r: &ReportFlags) -> ReportOptions {
    ReportOptions {
        percentiles: r.percentiles.clone(),
        ..Default::default()
    }
}

fn parse_slo(s: &str) -> Result<SloSpec> {
    s.parse::<SloSpec>()
        .map_err(|e| anyhow!("bad --slo {s:?}: {e}"))
}

fn fmt_s(x: f64) -> String {
    if x.abs() < 1.0 {
        format!("{:.1} ms", x * 1e3)
    } else {
        format!("{x:.3} s")
    }
}

fn print_summary(r: &RunReport) {
    println!(
        "requests: {} in window, {} excluded, {} unfinished",
        r.request_count, r.excluded_by_window, r.unfinished
    );
    for kind in MetricKind::ALL {
        let Some(s) = r.metric(kind) else { continue };
        let cols: Vec<String> = s
            .percentiles
            .iter()
            .map(|p| {
                let v = if kind == MetricKind::Fluidity {
                    format!("{:.4}", p.value)
                } else {
                    fmt_s(p.value)
                };
                format!("{}={v}", stat_label(p.p))
            })
            .collect();
        println!("  {:<20} {}", kind.name(), cols.join("  "));
    }
    println!(
        "slo {}: attainment {:.4} -> {}",
        r.slo,
        r.slo_attainment,
        if r.slo_attained { "met" } else { "missed" }
    );
    if r.event_level_tbt {
        println!("note: endpoint did not report per-chunk usage; TBT is event-level");
    }
    for l in &r.lints {
        let sev = match l.severity {
            Severity::Warn => "warn",
            Severity::Fail => "FAIL",
        };
        println!("lint {} [{sev}]: {}", l.rule_id, l.message);
    }
}

/// Writes report files into `out` and returns their paths.
fn write_report(out: &Path, report: &RunReport) -> Result<Vec<PathBuf>> {
    Ok(export(report, out, &ALL_FORMATS)?.paths)
}

fn write_run(out: &Path, run: &RunRecord) -> Result<Vec<PathBuf>> {
    let run_path = out.join("run.json");
    fs::write(&run_path, run.to_json()?)?;
    let events = out.join("events.csv");
    run.write_events_csv(fs::File::create(&events)?)?;
    Ok(vec![run_path, events])
}

fn lint_outcome(report: &RunReport, strict: bool) -> Outcome {
    if strict && report.has_failures() {
        Outcome::LintFailure
    } else {
        Outcome::Ok
    }
}

pub fn simulate_cmd(a: &SimulateArgs) -> Result<Outcome> {
    let out = &a.out.out;
    fs::create_dir_all(out)?;
    let cfg = match &a.manifest {
        Some(path) => {
            let m: Manifest = read_json(path)?;
            if m.subcommand != "simulate" {
                bail!(
                    "{} is a {} manifest, not simulate",
                    path.display(),
                    m.subcommand
                );
            }
            serde_json::from_value::<SimulateConfig>(m.config)?
        }
        None => {
            let workload = workload_config(&a.workload, a.seed)?;
            let policy = policy_config(&a.policy)?;
            let requests = build_workload(&workload)?.requests;
            let deadlines = deadline_policy(&a.deadlines, || {
                sim_fitted_deadlines(&a.deadlines, &policy, a.seed, &requests)
            })?;
            SimulateConfig {
                workload,
                policy,
                deadlines,
                slo: a.report.slo.clone(),
                report: report_options(&a.report),
                seed: a.seed,
            }
        }
    };
    let slo = parse_slo(&cfg.slo)?;
    let requests = build_workload(&cfg.workload)?.requests;
    let run = simulate(&requests, &cfg.policy, cfg.seed)?;
    let mut outputs = write_run(out, &run)?;
    let report = build_report(&run, &cfg.deadlines, &slo, &cfg.report)?;
    outputs.extend(write_report(out, &report)?);
    write_manifest(out, "simulate", cfg.seed, &cfg, &outputs)?;
    print_summary(&report);
    Ok(lint_outcome(&report, a.report.strict))
}

fn endpoint_config(e: &EndpointArgs) -> EndpointConfig {
    EndpointConfig {
        request_timeout_s: e.timeout,
        max_concurrency: e.max_concurrency,
        retries: e.retries,
        max_dispatch_skew_s: e.max_skew_ms / 1e3,
        ..EndpointConfig::new(&e.base_url, &e.model)
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}

#[derive(Serialize)]
struct BenchConfig<'a> {
    workload: &'a WorkloadConfig,
    endpoint: &'a EndpointConfig,
    deadlines: &'a DeadlinePolicy,
    slo: &'a str,
    report: &'a ReportOptions,
}

#[derive(Serialize)]
struct LoadSummary {
    p99_dispatch_skew_s: f64,
    saturated: bool,
    failed_requests: usize,
    protocol_errors: usize,
}

pub fn bench_cmd(a: &BenchArgs) -> Result<Outcome> {
    let out = &a.out.out;
    fs::create_dir_all(out)?;
    let workload = workload_config(&a.workload, a.seed)?;
    let ep = endpoint_config(&a.endpoint);
    ep.validate()?;
    let deadlines = deadline_policy(&a.deadlines, || constant_deadlines(&a.deadlines))?;
    let slo = parse_slo(&a.report.slo)?;
    let opts = report_options(&a.report);
    let requests = build_workload(&workload)?.requests;

    let outcome = runtime()?.block_on(run_load(&requests, &ep, a.seed))?;
    let mut outputs = write_run(out, &outcome.record)?;
    let failures = out.join("failures.json");
    write_json(&failures, &outcome.failures)?;
    let load = out.join("load.json");
    write_json(
        &load,
        &LoadSummary {
            p99_dispatch_skew_s: outcome.p99_dispatch_skew_s,
            saturated: outcome.saturated,
            failed_requests: outcome.failures.len(),
            protocol_errors: outcome.protocol_errors(),
        },
    )?;
    outputs.extend([failures, load]);
    let report = build_report(&outcome.record, &deadlines, &slo, &opts)?;
    outputs.extend(write_report(out, &report)?);
    let config = BenchConfig {
        workload: &workload,
        endpoint: &ep,
        deadlines: &deadlines,
        slo: &a.report.slo,
        report: &opts,
    };
    write_manifest(out, "bench", a.seed, &config, &outputs)?;
    print_summary(&report);
    println!(
        "dispatch skew p99 {}; {} failed requests",
        fmt_s(outcome.p99_dispatch_skew_s),
        outcome.failures.len()
    );
    if outcome.saturated && !a.allow_saturation {
        outcome.check_saturation(ep.max_dispatch_skew_s)?;
    }
    Ok(lint_outcome(&report, a.report.strict))
}

pub fn serve_mock_cmd(a: &ServeMockArgs) -> Result<Outcome> {
    let cfg = policy_config(&a.policy)?;
    let opts = MockOptions {
        time_scale: a.time_scale,
        fixed_token_interval_s: a.token_interval_ms.map(|ms| ms / 1e3),
        omit_usage: a.omit_usage,
        seed: a.seed,
    };
    runtime()?.block_on(async {
        let handle = serve_mock(cfg, a.bind, opts).await?;
        println!("listening on {}", handle.base_url());
        std::io::stdout().flush()?;
        tokio::signal::ctrl_c().await?;
        handle.shutdown().await;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(Outcome::Ok)
}

pub fn profile_cmd(a: &ProfileArgs) -> Result<Outcome> {
    let out = &a.out.out;
    fs::create_dir_all(out)?;
    let lengths = if a.lengths.is_empty() {
        default_profile_lengths(a.max_prompt_tokens)
    } else {
        a.lengths.clone()
    };
    let (mut target, config): (Box<dyn PrefillTarget>, serde_json::Value) = match a.target {
        ProfileTarget::Sim => {
            let cfg = policy_config(&a.policy)?;
            let v = serde_json::json!({ "target": "sim", "policy": cfg, "lengths": lengths, "reps": a.reps });
            (Box::new(SimTarget { cfg, seed: a.seed }), v)
        }
        ProfileTarget::Endpoint => {
            let url = a
                .base_url
                .as_ref()
                .ok_or_else(|| anyhow!("--base-url is required for --target endpoint"))?;
            let ep = EndpointConfig {
                request_timeout_s: a.timeout,
                ..EndpointConfig::new(url, &a.model)
            };
            let v = serde_json::json!({ "target": "endpoint", "endpoint": ep, "lengths": lengths, "reps": a.reps });
            (Box::new(EndpointTarget::new(ep)?), v)
        }
    };
    let fit = profile_prefill(target.as_mut(), &lengths, a.reps)?;
    let path = out.join("prefill_fit.json");
    fs::write(&path, fit.to_json()?)?;
    write_manifest(out, "profile-prefill", a.seed, &config, &[path])?;
    println!(
        "prefill fit: c0={:.6e} c1={:.6e} c2={:.6e} rms={:.3e}{}",
        fit.c0,
        fit.c1,
        fit.c2,
        fit.residual_rms,
        if fit.linear_fallback {
            " (linear fallback)"
        } else {
            ""
        }
    );
    Ok(Outcome::Ok)
}

fn slo_outcome(slo: &SloSpec, metrics: &[RequestMetrics]) -> ProbeOutcome {
    ProbeOutcome {
        attained: slo.run_attains(metrics),
        attainment: slo.attainment(metrics),
    }
}

fn window_metrics(run: &RunRecord, deadlines: &DeadlinePolicy) -> Result<Vec<RequestMetrics>> {
    Ok(steady_state_metrics(run, deadlines)?
        .into_iter()
        .map(|(_, m)| m)
        .collect())
}

pub fn capacity_cmd(a: &CapacityArgs) -> Result<Outcome> {
    let out = &a.out.out;
    fs::create_dir_all(out)?;
    let slo = parse_slo(&a.slo)?;
    let params = CapacitySearch {
        q_lo: a.q_lo,
        q_hi_seed: a.q_hi,
        tol_rel: a.tol,
        repetitions: a.repetitions,
        seed: a.seed,
        ..Default::default()
    };
    let base = workload_config(&a.workload, a.seed)?;
    let probe_workload = |qps: f64, rep: usize| -> Result<Vec<RequestSpec>> {
        let cfg = WorkloadConfig {
            qps,
            seed: a.seed.wrapping_add(rep as u64),
            ..base.clone()
        };
        Ok(build_workload(&cfg)?.requests)
    };

    let (result, config) = if let Some(thr) = a.target.strip_prefix("step:") {
        let thr: f64 = thr
            .parse()
            .with_context(|| format!("bad step threshold {thr:?}"))?;
        let r = capacity_search(&params, |q, _| {
            Ok::<_, String>(ProbeOutcome {
                attained: q <= thr,
                attainment: if q <= thr { 1.0 } else { 0.0 },
            })
        })?;
        (
            r,
            serde_json::json!({ "target": a.target, "slo": a.slo, "search": params }),
        )
    } else if a.target == "sim" {
        let policy = policy_config(&a.policy)?;
        let sample = probe_workload(a.q_lo, 0)?;
        let deadlines = deadline_policy(&a.deadlines, || {
            sim_fitted_deadlines(&a.deadlines, &policy, a.seed, &sample)
        })?;
        let r = capacity_search(&params, |q, rep| -> Result<ProbeOutcome> {
            let w = probe_workload(q, rep)?;
            let run = simulate(&w, &policy, a.seed.wrapping_add(rep as u64))?;
            let o = slo_outcome(&slo, &window_metrics(&run, &deadlines)?);
            eprintln!("probe {q:.4} qps: attainment {:.4}", o.attainment);
            Ok(o)
        })?;
        let v = serde_json::json!({
            "target": "sim", "slo": a.slo, "search": params, "workload": base, "policy": policy, "deadlines": deadlines,
        });
        (r, v)
    } else if a.target == "bench" {
        let url = a
            .base_url
            .as_ref()
            .ok_or_else(|| anyhow!("--base-url is required for --target bench"))?;
        let ep = EndpointConfig::new(url, &a.model);
        let deadlines = deadline_policy(&a.deadlines, || constant_deadlines(&a.deadlines))?;
        let rt = runtime()?;
        let r = capacity_search(&params, |q, rep| -> Result<ProbeOutcome> {
            let w = probe_workload(q, rep)?;
            let load = rt.block_on(run_load(&w, &ep, a.seed))?;
            let o = slo_outcome(&slo, &window_metrics(&load.record, &deadlines)?);
            eprintln!("probe {q:.4} qps: attainment {:.4}", o.attainment);
            Ok(o)
        })?;
        let v = serde_json::json!({
            "target": "bench", "slo": a.slo, "search": params, "workload": base, "endpoint": ep, "deadlines": deadlines,
        });
        (r, v)
    } else {
        bail!(
            "--target must be sim, bench or step:<qps>, got {:?}",
            a.target
        );
    };

    let path = out.join("capacity.json");
    write_json(&path, &result)?;
    write_manifest(out, "capacity", a.seed, &config, &[path])?;
    println!(
        "max_qps {:.4} after {} probes{}{}",
        result.max_qps,
        result.probes.len(),
        if result.unbounded {
            " (unbounded: every probe attained)"
        } else {
            ""
        },
        if result.non_monotone_observed {
            " (non-monotone attainment observed)"
        } else {
            ""
        }
    );
    Ok(Outcome::Ok)
}

/// Deadlines stored in the report that sits next to a run record.
fn sibling_report_deadlines(run_path: &Path) -> Result<DeadlinePolicy> {
    let path = run_path.with_file_name("report.json");
    let s = fs::read_to_string(&path).with_context(|| {
        format!(
            "no deadline flags given and no report next to {}; pass --prefill-fit or --prefill-deadline",
            run_path.display()
        )
    })?;
    Ok(RunReport::from_json(&s)?.deadlines)
}

fn read_run(path: &Path) -> Result<RunRecord> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(RunRecord::read_from(std::io::BufReader::new(f))?)
}

pub fn fluid_rate_cmd(a: &FluidRateArgs) -> Result<Outcome> {
    let out = &a.out.out;
    fs::create_dir_all(out)?;
    let run = read_run(&a.run)?;
    let deadlines = deadline_policy(&a.deadlines, || sibling_report_deadlines(&a.run))?;
    let pairs: Vec<(RequestSpec, TokenTimeline)> = run
        .pairs()
        .into_iter()
        .filter(|(s, t)| t.finished && !t.token_times.is_empty() && run.in_steady_state(s, t))
        .map(|(s, t)| (s.clone(), t.clone()))
        .collect();
    if pairs.is_empty() {
        bail!("no finished requests inside the steady-state window");
    }
    let req = FluidityRequirement {
        percentile: a.percentile,
        fluidity_threshold: a.fluidity,
    };
    let r = fluid_rate_search(&pairs, &deadlines, &req, a.dd_lo, a.dd_hi, a.tol)?;
    let path = out.join("fluid_rate.json");
    write_json(&path, &r)?;
    let config = serde_json::json!({
        "run": a.run, "deadlines": deadlines, "requirement": req, "dd_lo": a.dd_lo, "dd_hi": a.dd_hi, "tol": a.tol,
    });
    write_manifest(out, "fluid-rate", run.seed, &config, &[path])?;
    println!(
        "decode deadline {} -> fluid rate {:.2} tokens/s ({} evaluations)",
        fmt_s(r.decode_deadline_s),
        r.tokens_per_s,
        r.evaluations
    );
    Ok(Outcome::Ok)
}

pub fn report_cmd(a: &ReportArgs) -> Result<Outcome> {
    let out = &a.out.out;
    fs::create_dir_all(out)?;
    let slo = parse_slo(&a.report.slo)?;
    let opts = report_options(&a.report);
    let mut outputs = Vec::new();
    let mut failed = false;
    let mut used = Vec::new();
    for (i, path) in a.runs.iter().enumerate() {
        let run = read_run(path)?;
        let deadlines = deadline_policy(&a.deadlines, || sibling_report_deadlines(path))?;
        let report = build_report(&run, &deadlines, &slo, &opts)?;
        let dir = if a.runs.len() == 1 {
            out.clone()
        } else {
            out.join(format!("run{i}"))
        };
        outputs.extend(write_report(&dir, &report)?);
        if a.runs.len() > 1 {
            println!("== {}", path.display());
        }
        print_summary(&report);
        failed |= report.has_failures();
        used.push(serde_json::json!({ "run": path, "deadlines": deadlines }));
    }
    let config = serde_json::json!({ "runs": used, "slo": a.report.slo, "report": opts });
    write_manifest(out, "report", 0, &config, &outputs)?;
    Ok(if a.report.strict && failed {
        Outcome::LintFailure
    } else {
        Outcome::Ok
    })
}

pub fn compare_cmd(a: &CompareArgs) -> Result<Outcome> {
    let out = &a.out.out;
    let reports: Vec<RunReport> = a
        .reports
        .iter()
        .map(|p| {
            let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(RunReport::from_json(&s)?)
        })
        .collect::<Result<_>>()?;
    let c = compare(&reports, a.baseline)?;
    fs::create_dir_all(out)?;
    let labels: Vec<String> = if a.labels.len() == reports.len() {
        a.labels.clone()
    } else {
        a.reports
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.parent()
                    .and_then(|d| d.file_name())
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("run{i}"))
            })
            .collect()
    };
    let files = export_comparison(&reports, &labels, &c, out, &ALL_FORMATS)?;
    let config =
        serde_json::json!({ "reports": a.reports, "baseline": a.baseline, "labels": labels });
    write_manifest(out, "compare", 0, &config, &files.paths)?;

    println!("baseline: {}", labels[a.baseline]);
    for row in &c.rows {
        if row.stat == "mean" {
            continue;
        }
        println!(
            "  {:<10} {:<20} {:<5} {:>12.6} -> {:>12.6}  x{}",
            labels[row.run],
            row.metric.name(),
            row.stat,
            row.baseline,
            row.value,
            row.ratio.map_or("-".into(), |r| format!("{r:.3}")),
        );
    }
    for t in &c.trade_offs {
        println!("trade-off [{}]: {}", labels[t.run], t.message);
    }
    for l in &c.lints {
        println!("lint {}: {}", l.rule_id, l.message);
    }
    Ok(Outcome::Ok)
}
