use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "infermeter",
    version,
    about = "Evaluate LLM inference serving: simulate, benchmark, search, report"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a workload through the serving simulator.
    Simulate(SimulateArgs),
    /// Replay a workload against an OpenAI-compatible streaming endpoint.
    Bench(BenchArgs),
    /// Serve a simulator-backed mock endpoint until interrupted.
    ServeMock(ServeMockArgs),
    /// Measure isolated TTFT across prompt lengths and fit the prefill curve.
    ProfilePrefill(ProfileArgs),
    /// Find the highest request rate that still meets an SLO.
    Capacity(CapacityArgs),
    /// Find the tightest inter-token deadline a stored run still satisfies.
    FluidRate(FluidRateArgs),
    /// Re-aggregate stored run records into reports.
    Report(ReportArgs),
    /// Compare reports produced from the same workload.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    PrefillPriority,
    Chunked,
    Speculative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArrivalKind {
    Poisson,
    Uniform,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterKind {
    /// Keep prompts under 16K tokens and outputs under 1K tokens.
    Standard,
    None,
}

#[derive(Debug, Clone, Args)]
pub struct WorkloadArgs {
    /// `profile:<name>`, `trace:<file.jsonl>` or `stats:<file.json>`.
    #[arg(long, default_value = "profile:azure-conv-2024")]
    pub workload: String,
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    /// Mean request rate; ignored with `--arrival trace`.
    #[arg(long, default_value_t = 1.0)]
    pub qps: f64,
    #[arg(long, value_enum, default_value_t = ArrivalKind::Poisson)]
    pub arrival: ArrivalKind,
    #[arg(long, value_enum, default_value_t = FilterKind::Standard)]
    pub filter: FilterKind,
}

#[derive(Debug, Clone, Args)]
pub struct PolicyArgs {
    #[arg(long, value_enum, default_value_t = PolicyKind::PrefillPriority)]
    pub policy: PolicyKind,
    /// Prefill tokens per iteration for the chunked policy.
    #[arg(long, default_value_t = 512)]
    pub chunk_tokens: u64,
    /// JSON policy file; overrides `--policy` and `--chunk-tokens`.
    #[arg(long)]
    pub policy_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DeadlineArgs {
    /// Fitted prefill curve from `profile-prefill`.
    #[arg(long, conflicts_with = "prefill_deadline")]
    pub prefill_fit: Option<PathBuf>,
    /// Constant prefill allowance in seconds, instead of a fitted curve.
    #[arg(long)]
    pub prefill_deadline: Option<f64>,
    /// Added to every prefill deadline.
    #[arg(long, default_value_t = infermeter_core::deadline::INTERACTIVE_SLACK_S)]
    pub slack: f64,
    /// Inter-token deadline in seconds.
    #[arg(long, default_value_t = 0.05)]
    pub decode_deadline: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReportFlags {
    /// SLO expression, e.g. "p99 ttft<2s tbt<200ms fluidity>0.9@0.99".
    #[arg(long, default_value = "p99 ttft<10s tbt<1s")]
    pub slo: String,
    /// Comma-separated percentiles to report.
    #[arg(long, default_value = "50,90,99", value_delimiter = ',')]
    pub percentiles: Vec<f64>,
    /// Exit with status 1 when any lint fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub workload: WorkloadArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub deadlines: DeadlineArgs,
    #[command(flatten)]
    pub report: ReportFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Re-run the resolved configuration stored in a previous manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EndpointArgs {
    #[arg(long)]
    pub base_url: String,
    #[arg(long, default_value = "default")]
    pub model: String,
    #[arg(long, default_value_t = 300.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 256)]
    pub max_concurrency: usize,
    #[arg(long, default_value_t = 0)]
    pub retries: u32,
    /// Fail the run if p99 dispatch skew exceeds this many milliseconds.
    #[arg(long, default_value_t = 10.0)]
    pub max_skew_ms: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub workload: WorkloadArgs,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
    #[command(flatten)]
    pub deadlines: DeadlineArgs,
    #[command(flatten)]
    pub report: ReportFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep going when the generator falls behind its schedule.
    #[arg(long)]
    pub allow_saturation: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeMockArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, default_value = "127.0.0.1:8000")]
    pub bind: std::net::SocketAddr,
    /// Multiplier on simulated time; 0 streams instantly.
    #[arg(long, default_value_t = 1.0)]
    pub time_scale: f64,
    /// Emit one token every this many milliseconds after the first.
    #[arg(long)]
    pub token_interval_ms: Option<f64>,
    /// Leave usage out of stream chunks.
    #[arg(long)]
    pub omit_usage: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileTarget {
    Sim,
    Endpoint,
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    #[arg(long, value_enum, default_value_t = ProfileTarget::Sim)]
    pub target: ProfileTarget,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long, default_value = "default")]
    pub model: String,
    #[arg(long, default_value_t = 300.0)]
    pub timeout: f64,
    /// Prompt lengths to measure; defaults to a doubling ladder.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Vec<u64>,
    #[arg(long, default_value_t = 16384)]
    pub max_prompt_tokens: u64,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CapacityArgs {
    /// `sim`, `bench`, or `step:<qps>` for a synthetic evaluator that
    /// attains exactly up to the given rate.
    #[arg(long, default_value = "sim")]
    pub target: String,
    #[command(flatten)]
    pub workload: WorkloadArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long, default_value = "default")]
    pub model: String,
    #[command(flatten)]
    pub deadlines: DeadlineArgs,
    #[arg(long, default_value = "p99 ttft<2s tbt<200ms")]
    pub slo: String,
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.1)]
    pub q_lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q_hi: f64,
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FluidRateArgs {
    /// Stored run record (`run.json`).
    #[arg(long)]
    pub run: PathBuf,
    #[command(flatten)]
    pub deadlines: DeadlineArgs,
    /// Share of requests, as a percentile, that must reach the threshold.
    #[arg(long, default_value_t = 99.0)]
    pub percentile: f64,
    #[arg(long, default_value_t = 0.9)]
    pub fluidity: f64,
    #[arg(long, default_value_t = 0.001)]
    pub dd_lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub dd_hi: f64,
    #[arg(long, default_value_t = 0.001)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Run record files.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[command(flatten)]
    pub deadlines: DeadlineArgs,
    #[command(flatten)]
    pub report: ReportFlags,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Report files (`report.json`).
    #[arg(required = true, num_args = 2..)]
    pub reports: Vec<PathBuf>,
    /// Index of the baseline report.
    #[arg(long, default_value_t = 0)]
    pub baseline: usize,
    /// Comma-separated run labels for plots.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    #[command(flatten)]
    pub out: OutArgs,
}
