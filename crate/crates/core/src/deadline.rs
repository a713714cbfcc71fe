//! Per-request prefill deadlines.
//!
//! The prefill deadline is a measured baseline prefill time for the prompt
//! length plus a constant scheduling slack. The baseline comes from profiling
//! the target one request at a time and fitting `c0 + c1*n + c2*n^2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::metrics::DeadlineSpec;
use crate::model::RequestSpec;
use crate::sim::{simulate_isolated, PolicyConfig};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DeadlineError {
    #[error("need at least 3 distinct prompt lengths, got {0}")]
    InsufficientPoints(usize),
    #[error("reps_per_length must be at least 1")]
    NoRepetitions,
    #[error("prefill deadline is not monotone in prompt length (c1={c1}, c2={c2})")]
    NonMonotoneFit { c1: f64, c2: f64 },
    #[error("prefill deadline must be positive, got {0}")]
    NonPositiveDeadline(f64),
    #[error("invalid deadline parameter: {0}")]
    Invalid(String),
    #[error("profiling measurement failed: {0}")]
    Measurement(String),
    #[error("serialization: {0}")]
    Serde(String),
}

/// Something whose isolated time-to-first-token can be measured.
pub trait PrefillTarget {
    fn measure_ttft(&mut self, prompt_tokens: u64) -> Result<f64, DeadlineError>;
}

/// Profiles the simulator itself; each measurement is an isolated one-token request.
pub struct SimTarget {
    pub cfg: PolicyConfig,
    pub seed: u64,
}

impl PrefillTarget for SimTarget {
    fn measure_ttft(&mut self, prompt_tokens: u64) -> Result<f64, DeadlineError> {
        let spec = RequestSpec::new(0, 0.0, prompt_tokens, 1);
        let t = simulate_isolated(&spec, &self.cfg, self.seed)
            .map_err(|e| DeadlineError::Measurement(e.to_string()))?;
        Ok(t.token_times[0] - t.submit_time)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefillFit {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub sample_points: Vec<(u64, f64)>,
    pub residual_rms: f64,
    /// Set when the quadratic fit bent downward and a linear fit was used instead.
    #[serde(default)]
    pub linear_fallback: bool,
}

impl PrefillFit {
    pub fn eval(&self, prompt_tokens: u64) -> f64 {
        let n = prompt_tokens as f64;
        self.c0 + self.c1 * n + self.c2 * n * n
    }

    /// A fit with a user-supplied constant baseline and no samples.
    pub fn constant(seconds: f64) -> Self {
        Self {
            c0: seconds,
            c1: 0.0,
            c2: 0.0,
            sample_points: Vec::new(),
            residual_rms: 0.0,
            linear_fallback: false,
        }
    }

    pub fn to_json(&self) -> Result<String, DeadlineError> {
        serde_json::to_string_pretty(self).map_err(|e| DeadlineError::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, DeadlineError> {
        serde_json::from_str(s).map_err(|e| DeadlineError::Serde(e.to_string()))
    }
}

/// Least-squares polynomial fit of the given degree, solved on a rescaled
/// abscissa to keep the design matrix well conditioned.
fn poly_fit(points: &[(u64, f64)], degree: usize) -> Vec<f64> {
    let scale = points.iter().map(|p| p.0 as f64).fold(1.0, f64::max);
    let rows = points.len();
    let design = DMatrix::from_fn(rows, degree + 1, |r, c| {
        (points[r].0 as f64 / scale).powi(c as i32)
    });
    let y = DVector::from_iterator(rows, points.iter().map(|p| p.1));
    let svd = design.svd(true, true);
    let coef = svd.solve(&y, 1e-14).expect("svd computed with u and v");
    (0..=degree)
        .map(|c| coef[c] / scale.powi(c as i32))
        .collect()
}

fn rms(points: &[(u64, f64)], c: &[f64; 3]) -> f64 {
    let ss: f64 = points
        .iter()
        .map(|&(n, y)| {
            let x = n as f64;
            let r = c[0] + c[1] * x + c[2] * x * x - y;
            r * r
        })
        .sum();
    (ss / points.len() as f64).sqrt()
}

/// Fits `c0 + c1*n + c2*n^2` to `(prompt_tokens, seconds)` samples.
///
/// A slightly negative `c2` that only reflects rounding noise is replaced by a
/// linear fit silently; a clearly negative one also falls back to linear and
/// sets `linear_fallback`.
pub fn fit_prefill_curve(points: &[(u64, f64)]) -> Result<PrefillFit, DeadlineError> {
    let mut distinct: Vec<u64> = points.iter().map(|p| p.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(DeadlineError::InsufficientPoints(distinct.len()));
    }
    let q = poly_fit(points, 2);
    let mut coef = [q[0], q[1], q[2]];
    let mut linear_fallback = false;
    if coef[2] < 0.0 {
        let n_max = *distinct.last().unwrap() as f64;
        let y_max = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        linear_fallback = coef[2].abs() * n_max * n_max > 1e-3 * y_max.max(f64::MIN_POSITIVE);
        let l = poly_fit(points, 1);
        coef = [l[0], l[1], 0.0];
    }
    Ok(PrefillFit {
        c0: coef[0],
        c1: coef[1],
        c2: coef[2],
        sample_points: points.to_vec(),
        residual_rms: rms(points, &coef),
        linear_fallback,
    })
}

/// Geometric ladder 512..16K, clipped to the longest prompt in the workload.
pub fn default_profile_lengths(max_prompt_tokens: u64) -> Vec<u64> {
    let ladder = [512u64, 1024, 2048, 4096, 8192, 16384];
    let clipped: Vec<u64> = ladder
        .into_iter()
        .filter(|&n| n <= max_prompt_tokens)
        .collect();
    if clipped.len() >= 3 {
        return clipped;
    }
    let top = max_prompt_tokens.max(4);
    vec![(top / 4).max(1), (top / 2).max(2), top]
}

/// Measures each length `reps_per_length` times, strictly one request at a
/// time, and fits the curve through the per-length medians.
pub fn profile_prefill<T: PrefillTarget + ?Sized>(
    target: &mut T,
    lengths: &[u64],
    reps_per_length: usize,
) -> Result<PrefillFit, DeadlineError> {
    if reps_per_length == 0 {
        return Err(DeadlineError::NoRepetitions);
    }
    let mut distinct = lengths.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(DeadlineError::InsufficientPoints(distinct.len()));
    }
    let mut points = Vec::with_capacity(distinct.len());
    for &n in &distinct {
        let mut samples = Vec::with_capacity(reps_per_length);
        for _ in 0..reps_per_length {
            samples.push(target.measure_ttft(n)?);
        }
        samples.sort_by(f64::total_cmp);
        let mid = samples.len() / 2;
        let median = if samples.len() % 2 == 1 {
            samples[mid]
        } else {
            0.5 * (samples[mid - 1] + samples[mid])
        };
        points.push((n, median));
    }
    fit_prefill_curve(&points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadlinePolicy {
    pub fit: PrefillFit,
    pub scheduling_slack_s: f64,
    pub decode_deadline_s: f64,
}

/// Interactive scheduling slack.
pub const INTERACTIVE_SLACK_S: f64 = 0.5;

impl DeadlinePolicy {
    pub fn new(
        fit: PrefillFit,
        scheduling_slack_s: f64,
        decode_deadline_s: f64,
    ) -> Result<Self, DeadlineError> {
        let p = Self {
            fit,
            scheduling_slack_s,
            decode_deadline_s,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DeadlineError> {
        if !(self.scheduling_slack_s.is_finite() && self.scheduling_slack_s >= 0.0) {
            return Err(DeadlineError::Invalid(format!(
                "scheduling slack {}",
                self.scheduling_slack_s
            )));
        }
        if !(self.decode_deadline_s.is_finite() && self.decode_deadline_s > 0.0) {
            return Err(DeadlineError::Invalid(format!(
                "decode deadline {}",
                self.decode_deadline_s
            )));
        }
        let (c1, c2) = (self.fit.c1, self.fit.c2);
        if !(c1.is_finite() && c2.is_finite() && self.fit.c0.is_finite())
            || c2 < 0.0
            || c1 + 2.0 * c2 < 0.0
        {
            return Err(DeadlineError::NonMonotoneFit { c1, c2 });
        }
        let floor = self.prefill_deadline(1);
        if floor <= 0.0 {
            return Err(DeadlineError::NonPositiveDeadline(floor));
        }
        Ok(())
    }

    pub fn prefill_deadline(&self, prompt_tokens: u64) -> f64 {
        self.fit.eval(prompt_tokens) + self.scheduling_slack_s
    }

    pub fn with_decode_deadline(&self, decode_deadline_s: f64) -> Self {
        Self {
            decode_deadline_s,
            ..self.clone()
        }
    }
}

pub fn make_deadlines(policy: &DeadlinePolicy, spec: &RequestSpec) -> DeadlineSpec {
    DeadlineSpec {
        prefill_deadline_s: policy.prefill_deadline(spec.prompt_tokens),
        decode_deadline_s: policy.decode_deadline_s,
    }
}
