//! SLO-driven searches: maximum sustainable request rate, and the fluid
//! token generation rate of a recorded run.

use serde::{Deserialize, Serialize};

use crate::deadline::{make_deadlines, DeadlinePolicy};
use crate::metrics::{fluidity_index, DeadlineSpec, MetricsError};
use crate::model::{RequestSpec, TokenTimeline};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SearchError {
    #[error("SLO not attained at the floor rate {0} qps")]
    InfeasibleAtFloor(f64),
    #[error("fluidity requirement not met even at the largest decode deadline {0} s")]
    InfeasibleAtCeiling(f64),
    #[error("invalid search bounds: {0}")]
    BadBounds(String),
    #[error("probe at {qps} qps failed: {message}")]
    Probe { qps: f64, message: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Result of evaluating one run at a fixed request rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub attained: bool,
    /// Fraction of requests individually meeting the SLO.
    pub attainment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub qps: f64,
    pub attained: bool,
    /// One entry per repetition.
    pub outcomes: Vec<ProbeOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub max_qps: f64,
    pub probes: Vec<Probe>,
    pub tolerance_rel: f64,
    pub seed: u64,
    /// Every probe up to the doubling cap attained.
    pub unbounded: bool,
    /// Some attaining probe ran faster than some failing one.
    pub non_monotone_observed: bool,
}

impl CapacityResult {
    /// Upper bound on probes for a bracket `[lo, hi]` found by doubling.
    pub fn probe_budget(range_rel: f64, tol_rel: f64) -> usize {
        20 + (range_rel / tol_rel).log2().ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitySearch {
    pub q_lo: f64,
    pub q_hi_seed: f64,
    pub tol_rel: f64,
    /// Each probe attains only if every repetition attains.
    pub repetitions: usize,
    pub max_doublings: u32,
    pub seed: u64,
}

impl Default for CapacitySearch {
    fn default() -> Self {
        Self {
            q_lo: 0.1,
            q_hi_seed: 1.0,
            tol_rel: 0.05,
            repetitions: 1,
            max_doublings: 20,
            seed: 0,
        }
    }
}

/// Brackets the largest attaining rate by doubling from `q_hi_seed`, then
/// bisects until the bracket is within `tol_rel` of its lower end.
///
/// The evaluator receives `(qps, repetition)`.
pub fn capacity_search<F, E>(
    params: &CapacitySearch,
    mut eval: F,
) -> Result<CapacityResult, SearchError>
where
    F: FnMut(f64, usize) -> Result<ProbeOutcome, E>,
    E: std::fmt::Display,
{
    let CapacitySearch {
        q_lo,
        q_hi_seed,
        tol_rel,
        repetitions,
        max_doublings,
        seed,
    } = *params;
    if !(q_lo > 0.0 && q_lo.is_finite()) {
        return Err(SearchError::BadBounds(format!(
            "q_lo must be positive, got {q_lo}"
        )));
    }
    if !(tol_rel > 0.0 && tol_rel.is_finite()) {
        return Err(SearchError::BadBounds(format!(
            "tolerance must be positive, got {tol_rel}"
        )));
    }
    let reps = repetitions.max(1);
    let mut probes: Vec<Probe> = Vec::new();
    let mut probe = |qps: f64, probes: &mut Vec<Probe>| -> Result<bool, SearchError> {
        let mut outcomes = Vec::with_capacity(reps);
        for r in 0..reps {
            let o = eval(qps, r).map_err(|e| SearchError::Probe {
                qps,
                message: e.to_string(),
            })?;
            outcomes.push(o);
        }
        let attained = outcomes.iter().all(|o| o.attained);
        probes.push(Probe {
            qps,
            attained,
            outcomes,
        });
        Ok(attained)
    };

    if !probe(q_lo, &mut probes)? {
        return Err(SearchError::InfeasibleAtFloor(q_lo));
    }
    let mut lo = q_lo;
    let mut q = if q_hi_seed > q_lo {
        q_hi_seed
    } else {
        2.0 * q_lo
    };
    let cap = q * 2f64.powi(max_doublings as i32);
    let mut hi = None;
    loop {
        if probe(q, &mut probes)? {
            lo = q;
            if q >= cap {
                break;
            }
            q = (q * 2.0).min(cap);
        } else {
            hi = Some(q);
            break;
        }
    }
    let unbounded = hi.is_none();
    if let Some(mut hi) = hi {
        while (hi - lo) / lo > tol_rel {
            let mid = 0.5 * (lo + hi);
            if probe(mid, &mut probes)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let lowest_failure = probes
        .iter()
        .filter(|p| !p.attained)
        .map(|p| p.qps)
        .fold(f64::INFINITY, f64::min);
    let non_monotone_observed = probes.iter().any(|p| p.attained && p.qps > lowest_failure);
    Ok(CapacityResult {
        max_qps: lo,
        probes,
        tolerance_rel: tol_rel,
        seed,
        unbounded,
        non_monotone_observed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidityRequirement {
    /// Share of requests (as a percentile, e.g. 99) that must reach the threshold.
    pub percentile: f64,
    pub fluidity_threshold: f64,
}

impl FluidityRequirement {
    pub fn satisfied_by(&self, fluidities: &[f64]) -> bool {
        if fluidities.is_empty() {
            return false;
        }
        let ok = fluidities
            .iter()
            .filter(|&&f| f >= self.fluidity_threshold)
            .count();
        ok as f64 / fluidities.len() as f64 + 1e-12 >= self.percentile / 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidRate {
    pub decode_deadline_s: f64,
    pub tokens_per_s: f64,
    pub evaluations: usize,
}

/// Fluidity of every timeline when the decode deadline is `dd`, keeping each
/// request's prefill deadline fixed.
pub fn fluidities_at(
    timelines: &[(RequestSpec, TokenTimeline)],
    policy: &DeadlinePolicy,
    dd: f64,
) -> Result<Vec<f64>, SearchError> {
    timelines
        .iter()
        .map(|(spec, t)| {
            let d = DeadlineSpec {
                decode_deadline_s: dd,
                ..make_deadlines(policy, spec)
            };
            Ok(fluidity_index(t, &d)?.index)
        })
        .collect()
}

/// Smallest decode deadline (within `tol_rel`) at which the requirement holds.
///
/// Relies on fluidity being non-decreasing in the decode deadline.
pub fn fluid_rate_search(
    timelines: &[(RequestSpec, TokenTimeline)],
    policy: &DeadlinePolicy,
    req: &FluidityRequirement,
    dd_lo: f64,
    dd_hi: f64,
    tol_rel: f64,
) -> Result<FluidRate, SearchError> {
    if !(dd_lo > 0.0 && dd_lo < dd_hi && dd_hi.is_finite()) {
        return Err(SearchError::BadBounds(format!(
            "need 0 < dd_lo < dd_hi, got [{dd_lo}, {dd_hi}]"
        )));
    }
    if !(tol_rel > 0.0 && tol_rel.is_finite()) {
        return Err(SearchError::BadBounds(format!(
            "tolerance must be positive, got {tol_rel}"
        )));
    }
    let mut evaluations = 0usize;
    let mut meets = |dd: f64| -> Result<bool, SearchError> {
        evaluations += 1;
        Ok(req.satisfied_by(&fluidities_at(timelines, policy, dd)?))
    };
    if !meets(dd_hi)? {
        return Err(SearchError::InfeasibleAtCeiling(dd_hi));
    }
    let best = if meets(dd_lo)? {
        dd_lo
    } else {
        let (mut lo, mut hi) = (dd_lo, dd_hi);
        while hi - lo > tol_rel * hi {
            let mid = 0.5 * (lo + hi);
            if meets(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(FluidRate {
        decode_deadline_s: best,
        tokens_per_s: 1.0 / best,
        evaluations,
    })
}
