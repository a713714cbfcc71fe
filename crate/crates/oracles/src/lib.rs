//! Brute-force reference implementations. Deliberately naive and slow; they
//! exist so tests can check the real code paths against something written
//! without sharing any of their logic.

/// Met and missed deadline counts found by replaying an explicit deadline list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeadlineTally {
    pub met: u64,
    pub missed: u64,
}

impl DeadlineTally {
    pub fn fluidity(&self) -> f64 {
        let total = self.met + self.missed;
        if total == 0 {
            1.0
        } else {
            self.met as f64 / total as f64
        }
    }
}

/// Expands `(time, tokens)` events into one arrival per token.
pub fn expand_events(events: &[(f64, u32)]) -> Vec<f64> {
    let mut out = Vec::new();
    for &(t, k) in events {
        for _ in 0..k {
            out.push(t);
        }
    }
    out
}

/// Walks the arrivals against a materialized list of deadlines.
///
/// The list starts with the prefill deadline. Each arrival consumes the head
/// of the list. If the arrival is late, every listed deadline at or before it
/// is consumed as a miss, and the list is rebuilt from the arrival.
pub fn enumerate_deadlines(
    submit: f64,
    prefill_deadline: f64,
    decode_deadline: f64,
    arrivals: &[f64],
) -> DeadlineTally {
    let mut tally = DeadlineTally { met: 0, missed: 0 };
    let mut pending: Vec<f64> = vec![submit + prefill_deadline];
    for &a in arrivals {
        let head = pending[0];
        if a <= head {
            tally.met += 1;
            pending = vec![head + decode_deadline];
            continue;
        }
        // Materialize every deadline up to the arrival.
        let mut j = 1u64;
        loop {
            let next = head + j as f64 * decode_deadline;
            if next > a {
                break;
            }
            pending.push(next);
            j += 1;
        }
        tally.missed += pending.len() as u64;
        pending = vec![a + decode_deadline];
    }
    tally
}

/// Largest grid point in `[lo, hi]` (step `step`) at which `attains` holds,
/// scanning every point. `None` when no point attains.
pub fn linear_scan_capacity(
    lo: f64,
    hi: f64,
    step: f64,
    mut attains: impl FnMut(f64) -> bool,
) -> Option<f64> {
    let n = ((hi - lo) / step).round() as u64;
    let mut best = None;
    for i in 0..=n {
        let q = lo + i as f64 * step;
        if attains(q) {
            best = Some(q);
        }
    }
    best
}

/// Smallest grid point in `[lo, hi]` (step `step`) at which `meets` holds.
pub fn linear_scan_min(
    lo: f64,
    hi: f64,
    step: f64,
    mut meets: impl FnMut(f64) -> bool,
) -> Option<f64> {
    let n = ((hi - lo) / step).round() as u64;
    (0..=n).map(|i| lo + i as f64 * step).find(|&x| meets(x))
}

/// One request for the fluid-rate oracle: submit time, its prefill deadline
/// and per-token arrivals.
#[derive(Debug, Clone)]
pub struct FluidCase {
    pub submit: f64,
    pub prefill_deadline: f64,
    pub arrivals: Vec<f64>,
}

/// True when at least `percentile`% of cases reach `threshold` fluidity at
/// decode deadline `dd`.
pub fn fluid_requirement_holds(
    cases: &[FluidCase],
    dd: f64,
    percentile: f64,
    threshold: f64,
) -> bool {
    let ok = cases
        .iter()
        .filter(|c| {
            enumerate_deadlines(c.submit, c.prefill_deadline, dd, &c.arrivals).fluidity()
                >= threshold
        })
        .count();
    ok as f64 * 100.0 >= percentile * cases.len() as f64 - 1e-9
}

/// Smallest decode deadline on the grid satisfying the requirement.
pub fn linear_scan_fluid_rate(
    cases: &[FluidCase],
    percentile: f64,
    threshold: f64,
    lo: f64,
    hi: f64,
    step: f64,
) -> Option<f64> {
    linear_scan_min(lo, hi, step, |dd| {
        fluid_requirement_holds(cases, dd, percentile, threshold)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paced_tokens_meet_everything() {
        let arrivals: Vec<f64> = (0..10).map(|i| 0.5 + 0.02 * i as f64).collect();
        let t = enumerate_deadlines(0.0, 1.0, 0.04, &arrivals);
        assert_eq!(t, DeadlineTally { met: 10, missed: 0 });
    }

    #[test]
    fn late_first_token() {
        // Deadlines 1.0, 1.25, 1.5 elapse before the first token at 1.6.
        let t = enumerate_deadlines(0.0, 1.0, 0.25, &[1.6, 1.7]);
        assert_eq!(t, DeadlineTally { met: 1, missed: 3 });
    }

    #[test]
    fn scans() {
        assert_eq!(linear_scan_capacity(0.0, 1.0, 0.25, |q| q < 0.6), Some(0.5));
        assert_eq!(linear_scan_min(0.0, 1.0, 0.25, |q| q > 0.6), Some(0.75));
        assert_eq!(linear_scan_min(0.0, 1.0, 0.25, |_| false), None);
    }
}
