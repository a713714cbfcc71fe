//! Service-level objectives and their compact string form.
//!
//! ```text
//! slo     := term (WS term)*
//! term    := pct | bound [ "@" frac ] | "@" frac
//! pct     := "p" number                      e.g. p99, p99.9
//! bound   := "ttft" ("<" | "<=") dur
//!          | "tbt"  ("<" | "<=") dur
//!          | "fluidity" (">" | ">=") number
//! dur     := number ("s" | "ms" | "us")?    bare numbers are seconds
//! frac    := number in (0, 1]
//! ```
//!
//! Example: `p99 ttft<2s fluidity>0.9@0.99`. A request attains the SLO when
//! its TTFT, its own `p`-th percentile TBT and its fluidity all satisfy the
//! stated bounds. A run attains when the attaining fraction of requests is at
//! least the `@` target, which defaults to `p/100`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metrics::{percentile_sorted, RequestMetrics};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SloError {
    #[error("empty SLO expression")]
    Empty,
    #[error("SLO needs at least one of ttft, tbt or fluidity bounds")]
    NoBounds,
    #[error("unrecognized SLO term {0:?}")]
    BadTerm(String),
    #[error("bad number in {0:?}")]
    BadNumber(String),
    #[error("{0} given more than once")]
    Duplicate(&'static str),
    #[error("percentile {0} outside (0, 100]")]
    BadPercentile(f64),
    #[error("value {0} outside [0, 1]")]
    BadFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SloSpec {
    pub percentile: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttft_bound_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tbt_bound_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluidity_threshold: Option<f64>,
    pub attainment_target: f64,
}

impl SloSpec {
    pub fn validate(&self) -> Result<(), SloError> {
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(SloError::BadPercentile(self.percentile));
        }
        if self.ttft_bound_s.is_none()
            && self.tbt_bound_s.is_none()
            && self.fluidity_threshold.is_none()
        {
            return Err(SloError::NoBounds);
        }
        if !(self.attainment_target > 0.0 && self.attainment_target <= 1.0) {
            return Err(SloError::BadFraction(self.attainment_target));
        }
        if let Some(f) = self.fluidity_threshold {
            if !(0.0..=1.0).contains(&f) {
                return Err(SloError::BadFraction(f));
            }
        }
        for b in [self.ttft_bound_s, self.tbt_bound_s].into_iter().flatten() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(SloError::BadNumber(b.to_string()));
            }
        }
        Ok(())
    }

    /// Whether one request satisfies every bound.
    pub fn request_attains(&self, m: &RequestMetrics) -> bool {
        if self.ttft_bound_s.is_some_and(|b| m.ttft_s > b) {
            return false;
        }
        if let Some(b) = self.tbt_bound_s {
            if !m.tbt_s.is_empty() {
                let mut gaps = m.tbt_s.clone();
                gaps.sort_by(f64::total_cmp);
                if percentile_sorted(&gaps, self.percentile) > b {
                    return false;
                }
            }
        }
        !self
            .fluidity_threshold
            .is_some_and(|f| m.fluidity_index < f)
    }

    /// Fraction of requests attaining; 0 for an empty population.
    pub fn attainment(&self, metrics: &[RequestMetrics]) -> f64 {
        if metrics.is_empty() {
            return 0.0;
        }
        metrics.iter().filter(|m| self.request_attains(m)).count() as f64 / metrics.len() as f64
    }

    pub fn run_attains(&self, metrics: &[RequestMetrics]) -> bool {
        !metrics.is_empty() && self.attainment(metrics) + 1e-12 >= self.attainment_target
    }
}

fn parse_number(s: &str, whole: &str) -> Result<f64, SloError> {
    let v: f64 = s
        .parse()
        .map_err(|_| SloError::BadNumber(whole.to_string()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SloError::BadNumber(whole.to_string()))
    }
}

fn parse_duration(s: &str, whole: &str) -> Result<f64, SloError> {
    let (num, scale) = if let Some(n) = s.strip_suffix("ms") {
        (n, 1e-3)
    } else if let Some(n) = s.strip_suffix("us") {
        (n, 1e-6)
    } else if let Some(n) = s.strip_suffix('s') {
        (n, 1.0)
    } else {
        (s, 1.0)
    };
    let v = parse_number(num, whole)? * scale;
    if v <= 0.0 {
        return Err(SloError::BadNumber(whole.to_string()));
    }
    Ok(v)
}

fn split_op<'a>(rest: &'a str, ops: &[&str]) -> Option<&'a str> {
    ops.iter().find_map(|op| rest.strip_prefix(op))
}

impl FromStr for SloSpec {
    type Err = SloError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut percentile = None;
        let mut ttft = None;
        let mut tbt = None;
        let mut fluidity = None;
        let mut target = None;
        if s.trim().is_empty() {
            return Err(SloError::Empty);
        }
        for raw in s.split_whitespace() {
            let lower = raw.to_ascii_lowercase();
            let (term, at) = match lower.split_once('@') {
                Some((t, f)) => (t, Some(f)),
                None => (lower.as_str(), None),
            };
            if let Some(f) = at {
                if target.is_some() {
                    return Err(SloError::Duplicate("attainment target"));
                }
                let v = parse_number(f, raw)?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(SloError::BadFraction(v));
                }
                target = Some(v);
            }
            if term.is_empty() {
                if at.is_none() {
                    return Err(SloError::BadTerm(raw.to_string()));
                }
                continue;
            }
            if let Some(rest) = term.strip_prefix("ttft") {
                let d = split_op(rest, &["<=", "<"])
                    .ok_or_else(|| SloError::BadTerm(raw.to_string()))?;
                if ttft.replace(parse_duration(d, raw)?).is_some() {
                    return Err(SloError::Duplicate("ttft"));
                }
            } else if let Some(rest) = term.strip_prefix("tbt") {
                let d = split_op(rest, &["<=", "<"])
                    .ok_or_else(|| SloError::BadTerm(raw.to_string()))?;
                if tbt.replace(parse_duration(d, raw)?).is_some() {
                    return Err(SloError::Duplicate("tbt"));
                }
            } else if let Some(rest) = term.strip_prefix("fluidity") {
                let v = split_op(rest, &[">=", ">"])
                    .ok_or_else(|| SloError::BadTerm(raw.to_string()))?;
                let v = parse_number(v, raw)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(SloError::BadFraction(v));
                }
                if fluidity.replace(v).is_some() {
                    return Err(SloError::Duplicate("fluidity"));
                }
            } else if let Some(rest) = term.strip_prefix('p') {
                let v = parse_number(rest, raw)?;
                if !(v > 0.0 && v <= 100.0) {
                    return Err(SloError::BadPercentile(v));
                }
                if percentile.replace(v).is_some() {
                    return Err(SloError::Duplicate("percentile"));
                }
            } else {
                return Err(SloError::BadTerm(raw.to_string()));
            }
        }
        let percentile = percentile.unwrap_or(99.0);
        let spec = SloSpec {
            percentile,
            ttft_bound_s: ttft,
            tbt_bound_s: tbt,
            fluidity_threshold: fluidity,
            attainment_target: target.unwrap_or(percentile / 100.0),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for SloSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.percentile)?;
        if let Some(b) = self.ttft_bound_s {
            write!(f, " ttft<{b}s")?;
        }
        if let Some(b) = self.tbt_bound_s {
            write!(f, " tbt<{b}s")?;
        }
        if let Some(x) = self.fluidity_threshold {
            write!(f, " fluidity>{x}")?;
        }
        write!(f, " @{}", self.attainment_target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_documented_example() {
        let s: SloSpec = "p99 ttft<2s fluidity>0.9@0.99".parse().unwrap();
        assert_eq!(s.percentile, 99.0);
        assert_eq!(s.ttft_bound_s, Some(2.0));
        assert_eq!(s.tbt_bound_s, None);
        assert_eq!(s.fluidity_threshold, Some(0.9));
        assert_eq!(s.attainment_target, 0.99);
    }

    #[test]
    fn underflowing_values_rejected() {
        assert!("ttft<5e-324us".parse::<SloSpec>().is_err());
        assert!("p5e-324 ttft<1s".parse::<SloSpec>().is_err());
    }

    #[test]
    fn units_and_defaults() {
        let s: SloSpec = "p90 tbt<=200ms".parse().unwrap();
        assert!((s.tbt_bound_s.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(s.attainment_target, 0.9);
        let s: SloSpec = "ttft<1500us".parse().unwrap();
        assert_eq!(s.percentile, 99.0);
        assert!((s.ttft_bound_s.unwrap() - 0.0015).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!("".parse::<SloSpec>(), Err(SloError::Empty));
        assert_eq!("p99".parse::<SloSpec>(), Err(SloError::NoBounds));
        assert!(matches!(
            "ttft>2s".parse::<SloSpec>(),
            Err(SloError::BadTerm(_))
        ));
        assert!(matches!(
            "p101 ttft<1".parse::<SloSpec>(),
            Err(SloError::BadPercentile(_))
        ));
        assert!(matches!(
            "ttft<1 ttft<2".parse::<SloSpec>(),
            Err(SloError::Duplicate(_))
        ));
        assert!(matches!(
            "fluidity>1.5".parse::<SloSpec>(),
            Err(SloError::BadFraction(_))
        ));
        assert!(matches!(
            "ttft<xs".parse::<SloSpec>(),
            Err(SloError::BadNumber(_))
        ));
        assert!(matches!(
            "ttft<1@0.9 tbt<1@0.8".parse::<SloSpec>(),
            Err(SloError::Duplicate(_))
        ));
    }

    proptest! {
        #[test]
        fn display_roundtrips(
            p in 1u32..=100,
            ttft in prop::option::of(1u32..10_000),
            fl in prop::option::of(0u32..=100),
            target in 1u32..=100,
        ) {
            prop_assume!(ttft.is_some() || fl.is_some());
            let spec = SloSpec {
                percentile: p as f64,
                ttft_bound_s: ttft.map(|t| t as f64 / 1000.0),
                tbt_bound_s: None,
                fluidity_threshold: fl.map(|f| f as f64 / 100.0),
                attainment_target: target as f64 / 100.0,
            };
            let back: SloSpec = spec.to_string().parse().unwrap();
            prop_assert_eq!(back, spec);
        }

        #[test]
        fn parser_never_panics(s in "\\PC{0,40}") {
            let _ = s.parse::<SloSpec>();
        }
    }
}
