//! Check records shared by schedule validation and the verification harnesses.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// One verified inequality: `measured` against `bound`, with the margin that
/// decided it. Values prefixed `ln` in `name` are natural logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub property: String,
    pub measured: f64,
    pub bound: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }

    pub fn skipped(name: &str, property: &str, why: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            property: property.into(),
            measured: f64::NAN,
            bound: f64::NAN,
            slack: f64::NAN,
            tolerance: 0.0,
            status: Status::Skipped,
            note: why.into(),
        }
    }

    /// `measured <= bound + tolerance`.
    pub fn at_most(name: &str, property: &str, measured: f64, bound: f64, tolerance: f64) -> Check {
        let slack = bound - measured;
        let ok = slack >= -tolerance;
        Check {
            name: name.into(),
            property: property.into(),
            measured,
            bound,
            slack,
            tolerance,
            status: if ok { Status::Pass } else { Status::Fail },
            note: String::new(),
        }
    }

    /// `measured >= bound - tolerance`.
    pub fn at_least(name: &str, property: &str, measured: f64, bound: f64, tolerance: f64) -> Check {
        let mut c = Check::at_most(name, property, -measured, -bound, tolerance);
        c.measured = measured;
        c.bound = bound;
        c
    }

    pub fn flag(name: &str, property: &str, ok: bool, note: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            property: property.into(),
            measured: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
            slack: if ok { 0.0 } else { -1.0 },
            tolerance: 0.0,
            status: if ok { Status::Pass } else { Status::Fail },
            note: note.into(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Check {
        self.note = note.into();
        self
    }
}

/// Worst case over many `(label, measured, bound)` triples of `measured <= bound`
/// with relative tolerance `rel * max(1, |bound|)`.
pub fn worst_at_most<I>(name: &str, property: &str, rel: f64, items: I) -> Check
where
    I: IntoIterator<Item = (String, f64, f64)>,
{
    let mut worst: Option<(String, f64, f64, f64)> = None;
    let mut failed = false;
    for (label, m, b) in items {
        let tol = rel * b.abs().max(1.0);
        let slack = b - m;
        if slack.is_nan() || slack < -tol {
            failed = true;
        }
        let rank = if slack.is_nan() { f64::NEG_INFINITY } else { slack / tol.max(f64::MIN_POSITIVE) };
        if worst.as_ref().is_none_or(|w| rank < w.3) {
            worst = Some((label, m, b, rank));
        }
    }
    match worst {
        None => Check::flag(name, property, true, "vacuous: no items"),
        Some((label, m, b, _)) => Check {
            name: name.into(),
            property: property.into(),
            measured: m,
            bound: b,
            slack: b - m,
            tolerance: rel * b.abs().max(1.0),
            status: if failed { Status::Fail } else { Status::Pass },
            note: format!("tightest at {label}"),
        },
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(Check::passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_case_picks_tightest() {
        let c = worst_at_most("x", "p", 1e-12, vec![("a".into(), 1.0, 2.0), ("b".into(), 1.9, 2.0)]);
        assert_eq!(c.status, Status::Pass);
        assert_eq!(c.note, "tightest at b");
        let c = worst_at_most("x", "p", 1e-12, vec![("a".into(), 3.0, 2.0)]);
        assert_eq!(c.status, Status::Fail);
    }

    #[test]
    fn at_least_mirrors_at_most() {
        assert!(Check::at_least("x", "p", 2.0, 1.0, 0.0).passed());
        assert!(!Check::at_least("x", "p", 0.5, 1.0, 0.0).passed());
    }
}
