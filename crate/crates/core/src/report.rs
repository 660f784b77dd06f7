//! Structured pass/fail records.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Check {
    pub name: String,
    /// The identity being tested, written out as a formula.
    pub anchor: String,
    pub passed: bool,
    pub max_residual: f64,
    pub tolerance: f64,
    /// Sample point with the largest residual, if any sample was evaluated.
    pub worst_point: Option<Vec<f64>>,
    pub samples: usize,
    pub notes: Vec<String>,
}

impl Check {
    /// A check with no residual, decided directly.
    pub fn verdict(name: &str, anchor: &str, passed: bool, note: Option<String>) -> Self {
        Check {
            name: name.to_string(),
            anchor: anchor.to_string(),
            passed,
            max_residual: 0.0,
            tolerance: 0.0,
            worst_point: None,
            samples: 0,
            notes: note.into_iter().collect(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Ordered collection of checks; merging is concatenation.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn merge(mut self, other: VerificationReport) -> Self {
        self.checks.extend(other.checks);
        self
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Largest residual over all checks.
    pub fn max_residual(&self) -> f64 {
        self.checks.iter().fold(0.0, |m, c| crate::math::max(m, c.max_residual))
    }
}

impl From<Check> for VerificationReport {
    fn from(c: Check) -> Self {
        VerificationReport { checks: alloc::vec![c] }
    }
}

/// Running maximum of residuals with the point where it occurred.
///
/// NaN residuals count as failures and are reported as the worst point.
#[derive(Debug, Clone, Default)]
pub(crate) struct ResidualTracker {
    max: f64,
    worst: Option<Vec<f64>>,
    nan: bool,
    notes: Vec<String>,
}

impl ResidualTracker {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn record(&mut self, residual: f64, x: &[f64]) {
        if residual.is_nan() {
            if !self.nan {
                self.worst = Some(x.to_vec());
            }
            self.nan = true;
        } else if !self.nan && (self.worst.is_none() || residual > self.max) {
            self.max = crate::math::max(self.max, residual);
            self.worst = Some(x.to_vec());
        }
    }

    pub(crate) fn note(&mut self, note: String) {
        self.notes.push(note);
    }

    pub(crate) fn max(&self) -> f64 {
        if self.nan {
            f64::NAN
        } else {
            self.max
        }
    }

    pub(crate) fn finish(self, name: &str, anchor: &str, tol: f64, samples: usize) -> Check {
        let max_residual = self.max();
        Check {
            name: name.to_string(),
            anchor: anchor.to_string(),
            passed: !self.nan && max_residual <= tol,
            max_residual,
            tolerance: tol,
            worst_point: self.worst,
            samples,
            notes: self.notes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracker_keeps_worst_point() {
        let mut t = ResidualTracker::new();
        t.record(1e-12, &[1.0]);
        t.record(3e-10, &[2.0]);
        t.record(2e-11, &[3.0]);
        let c = t.finish("x", "y", 1e-9, 3);
        assert!(c.passed);
        assert_eq!(c.max_residual, 3e-10);
        assert_eq!(c.worst_point, Some(alloc::vec![2.0]));
    }

    #[test]
    fn nan_fails() {
        let mut t = ResidualTracker::new();
        t.record(0.0, &[1.0]);
        t.record(f64::NAN, &[5.0]);
        let c = t.finish("x", "y", 1.0, 2);
        assert!(!c.passed);
        assert_eq!(c.worst_point, Some(alloc::vec![5.0]));
    }

    #[test]
    fn merge_is_concatenation() {
        let a: VerificationReport = Check::verdict("a", "", true, None).into();
        let b: VerificationReport = Check::verdict("b", "", false, None).into();
        let m = a.merge(b);
        assert_eq!(m.checks.len(), 2);
        assert!(!m.passed());
    }
}
