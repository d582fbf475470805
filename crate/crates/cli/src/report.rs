//! Run summaries: named checks with thresholds, metrics and warnings.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Self { experiment: experiment.to_string(), seed, ..Self::default() }
    }

    /// Passes when `value < threshold`.
    pub fn below(&mut self, name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> bool {
        self.push(name, value, threshold, value < threshold, detail)
    }

    /// Passes when `value <= threshold`.
    pub fn at_most(&mut self, name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> bool {
        self.push(name, value, threshold, value <= threshold, detail)
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(&mut self, name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> bool {
        self.push(name, value, threshold, value >= threshold, detail)
    }

    pub fn flag(&mut self, name: &str, passed: bool, detail: impl Into<String>) -> bool {
        self.push(name, passed as u8 as f64, 1.0, passed, detail)
    }

    fn push(&mut self, name: &str, value: f64, threshold: f64, passed: bool, detail: impl Into<String>) -> bool {
        // NaN comparisons are false, so a NaN value always fails.
        self.checks.push(Check { name: name.to_string(), value, threshold, passed, detail: detail.into() });
        passed
    }

    pub fn metric<T: Serialize>(&mut self, name: &str, value: T) {
        self.metrics.insert(name.to_string(), serde_json::to_value(value).expect("metrics serialise"));
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// All checks whose name starts with `prefix`.
    pub fn group(&self, prefix: &str) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.name.starts_with(prefix)).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialise");
        s.push('\n');
        s
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment {} (seed {})", self.experiment, self.seed)?;
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "  [{tag}] {}: {:.6e} (threshold {:.3e}) {}", c.name, c.value, c.threshold, c.detail)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_fails_every_comparison() {
        let mut r = Report::new("x", 1);
        assert!(!r.below("a", f64::NAN, 1.0, ""));
        assert!(!r.at_least("b", f64::NAN, 1.0, ""));
        assert!(!r.passed());
    }

    #[test]
    fn empty_report_passes() {
        assert!(Report::new("x", 1).passed());
    }
}
