//! Verdict records shared by the reports.

use serde::{Deserialize, Serialize};

/// A numeric check: measured value, the criterion it was held to, verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub criterion: Criterion,
    pub pass: bool,
}

/// How a value is judged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    AtMost { bound: f64 },
    AtLeast { bound: f64 },
    Within { low: f64, high: f64 },
    Near { target: f64, tol: f64 },
}

impl Criterion {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            Criterion::AtMost { bound } => v <= bound,
            Criterion::AtLeast { bound } => v >= bound,
            Criterion::Within { low, high } => v >= low && v <= high,
            Criterion::Near { target, tol } => (v - target).abs() <= tol,
        }
    }
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, criterion: Criterion) -> Self {
        let pass = criterion.holds(value);
        Check { name: name.into(), value, criterion, pass }
    }
}

/// True when every check passes.
pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}
