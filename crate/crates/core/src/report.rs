//! Pass/fail entries shared by all suites.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// The identity or bound being verified, stated in words.
    pub property: String,
    pub value: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= tolerance` and `value` is not NaN.
    pub fn bound(name: &str, property: &str, value: f64, tolerance: f64, samples: usize) -> Check {
        Check {
            name: name.into(),
            property: property.into(),
            value,
            tolerance,
            samples,
            passed: value <= tolerance,
        }
    }

    /// Passes when `lo <= value <= hi`; `tolerance` records the half-width.
    pub fn within(name: &str, property: &str, value: f64, lo: f64, hi: f64) -> Check {
        Check {
            name: name.into(),
            property: property.into(),
            value,
            tolerance: 0.5 * (hi - lo),
            samples: 1,
            passed: value >= lo && value <= hi,
        }
    }

    pub fn flag(name: &str, property: &str, ok: bool) -> Check {
        Check {
            name: name.into(),
            property: property.into(),
            value: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            samples: 1,
            passed: ok,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(title: &str) -> Report {
        Report { title: title.into(), checks: Vec::new() }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `res / scale`, with a floor on the scale so that vanishing inputs give 0.
pub fn relative(res: f64, scale: f64) -> f64 {
    if res == 0.0 {
        0.0
    } else {
        res / scale.max(1e-300)
    }
}
