//! Check records: the shared result structure of every identity suite,
//! consumed by the command-line driver.

use crate::scalar::Scalar;

/// One named check with its residual, tolerance, verdict and truncation flag.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub truncated: bool,
}

impl CheckRecord {
    /// Float-style record: passes when the residual is within tolerance.
    pub fn from_residual(
        name: impl Into<String>,
        residual: f64,
        tolerance: f64,
        truncated: bool,
    ) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            pass: residual.is_finite() && residual <= tolerance,
            truncated,
        }
    }

    /// Exact-style record: passes only on an exact zero.
    pub fn exact(name: impl Into<String>, residual: f64, is_zero: bool, truncated: bool) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance: 0.0,
            pass: is_zero,
            truncated,
        }
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}.{}", self.name);
        self
    }
}

/// Builds a record from a residual plus an exact-zero flag: exact scalars
/// demand exactness when the tolerance is zero, otherwise the tolerance
/// decides.
pub fn scalar_record<S: Scalar>(
    name: impl Into<String>,
    residual: f64,
    exact_zero: bool,
    tolerance: f64,
    truncated: bool,
) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        residual,
        tolerance,
        pass: exact_zero || (residual.is_finite() && residual <= tolerance && tolerance > 0.0),
        truncated,
    }
}

/// Record from a polynomial-valued residual: exact mode pins it at zero,
/// float mode compares the max coefficient against the tolerance.
pub fn residual_record<S: Scalar>(
    name: impl Into<String>,
    max_abs: f64,
    is_zero: bool,
    float_tol: f64,
    truncated: bool,
) -> CheckRecord {
    if S::EXACT {
        CheckRecord::exact(name, max_abs, is_zero, truncated)
    } else {
        CheckRecord::from_residual(name, max_abs, float_tol, truncated)
    }
}

pub fn all_pass(records: &[CheckRecord]) -> bool {
    records.iter().all(|r| r.pass)
}

pub fn any_truncated(records: &[CheckRecord]) -> bool {
    records.iter().any(|r| r.truncated)
}

pub fn max_residual(records: &[CheckRecord]) -> f64 {
    records.iter().map(|r| r.residual).fold(0.0, f64::max)
}
