//! Machine checks of the stationary-law claims and of the drift condition.

mod balance;
mod drift;
mod lumpability;
mod moments;
mod oracle;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use balance::{master_equation_residual, master_equation_residual_range, recurrence_check, balance_terms, BalanceTerms};
pub use drift::{drift_ratio, drift_report, DriftCertificate, DriftReport};
pub use lumpability::lumpability_check;
pub use moments::{moment_zscore_report, MIN_MOMENT_ENSEMBLE};
pub use oracle::{
    oracle_report, solve_with, truncated_stationary_solve, SolveMethod, TruncatedSolution, DENSE_STATE_MAX,
    MAX_LEVEL_BLOCK, STATE_CAP,
};

/// Default relative tolerance for balance residuals.
pub const BALANCE_REL_TOL: f64 = 1e-9;
/// Absolute floor applied when `R_n < 1`.
pub const BALANCE_ABS_FLOOR: f64 = 1e-12;

/// Outcome of a single check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub params: Value,
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
    pub worst_case: Value,
    pub tolerance: f64,
    pub passed: bool,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>, params: Value, tolerance: f64) -> Self {
        VerificationReport {
            check: check.into(),
            params,
            max_abs_residual: 0.0,
            max_rel_residual: 0.0,
            worst_case: Value::Null,
            tolerance,
            passed: true,
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fold another report of the same check into this one.
    pub fn merge(&mut self, other: VerificationReport) {
        if other.max_rel_residual > self.max_rel_residual || (other.max_rel_residual.is_nan()) {
            self.max_rel_residual = other.max_rel_residual;
            self.worst_case = other.worst_case;
        }
        self.max_abs_residual = self.max_abs_residual.max(other.max_abs_residual);
        self.passed &= other.passed;
        self.notes.extend(other.notes);
    }
}

pub(crate) fn network_params(net: &crate::model::ReactionNetwork) -> Value {
    serde_json::json!({
        "dimension": net.dimension(),
        "topology": net.topology().as_str(),
        "kappa": net.kappa_matrix(),
        "lambda": net.lambda(),
        "delta": net.delta(),
    })
}
