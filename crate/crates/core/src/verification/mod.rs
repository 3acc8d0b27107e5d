//! Executable checks of the quantitative claims: decorrelation property,
//! four-fold covariance expansion, Van der Corput, LLN ratio, covariance
//! growth and `V_N` decay.

mod covariance;
mod diagnostics;
mod identities;
mod property_p;

use std::collections::BTreeMap;

use serde::Serialize;

pub use covariance::{
    covariance_sum, covariance_sum_bound, covariance_sum_closed_form, covariance_sum_exact, CovarianceBoundReport,
    BOUND_GRID_START, EXACT_SUM_LIMIT, TREND_SLOPE_LIMIT,
};
pub use diagnostics::{lln_ratio_trace, vn_decay_diagnostic, LlnTrace, VnTrace, LLN_MIN_N, VN_FIT_START, VN_MIN_SAMPLES};
pub use identities::{fourfold_identity, vdc_check, vdc_holds, FiniteSpace, MAX_ATOMS};
pub use property_p::{check_property_p, PropertyPReport, RateModel, MAX_TUPLE_END, MAX_TUPLE_LEN};

use crate::error::{Error, Result};

/// `b = 2a + ε` and `M(N) = ⌊N^b⌋` for the `V_N` bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticConfig {
    pub a: f64,
    pub c: f64,
    pub epsilon: f64,
    pub gamma: f64,
}

impl DiagnosticConfig {
    pub fn new(a: f64, c: f64, epsilon: f64, gamma: f64) -> Result<Self> {
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::invalid("a must lie in (0, 1/2)"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0 - 2.0 * a) {
            return Err(Error::invalid("epsilon must lie in (0, 1 - 2a)"));
        }
        crate::ergodic_averaging::check_gamma(gamma)?;
        Ok(DiagnosticConfig { a, c, epsilon, gamma })
    }

    pub fn b_exponent(&self) -> f64 {
        2.0 * self.a + self.epsilon
    }

    pub fn m_of(&self, n: u64) -> u64 {
        ((n as f64).powf(self.b_exponent()).floor() as u64).clamp(1, n.max(1))
    }
}

/// One line of a verification report.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationRecord {
    pub check_name: String,
    pub parameters: BTreeMap<String, String>,
    pub pass: bool,
    pub measured: f64,
    pub bound: f64,
    pub witness: Option<String>,
}

impl VerificationRecord {
    pub fn new(check_name: &str, pass: bool, measured: f64, bound: f64) -> Self {
        VerificationRecord {
            check_name: check_name.to_string(),
            parameters: BTreeMap::new(),
            pass,
            measured,
            bound,
            witness: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_witness(mut self, w: impl ToString) -> Self {
        self.witness = Some(w.to_string());
        self
    }
}
