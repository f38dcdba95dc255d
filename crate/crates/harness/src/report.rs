//! Run reports. The pass flag is derived from the raw numbers and is
//! recomputed whenever a report is loaded.

use std::collections::BTreeMap;
use std::path::Path;

use agboost_core::boost::{Mode, StopReason};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::spec::Algorithm;

/// Absolute slack on bound comparisons.
pub const BOUND_TOL: f64 = 1e-12;

/// Which guarantee a run is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `error <= Delta + 2 alpha + eps`.
    OptPlusTwoAlphaPlusEps,
    /// `error <= Delta + alpha + eps`.
    OptPlusAlphaPlusEps,
    /// `error <= Delta / (1 - 2 alpha) + eps`.
    OptOverOneMinusTwoAlphaPlusEps,
    /// `error <= Delta + eps`.
    OptPlusEps,
    /// `error <= eps`.
    Eps,
    /// `density >= 2 lambda - eps` and worst advantage below `gamma`.
    HardcoreDensity,
    /// `error < lambda`: the hardness claim is refuted.
    BelowLambda,
}

/// Where the baseline `Delta(A, C)` came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineSource {
    ExactOpt,
    /// Error of the generating concept, an upper bound on `Delta`.
    Reference,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rounds {
    pub weak_updates: usize,
    pub balance_updates: usize,
    pub weak_calls: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance_budget: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub spec_hash: String,
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub seed: u64,
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub final_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_source: Option<BaselineSource>,
    pub bound_kind: BoundKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_advantage: Option<f64>,
    pub rounds: Rounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    pub queries: u64,
    /// Violation counts of per-round audits; any nonzero entry fails the run.
    #[serde(default)]
    pub audits: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub passed: bool,
}

impl Report {
    /// Recomputes the bound from the recorded parameters.
    pub fn bound_value(&self) -> Option<f64> {
        let eps = self.epsilon;
        let opt = self.baseline;
        match self.bound_kind {
            BoundKind::OptPlusTwoAlphaPlusEps => Some(opt? + 2.0 * self.alpha? + eps),
            BoundKind::OptPlusAlphaPlusEps => Some(opt? + self.alpha? + eps),
            BoundKind::OptOverOneMinusTwoAlphaPlusEps => {
                Some(opt? / (1.0 - 2.0 * self.alpha?) + eps)
            }
            BoundKind::OptPlusEps => Some(opt? + eps),
            BoundKind::Eps => Some(eps),
            BoundKind::HardcoreDensity => Some(2.0 * self.lambda? - eps),
            BoundKind::BelowLambda => self.lambda,
        }
    }

    /// Pass/fail from the raw numbers alone.
    pub fn evaluate(&self) -> bool {
        let Some(bound) = self.bound_value() else {
            return false;
        };
        let audits_clean = self.audits.values().all(|v| *v == 0);
        let ok = match self.bound_kind {
            BoundKind::HardcoreDensity => match (self.density, self.worst_advantage, self.gamma) {
                (Some(d), Some(w), Some(g)) => d >= bound - BOUND_TOL && w < g,
                _ => false,
            },
            BoundKind::BelowLambda => self.final_error < bound,
            _ => self.final_error <= bound + BOUND_TOL,
        };
        ok && audits_clean
    }

    /// Fills in `bound` and `passed`.
    pub fn finalize(mut self) -> Self {
        self.bound = self.bound_value();
        self.passed = self.evaluate();
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        Ok(r.finalize())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }
}
