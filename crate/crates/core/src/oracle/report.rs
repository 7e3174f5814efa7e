use serde::{Deserialize, Serialize};

use super::stats::McEstimate;

/// One line of an oracle comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub quantity: String,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub reference: Option<f64>,
    #[serde(rename = "z-score")]
    pub z_score: Option<f64>,
}

impl ReportRow {
    /// A deterministic value without a reference.
    pub fn value(quantity: impl Into<String>, estimate: f64) -> Self {
        ReportRow {
            quantity: quantity.into(),
            estimate,
            stderr: None,
            reference: None,
            z_score: None,
        }
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self.z_score = self.stderr.filter(|&s| s > 0.0).map(|s| (self.estimate - reference) / s);
        self
    }

    pub fn from_mc(quantity: impl Into<String>, est: &McEstimate) -> Self {
        ReportRow {
            quantity: quantity.into(),
            estimate: est.mean,
            stderr: Some(est.stderr),
            reference: None,
            z_score: None,
        }
    }
}
