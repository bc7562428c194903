use serde::{Deserialize, Serialize};

use super::TriageError;

/// Confusion matrix with NORMAL as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_pairs(pairs: &[(bool, bool)]) -> Self {
        let mut c = Confusion::default();
        for &(predicted, actual) in pairs {
            match (predicted, actual) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> Result<Metrics, TriageError> {
        let n = self.total();
        if n == 0 {
            return Err(TriageError::EmptyInput);
        }
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        Ok(Metrics {
            precision: ratio(self.tp, self.tp + self.fp),
            sensitivity: ratio(self.tp, self.tp + self.fn_),
            accuracy: (self.tp + self.tn) as f64 / n as f64,
            confusion: *self,
        })
    }
}

/// Precision and sensitivity are `None` when their denominator is zero
/// (no positive predictions / no truly normal cases).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub accuracy: f64,
    pub confusion: Confusion,
}

/// Metrics over (predicted_normal, truly_normal) pairs.
pub fn metrics(pairs: &[(bool, bool)]) -> Result<Metrics, TriageError> {
    Confusion::from_pairs(pairs).metrics()
}
