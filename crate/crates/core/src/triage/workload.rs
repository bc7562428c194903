use serde::{Deserialize, Serialize};

use super::TriageError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadParams {
    pub studies_per_year: f64,
    pub normal_prevalence: f64,
    pub sensitivity: f64,
    pub minutes_per_study: f64,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            studies_per_year: 10_000.0,
            normal_prevalence: 0.40,
            sensitivity: 0.30,
            // midpoint of 8-10 minutes per manual annotation
            minutes_per_study: 9.0,
        }
    }
}

impl WorkloadParams {
    pub fn validate(&self) -> Result<(), TriageError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if nonneg(self.studies_per_year)
            && nonneg(self.minutes_per_study)
            && unit(self.normal_prevalence)
            && unit(self.sensitivity)
        {
            Ok(())
        } else {
            Err(TriageError::InvalidWorkload(*self))
        }
    }
}

/// Cardiologist hours saved per year when studies triaged NORMAL skip
/// manual annotation.
pub fn workload_savings(p: &WorkloadParams) -> Result<f64, TriageError> {
    p.validate()?;
    Ok(p.studies_per_year * p.normal_prevalence * p.sensitivity * p.minutes_per_study / 60.0)
}
