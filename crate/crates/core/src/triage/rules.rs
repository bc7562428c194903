use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TriageError;

/// LVEF cutoffs in percent. Values below `abnormal_below` are abnormal,
/// values above `normal_above` normal, and both boundaries belong to the
/// grey zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub abnormal_below: f64,
    pub normal_above: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            abnormal_below: 40.0,
            normal_above: 60.0,
        }
    }
}

impl ThresholdConfig {
    pub fn new(abnormal_below: f64, normal_above: f64) -> Result<Self, TriageError> {
        let cfg = Self {
            abnormal_below,
            normal_above,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TriageError> {
        let ok = self.abnormal_below > 0.0 && self.abnormal_below <= self.normal_above && self.normal_above < 100.0;
        if ok {
            Ok(())
        } else {
            Err(TriageError::InvalidThresholds {
                abnormal_below: self.abnormal_below,
                normal_above: self.normal_above,
            })
        }
    }
}

/// Triage outcome. `Undetermined` marks pipeline failures and is never
/// produced by [`triage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    Abnormal,
    Grey,
    Normal,
    Undetermined,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Abnormal => "ABNORMAL",
            Category::Grey => "GREY",
            Category::Normal => "NORMAL",
            Category::Undetermined => "UNDETERMINED",
        }
    }

    /// ABNORMAL > GREY > NORMAL; `None` for UNDETERMINED.
    pub fn severity(self) -> Option<u8> {
        match self {
            Category::Abnormal => Some(2),
            Category::Grey => Some(1),
            Category::Normal => Some(0),
            Category::Undetermined => None,
        }
    }

    pub fn is_clinical(self) -> bool {
        self != Category::Undetermined
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = TriageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ABNORMAL" => Ok(Category::Abnormal),
            "GREY" => Ok(Category::Grey),
            "NORMAL" => Ok(Category::Normal),
            "UNDETERMINED" => Ok(Category::Undetermined),
            other => Err(TriageError::UnknownCategory(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageDecision {
    pub category: Category,
    pub lvef: Option<f64>,
    pub thresholds: ThresholdConfig,
    pub flags: BTreeSet<String>,
}

impl TriageDecision {
    pub fn undetermined(thresholds: ThresholdConfig, flags: BTreeSet<String>) -> Self {
        Self {
            category: Category::Undetermined,
            lvef: None,
            thresholds,
            flags,
        }
    }
}

pub fn triage(lvef: f64, cfg: &ThresholdConfig) -> Result<TriageDecision, TriageError> {
    if !(0.0..=100.0).contains(&lvef) {
        return Err(TriageError::InvalidLvef(lvef));
    }
    cfg.validate()?;
    let category = if lvef < cfg.abnormal_below {
        Category::Abnormal
    } else if lvef > cfg.normal_above {
        Category::Normal
    } else {
        Category::Grey
    };
    Ok(TriageDecision {
        category,
        lvef: Some(lvef),
        thresholds: *cfg,
        flags: BTreeSet::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(lvef: f64) -> Category {
        triage(lvef, &ThresholdConfig::default()).unwrap().category
    }

    #[test]
    fn default_cutoffs() {
        assert_eq!(cat(35.0), Category::Abnormal);
        assert_eq!(cat(40.0), Category::Grey);
        assert_eq!(cat(60.0), Category::Grey);
        assert_eq!(cat(65.0), Category::Normal);
        assert_eq!(cat(39.999), Category::Abnormal);
        assert_eq!(cat(60.001), Category::Normal);
    }

    #[test]
    fn out_of_range_lvef() {
        for bad in [-0.1, 100.1, f64::NAN] {
            assert!(matches!(
                triage(bad, &ThresholdConfig::default()),
                Err(TriageError::InvalidLvef(_))
            ));
        }
    }

    #[test]
    fn threshold_validation() {
        assert!(ThresholdConfig::new(0.0, 60.0).is_err());
        assert!(ThresholdConfig::new(61.0, 60.0).is_err());
        assert!(ThresholdConfig::new(40.0, 100.0).is_err());
        assert!(ThresholdConfig::new(50.0, 50.0).is_ok());
    }

    #[test]
    fn category_strings() {
        for c in [
            Category::Abnormal,
            Category::Grey,
            Category::Normal,
            Category::Undetermined,
        ] {
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        assert!("grey".parse::<Category>().is_err());
    }
}
