use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::geometry::LvefResult;
use crate::triage::{Category, TriageDecision};
use crate::view::View;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipReport {
    pub clip_id: String,
    pub file: String,
    pub acquisition_index: u32,
    pub num_frames: usize,
    pub rows: usize,
    pub cols: usize,
    pub calibrated: bool,
    pub view: View,
    pub confidence: f64,
    pub classifier: String,
    pub flags: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkippedFile {
    pub file: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectedClips {
    pub a4c: Option<String>,
    pub a2c: Option<String>,
}

/// Volumes of one beat. Frames refer to the A4C clip, or to the A2C clip
/// in single-plane A2C studies; biplane beats also carry the paired A2C
/// frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleVolumes {
    pub ed_frame: usize,
    pub es_frame: usize,
    pub a2c_ed_frame: Option<usize>,
    pub a2c_es_frame: Option<usize>,
    pub edv_ml: f64,
    pub esv_ml: f64,
    pub lvef_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewerOverride {
    pub category: Category,
    pub reviewer_id: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
    #[serde(default)]
    pub note: Option<String>,
}

/// Machine output for one study. Field order here is the wire order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyReport {
    pub schema_version: u32,
    pub study_id: String,
    pub config_fingerprint: String,
    pub clips: Vec<ClipReport>,
    pub skipped_files: Vec<SkippedFile>,
    pub selected: SelectedClips,
    pub segmenter: Option<String>,
    pub cycles: Vec<CycleVolumes>,
    pub lvef: Option<LvefResult>,
    pub triage: TriageDecision,
    pub quality_flags: BTreeSet<String>,
    /// Why the study is UNDETERMINED, when it is.
    pub failure: Option<String>,
    /// Always `None` in stored reports; attached when served.
    pub reviewer_override: Option<ReviewerOverride>,
}

impl StudyReport {
    /// Compact JSON in declaration order, newline-terminated.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Json(e.to_string()))
    }

    /// The reviewer's category when overridden, else the machine's.
    pub fn effective_category(&self) -> Category {
        self.reviewer_override
            .as_ref()
            .map_or(self.triage.category, |o| o.category)
    }
}
