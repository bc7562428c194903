//! Study orchestration: classify, segment, measure and triage each study,
//! then persist the report.

mod config;
mod external;
mod report;
mod run;
mod store;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{BackendConfig, ClassifierSpec, PipelineConfig, SegmenterSpec};
pub use external::{ExternalClassifier, ExternalSegmenter};
pub use report::{
    ClipReport, CycleVolumes, ReviewerOverride, SelectedClips, SkippedFile, StudyReport, REPORT_SCHEMA_VERSION,
};
pub use run::{
    discover_studies, failure_report, is_clip_candidate, run_batch, run_study, run_study_with_masks, StudyOutcome,
    FLAG_AXIS_MISMATCH, FLAG_CYCLE_COUNT_MISMATCH, FLAG_MIXED_STUDY_UIDS, FLAG_NO_APICAL_CLIP, FLAG_NO_CYCLE,
    FLAG_NO_USABLE_CLIPS, FLAG_UNCALIBRATED, FLAG_UNPARSABLE_FILE, FLAG_VIEW_UNUSABLE, FLAG_VOLUME_FAILED,
};
pub use store::{CohortRecord, MaskRecord, OverrideRecord, RecordKind, Store, StudySummary};

use crate::triage::TriageError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no parsable clip in {}", study_dir.display())]
    NoUsableClips { study_dir: PathBuf },
    #[error("store record {}: {reason}", record.display())]
    StoreCorrupt { record: PathBuf, reason: String },
    #[error("unknown study {0:?}")]
    UnknownStudy(String),
    #[error("invalid override: {0}")]
    InvalidOverride(String),
    #[error("JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Triage(#[from] TriageError),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
