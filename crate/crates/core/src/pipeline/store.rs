//! Append-only report store in a single directory.
//!
//! Every write is a new record file `records/<seq>.<kind>.rec` holding a
//! short header (format line, kind, SHA-256 of kind and payload) and a JSON
//! payload. Records are fully written to `tmp/` and then hard-linked into
//! place, so a reader sees either the whole record or nothing; a link that
//! collides with another writer's sequence number is retried with the next
//! one. Nothing is ever rewritten: overrides, threshold changes and new
//! runs are all later records.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::report::{ReviewerOverride, StudyReport};
use super::PipelineError;
use crate::segmentation::Chamber;
use crate::triage::{Category, CohortEntry, ThresholdConfig};

const FORMAT_LINE: &str = "echotriage-record 1";

/// Temporary-file counter shared by every handle in this process; the pid
/// separates processes.
static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RecordKind {
    Report,
    Override,
    Masks,
    Thresholds,
    Cohort,
}

impl RecordKind {
    const ALL: [RecordKind; 5] = [
        RecordKind::Report,
        RecordKind::Override,
        RecordKind::Masks,
        RecordKind::Thresholds,
        RecordKind::Cohort,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Report => "report",
            RecordKind::Override => "override",
            RecordKind::Masks => "masks",
            RecordKind::Thresholds => "thresholds",
            RecordKind::Cohort => "cohort",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Masks of one clip as stored for overlay display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub study_id: String,
    pub config_fingerprint: String,
    pub clip_id: String,
    pub chamber: Chamber,
    /// Sidecar text, one record per frame.
    pub rle: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideRecord {
    pub study_id: String,
    pub config_fingerprint: String,
    #[serde(rename = "override")]
    pub reviewer_override: ReviewerOverride,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub name: String,
    pub entries: Vec<CohortEntry>,
}

/// One row of the study list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub study_id: String,
    /// Reviewer's category when overridden, else the machine's.
    pub category: Category,
    pub machine_category: Category,
    pub overridden: bool,
    pub mean_lvef: Option<f64>,
    pub flags: Vec<String>,
    pub config_fingerprint: String,
}

fn checksum(kind: RecordKind, payload: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_str().as_bytes());
    h.update(b"\n");
    h.update(payload);
    hex::encode(h.finalize())
}

pub struct Store {
    root: PathBuf,
    lock: Mutex<()>,
}

impl Store {
    /// Opens or creates a store at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let root = root.into();
        for sub in ["records", "tmp"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(|e| PipelineError::io(&p, e))?;
        }
        Ok(Self {
            root,
            lock: Mutex::new(()),
        })
    }

    /// Opens an existing store without creating anything.
    pub fn open_existing(root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let root = root.into();
        if !root.join("records").is_dir() {
            return Err(PipelineError::io(
                &root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "not an echotriage store"),
            ));
        }
        Self::open(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn records_dir(&self) -> PathBuf {
        self.root.join("records")
    }

    /// (seq, kind, path) of every record, in sequence order.
    fn index(&self) -> Result<Vec<(u64, RecordKind, PathBuf)>, PipelineError> {
        let dir = self.records_dir();
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| PipelineError::io(&dir, e))? {
            let entry = entry.map_err(|e| PipelineError::io(&dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let parsed = name
                .strip_suffix(".rec")
                .and_then(|s| s.split_once('.'))
                .and_then(|(seq, kind)| Some((seq.parse::<u64>().ok()?, RecordKind::parse(kind)?)));
            match parsed {
                Some((seq, kind)) => out.push((seq, kind, entry.path())),
                None => {
                    return Err(PipelineError::StoreCorrupt {
                        record: entry.path(),
                        reason: "unexpected file name".into(),
                    })
                }
            }
        }
        out.sort();
        Ok(out)
    }

    fn read_record(path: &Path, kind: RecordKind) -> Result<Vec<u8>, PipelineError> {
        let corrupt = |reason: &str| PipelineError::StoreCorrupt {
            record: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
        let mut parts = bytes.splitn(4, |&b| b == b'\n');
        let (Some(format), Some(kind_line), Some(sum_line), Some(payload)) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(corrupt("truncated header"));
        };
        if format != FORMAT_LINE.as_bytes() {
            return Err(corrupt("unknown format line"));
        }
        if kind_line != format!("kind: {}", kind.as_str()).as_bytes() {
            return Err(corrupt("kind does not match file name"));
        }
        let expected = format!("sha256: {}", checksum(kind, payload));
        if sum_line != expected.as_bytes() {
            return Err(corrupt("checksum mismatch"));
        }
        Ok(payload.to_vec())
    }

    fn decode<T: DeserializeOwned>(path: &Path, kind: RecordKind) -> Result<T, PipelineError> {
        let payload = Self::read_record(path, kind)?;
        serde_json::from_slice(&payload).map_err(|e| PipelineError::StoreCorrupt {
            record: path.to_path_buf(),
            reason: format!("payload: {e}"),
        })
    }

    fn records<T: DeserializeOwned>(&self, kind: RecordKind) -> Result<Vec<(u64, T)>, PipelineError> {
        self.index()?
            .into_iter()
            .filter(|(_, k, _)| *k == kind)
            .map(|(seq, k, path)| Ok((seq, Self::decode(&path, k)?)))
            .collect()
    }

    /// Appends a record and returns its sequence number.
    pub fn append(&self, kind: RecordKind, payload: &[u8]) -> Result<u64, PipelineError> {
        let mut body = format!(
            "{FORMAT_LINE}\nkind: {}\nsha256: {}\n",
            kind.as_str(),
            checksum(kind, payload)
        )
        .into_bytes();
        body.extend_from_slice(payload);

        let tmp = self.root.join("tmp").join(format!(
            "{}-{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        {
            let mut f = fs::File::create(&tmp).map_err(|e| PipelineError::io(&tmp, e))?;
            f.write_all(&body).map_err(|e| PipelineError::io(&tmp, e))?;
            f.sync_all().map_err(|e| PipelineError::io(&tmp, e))?;
        }

        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut seq = self.index()?.last().map_or(1, |(s, _, _)| s + 1);
        let result = loop {
            let target = self.records_dir().join(format!("{seq:012}.{}.rec", kind.as_str()));
            match fs::hard_link(&tmp, &target) {
                Ok(()) => break Ok(seq),
                // another process took this number
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => seq += 1,
                Err(e) => break Err(PipelineError::io(&target, e)),
            }
        };
        let _ = fs::remove_file(&tmp);
        result
    }

    fn append_json<T: Serialize>(&self, kind: RecordKind, value: &T) -> Result<u64, PipelineError> {
        let payload = serde_json::to_vec(value).map_err(|e| PipelineError::Json(e.to_string()))?;
        self.append(kind, &payload)
    }

    /// Stores the machine report. Any attached override is dropped; overrides
    /// are separate records.
    pub fn store_report(&self, report: &StudyReport) -> Result<u64, PipelineError> {
        let mut machine = report.clone();
        machine.reviewer_override = None;
        self.append(RecordKind::Report, machine.to_canonical_json().as_bytes())
    }

    pub fn store_masks(&self, masks: &MaskRecord) -> Result<u64, PipelineError> {
        self.append_json(RecordKind::Masks, masks)
    }

    /// Every stored version of a study's report, oldest first.
    pub fn report_versions(&self, study_id: &str) -> Result<Vec<StudyReport>, PipelineError> {
        Ok(self
            .records::<StudyReport>(RecordKind::Report)?
            .into_iter()
            .map(|(_, r)| r)
            .filter(|r| r.study_id == study_id)
            .collect())
    }

    /// Latest machine report of a study, optionally for one config.
    pub fn load_report(&self, study_id: &str, fingerprint: Option<&str>) -> Result<Option<StudyReport>, PipelineError> {
        Ok(self
            .report_versions(study_id)?
            .into_iter()
            .rev()
            .find(|r| fingerprint.is_none_or(|f| r.config_fingerprint == f)))
    }

    /// Latest report with the latest matching override attached.
    pub fn reviewed_report(&self, study_id: &str) -> Result<Option<StudyReport>, PipelineError> {
        let Some(mut report) = self.load_report(study_id, None)? else {
            return Ok(None);
        };
        report.reviewer_override = self
            .records::<OverrideRecord>(RecordKind::Override)?
            .into_iter()
            .rev()
            .map(|(_, o)| o)
            .find(|o| o.study_id == study_id && o.config_fingerprint == report.config_fingerprint)
            .map(|o| o.reviewer_override);
        Ok(Some(report))
    }

    /// Records a reviewer decision on the latest report of a study.
    pub fn add_override(&self, study_id: &str, ov: ReviewerOverride) -> Result<StudyReport, PipelineError> {
        if !ov.category.is_clinical() {
            return Err(PipelineError::InvalidOverride(format!(
                "override category must be ABNORMAL, GREY or NORMAL, got {}",
                ov.category
            )));
        }
        if ov.reviewer_id.trim().is_empty() {
            return Err(PipelineError::InvalidOverride("reviewer_id is empty".into()));
        }
        let report = self
            .load_report(study_id, None)?
            .ok_or_else(|| PipelineError::UnknownStudy(study_id.to_string()))?;
        self.append_json(
            RecordKind::Override,
            &OverrideRecord {
                study_id: study_id.to_string(),
                config_fingerprint: report.config_fingerprint.clone(),
                reviewer_override: ov,
            },
        )?;
        Ok(self.reviewed_report(study_id)?.expect("report exists"))
    }

    /// Latest version of every study, sorted by study id.
    pub fn list_studies(&self) -> Result<Vec<StudySummary>, PipelineError> {
        let mut latest: BTreeMap<String, StudyReport> = BTreeMap::new();
        for (_, r) in self.records::<StudyReport>(RecordKind::Report)? {
            latest.insert(r.study_id.clone(), r);
        }
        let mut overrides: BTreeMap<(String, String), ReviewerOverride> = BTreeMap::new();
        for (_, o) in self.records::<OverrideRecord>(RecordKind::Override)? {
            overrides.insert((o.study_id, o.config_fingerprint), o.reviewer_override);
        }
        Ok(latest
            .into_values()
            .map(|r| {
                let ov = overrides.get(&(r.study_id.clone(), r.config_fingerprint.clone()));
                StudySummary {
                    category: ov.map_or(r.triage.category, |o| o.category),
                    machine_category: r.triage.category,
                    overridden: ov.is_some(),
                    mean_lvef: r.lvef.as_ref().map(|l| l.mean_lvef),
                    flags: r.quality_flags.iter().cloned().collect(),
                    config_fingerprint: r.config_fingerprint,
                    study_id: r.study_id,
                }
            })
            .collect())
    }

    /// Masks stored with the latest report of a study.
    pub fn masks(&self, study_id: &str) -> Result<Vec<MaskRecord>, PipelineError> {
        let Some(report) = self.load_report(study_id, None)? else {
            return Err(PipelineError::UnknownStudy(study_id.to_string()));
        };
        let mut by_clip: BTreeMap<(String, Chamber), MaskRecord> = BTreeMap::new();
        for (_, m) in self.records::<MaskRecord>(RecordKind::Masks)? {
            if m.study_id == study_id && m.config_fingerprint == report.config_fingerprint {
                by_clip.insert((m.clip_id.clone(), m.chamber), m);
            }
        }
        Ok(by_clip.into_values().collect())
    }

    pub fn set_thresholds(&self, cfg: &ThresholdConfig) -> Result<u64, PipelineError> {
        cfg.validate()?;
        self.append_json(RecordKind::Thresholds, cfg)
    }

    /// Most recent threshold update, if any.
    pub fn thresholds(&self) -> Result<Option<ThresholdConfig>, PipelineError> {
        Ok(self
            .records::<ThresholdConfig>(RecordKind::Thresholds)?
            .pop()
            .map(|(_, t)| t))
    }

    pub fn put_cohort(&self, name: &str, entries: &[CohortEntry]) -> Result<u64, PipelineError> {
        if name.is_empty() {
            return Err(PipelineError::InvalidConfig("cohort name is empty".into()));
        }
        self.append_json(
            RecordKind::Cohort,
            &CohortRecord {
                name: name.to_string(),
                entries: entries.to_vec(),
            },
        )
    }

    pub fn cohort(&self, name: &str) -> Result<Option<Vec<CohortEntry>>, PipelineError> {
        Ok(self
            .records::<CohortRecord>(RecordKind::Cohort)?
            .into_iter()
            .rev()
            .find(|(_, c)| c.name == name)
            .map(|(_, c)| c.entries))
    }

    pub fn cohort_names(&self) -> Result<Vec<String>, PipelineError> {
        let mut names: Vec<String> = self
            .records::<CohortRecord>(RecordKind::Cohort)?
            .into_iter()
            .map(|(_, c)| c.name)
            .collect();
        names.sort();
        names.dedup();
        Ok(names)
    }

    /// Checks every record's checksum and payload; returns the record count.
    pub fn verify(&self) -> Result<usize, PipelineError> {
        let index = self.index()?;
        for (_, kind, path) in &index {
            let payload = Self::read_record(path, *kind)?;
            serde_json::from_slice::<serde_json::Value>(&payload).map_err(|e| PipelineError::StoreCorrupt {
                record: path.clone(),
                reason: format!("payload: {e}"),
            })?;
        }
        Ok(index.len())
    }
}
