use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use tracing::{debug, warn};

use super::config::PipelineConfig;
use super::report::{ClipReport, CycleVolumes, SelectedClips, SkippedFile, StudyReport, REPORT_SCHEMA_VERSION};
use super::store::{MaskRecord, Store};
use super::PipelineError;
use crate::backend::{BackendError, Concurrency};
use crate::dicom::{parse_dicom, EchoClip};
use crate::geometry::{
    area_series, biplane_volume, compute_lvef, detect_cycles, disk_volume, CardiacCycle, CyclePhase, VolumeMethod,
};
use crate::segmentation::{
    encode_sidecar, segment_clip, Chamber, ChamberMask, SegmentationBackend, FLAG_DEGENERATE_MASKS,
    FLAG_SEGMENTATION_FAILED,
};
use crate::triage::{triage, TriageDecision};
use crate::view::{classify_view, select_clip, ClassifierBackend, View, ViewLabel};

pub const FLAG_NO_APICAL_CLIP: &str = "no-apical-clip";
pub const FLAG_UNCALIBRATED: &str = "uncalibrated";
pub const FLAG_NO_CYCLE: &str = "no-cycle-found";
pub const FLAG_VOLUME_FAILED: &str = "volume-failed";
pub const FLAG_AXIS_MISMATCH: &str = "axis-mismatch";
pub const FLAG_CYCLE_COUNT_MISMATCH: &str = "biplane-cycle-count-mismatch";
pub const FLAG_VIEW_UNUSABLE: &str = "apical-view-unusable";
pub const FLAG_UNPARSABLE_FILE: &str = "unparsable-file";
pub const FLAG_MIXED_STUDY_UIDS: &str = "mixed-study-uids";
pub const FLAG_NO_USABLE_CLIPS: &str = "no-usable-clips";

/// File suffixes that belong to a study directory but are not clips.
const NON_CLIP_SUFFIXES: [&str; 7] = [".rle", ".csv", ".toml", ".json", ".md", ".txt", ".tmp"];

/// A report together with the masks it was computed from.
#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub report: StudyReport,
    pub masks: Vec<MaskRecord>,
}

/// Serialises calls into backends that declare [`Concurrency::Serial`].
#[derive(Default)]
struct Gates {
    classifier: Mutex<()>,
    segmenter: Mutex<()>,
}

fn gated<T>(lock: &Mutex<()>, mode: Concurrency, f: impl FnOnce() -> T) -> T {
    match mode {
        Concurrency::Parallel => f(),
        Concurrency::Serial => {
            let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
            f()
        }
    }
}

struct GatedClassifier<'a> {
    inner: &'a dyn ClassifierBackend,
    lock: &'a Mutex<()>,
}

impl ClassifierBackend for GatedClassifier<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn classify(&self, clip: &EchoClip) -> Result<ViewLabel, BackendError> {
        gated(self.lock, self.inner.concurrency(), || self.inner.classify(clip))
    }
}

struct GatedSegmenter<'a> {
    inner: &'a dyn SegmentationBackend,
    lock: &'a Mutex<()>,
}

impl SegmentationBackend for GatedSegmenter<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn segment(&self, clip: &EchoClip, view: View, chamber: Chamber) -> Result<Vec<ChamberMask>, BackendError> {
        gated(self.lock, self.inner.concurrency(), || {
            self.inner.segment(clip, view, chamber)
        })
    }
}

fn study_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// False for mask sidecars, tables, configs and hidden files.
pub fn is_clip_candidate(name: &str) -> bool {
    !name.starts_with('.') && !NON_CLIP_SUFFIXES.iter().any(|s| name.ends_with(s))
}

/// Parsed clips keyed by file name, plus the files that failed.
type LoadedClips = (Vec<(String, EchoClip)>, Vec<SkippedFile>);

/// Parses every clip candidate in `dir` in file-name order.
fn load_clips(dir: &Path) -> Result<LoadedClips, PipelineError> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))? {
        let entry = entry.map_err(|e| PipelineError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().is_file() && is_clip_candidate(&name) {
            names.push(name);
        }
    }
    names.sort();
    let mut clips = Vec::new();
    let mut skipped = Vec::new();
    for name in names {
        let path = dir.join(&name);
        let bytes = std::fs::read(&path).map_err(|e| PipelineError::io(&path, e))?;
        match parse_dicom(&bytes) {
            Ok(clip) => clips.push((name, clip)),
            Err(e) => {
                debug!(file = %path.display(), error = %e, "skipping file");
                skipped.push(SkippedFile {
                    file: name,
                    error: e.to_string(),
                })
            }
        }
    }
    Ok((clips, skipped))
}

struct ViewAnalysis {
    clip_id: String,
    masks: Vec<ChamberMask>,
    cycles: Vec<CyclePhase>,
}

fn analyze_view(
    clip: &EchoClip,
    view: View,
    segmenter: &dyn SegmentationBackend,
    cfg: &PipelineConfig,
    flags: &mut BTreeSet<String>,
) -> Result<ViewAnalysis, String> {
    if !clip.is_calibrated() {
        flags.insert(FLAG_UNCALIBRATED.to_string());
        return Err(format!("{view} clip {} has no pixel calibration", clip.clip_id()));
    }
    let seg = segment_clip(clip, view, Chamber::Lv, segmenter).map_err(|e| {
        flags.insert(FLAG_SEGMENTATION_FAILED.to_string());
        format!("{view} segmentation: {e}")
    })?;
    if !seg.degenerate_frames.is_empty() {
        flags.insert(FLAG_DEGENERATE_MASKS.to_string());
    }
    let areas = area_series(&seg.masks).map_err(|e| format!("{view} areas: {e}"))?;
    let cycles = detect_cycles(&areas, cfg.smoothing_window).map_err(|e| {
        flags.insert(FLAG_NO_CYCLE.to_string());
        format!("{view} cycles: {e}")
    })?;
    Ok(ViewAnalysis {
        clip_id: clip.clip_id().to_string(),
        masks: seg.masks,
        cycles,
    })
}

fn volumes(
    a4c: Option<&ViewAnalysis>,
    a2c: Option<&ViewAnalysis>,
    n_disks: usize,
    flags: &mut BTreeSet<String>,
) -> Result<(VolumeMethod, Vec<CycleVolumes>, Vec<CardiacCycle>), String> {
    let vol_err = |e: crate::geometry::GeometryError| format!("volume: {e}");
    let mut out = Vec::new();
    let mut cycles = Vec::new();
    let method = match (a4c, a2c) {
        (Some(a), Some(b)) => {
            if a.cycles.len() != b.cycles.len() {
                flags.insert(FLAG_CYCLE_COUNT_MISMATCH.to_string());
            }
            for (ca, cb) in a.cycles.iter().zip(&b.cycles) {
                let ed = biplane_volume(&a.masks[ca.ed_frame], &b.masks[cb.ed_frame], n_disks).map_err(vol_err)?;
                let es = biplane_volume(&a.masks[ca.es_frame], &b.masks[cb.es_frame], n_disks).map_err(vol_err)?;
                if ed.axis_mismatch || es.axis_mismatch {
                    flags.insert(FLAG_AXIS_MISMATCH.to_string());
                }
                let cycle = CardiacCycle::new(ca.ed_frame, ca.es_frame, ed.volume_ml, es.volume_ml).map_err(vol_err)?;
                out.push(CycleVolumes {
                    ed_frame: ca.ed_frame,
                    es_frame: ca.es_frame,
                    a2c_ed_frame: Some(cb.ed_frame),
                    a2c_es_frame: Some(cb.es_frame),
                    edv_ml: ed.volume_ml,
                    esv_ml: es.volume_ml,
                    lvef_pct: cycle.ejection_fraction(),
                });
                cycles.push(cycle);
            }
            VolumeMethod::Biplane
        }
        (Some(v), None) | (None, Some(v)) => {
            for c in &v.cycles {
                let edv = disk_volume(&v.masks[c.ed_frame], n_disks).map_err(vol_err)?;
                let esv = disk_volume(&v.masks[c.es_frame], n_disks).map_err(vol_err)?;
                let cycle = CardiacCycle::new(c.ed_frame, c.es_frame, edv, esv).map_err(vol_err)?;
                out.push(CycleVolumes {
                    ed_frame: c.ed_frame,
                    es_frame: c.es_frame,
                    a2c_ed_frame: None,
                    a2c_es_frame: None,
                    edv_ml: edv,
                    esv_ml: esv,
                    lvef_pct: cycle.ejection_fraction(),
                });
                cycles.push(cycle);
            }
            if a4c.is_some() {
                VolumeMethod::SinglePlaneA4c
            } else {
                VolumeMethod::SinglePlaneA2c
            }
        }
        (None, None) => unreachable!("caller checks for an apical analysis"),
    };
    Ok((method, out, cycles))
}

fn analyze(
    dir: &Path,
    cfg: &PipelineConfig,
    classifier: &dyn ClassifierBackend,
    segmenter: &dyn SegmentationBackend,
) -> Result<StudyOutcome, PipelineError> {
    let (clips, skipped_files) = load_clips(dir)?;
    if clips.is_empty() {
        return Err(PipelineError::NoUsableClips {
            study_dir: dir.to_path_buf(),
        });
    }
    let mut quality_flags = BTreeSet::new();
    if !skipped_files.is_empty() {
        quality_flags.insert(FLAG_UNPARSABLE_FILE.to_string());
    }
    let uids: BTreeSet<&str> = clips.iter().map(|(_, c)| c.study_id()).collect();
    if uids.len() > 1 {
        quality_flags.insert(FLAG_MIXED_STUDY_UIDS.to_string());
    }
    let study_id = uids
        .iter()
        .next()
        .copied()
        .filter(|s| !s.is_empty())
        .map_or_else(|| study_name(dir), str::to_string);

    // stage 1: views
    let mut clip_reports = Vec::new();
    let mut labelled = Vec::new();
    for (file, clip) in &clips {
        let c = classify_view(clip, classifier);
        quality_flags.extend(c.flags.iter().cloned());
        labelled.push((clip, c.label.view));
        clip_reports.push(ClipReport {
            clip_id: clip.clip_id().to_string(),
            file: file.clone(),
            acquisition_index: clip.meta().acquisition_index,
            num_frames: clip.num_frames(),
            rows: clip.rows(),
            cols: clip.cols(),
            calibrated: clip.is_calibrated(),
            view: c.label.view,
            confidence: c.label.confidence,
            classifier: c.backend,
            flags: c.flags,
        });
    }
    let a4c = select_clip(labelled.iter().copied(), View::A4c);
    let a2c = select_clip(labelled.iter().copied(), View::A2c);
    let selected = SelectedClips {
        a4c: a4c.map(|c| c.clip_id().to_string()),
        a2c: a2c.map(|c| c.clip_id().to_string()),
    };

    // stages 2 and 3: masks, then volumes
    let mut failure = None;
    let mut analyses = Vec::new();
    for (clip, view) in [(a4c, View::A4c), (a2c, View::A2c)] {
        if let Some(clip) = clip {
            match analyze_view(clip, view, segmenter, cfg, &mut quality_flags) {
                Ok(a) => analyses.push((view, a)),
                Err(msg) => {
                    warn!(study = %study_id, "{msg}");
                    failure.get_or_insert(msg);
                }
            }
        }
    }
    let find = |v: View| analyses.iter().find(|(view, _)| *view == v).map(|(_, a)| a);
    let (a4c_ok, a2c_ok) = (find(View::A4c), find(View::A2c));

    let mut cycles = Vec::new();
    let mut lvef = None;
    if a4c.is_none() && a2c.is_none() {
        quality_flags.insert(FLAG_NO_APICAL_CLIP.to_string());
        failure = Some("no A4C or A2C clip".to_string());
    } else if a4c_ok.is_none() && a2c_ok.is_none() {
        // failure already recorded by analyze_view
    } else {
        if (a4c.is_some() && a4c_ok.is_none()) || (a2c.is_some() && a2c_ok.is_none()) {
            quality_flags.insert(FLAG_VIEW_UNUSABLE.to_string());
        }
        match volumes(a4c_ok, a2c_ok, cfg.n_disks, &mut quality_flags) {
            Ok((method, per_cycle, beats)) => match compute_lvef(&beats, method) {
                Ok(r) => {
                    failure = None;
                    quality_flags.extend(r.quality_flags.iter().cloned());
                    cycles = per_cycle;
                    lvef = Some(r);
                }
                Err(e) => failure = Some(format!("lvef: {e}")),
            },
            Err(msg) => {
                quality_flags.insert(FLAG_VOLUME_FAILED.to_string());
                failure = Some(msg);
            }
        }
    }

    let triage_decision = match &lvef {
        Some(r) => {
            let mut d = triage(r.mean_lvef, &cfg.thresholds)?;
            d.flags = quality_flags.clone();
            d
        }
        None => TriageDecision::undetermined(cfg.thresholds, quality_flags.clone()),
    };

    let mut masks = Vec::new();
    if lvef.is_some() {
        for (_, a) in &analyses {
            masks.push(MaskRecord {
                study_id: study_id.clone(),
                config_fingerprint: cfg.fingerprint(),
                clip_id: a.clip_id.clone(),
                chamber: Chamber::Lv,
                rle: encode_sidecar(&a.masks),
            });
        }
    }

    Ok(StudyOutcome {
        report: StudyReport {
            schema_version: REPORT_SCHEMA_VERSION,
            study_id,
            config_fingerprint: cfg.fingerprint(),
            clips: clip_reports,
            skipped_files,
            selected,
            segmenter: (!analyses.is_empty()).then(|| segmenter.name().to_string()),
            cycles,
            lvef,
            triage: triage_decision,
            quality_flags,
            failure,
            reviewer_override: None,
        },
        masks,
    })
}

/// An UNDETERMINED report for a study that could not be analysed at all.
pub fn failure_report(dir: &Path, cfg: &PipelineConfig, err: &PipelineError) -> StudyReport {
    let mut flags = BTreeSet::new();
    flags.insert(match err {
        PipelineError::NoUsableClips { .. } => FLAG_NO_USABLE_CLIPS.to_string(),
        _ => "study-failed".to_string(),
    });
    StudyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        study_id: study_name(dir),
        config_fingerprint: cfg.fingerprint(),
        clips: Vec::new(),
        skipped_files: Vec::new(),
        selected: SelectedClips::default(),
        segmenter: None,
        cycles: Vec::new(),
        lvef: None,
        triage: TriageDecision::undetermined(cfg.thresholds, flags.clone()),
        quality_flags: flags,
        failure: Some(err.to_string()),
        reviewer_override: None,
    }
}

/// Runs classify, segment and measure on one study directory. Stage
/// failures give an UNDETERMINED report; only a directory without a single
/// parsable clip is an error.
pub fn run_study(dir: &Path, cfg: &PipelineConfig) -> Result<StudyReport, PipelineError> {
    run_study_with_masks(dir, cfg).map(|o| o.report)
}

pub fn run_study_with_masks(dir: &Path, cfg: &PipelineConfig) -> Result<StudyOutcome, PipelineError> {
    cfg.validate()?;
    let classifier = cfg.backends.classifier.build()?;
    let segmenter = cfg.backends.segmenter.build(dir)?;
    analyze(dir, cfg, classifier.as_ref(), segmenter.as_ref())
}

/// Study directories under `root`: `root` itself when it holds files,
/// otherwise its subdirectories in name order.
pub fn discover_studies(root: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut dirs = Vec::new();
    let mut has_files = false;
    for entry in std::fs::read_dir(root).map_err(|e| PipelineError::io(root, e))? {
        let entry = entry.map_err(|e| PipelineError::io(root, e))?;
        let path = entry.path();
        if path.is_dir() {
            dirs.push(path);
        } else if is_clip_candidate(&entry.file_name().to_string_lossy()) {
            has_files = true;
        }
    }
    if has_files || dirs.is_empty() {
        return Ok(vec![root.to_path_buf()]);
    }
    dirs.sort();
    Ok(dirs)
}

/// Processes studies on `cfg.workers` threads and returns one report per
/// directory, in input order. Reports (and their masks) are written to
/// `store` when given. Failed studies yield UNDETERMINED reports.
pub fn run_batch(
    dirs: &[PathBuf],
    cfg: &PipelineConfig,
    store: Option<&Store>,
) -> Result<Vec<StudyReport>, PipelineError> {
    cfg.validate()?;
    let classifier = cfg.backends.classifier.build()?;
    let gates = Gates::default();
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<StudyReport, PipelineError>>>> =
        dirs.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..cfg.workers.min(dirs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(dir) = dirs.get(i) else { break };
                let outcome = process_one(dir, cfg, classifier.as_ref(), &gates, store);
                *results[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(outcome);
            });
        }
    });

    results
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .expect("every study processed")
        })
        .collect()
}

fn process_one(
    dir: &Path,
    cfg: &PipelineConfig,
    classifier: &dyn ClassifierBackend,
    gates: &Gates,
    store: Option<&Store>,
) -> Result<StudyReport, PipelineError> {
    let outcome = cfg.backends.segmenter.build(dir).and_then(|segmenter| {
        let c = GatedClassifier {
            inner: classifier,
            lock: &gates.classifier,
        };
        let s = GatedSegmenter {
            inner: segmenter.as_ref(),
            lock: &gates.segmenter,
        };
        analyze(dir, cfg, &c, &s)
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            warn!(study = %dir.display(), error = %e, "study failed");
            StudyOutcome {
                report: failure_report(dir, cfg, &e),
                masks: Vec::new(),
            }
        }
    };
    if let Some(store) = store {
        store.store_report(&outcome.report)?;
        for m in &outcome.masks {
            store.store_masks(m)?;
        }
    }
    Ok(outcome.report)
}
