//! Backends implemented by external programs.
//!
//! The clip is written to the program's stdin as an Explicit VR Little
//! Endian DICOM file. A classifier prints one JSON object
//! `{"view": "A4C", "confidence": 0.97}`; a segmenter is called with the
//! view and chamber as arguments and prints a mask sidecar. A nonzero exit
//! status fails the call. Both are called one at a time.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use crate::backend::{BackendError, Concurrency};
use crate::dicom::{write_dicom, DataSet, EchoClip};
use crate::segmentation::{decode_sidecar, Chamber, ChamberMask, SegmentationBackend};
use crate::view::{ClassifierBackend, ViewLabel};

fn run(name: &str, program: &PathBuf, args: &[&str], clip: &EchoClip) -> Result<String, BackendError> {
    let err = |m: String| BackendError::new(name, m);
    let input = write_dicom(clip, &DataSet::new()).map_err(|e| err(e.to_string()))?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| err(format!("{}: {e}", program.display())))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    // feed stdin from a thread so a chatty child cannot deadlock on stdout
    let writer = std::thread::spawn(move || stdin.write_all(&input));
    let out = child.wait_with_output().map_err(|e| err(e.to_string()))?;
    // a child that exits without reading its input is not an error by itself
    let _ = writer.join();
    if !out.status.success() {
        let stderr = String::from_utf8_lossy(&out.stderr);
        return Err(err(format!("exited with {}: {}", out.status, stderr.trim())));
    }
    String::from_utf8(out.stdout).map_err(|_| err("output is not UTF-8".into()))
}

#[derive(Debug, Clone)]
pub struct ExternalClassifier {
    program: PathBuf,
}

impl ExternalClassifier {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
        }
    }
}

impl ClassifierBackend for ExternalClassifier {
    fn name(&self) -> &str {
        "external"
    }

    fn classify(&self, clip: &EchoClip) -> Result<ViewLabel, BackendError> {
        let text = run(self.name(), &self.program, &[], clip)?;
        serde_json::from_str(text.trim()).map_err(|e| BackendError::new(self.name(), format!("bad label: {e}")))
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Serial
    }
}

#[derive(Debug, Clone)]
pub struct ExternalSegmenter {
    program: PathBuf,
}

impl ExternalSegmenter {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
        }
    }
}

impl SegmentationBackend for ExternalSegmenter {
    fn name(&self) -> &str {
        "external"
    }

    fn segment(
        &self,
        clip: &EchoClip,
        view: crate::view::View,
        chamber: Chamber,
    ) -> Result<Vec<ChamberMask>, BackendError> {
        let text = run(self.name(), &self.program, &[view.as_str(), chamber.as_str()], clip)?;
        let masks = decode_sidecar(&text).map_err(|e| BackendError::new(self.name(), e.to_string()))?;
        Ok(masks
            .into_iter()
            .map(|m| m.with_spacing(clip.pixel_spacing()))
            .collect())
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Serial
    }
}
