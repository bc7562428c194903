//! Per-frame chamber masks through a pluggable segmenter, the mask sidecar
//! format and the DICE overlap score.

mod backends;
mod mask;
pub mod rle;

use thiserror::Error;

pub use backends::{connected_components, SegmentationBackend, SidecarSegmenter, ThresholdSegmenter};
pub use mask::{dice, Chamber, ChamberMask};
pub use rle::{decode_mask, decode_sidecar, encode_mask, encode_sidecar};

use crate::backend::BackendError;
use crate::dicom::EchoClip;
use crate::view::View;

pub const FLAG_SEGMENTATION_FAILED: &str = "segmentation-failed";
pub const FLAG_DEGENERATE_MASKS: &str = "degenerate-masks";

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("mask dimensions {expected:?} do not match {found} bits")]
    DimensionMismatch { expected: (usize, usize), found: usize },
    #[error("malformed sidecar at line {line}: {reason}")]
    MalformedSidecar { line: usize, reason: String },
    #[error("view {0} is not an apical view")]
    NotApical(View),
    #[error(transparent)]
    BackendFailure(#[from] BackendError),
}

/// Output of [`segment_clip`]: one mask per frame, carrying the clip's
/// spacing, plus the indices of degenerate (empty) frames.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub masks: Vec<ChamberMask>,
    pub degenerate_frames: Vec<usize>,
    pub backend: String,
}

/// Segments `chamber` in every frame of an apical clip. Backend output that
/// breaks the contract (wrong frame count or dimensions) is reported as a
/// backend failure.
pub fn segment_clip(
    clip: &EchoClip,
    view: View,
    chamber: Chamber,
    backend: &dyn SegmentationBackend,
) -> Result<Segmentation, SegmentationError> {
    if !view.is_apical() {
        return Err(SegmentationError::NotApical(view));
    }
    let masks = backend.segment(clip, view, chamber)?;
    let violation = |msg: String| SegmentationError::BackendFailure(BackendError::new(backend.name(), msg));
    if masks.len() != clip.num_frames() {
        return Err(violation(format!(
            "{} masks for {} frames",
            masks.len(),
            clip.num_frames()
        )));
    }
    let mut out = Vec::with_capacity(masks.len());
    for (i, m) in masks.into_iter().enumerate() {
        if (m.rows(), m.cols()) != (clip.rows(), clip.cols()) || m.frame_index() != i || m.chamber() != chamber {
            return Err(violation(format!("mask {i} does not match the clip frame")));
        }
        out.push(m.with_spacing(clip.pixel_spacing()));
    }
    let degenerate_frames = out
        .iter()
        .filter(|m| m.is_degenerate())
        .map(ChamberMask::frame_index)
        .collect();
    Ok(Segmentation {
        masks: out,
        degenerate_frames,
        backend: backend.name().to_string(),
    })
}
