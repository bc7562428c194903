use std::path::{Path, PathBuf};

use super::mask::{Chamber, ChamberMask};
use super::rle::decode_sidecar;
use crate::backend::{BackendError, Concurrency};
use crate::dicom::EchoClip;
use crate::view::View;

/// A chamber segmenter. Must return one mask per frame of the clip and be
/// deterministic for a fixed instance and input.
pub trait SegmentationBackend: Send + Sync {
    fn name(&self) -> &str;

    fn segment(&self, clip: &EchoClip, view: View, chamber: Chamber) -> Result<Vec<ChamberMask>, BackendError>;

    fn concurrency(&self) -> Concurrency {
        Concurrency::Parallel
    }
}

/// 4-connected components of `fg`, returned as pixel index lists, ordered
/// by the raster position of their first pixel.
pub fn connected_components(fg: &[bool], rows: usize, cols: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; fg.len()];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..fg.len() {
        if !fg[start] || seen[start] {
            continue;
        }
        let mut component = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            component.push(i);
            let (r, c) = (i / cols, i % cols);
            let mut visit = |j: usize| {
                if fg[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - cols);
            }
            if r + 1 < rows {
                visit(i + cols);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < cols {
                visit(i + 1);
            }
        }
        component.sort_unstable();
        components.push(component);
    }
    components
}

/// Reference segmenter for dark blood pool on bright myocardium: pixels
/// below the threshold are foreground, and components touching the frame
/// border are background (a chamber is enclosed by tissue). LV is the
/// largest remaining 4-connected component and LA the second largest. Size
/// ties go to the component met first in raster order.
#[derive(Debug, Clone)]
pub struct ThresholdSegmenter {
    threshold: u8,
}

impl Default for ThresholdSegmenter {
    fn default() -> Self {
        Self { threshold: 128 }
    }
}

impl ThresholdSegmenter {
    pub fn new(threshold: u8) -> Self {
        Self { threshold }
    }

    pub fn segment_frame(
        &self,
        pixels: &[u8],
        rows: usize,
        cols: usize,
        chamber: Chamber,
        frame_index: usize,
    ) -> ChamberMask {
        let fg: Vec<bool> = pixels.iter().map(|&p| p < self.threshold).collect();
        let on_border = |i: usize| {
            let (r, c) = (i / cols, i % cols);
            r == 0 || c == 0 || r + 1 == rows || c + 1 == cols
        };
        let mut components = connected_components(&fg, rows, cols);
        components.retain(|comp| !comp.iter().any(|&i| on_border(i)));
        // stable sort keeps raster order among equal sizes
        components.sort_by_key(|c| std::cmp::Reverse(c.len()));
        let rank = match chamber {
            Chamber::Lv => 0,
            Chamber::La => 1,
        };
        let mut bits = vec![false; rows * cols];
        if let Some(component) = components.get(rank) {
            for &i in component {
                bits[i] = true;
            }
        }
        ChamberMask::new(chamber, frame_index, rows, cols, bits).expect("frame dimensions")
    }
}

impl SegmentationBackend for ThresholdSegmenter {
    fn name(&self) -> &str {
        "threshold"
    }

    fn segment(&self, clip: &EchoClip, _view: View, chamber: Chamber) -> Result<Vec<ChamberMask>, BackendError> {
        Ok(clip
            .frames()
            .enumerate()
            .map(|(i, px)| {
                self.segment_frame(px, clip.rows(), clip.cols(), chamber, i)
                    .with_spacing(clip.pixel_spacing())
            })
            .collect())
    }
}

/// Loads stored masks from `<dir>/<clip_id>.<chamber>.masks.rle`.
#[derive(Debug, Clone)]
pub struct SidecarSegmenter {
    dir: PathBuf,
}

impl SidecarSegmenter {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn sidecar_path(dir: &Path, clip_id: &str, chamber: Chamber) -> PathBuf {
        dir.join(format!("{clip_id}.{chamber}.masks.rle"))
    }
}

impl SegmentationBackend for SidecarSegmenter {
    fn name(&self) -> &str {
        "sidecar"
    }

    fn segment(&self, clip: &EchoClip, _view: View, chamber: Chamber) -> Result<Vec<ChamberMask>, BackendError> {
        let path = Self::sidecar_path(&self.dir, clip.clip_id(), chamber);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| BackendError::new("sidecar", format!("{}: {e}", path.display())))?;
        let masks =
            decode_sidecar(&text).map_err(|e| BackendError::new("sidecar", format!("{}: {e}", path.display())))?;
        if masks.iter().any(|m| m.chamber() != chamber) {
            return Err(BackendError::new(
                "sidecar",
                format!("{}: chamber does not match file name", path.display()),
            ));
        }
        Ok(masks
            .into_iter()
            .map(|m| m.with_spacing(clip.pixel_spacing()))
            .collect())
    }
}
