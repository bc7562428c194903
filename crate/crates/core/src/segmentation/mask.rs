use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SegmentationError;
use crate::dicom::PixelSpacing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Chamber {
    #[serde(rename = "LV")]
    Lv,
    #[serde(rename = "LA")]
    La,
}

impl Chamber {
    pub fn as_str(self) -> &'static str {
        match self {
            Chamber::Lv => "LV",
            Chamber::La => "LA",
        }
    }
}

impl fmt::Display for Chamber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Chamber {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LV" => Ok(Chamber::Lv),
            "LA" => Ok(Chamber::La),
            other => Err(format!("unknown chamber {other:?}")),
        }
    }
}

/// Binary mask of one chamber in one frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChamberMask {
    chamber: Chamber,
    frame_index: usize,
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
    pixel_spacing: Option<PixelSpacing>,
}

impl ChamberMask {
    pub fn new(
        chamber: Chamber,
        frame_index: usize,
        rows: usize,
        cols: usize,
        bits: Vec<bool>,
    ) -> Result<Self, SegmentationError> {
        if rows == 0 || cols == 0 || bits.len() != rows * cols {
            return Err(SegmentationError::DimensionMismatch {
                expected: (rows, cols),
                found: bits.len(),
            });
        }
        Ok(Self {
            chamber,
            frame_index,
            rows,
            cols,
            bits,
            pixel_spacing: None,
        })
    }

    pub fn empty(chamber: Chamber, frame_index: usize, rows: usize, cols: usize) -> Self {
        Self::new(chamber, frame_index, rows, cols, vec![false; rows * cols]).expect("nonzero dimensions")
    }

    /// Builds a mask from a predicate over (row, col).
    pub fn from_fn(
        chamber: Chamber,
        frame_index: usize,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Self {
        let bits = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self::new(chamber, frame_index, rows, cols, bits).expect("dimensions match")
    }

    pub fn with_spacing(mut self, spacing: Option<PixelSpacing>) -> Self {
        self.pixel_spacing = spacing;
        self
    }

    pub fn chamber(&self) -> Chamber {
        self.chamber
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn pixel_spacing(&self) -> Option<PixelSpacing> {
        self.pixel_spacing
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// An all-zero mask. Backends only emit these for degenerate input.
    pub fn is_degenerate(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// (row, col) of every set pixel in raster order.
    pub fn set_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i / cols, i % cols))
    }
}

/// Overlap score 2|A∩B| / (|A| + |B|); 1.0 when both masks are empty.
pub fn dice(a: &ChamberMask, b: &ChamberMask) -> Result<f64, SegmentationError> {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(SegmentationError::DimensionMismatch {
            expected: (a.rows, a.cols),
            found: b.rows * b.cols,
        });
    }
    let (mut overlap, mut total) = (0usize, 0usize);
    for (x, y) in a.bits.iter().zip(&b.bits) {
        overlap += usize::from(*x && *y);
        total += usize::from(*x) + usize::from(*y);
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * overlap as f64 / total as f64)
}
