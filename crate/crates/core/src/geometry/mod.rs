//! Chamber area series, beat detection, method-of-disks volumes and LVEF.

mod cycles;
mod disks;
mod lvef;

use thiserror::Error;

pub use cycles::{detect_cycles, smooth, strict_maxima, CyclePhase};
pub use disks::{
    biplane_volume, disk_profile, disk_volume, BiplaneVolume, DiskProfile, AXIS_MISMATCH_RATIO, DEFAULT_DISKS,
};
pub use lvef::{compute_lvef, CardiacCycle, LvefResult, VolumeMethod, FLAG_FEWER_THAN_5_BEATS, MAX_BEATS};

use crate::segmentation::ChamberMask;

pub const DEFAULT_SMOOTHING_WINDOW: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("mask has no pixel spacing")]
    UncalibratedClip,
    #[error("mask sequence is empty")]
    EmptySeries,
    #[error("area series has {0} samples; at least 3 are needed")]
    SeriesTooShort(usize),
    #[error("area series contains a non-finite value")]
    NonFiniteArea,
    #[error("no cardiac cycle found ({maxima} end-diastole candidates)")]
    NoCycleFound { maxima: usize },
    #[error("mask is empty or its pixels are collinear")]
    DegenerateMask,
    #[error("disk count must be at least 1")]
    InvalidDiskCount,
    #[error("invalid cycle ed={ed_frame} es={es_frame} edv={edv_ml} esv={esv_ml}")]
    InvalidCycle {
        ed_frame: usize,
        es_frame: usize,
        edv_ml: f64,
        esv_ml: f64,
    },
    #[error("no cycles to average")]
    NoCycles,
}

/// Per-frame chamber area in mm²: pixel count × row spacing × column spacing.
pub fn area_series(masks: &[ChamberMask]) -> Result<Vec<f64>, GeometryError> {
    if masks.is_empty() {
        return Err(GeometryError::EmptySeries);
    }
    masks
        .iter()
        .map(|m| {
            let s = m.pixel_spacing().ok_or(GeometryError::UncalibratedClip)?;
            Ok(m.count() as f64 * s.pixel_area_mm2())
        })
        .collect()
}
