//! Method-of-disks chamber volumetry from a single binary mask.
//!
//! The long axis is the principal axis of the mask's second-moment matrix
//! through its centroid, measured in millimetres so anisotropic spacing is
//! handled. The axis is cut into equal slabs and each slab contributes a
//! disk whose diameter is the mask's mean width across the slab (slab area
//! over slab height).

use std::f64::consts::PI;

use super::GeometryError;
use crate::segmentation::ChamberMask;

pub const DEFAULT_DISKS: usize = 20;

/// Axis-length disagreement above which biplane volumes are flagged.
pub const AXIS_MISMATCH_RATIO: f64 = 0.2;

/// Long-axis length and per-slab diameters of one mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskProfile {
    pub length_mm: f64,
    pub diameters_mm: Vec<f64>,
    /// Unit long-axis direction as (col, row) components, pointing down the
    /// image (toward increasing rows).
    pub axis: (f64, f64),
}

impl DiskProfile {
    pub fn slab_height_mm(&self) -> f64 {
        self.length_mm / self.diameters_mm.len() as f64
    }

    /// Σ (π/4)·d²·h in mL.
    pub fn volume_ml(&self) -> f64 {
        let h = self.slab_height_mm();
        self.diameters_mm.iter().map(|d| PI / 4.0 * d * d * h).sum::<f64>() / 1000.0
    }
}

pub fn disk_profile(mask: &ChamberMask, n_disks: usize) -> Result<DiskProfile, GeometryError> {
    if n_disks == 0 {
        return Err(GeometryError::InvalidDiskCount);
    }
    let spacing = mask.pixel_spacing().ok_or(GeometryError::UncalibratedClip)?;
    let points: Vec<(f64, f64)> = mask
        .set_pixels()
        .map(|(r, c)| (c as f64 * spacing.col_mm, r as f64 * spacing.row_mm))
        .collect();
    if points.len() < 2 {
        return Err(GeometryError::DegenerateMask);
    }

    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x / n, sy + y / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in &points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx / n;
        syy += dy * dy / n;
        sxy += dx * dy / n;
    }
    let trace = sxx + syy;
    let minor = trace / 2.0 - (((sxx - syy) / 2.0).powi(2) + sxy * sxy).sqrt();
    if trace <= 0.0 || minor <= trace * 1e-12 {
        return Err(GeometryError::DegenerateMask);
    }

    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (mut ux, mut uy) = (theta.cos(), theta.sin());
    if uy < 0.0 || (uy == 0.0 && ux < 0.0) {
        ux = -ux;
        uy = -uy;
    }
    // half extent of a pixel footprint projected on the axis
    let hu = (ux.abs() * spacing.col_mm + uy.abs() * spacing.row_mm) / 2.0;

    let projected: Vec<f64> = points.iter().map(|(x, y)| (x - mx) * ux + (y - my) * uy).collect();
    let t_min = projected.iter().map(|t| t - hu).fold(f64::INFINITY, f64::min);
    let t_max = projected.iter().map(|t| t + hu).fold(f64::NEG_INFINITY, f64::max);
    let length_mm = t_max - t_min;
    let h = length_mm / n_disks as f64;

    // Each pixel's footprint along the axis spreads its area uniformly over
    // [t - hu, t + hu]; slab areas divided by the slab height give the mean
    // chord of each slab.
    let pixel_area = spacing.pixel_area_mm2();
    let mut slab_area = vec![0.0; n_disks];
    for t in &projected {
        let (lo, hi) = (t - hu - t_min, t + hu - t_min);
        let first = ((lo / h).floor().max(0.0) as usize).min(n_disks - 1);
        let last = ((hi / h).floor().max(0.0) as usize).min(n_disks - 1);
        for (i, area) in slab_area.iter_mut().enumerate().take(last + 1).skip(first) {
            let (s0, s1) = (i as f64 * h, (i + 1) as f64 * h);
            let overlap = (hi.min(s1) - lo.max(s0)).max(0.0);
            *area += pixel_area * overlap / (hi - lo);
        }
    }
    let diameters_mm = slab_area.iter().map(|a| a / h).collect();

    Ok(DiskProfile {
        length_mm,
        diameters_mm,
        axis: (ux, uy),
    })
}

/// Single-plane method-of-disks volume in mL.
pub fn disk_volume(mask: &ChamberMask, n_disks: usize) -> Result<f64, GeometryError> {
    Ok(disk_profile(mask, n_disks)?.volume_ml())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiplaneVolume {
    pub volume_ml: f64,
    /// Long-axis lengths of the two views differ by more than 20%.
    pub axis_mismatch: bool,
}

/// Biplane method of disks: slab diameters from the two apical views at
/// matched normalized axis positions form elliptical disks over the shorter
/// long axis.
pub fn biplane_volume(
    mask_a4c: &ChamberMask,
    mask_a2c: &ChamberMask,
    n_disks: usize,
) -> Result<BiplaneVolume, GeometryError> {
    let a = disk_profile(mask_a4c, n_disks)?;
    let b = disk_profile(mask_a2c, n_disks)?;
    let length = a.length_mm.min(b.length_mm);
    let h = length / n_disks as f64;
    let volume_mm3: f64 = a
        .diameters_mm
        .iter()
        .zip(&b.diameters_mm)
        .map(|(da, db)| PI / 4.0 * da * db * h)
        .sum();
    let longer = a.length_mm.max(b.length_mm);
    Ok(BiplaneVolume {
        volume_ml: volume_mm3 / 1000.0,
        axis_mismatch: (longer - length) / longer > AXIS_MISMATCH_RATIO,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::PixelSpacing;
    use crate::segmentation::Chamber;

    fn rect(rows: usize, cols: usize, h: usize, w: usize, spacing: f64) -> ChamberMask {
        let (r0, c0) = ((rows - h) / 2, (cols - w) / 2);
        ChamberMask::from_fn(Chamber::Lv, 0, rows, cols, |r, c| {
            (r0..r0 + h).contains(&r) && (c0..c0 + w).contains(&c)
        })
        .with_spacing(PixelSpacing::isotropic(spacing))
    }

    #[test]
    fn cylinder_of_revolution() {
        // 40 mm along the axis, 20 mm across, at 0.5 mm pixels
        let m = rect(100, 60, 80, 40, 0.5);
        let v = disk_volume(&m, DEFAULT_DISKS).unwrap();
        let expect = PI / 4.0 * 20.0 * 20.0 * 40.0 / 1000.0;
        assert!((v - expect).abs() / expect < 1e-9, "{v} vs {expect}");
    }

    #[test]
    fn single_pixel_is_degenerate() {
        let m = rect(5, 5, 1, 1, 1.0);
        assert!(matches!(disk_volume(&m, 20), Err(GeometryError::DegenerateMask)));
        let line = rect(9, 9, 5, 1, 1.0);
        assert!(matches!(disk_volume(&line, 20), Err(GeometryError::DegenerateMask)));
        let empty = ChamberMask::empty(Chamber::Lv, 0, 4, 4).with_spacing(PixelSpacing::isotropic(1.0));
        assert!(matches!(disk_volume(&empty, 20), Err(GeometryError::DegenerateMask)));
    }

    #[test]
    fn uncalibrated_mask_rejected() {
        let m = ChamberMask::from_fn(Chamber::Lv, 0, 4, 4, |_, _| true);
        assert!(matches!(disk_volume(&m, 20), Err(GeometryError::UncalibratedClip)));
    }

    #[test]
    fn zero_disks_rejected() {
        assert!(matches!(
            disk_volume(&rect(10, 10, 6, 4, 1.0), 0),
            Err(GeometryError::InvalidDiskCount)
        ));
    }

    #[test]
    fn axis_points_down_the_image() {
        let p = disk_profile(&rect(60, 30, 40, 10, 1.0), 10).unwrap();
        assert!((p.axis.1 - 1.0).abs() < 1e-12);
        let p = disk_profile(&rect(30, 60, 10, 40, 1.0), 10).unwrap();
        assert!((p.axis.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn biplane_flags_axis_mismatch() {
        let a = rect(100, 60, 80, 40, 0.5);
        let b = rect(100, 60, 50, 40, 0.5);
        assert!(biplane_volume(&a, &b, 20).unwrap().axis_mismatch);
        assert!(!biplane_volume(&a, &a, 20).unwrap().axis_mismatch);
    }
}
