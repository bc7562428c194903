use serde::{Deserialize, Serialize};

use super::element::{DataSet, DicomElement, Vr};
use super::reader::{read_file, DicomFile};
use super::tags;
use super::writer::{ds_element, is_element, write_file, IMPLEMENTATION_CLASS_UID};
use super::DicomError;

/// Ultrasound Multi-frame Image Storage.
pub const US_MULTIFRAME_SOP_CLASS: &str = "1.2.840.10008.5.1.4.1.1.3.1";

/// Physical size of one pixel, in millimetres per row step and column step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelSpacing {
    pub row_mm: f64,
    pub col_mm: f64,
}

impl PixelSpacing {
    pub fn new(row_mm: f64, col_mm: f64) -> Option<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        (ok(row_mm) && ok(col_mm)).then_some(Self { row_mm, col_mm })
    }

    pub fn isotropic(mm: f64) -> Option<Self> {
        Self::new(mm, mm)
    }

    pub fn pixel_area_mm2(&self) -> f64 {
        self.row_mm * self.col_mm
    }

    pub fn scaled(&self, s: f64) -> Option<Self> {
        Self::new(self.row_mm * s, self.col_mm * s)
    }
}

/// Descriptive fields of a clip; pixel geometry lives on [`EchoClip`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClipMeta {
    pub study_id: String,
    pub clip_id: String,
    pub acquisition_index: u32,
    pub frame_interval_ms: f64,
    /// `None` when the file carries no usable spacing source.
    pub pixel_spacing: Option<PixelSpacing>,
    pub declared_view_hint: Option<String>,
}

/// One multi-frame 8-bit grayscale recording.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoClip {
    meta: ClipMeta,
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl EchoClip {
    /// `pixels` holds `num_frames` row-major frames back to back.
    pub fn new(meta: ClipMeta, rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self, DicomError> {
        let invalid = |reason: &str| DicomError::InvalidClip(reason.to_string());
        if rows == 0 || cols == 0 || rows > u16::MAX as usize || cols > u16::MAX as usize {
            return Err(invalid("rows and columns must be in 1..=65535"));
        }
        if !(meta.frame_interval_ms.is_finite() && meta.frame_interval_ms > 0.0) {
            return Err(invalid("frame interval must be positive"));
        }
        if !pixels.len().is_multiple_of(rows * cols) {
            return Err(invalid("pixel buffer is not a whole number of frames"));
        }
        if let Some(s) = meta.pixel_spacing {
            if PixelSpacing::new(s.row_mm, s.col_mm).is_none() {
                return Err(invalid("pixel spacing must be positive and finite"));
            }
        }
        Ok(Self {
            meta,
            rows,
            cols,
            pixels,
        })
    }

    pub fn meta(&self) -> &ClipMeta {
        &self.meta
    }

    pub fn study_id(&self) -> &str {
        &self.meta.study_id
    }

    pub fn clip_id(&self) -> &str {
        &self.meta.clip_id
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_frames(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols)
    }

    pub fn frame(&self, index: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[index * n..(index + 1) * n]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[u8]> {
        self.pixels.chunks_exact(self.rows * self.cols)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel_spacing(&self) -> Option<PixelSpacing> {
        self.meta.pixel_spacing
    }

    pub fn is_calibrated(&self) -> bool {
        self.meta.pixel_spacing.is_some()
    }

    pub fn require_calibration(&self) -> Result<PixelSpacing, DicomError> {
        self.meta.pixel_spacing.ok_or(DicomError::CalibrationAbsent)
    }

    pub fn with_ids(mut self, study_id: &str, clip_id: &str) -> Self {
        self.meta.study_id = study_id.to_string();
        self.meta.clip_id = clip_id.to_string();
        self
    }
}

/// Parses a Part 10 byte stream into a clip.
pub fn parse_dicom(bytes: &[u8]) -> Result<EchoClip, DicomError> {
    parse_dicom_file(bytes).map(|(clip, _)| clip)
}

/// Parses a Part 10 byte stream, also returning the decoded elements.
pub fn parse_dicom_file(bytes: &[u8]) -> Result<(EchoClip, DicomFile), DicomError> {
    let file = read_file(bytes)?;
    let clip = clip_from_dataset(&file.meta, &file.dataset)?;
    Ok((clip, file))
}

fn required_u16(ds: &DataSet, tag: super::element::Tag) -> Result<u16, DicomError> {
    ds.u16(tag).ok_or(DicomError::MissingRequiredTag(tag))
}

fn clip_from_dataset(meta: &DataSet, ds: &DataSet) -> Result<EchoClip, DicomError> {
    let rows = required_u16(ds, tags::ROWS)? as usize;
    let cols = required_u16(ds, tags::COLUMNS)? as usize;
    let frames = match ds.numbers(tags::NUMBER_OF_FRAMES) {
        Some(v) if v.len() == 1 && v[0].fract() == 0.0 && v[0] >= 1.0 => v[0] as usize,
        Some(_) => {
            return Err(DicomError::InvalidValue {
                tag: tags::NUMBER_OF_FRAMES,
                reason: "must be a positive integer".into(),
            })
        }
        None => return Err(DicomError::MissingRequiredTag(tags::NUMBER_OF_FRAMES)),
    };
    if rows == 0 || cols == 0 {
        return Err(DicomError::InvalidValue {
            tag: if rows == 0 { tags::ROWS } else { tags::COLUMNS },
            reason: "must be nonzero".into(),
        });
    }
    if let Some(bits) = ds.u16(tags::BITS_ALLOCATED) {
        if bits != 8 {
            return Err(DicomError::UnsupportedPixelFormat(format!("{bits} bits allocated")));
        }
    }
    if let Some(spp) = ds.u16(tags::SAMPLES_PER_PIXEL) {
        if spp != 1 {
            return Err(DicomError::UnsupportedPixelFormat(format!("{spp} samples per pixel")));
        }
    }
    if let Some(pi) = ds.text(tags::PHOTOMETRIC_INTERPRETATION) {
        if pi != "MONOCHROME2" {
            return Err(DicomError::UnsupportedPixelFormat(pi));
        }
    }

    let pixel_el = ds
        .get(tags::PIXEL_DATA)
        .ok_or(DicomError::MissingRequiredTag(tags::PIXEL_DATA))?;
    let raw = pixel_el.as_bytes().ok_or_else(|| DicomError::InvalidValue {
        tag: tags::PIXEL_DATA,
        reason: "pixel data is a sequence".into(),
    })?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(frames))
        .ok_or_else(|| DicomError::InvalidValue {
            tag: tags::NUMBER_OF_FRAMES,
            reason: "frame geometry overflows".into(),
        })?;
    if raw.len() != expected && raw.len() != expected + 1 {
        return Err(DicomError::InvalidValue {
            tag: tags::PIXEL_DATA,
            reason: format!("{} bytes for {expected} samples", raw.len()),
        });
    }
    let pixels = raw[..expected].to_vec();

    let frame_interval_ms = frame_interval(ds)?;
    let pixel_spacing = spacing(ds)?;

    let clip_id = ds
        .text(tags::SOP_INSTANCE_UID)
        .or_else(|| meta.text(tags::MEDIA_STORAGE_SOP_INSTANCE_UID))
        .unwrap_or_default();
    let acquisition_index = match ds.numbers(tags::INSTANCE_NUMBER) {
        Some(v) if v.len() == 1 && v[0] >= 0.0 && v[0].fract() == 0.0 => v[0] as u32,
        Some(_) => {
            return Err(DicomError::InvalidValue {
                tag: tags::INSTANCE_NUMBER,
                reason: "must be a nonnegative integer".into(),
            })
        }
        None => 0,
    };

    let meta = ClipMeta {
        study_id: ds.text(tags::STUDY_INSTANCE_UID).unwrap_or_default(),
        clip_id,
        acquisition_index,
        frame_interval_ms,
        pixel_spacing,
        declared_view_hint: ds.text(tags::SERIES_DESCRIPTION).filter(|s| !s.is_empty()),
    };
    EchoClip::new(meta, rows, cols, pixels)
}

fn frame_interval(ds: &DataSet) -> Result<f64, DicomError> {
    let positive = |v: &[f64]| v.len() == 1 && v[0].is_finite() && v[0] > 0.0;
    if let Some(v) = ds.numbers(tags::FRAME_TIME) {
        if !positive(&v) {
            return Err(DicomError::InvalidValue {
                tag: tags::FRAME_TIME,
                reason: "must be a positive number".into(),
            });
        }
        return Ok(v[0]);
    }
    if let Some(v) = ds.numbers(tags::CINE_RATE) {
        if !positive(&v) {
            return Err(DicomError::InvalidValue {
                tag: tags::CINE_RATE,
                reason: "must be a positive number".into(),
            });
        }
        return Ok(1000.0 / v[0]);
    }
    Err(DicomError::MissingRequiredTag(tags::FRAME_TIME))
}

/// PixelSpacing wins over ultrasound region deltas; region deltas are in cm.
fn spacing(ds: &DataSet) -> Result<Option<PixelSpacing>, DicomError> {
    if ds.contains(tags::PIXEL_SPACING) {
        let v = ds.numbers(tags::PIXEL_SPACING).unwrap_or_default();
        return match v.as_slice() {
            [row, col] => PixelSpacing::new(*row, *col)
                .map(Some)
                .ok_or_else(|| DicomError::InvalidValue {
                    tag: tags::PIXEL_SPACING,
                    reason: "components must be positive".into(),
                }),
            _ => Err(DicomError::InvalidValue {
                tag: tags::PIXEL_SPACING,
                reason: "expected two components".into(),
            }),
        };
    }
    let Some(regions) = ds.get(tags::ULTRASOUND_REGIONS).and_then(|el| el.items()) else {
        return Ok(None);
    };
    for region in regions {
        let cm = |units_tag| region.u16(units_tag).is_none_or(|u| u == tags::UNITS_CM);
        if !(cm(tags::PHYSICAL_UNITS_X) && cm(tags::PHYSICAL_UNITS_Y)) {
            continue;
        }
        if let (Some(dx), Some(dy)) = (region.f64(tags::PHYSICAL_DELTA_X), region.f64(tags::PHYSICAL_DELTA_Y)) {
            if let Some(s) = PixelSpacing::new(dy.abs() * 10.0, dx.abs() * 10.0) {
                return Ok(Some(s));
            }
        }
    }
    Ok(None)
}

/// Encodes a clip as Explicit VR Little Endian. `elements` supplies every
/// attribute the clip does not model (patient, equipment, meta group); the
/// clip's own fields overwrite their tags.
pub fn write_dicom(clip: &EchoClip, elements: &DataSet) -> Result<Vec<u8>, DicomError> {
    if clip.num_frames() == 0 {
        return Err(DicomError::UnencodableValue {
            tag: tags::NUMBER_OF_FRAMES,
            reason: "clip has no frames".into(),
        });
    }
    let (mut meta, mut ds) = elements.split_meta();
    let m = clip.meta();

    if !ds.contains(tags::SOP_CLASS_UID) {
        ds.put(DicomElement::text(tags::SOP_CLASS_UID, Vr::UI, US_MULTIFRAME_SOP_CLASS));
    }
    if !ds.contains(tags::MODALITY) {
        ds.put(DicomElement::text(tags::MODALITY, Vr::CS, "US"));
    }
    ds.put(DicomElement::text(tags::SOP_INSTANCE_UID, Vr::UI, &m.clip_id));
    ds.put(DicomElement::text(tags::STUDY_INSTANCE_UID, Vr::UI, &m.study_id));
    ds.put(is_element(tags::INSTANCE_NUMBER, i64::from(m.acquisition_index)));
    match &m.declared_view_hint {
        Some(hint) => ds.put(DicomElement::text(tags::SERIES_DESCRIPTION, Vr::LO, hint)),
        None => ds.remove(tags::SERIES_DESCRIPTION),
    };
    ds.put(ds_element(tags::FRAME_TIME, &[m.frame_interval_ms]));
    match m.pixel_spacing {
        Some(s) => {
            ds.put(ds_element(tags::PIXEL_SPACING, &[s.row_mm, s.col_mm]));
        }
        None => {
            ds.remove(tags::PIXEL_SPACING);
            ds.remove(tags::ULTRASOUND_REGIONS);
        }
    }
    ds.put(DicomElement::us(tags::SAMPLES_PER_PIXEL, 1));
    ds.put(DicomElement::text(
        tags::PHOTOMETRIC_INTERPRETATION,
        Vr::CS,
        "MONOCHROME2",
    ));
    ds.put(is_element(tags::NUMBER_OF_FRAMES, clip.num_frames() as i64));
    ds.put(DicomElement::us(tags::ROWS, clip.rows() as u16));
    ds.put(DicomElement::us(tags::COLUMNS, clip.cols() as u16));
    ds.put(DicomElement::us(tags::BITS_ALLOCATED, 8));
    ds.put(DicomElement::us(tags::BITS_STORED, 8));
    ds.put(DicomElement::us(tags::HIGH_BIT, 7));
    ds.put(DicomElement::us(tags::PIXEL_REPRESENTATION, 0));
    let mut pixels = clip.pixels().to_vec();
    if pixels.len() % 2 == 1 {
        pixels.push(0);
    }
    ds.put(DicomElement::bytes(tags::PIXEL_DATA, Vr::OB, pixels));

    let sop_class = ds.text(tags::SOP_CLASS_UID).unwrap_or_default();
    meta.put(DicomElement::text(
        tags::MEDIA_STORAGE_SOP_CLASS_UID,
        Vr::UI,
        &sop_class,
    ));
    meta.put(DicomElement::text(
        tags::MEDIA_STORAGE_SOP_INSTANCE_UID,
        Vr::UI,
        &m.clip_id,
    ));
    if !meta.contains(tags::IMPLEMENTATION_CLASS_UID) {
        meta.put(DicomElement::text(
            tags::IMPLEMENTATION_CLASS_UID,
            Vr::UI,
            IMPLEMENTATION_CLASS_UID,
        ));
    }
    write_file(&meta, &ds)
}
