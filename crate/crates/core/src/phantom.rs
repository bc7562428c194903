//! Synthetic apical clips of a contracting prolate spheroid with known
//! volumes, used as the end-to-end ground truth.
//!
//! Each frame shows the spheroid's central section: a dark ellipse (40) on
//! a bright background (200), long axis vertical, centred on the canvas.
//! The radial semi-axis follows a raised cosine from b_ED at frame 0 to b_ES
//! at half a cycle.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dicom::{tags, write_dicom, ClipMeta, DataSet, DicomElement, DicomError, EchoClip, PixelSpacing, Vr};
use crate::segmentation::{encode_sidecar, Chamber, ChamberMask, SidecarSegmenter};
use crate::view::View;

pub const BACKGROUND: u8 = 200;
pub const INTERIOR: u8 = 40;

/// Pixels kept clear between the ED ellipse and the canvas edge.
const MARGIN_PX: usize = 4;

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("canvas {rows}x{cols} cannot hold a {need_rows}x{need_cols} end-diastolic ellipse")]
    CanvasTooSmall {
        rows: usize,
        cols: usize,
        need_rows: usize,
        need_cols: usize,
    },
    #[error(transparent)]
    Dicom(#[from] DicomError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("phantom spec TOML: {0}")]
    Toml(#[from] toml::de::Error),
}

fn default_frames_per_cycle() -> usize {
    20
}
fn default_n_cycles() -> usize {
    6
}
fn default_frame_interval() -> f64 {
    20.0
}
fn default_noise() -> u8 {
    10
}
fn default_view() -> View {
    View::A4c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub long_semi_axis_mm: f64,
    pub radial_semi_axis_ed_mm: f64,
    pub radial_semi_axis_es_mm: f64,
    #[serde(default = "default_frames_per_cycle")]
    pub frames_per_cycle: usize,
    #[serde(default = "default_n_cycles")]
    pub n_cycles: usize,
    pub pixel_spacing_mm: f64,
    #[serde(default)]
    pub noise_seed: u64,
    /// Uniform noise half-width in gray levels; 0 disables noise.
    #[serde(default = "default_noise")]
    pub noise_amplitude: u8,
    #[serde(default = "default_frame_interval")]
    pub frame_interval_ms: f64,
    #[serde(default = "default_view")]
    pub view: View,
    /// (rows, cols); derived from the ED ellipse when absent.
    #[serde(default)]
    pub canvas: Option<(usize, usize)>,
}

impl PhantomSpec {
    /// Spec whose analytic LVEF is `lvef_pct`: b_ES = b_ED·√(1 − LVEF/100).
    pub fn for_lvef(lvef_pct: f64, a_mm: f64, b_ed_mm: f64, spacing_mm: f64) -> Self {
        Self {
            long_semi_axis_mm: a_mm,
            radial_semi_axis_ed_mm: b_ed_mm,
            radial_semi_axis_es_mm: b_ed_mm * (1.0 - lvef_pct / 100.0).sqrt(),
            frames_per_cycle: default_frames_per_cycle(),
            n_cycles: default_n_cycles(),
            pixel_spacing_mm: spacing_mm,
            noise_seed: 0,
            noise_amplitude: default_noise(),
            frame_interval_ms: default_frame_interval(),
            view: View::A4c,
            canvas: None,
        }
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |m: &str| Err(PhantomError::InvalidSpec(m.to_string()));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.long_semi_axis_mm) {
            return bad("long_semi_axis_mm must be > 0");
        }
        if !pos(self.radial_semi_axis_ed_mm) {
            return bad("radial_semi_axis_ed_mm must be > 0");
        }
        if !pos(self.radial_semi_axis_es_mm) || self.radial_semi_axis_es_mm > self.radial_semi_axis_ed_mm {
            return bad("radial_semi_axis_es_mm must be in (0, radial_semi_axis_ed_mm]");
        }
        if self.frames_per_cycle < 8 {
            return bad("frames_per_cycle must be >= 8");
        }
        if self.n_cycles < 1 {
            return bad("n_cycles must be >= 1");
        }
        if !pos(self.pixel_spacing_mm) {
            return bad("pixel_spacing_mm must be > 0");
        }
        if !pos(self.frame_interval_ms) {
            return bad("frame_interval_ms must be > 0");
        }
        if self.noise_amplitude > 80 {
            return bad("noise_amplitude must be <= 80 to keep both phases on their side of 128");
        }
        let (need_rows, need_cols) = self.required_canvas();
        let (rows, cols) = self.canvas_size();
        if rows < need_rows || cols < need_cols || rows > u16::MAX as usize || cols > u16::MAX as usize {
            return Err(PhantomError::CanvasTooSmall {
                rows,
                cols,
                need_rows,
                need_cols,
            });
        }
        Ok(())
    }

    /// Smallest odd canvas holding the ED ellipse plus a margin.
    fn required_canvas(&self) -> (usize, usize) {
        let px = |semi: f64| {
            let half = (semi / self.pixel_spacing_mm).ceil() as usize + MARGIN_PX;
            2 * half + 1
        };
        (px(self.long_semi_axis_mm), px(self.radial_semi_axis_ed_mm))
    }

    pub fn canvas_size(&self) -> (usize, usize) {
        self.canvas.unwrap_or_else(|| self.required_canvas())
    }

    pub fn num_frames(&self) -> usize {
        self.frames_per_cycle * self.n_cycles
    }

    /// b(t) = b_ED − (b_ED − b_ES)·(1 − cos 2πt/T)/2.
    pub fn radial_semi_axis_at(&self, frame: usize) -> f64 {
        let phase = 2.0 * PI * frame as f64 / self.frames_per_cycle as f64;
        let (ed, es) = (self.radial_semi_axis_ed_mm, self.radial_semi_axis_es_mm);
        ed - (ed - es) * (1.0 - phase.cos()) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhantomTruth {
    pub edv_ml: f64,
    pub esv_ml: f64,
    pub lvef_pct: f64,
}

/// Prolate spheroid volumes (4/3)π·a·b² in mL and the implied LVEF.
pub fn analytic_truth(spec: &PhantomSpec) -> PhantomTruth {
    let vol = |b: f64| 4.0 / 3.0 * PI * spec.long_semi_axis_mm * b * b / 1000.0;
    let ratio = spec.radial_semi_axis_es_mm / spec.radial_semi_axis_ed_mm;
    PhantomTruth {
        edv_ml: vol(spec.radial_semi_axis_ed_mm),
        esv_ml: vol(spec.radial_semi_axis_es_mm),
        lvef_pct: 100.0 * (1.0 - ratio * ratio),
    }
}

/// Rasterized central section with semi-axes `a` (rows) and `b` (cols):
/// a pixel is inside when its centre is.
pub fn ellipse_mask(frame: usize, rows: usize, cols: usize, spacing_mm: f64, a_mm: f64, b_mm: f64) -> ChamberMask {
    let (cy, cx) = ((rows - 1) as f64 / 2.0, (cols - 1) as f64 / 2.0);
    ChamberMask::from_fn(Chamber::Lv, frame, rows, cols, |r, c| {
        let y = (r as f64 - cy) * spacing_mm / a_mm;
        let x = (c as f64 - cx) * spacing_mm / b_mm;
        x * x + y * y <= 1.0
    })
    .with_spacing(PixelSpacing::isotropic(spacing_mm))
}

#[derive(Debug, Clone)]
pub struct PhantomClip {
    pub clip: EchoClip,
    pub masks: Vec<ChamberMask>,
    pub truth: PhantomTruth,
}

pub fn render_phantom(spec: &PhantomSpec, study_id: &str, clip_id: &str) -> Result<PhantomClip, PhantomError> {
    spec.validate()?;
    let (rows, cols) = spec.canvas_size();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
    let amp = i16::from(spec.noise_amplitude);
    let mut pixels = Vec::with_capacity(rows * cols * spec.num_frames());
    let mut masks = Vec::with_capacity(spec.num_frames());
    for t in 0..spec.num_frames() {
        let mask = ellipse_mask(
            t,
            rows,
            cols,
            spec.pixel_spacing_mm,
            spec.long_semi_axis_mm,
            spec.radial_semi_axis_at(t),
        );
        pixels.extend(mask.bits().iter().map(|&inside| {
            let base = i16::from(if inside { INTERIOR } else { BACKGROUND });
            let noise = if amp > 0 { rng.gen_range(-amp..=amp) } else { 0 };
            (base + noise) as u8
        }));
        masks.push(mask);
    }
    let meta = ClipMeta {
        study_id: study_id.to_string(),
        clip_id: clip_id.to_string(),
        acquisition_index: 1,
        frame_interval_ms: spec.frame_interval_ms,
        pixel_spacing: PixelSpacing::isotropic(spec.pixel_spacing_mm),
        declared_view_hint: Some(spec.view.as_str().to_string()),
    };
    Ok(PhantomClip {
        clip: EchoClip::new(meta, rows, cols, pixels)?,
        masks,
        truth: analytic_truth(spec),
    })
}

/// A study made of one or more phantom clips, as read from TOML:
///
/// ```toml
/// study_id = "phantom-55"
/// [[clip]]
/// long_semi_axis_mm = 40.0
/// radial_semi_axis_ed_mm = 20.0
/// radial_semi_axis_es_mm = 13.4
/// pixel_spacing_mm = 0.5
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomStudySpec {
    pub study_id: String,
    #[serde(rename = "clip")]
    pub clips: Vec<PhantomSpec>,
}

impl PhantomStudySpec {
    pub fn from_toml(text: &str) -> Result<Self, PhantomError> {
        let spec: Self = toml::from_str(text)?;
        if spec.clips.is_empty() {
            return Err(PhantomError::InvalidSpec("study has no [[clip]] entries".into()));
        }
        if spec.study_id.is_empty() || spec.study_id.contains(['/', '\\']) {
            return Err(PhantomError::InvalidSpec(
                "study_id must be a plain, nonempty name".into(),
            ));
        }
        for c in &spec.clips {
            c.validate()?;
        }
        Ok(spec)
    }

    /// `<study_id>-<view>`, with a running suffix when views repeat.
    pub fn clip_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for c in &self.clips {
            let base = format!("{}-{}", self.study_id, c.view.as_str().to_ascii_lowercase());
            let mut id = base.clone();
            let mut n = 2;
            while ids.contains(&id) {
                id = format!("{base}-{n}");
                n += 1;
            }
            ids.push(id);
        }
        ids
    }
}

fn phantom_elements(study_id: &str) -> DataSet {
    let mut ds = DataSet::new();
    ds.put(DicomElement::text(
        tags::PATIENT_NAME,
        Vr::PN,
        &format!("PHANTOM^{study_id}"),
    ));
    ds.put(DicomElement::text(tags::PATIENT_ID, Vr::LO, study_id));
    ds
}

/// Writes `<clip_id>.dcm`, `<clip_id>.LV.masks.rle` per clip and a
/// `truth.csv` into `out_dir`. Returns the written clip ids.
pub fn write_phantom_study(spec: &PhantomStudySpec, out_dir: &Path) -> Result<Vec<String>, PhantomError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PhantomError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let ids = spec.clip_ids();
    let mut truth = String::from("clip_id,edv_ml,esv_ml,lvef_pct\n");
    for (clip_spec, id) in spec.clips.iter().zip(&ids) {
        let p = render_phantom(clip_spec, &spec.study_id, id)?;
        let bytes = write_dicom(&p.clip, &phantom_elements(&spec.study_id))?;
        let dcm = out_dir.join(format!("{id}.dcm"));
        fs::write(&dcm, bytes).map_err(io(&dcm))?;
        let rle = SidecarSegmenter::sidecar_path(out_dir, id, Chamber::Lv);
        fs::write(&rle, encode_sidecar(&p.masks)).map_err(io(&rle))?;
        let _ = writeln!(
            truth,
            "{id},{:.6},{:.6},{:.6}",
            p.truth.edv_ml, p.truth.esv_ml, p.truth.lvef_pct
        );
    }
    let path = out_dir.join("truth.csv");
    fs::write(&path, truth).map_err(io(&path))?;
    Ok(ids)
}
