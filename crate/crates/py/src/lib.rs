//! Python bindings. All computation lives in `echotriage_core`; this module
//! converts arguments and errors. Reports and store listings cross the
//! boundary as canonical JSON strings.

use std::fmt::Display;
use std::path::PathBuf;

use echotriage_core::dicom::{parse_dicom_file, write_dicom, DataSet, EchoClip};
use echotriage_core::geometry::disk_volume;
use echotriage_core::phantom::{render_phantom, write_phantom_study, PhantomSpec, PhantomStudySpec};
use echotriage_core::pipeline::{run_study, ClassifierSpec, PipelineConfig, Store};
use echotriage_core::segmentation::{decode_sidecar, dice, encode_mask, encode_sidecar, Chamber, ChamberMask};
use echotriage_core::triage::{self as rules, Confusion, ThresholdConfig, WorkloadParams};
use echotriage_core::view::classify_view;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn value_err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One parsed multi-frame 8-bit clip.
#[pyclass(name = "EchoClip", module = "echotriage", frozen)]
struct PyEchoClip {
    clip: EchoClip,
    elements: DataSet,
}

#[pymethods]
impl PyEchoClip {
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        let (clip, file) = parse_dicom_file(data).map_err(value_err)?;
        Ok(Self {
            clip,
            elements: file.elements(),
        })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path)?;
        Self::from_bytes(&bytes)
    }

    /// Canonical Explicit VR Little Endian encoding.
    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = write_dicom(&self.clip, &self.elements).map_err(value_err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    #[getter]
    fn study_id(&self) -> &str {
        self.clip.study_id()
    }

    #[getter]
    fn clip_id(&self) -> &str {
        self.clip.clip_id()
    }

    #[getter]
    fn rows(&self) -> usize {
        self.clip.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.clip.cols()
    }

    #[getter]
    fn num_frames(&self) -> usize {
        self.clip.num_frames()
    }

    #[getter]
    fn acquisition_index(&self) -> u32 {
        self.clip.meta().acquisition_index
    }

    #[getter]
    fn frame_interval_ms(&self) -> f64 {
        self.clip.meta().frame_interval_ms
    }

    /// (row_mm, col_mm), or None for an uncalibrated clip.
    #[getter]
    fn pixel_spacing(&self) -> Option<(f64, f64)> {
        self.clip.pixel_spacing().map(|s| (s.row_mm, s.col_mm))
    }

    #[getter]
    fn view_hint(&self) -> Option<&str> {
        self.clip.meta().declared_view_hint.as_deref()
    }

    fn frame<'py>(&self, py: Python<'py>, index: usize) -> PyResult<Bound<'py, PyBytes>> {
        if index >= self.clip.num_frames() {
            return Err(PyValueError::new_err(format!(
                "frame {index} out of range (0..{})",
                self.clip.num_frames()
            )));
        }
        Ok(PyBytes::new(py, self.clip.frame(index)))
    }

    /// Returns (view, confidence, flags) from `hint`, `constant[:VIEW]` or
    /// `external:<program>`.
    #[pyo3(signature = (backend = "hint"))]
    fn classify(&self, backend: &str) -> PyResult<(String, f64, Vec<String>)> {
        let spec: ClassifierSpec = backend.parse().map_err(value_err)?;
        let backend = spec.build().map_err(value_err)?;
        let c = classify_view(&self.clip, backend.as_ref());
        Ok((
            c.label.view.as_str().to_string(),
            c.label.confidence,
            c.flags.into_iter().collect(),
        ))
    }

    fn __repr__(&self) -> String {
        format!(
            "EchoClip(clip_id={:?}, frames={}, {}x{})",
            self.clip.clip_id(),
            self.clip.num_frames(),
            self.clip.rows(),
            self.clip.cols()
        )
    }
}

/// Binary chamber mask for one frame.
#[pyclass(name = "Mask", module = "echotriage", frozen)]
struct PyMask {
    mask: ChamberMask,
}

#[pymethods]
impl PyMask {
    #[new]
    #[pyo3(signature = (rows, cols, bits, chamber = "LV", frame_index = 0, spacing_mm = None))]
    fn new(
        rows: usize,
        cols: usize,
        bits: Vec<bool>,
        chamber: &str,
        frame_index: usize,
        spacing_mm: Option<f64>,
    ) -> PyResult<Self> {
        let chamber: Chamber = chamber.parse().map_err(value_err)?;
        let spacing = match spacing_mm {
            Some(mm) => Some(
                echotriage_core::dicom::PixelSpacing::isotropic(mm)
                    .ok_or_else(|| PyValueError::new_err(format!("invalid pixel spacing {mm}")))?,
            ),
            None => None,
        };
        let mask = ChamberMask::new(chamber, frame_index, rows, cols, bits).map_err(value_err)?;
        Ok(Self {
            mask: mask.with_spacing(spacing),
        })
    }

    #[getter]
    fn chamber(&self) -> &'static str {
        self.mask.chamber().as_str()
    }

    #[getter]
    fn frame_index(&self) -> usize {
        self.mask.frame_index()
    }

    #[getter]
    fn rows(&self) -> usize {
        self.mask.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.mask.cols()
    }

    #[getter]
    fn bits(&self) -> Vec<bool> {
        self.mask.bits().to_vec()
    }

    fn count(&self) -> usize {
        self.mask.count()
    }

    /// One RLE record (see docs/mask-format.md).
    fn encode(&self) -> String {
        encode_mask(&self.mask)
    }

    fn dice(&self, other: &PyMask) -> PyResult<f64> {
        dice(&self.mask, &other.mask).map_err(value_err)
    }

    /// Method-of-disks volume in mL; needs a spacing.
    #[pyo3(signature = (n_disks = 20))]
    fn volume_ml(&self, n_disks: usize) -> PyResult<f64> {
        disk_volume(&self.mask, n_disks).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mask({} frame={} {}x{} set={})",
            self.mask.chamber(),
            self.mask.frame_index(),
            self.mask.rows(),
            self.mask.cols(),
            self.mask.count()
        )
    }
}

#[pyfunction]
fn decode_masks(text: &str) -> PyResult<Vec<PyMask>> {
    Ok(decode_sidecar(text)
        .map_err(value_err)?
        .into_iter()
        .map(|mask| PyMask { mask })
        .collect())
}

#[pyfunction]
fn encode_masks(masks: Vec<PyRef<'_, PyMask>>) -> String {
    encode_sidecar(masks.iter().map(|m| &m.mask))
}

/// Category name for an LVEF percentage.
#[pyfunction]
#[pyo3(signature = (lvef, abnormal_below = 40.0, normal_above = 60.0))]
fn triage(lvef: f64, abnormal_below: f64, normal_above: f64) -> PyResult<&'static str> {
    let cfg = ThresholdConfig::new(abnormal_below, normal_above).map_err(value_err)?;
    Ok(rules::triage(lvef, &cfg).map_err(value_err)?.category.as_str())
}

fn pairs(lvefs: Vec<f64>, normal: Vec<bool>) -> PyResult<Vec<(f64, bool)>> {
    if lvefs.len() != normal.len() {
        return Err(PyValueError::new_err(format!(
            "{} LVEF values but {} labels",
            lvefs.len(),
            normal.len()
        )));
    }
    Ok(lvefs.into_iter().zip(normal).collect())
}

fn confusion_dict<'py>(py: Python<'py>, c: &Confusion) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("tp", c.tp)?;
    d.set_item("fp", c.fp)?;
    d.set_item("fn", c.fn_)?;
    d.set_item("tn", c.tn)?;
    Ok(d)
}

/// Sensitivity-maximising cutoff with precision at least `precision_floor`.
/// A study is predicted NORMAL when its LVEF exceeds the cutoff.
#[pyfunction]
#[pyo3(signature = (lvefs, truly_normal, precision_floor = 0.8))]
fn calibrate_cutoff<'py>(
    py: Python<'py>,
    lvefs: Vec<f64>,
    truly_normal: Vec<bool>,
    precision_floor: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = rules::calibrate_cutoff(&pairs(lvefs, truly_normal)?, precision_floor).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("chosen_cutoff", r.chosen_cutoff)?;
    d.set_item("achieved_precision", r.achieved_precision)?;
    d.set_item("achieved_sensitivity", r.achieved_sensitivity)?;
    d.set_item("feasible", r.feasible)?;
    d.set_item("confusion", confusion_dict(py, &r.confusion)?)?;
    Ok(d)
}

#[pyfunction]
fn evaluate_cutoff<'py>(
    py: Python<'py>,
    lvefs: Vec<f64>,
    truly_normal: Vec<bool>,
    cutoff: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = rules::evaluate_cutoff(&pairs(lvefs, truly_normal)?, cutoff).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("cutoff", p.cutoff)?;
    d.set_item("precision", p.precision)?;
    d.set_item("sensitivity", p.sensitivity)?;
    d.set_item("confusion", confusion_dict(py, &p.confusion)?)?;
    Ok(d)
}

/// Specialist hours saved per year.
#[pyfunction]
#[pyo3(signature = (studies = 10_000.0, prevalence = 0.4, sensitivity = 0.3, minutes = 9.0))]
fn workload_savings(studies: f64, prevalence: f64, sensitivity: f64, minutes: f64) -> PyResult<f64> {
    rules::workload_savings(&WorkloadParams {
        studies_per_year: studies,
        normal_prevalence: prevalence,
        sensitivity,
        minutes_per_study: minutes,
    })
    .map_err(value_err)
}

/// Renders a prolate-spheroid A4C phantom with the given analytic LVEF.
/// Returns (clip, ground-truth masks, {edv_ml, esv_ml, lvef_pct}).
#[pyfunction]
#[pyo3(signature = (lvef, long_semi_axis_mm = 40.0, radial_semi_axis_ed_mm = 20.0, pixel_spacing_mm = 0.5, noise_seed = 0))]
fn phantom<'py>(
    py: Python<'py>,
    lvef: f64,
    long_semi_axis_mm: f64,
    radial_semi_axis_ed_mm: f64,
    pixel_spacing_mm: f64,
    noise_seed: u64,
) -> PyResult<(PyEchoClip, Vec<PyMask>, Bound<'py, PyDict>)> {
    let spec = PhantomSpec {
        noise_seed,
        ..PhantomSpec::for_lvef(lvef, long_semi_axis_mm, radial_semi_axis_ed_mm, pixel_spacing_mm)
    };
    let p = render_phantom(&spec, "phantom", "phantom-a4c").map_err(value_err)?;
    let truth = PyDict::new(py);
    truth.set_item("edv_ml", p.truth.edv_ml)?;
    truth.set_item("esv_ml", p.truth.esv_ml)?;
    truth.set_item("lvef_pct", p.truth.lvef_pct)?;
    let masks = p.masks.into_iter().map(|mask| PyMask { mask }).collect();
    Ok((
        PyEchoClip {
            clip: p.clip,
            elements: DataSet::new(),
        },
        masks,
        truth,
    ))
}

/// Writes a phantom study described by TOML; returns the clip ids.
#[pyfunction]
fn write_phantom(spec_toml: &str, out_dir: PathBuf) -> PyResult<Vec<String>> {
    let spec = PhantomStudySpec::from_toml(spec_toml).map_err(value_err)?;
    write_phantom_study(&spec, &out_dir).map_err(value_err)
}

/// Runs the pipeline on one study directory and returns the report JSON.
/// Nothing is stored.
#[pyfunction]
#[pyo3(signature = (study_dir, config_toml = None))]
fn run_study_json(py: Python<'_>, study_dir: PathBuf, config_toml: Option<&str>) -> PyResult<String> {
    let cfg = match config_toml {
        Some(text) => PipelineConfig::from_toml(text).map_err(value_err)?,
        None => PipelineConfig::default(),
    };
    let report = py.detach(|| run_study(&study_dir, &cfg)).map_err(value_err)?;
    Ok(report.to_canonical_json())
}

/// Read access to a report store.
#[pyclass(name = "Store", module = "echotriage", frozen)]
struct PyStore {
    store: Store,
}

#[pymethods]
impl PyStore {
    #[new]
    fn new(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            store: Store::open_existing(&path).map_err(value_err)?,
        })
    }

    fn studies_json(&self) -> PyResult<String> {
        let list = self.store.list_studies().map_err(value_err)?;
        to_json(&list)
    }

    /// Latest report with its reviewer override, as canonical JSON.
    fn report_json(&self, study_id: &str) -> PyResult<String> {
        match self.store.reviewed_report(study_id).map_err(value_err)? {
            Some(r) => Ok(r.to_canonical_json()),
            None => Err(PyKeyError::new_err(study_id.to_string())),
        }
    }

    /// Number of records whose checksums verified.
    fn verify(&self) -> PyResult<usize> {
        self.store.verify().map_err(value_err)
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(value_err)
}

#[pymodule]
fn echotriage(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEchoClip>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyStore>()?;
    m.add_function(wrap_pyfunction!(decode_masks, m)?)?;
    m.add_function(wrap_pyfunction!(encode_masks, m)?)?;
    m.add_function(wrap_pyfunction!(triage, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_cutoff, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_cutoff, m)?)?;
    m.add_function(wrap_pyfunction!(workload_savings, m)?)?;
    m.add_function(wrap_pyfunction!(phantom, m)?)?;
    m.add_function(wrap_pyfunction!(write_phantom, m)?)?;
    m.add_function(wrap_pyfunction!(run_study_json, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
