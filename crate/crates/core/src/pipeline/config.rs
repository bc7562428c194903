use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::external::{ExternalClassifier, ExternalSegmenter};
use super::PipelineError;
use crate::geometry::{DEFAULT_DISKS, DEFAULT_SMOOTHING_WINDOW};
use crate::segmentation::{SegmentationBackend, SidecarSegmenter, ThresholdSegmenter};
use crate::triage::ThresholdConfig;
use crate::view::{ClassifierBackend, ConstantClassifier, HintClassifier, View, ViewLabel};

/// `hint`, `constant[:VIEW]` (A4C when no view is given) or
/// `external:<program>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassifierSpec {
    Hint,
    Constant(View),
    External(PathBuf),
}

/// `threshold`, `sidecar` (masks next to the study's DICOM files) or
/// `external:<program>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegmenterSpec {
    Threshold,
    Sidecar,
    External(PathBuf),
}

impl FromStr for ClassifierSpec {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PipelineError::InvalidConfig(format!("unknown classifier backend {s:?}"));
        match s.split_once(':') {
            None if s == "hint" => Ok(Self::Hint),
            None if s == "constant" => Ok(Self::Constant(View::A4c)),
            Some(("constant", v)) => v.parse().map(Self::Constant).map_err(|_| bad()),
            Some(("external", p)) if !p.is_empty() => Ok(Self::External(p.into())),
            _ => Err(bad()),
        }
    }
}

impl FromStr for SegmenterSpec {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "threshold" => Ok(Self::Threshold),
            None if s == "sidecar" => Ok(Self::Sidecar),
            Some(("external", p)) if !p.is_empty() => Ok(Self::External(p.into())),
            _ => Err(PipelineError::InvalidConfig(format!("unknown segmenter backend {s:?}"))),
        }
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Hint => f.write_str("hint"),
            Self::Constant(v) => write!(f, "constant:{v}"),
            Self::External(p) => write!(f, "external:{}", p.display()),
        }
    }
}

impl fmt::Display for SegmenterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Threshold => f.write_str("threshold"),
            Self::Sidecar => f.write_str("sidecar"),
            Self::External(p) => write!(f, "external:{}", p.display()),
        }
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}
string_serde!(ClassifierSpec);
string_serde!(SegmenterSpec);

impl ClassifierSpec {
    pub fn build(&self) -> Result<Box<dyn ClassifierBackend>, PipelineError> {
        Ok(match self {
            Self::Hint => Box::new(HintClassifier),
            Self::Constant(v) => Box::new(ConstantClassifier::new(ViewLabel {
                view: *v,
                confidence: 1.0,
            })),
            Self::External(p) => Box::new(ExternalClassifier::new(resolve_program(p)?)),
        })
    }
}

impl SegmenterSpec {
    /// Sidecar backends read from the study directory, hence the argument.
    pub fn build(&self, study_dir: &Path) -> Result<Box<dyn SegmentationBackend>, PipelineError> {
        Ok(match self {
            Self::Threshold => Box::new(ThresholdSegmenter::default()),
            Self::Sidecar => Box::new(SidecarSegmenter::new(study_dir)),
            Self::External(p) => Box::new(ExternalSegmenter::new(resolve_program(p)?)),
        })
    }
}

fn resolve_program(p: &Path) -> Result<PathBuf, PipelineError> {
    if p.is_file() {
        Ok(p.to_path_buf())
    } else {
        Err(PipelineError::InvalidConfig(format!(
            "external backend {} does not exist",
            p.display()
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub classifier: ClassifierSpec,
    pub segmenter: SegmenterSpec,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            classifier: ClassifierSpec::Hint,
            segmenter: SegmenterSpec::Threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub backends: BackendConfig,
    pub n_disks: usize,
    pub smoothing_window: usize,
    pub thresholds: ThresholdConfig,
    pub precision_floor: f64,
    pub store_path: PathBuf,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            backends: BackendConfig::default(),
            n_disks: DEFAULT_DISKS,
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            thresholds: ThresholdConfig::default(),
            precision_floor: 0.8,
            store_path: PathBuf::from("echotriage-store"),
            workers: 4,
        }
    }
}

/// The fields that can change a report. Store location and worker count
/// are left out so the same analysis fingerprints the same everywhere.
#[derive(Serialize)]
struct FingerprintFields<'a> {
    classifier: String,
    segmenter: String,
    n_disks: usize,
    smoothing_window: usize,
    thresholds: &'a ThresholdConfig,
    precision_floor: f64,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is TOML-representable")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.n_disks == 0 {
            return bad("n_disks must be >= 1".into());
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return bad("smoothing_window must be odd".into());
        }
        if !(0.0..=1.0).contains(&self.precision_floor) {
            return bad(format!("precision_floor {} is outside [0, 1]", self.precision_floor));
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        self.thresholds
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        if let ClassifierSpec::External(p) = &self.backends.classifier {
            resolve_program(p)?;
        }
        if let SegmenterSpec::External(p) = &self.backends.segmenter {
            resolve_program(p)?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of the report-affecting fields.
    pub fn fingerprint(&self) -> String {
        let fields = FingerprintFields {
            classifier: self.backends.classifier.to_string(),
            segmenter: self.backends.segmenter.to_string(),
            n_disks: self.n_disks,
            smoothing_window: self.smoothing_window,
            thresholds: &self.thresholds,
            precision_floor: self.precision_floor,
        };
        let json = serde_json::to_vec(&fields).expect("plain struct");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_strings() {
        assert_eq!("hint".parse::<ClassifierSpec>().unwrap(), ClassifierSpec::Hint);
        assert_eq!(
            "constant".parse::<ClassifierSpec>().unwrap(),
            ClassifierSpec::Constant(View::A4c)
        );
        assert_eq!(
            "constant:a2c".parse::<ClassifierSpec>().unwrap(),
            ClassifierSpec::Constant(View::A2c)
        );
        assert_eq!(
            "external:/bin/x".parse::<SegmenterSpec>().unwrap(),
            SegmenterSpec::External("/bin/x".into())
        );
        assert!("neural".parse::<ClassifierSpec>().is_err());
        assert!("external:".parse::<SegmenterSpec>().is_err());
        for s in ["hint", "constant:A4C", "external:/x"] {
            assert_eq!(s.parse::<ClassifierSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn toml_defaults_and_overrides() {
        let cfg = PipelineConfig::from_toml(
            "n_disks = 30\n[backends]\nclassifier = \"hint\"\nsegmenter = \"sidecar\"\n[thresholds]\nabnormal_below = 35.0\nnormal_above = 55.0\n",
        )
        .unwrap();
        assert_eq!(cfg.n_disks, 30);
        assert_eq!(cfg.smoothing_window, 3);
        assert_eq!(cfg.backends.segmenter, SegmenterSpec::Sidecar);
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn invalid_configs() {
        for text in [
            "n_disks = 0",
            "smoothing_window = 4",
            "precision_floor = 2.0",
            "[thresholds]\nabnormal_below = 70.0\nnormal_above = 60.0",
            "[backends]\nclassifier = \"external:/no/such/program\"\nsegmenter = \"threshold\"",
            "unknown_key = 1",
        ] {
            assert!(PipelineConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn fingerprint_tracks_analysis_fields_only() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            store_path: "elsewhere".into(),
            workers: 1,
            ..a.clone()
        };
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = PipelineConfig {
            n_disks: 21,
            ..a.clone()
        };
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
