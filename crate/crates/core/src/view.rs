//! View assignment through a pluggable classifier, and per-view clip
//! selection among retakes.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, Concurrency};
use crate::dicom::EchoClip;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum View {
    Plax,
    A2c,
    A4c,
    Other,
}

impl View {
    pub const ALL: [View; 4] = [View::Plax, View::A2c, View::A4c, View::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            View::Plax => "PLAX",
            View::A2c => "A2C",
            View::A4c => "A4C",
            View::Other => "OTHER",
        }
    }

    pub fn is_apical(self) -> bool {
        matches!(self, View::A2c | View::A4c)
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for View {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PLAX" => Ok(View::Plax),
            "A2C" => Ok(View::A2c),
            "A4C" => Ok(View::A4c),
            "OTHER" => Ok(View::Other),
            other => Err(format!("unknown view {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewLabel {
    pub view: View,
    pub confidence: f64,
}

impl ViewLabel {
    /// `None` when confidence is outside [0, 1].
    pub fn new(view: View, confidence: f64) -> Option<Self> {
        (0.0..=1.0).contains(&confidence).then_some(Self { view, confidence })
    }

    pub fn other() -> Self {
        Self {
            view: View::Other,
            confidence: 0.0,
        }
    }
}

/// A view classifier. Must be deterministic for a fixed instance and input,
/// and total: clips it cannot recognise are labelled [`View::Other`].
pub trait ClassifierBackend: Send + Sync {
    fn name(&self) -> &str;

    fn classify(&self, clip: &EchoClip) -> Result<ViewLabel, BackendError>;

    fn concurrency(&self) -> Concurrency {
        Concurrency::Parallel
    }
}

/// Reads the clip's declared view hint (series description) through a
/// keyword map.
#[derive(Debug, Default, Clone)]
pub struct HintClassifier;

impl HintClassifier {
    pub fn view_for_hint(hint: &str) -> Option<View> {
        let h = hint.to_ascii_uppercase();
        let has = |keys: &[&str]| keys.iter().any(|k| h.contains(k));
        if has(&["PLAX", "PARASTERNAL LONG", "PSLAX"]) {
            Some(View::Plax)
        } else if has(&["A4C", "4CH", "AP4", "APICAL 4", "APICAL FOUR"]) {
            Some(View::A4c)
        } else if has(&["A2C", "2CH", "AP2", "APICAL 2", "APICAL TWO"]) {
            Some(View::A2c)
        } else {
            None
        }
    }
}

impl ClassifierBackend for HintClassifier {
    fn name(&self) -> &str {
        "hint"
    }

    fn classify(&self, clip: &EchoClip) -> Result<ViewLabel, BackendError> {
        let view = clip.meta().declared_view_hint.as_deref().and_then(Self::view_for_hint);
        Ok(match view {
            Some(view) => ViewLabel { view, confidence: 1.0 },
            None => ViewLabel::other(),
        })
    }
}

/// Labels every clip the same way.
#[derive(Debug, Clone)]
pub struct ConstantClassifier {
    label: ViewLabel,
}

impl ConstantClassifier {
    pub fn new(label: ViewLabel) -> Self {
        Self { label }
    }
}

impl ClassifierBackend for ConstantClassifier {
    fn name(&self) -> &str {
        "constant"
    }

    fn classify(&self, _clip: &EchoClip) -> Result<ViewLabel, BackendError> {
        Ok(self.label)
    }
}

/// A label together with the backend that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: ViewLabel,
    pub backend: String,
    pub flags: BTreeSet<String>,
}

pub const FLAG_CLASSIFIER_FAILED: &str = "classifier-failed";

/// Runs the backend. A failing backend or an out-of-contract label yields
/// OTHER with confidence 0 and a quality flag instead of an error.
pub fn classify_view(clip: &EchoClip, backend: &dyn ClassifierBackend) -> Classification {
    let mut flags = BTreeSet::new();
    let label = match backend.classify(clip) {
        Ok(label) if ViewLabel::new(label.view, label.confidence).is_some() => label,
        Ok(_) | Err(_) => {
            flags.insert(FLAG_CLASSIFIER_FAILED.to_string());
            ViewLabel::other()
        }
    };
    Classification {
        label,
        backend: backend.name().to_string(),
        flags,
    }
}

/// Picks one clip of `view`: most frames, then highest acquisition index
/// (latest retake), then greatest clip id.
pub fn select_clip<'a, I>(clips: I, view: View) -> Option<&'a EchoClip>
where
    I: IntoIterator<Item = (&'a EchoClip, View)>,
{
    clips
        .into_iter()
        .filter(|(_, v)| *v == view)
        .map(|(clip, _)| clip)
        .max_by(|a, b| {
            (a.num_frames(), a.meta().acquisition_index, a.clip_id()).cmp(&(
                b.num_frames(),
                b.meta().acquisition_index,
                b.clip_id(),
            ))
        })
}

/// Fraction of clips whose predicted view matches the reference view.
pub fn view_accuracy(pairs: &[(View, View)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let correct = pairs.iter().filter(|(p, t)| p == t).count();
    Some(correct as f64 / pairs.len() as f64)
}
