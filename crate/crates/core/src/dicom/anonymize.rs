use super::element::{DataSet, DicomElement, Tag};
use super::tags;

pub const PLACEHOLDER: &str = "ANON";

/// Identifying attributes replaced by [`anonymize`]. Keep in sync with
/// `docs/anonymization.md`.
pub const PHI_TAGS: [Tag; 5] = [
    tags::PATIENT_NAME,
    tags::PATIENT_ID,
    tags::PATIENT_BIRTH_DATE,
    tags::INSTITUTION_NAME,
    tags::REFERRING_PHYSICIAN_NAME,
];

/// Replaces the value of every top-level PHI attribute present with the
/// placeholder, keeping its VR. Absent attributes are not added.
pub fn anonymize(elements: &DataSet) -> DataSet {
    let mut out = elements.clone();
    for tag in PHI_TAGS {
        if let Some(el) = elements.get(tag) {
            out.put(DicomElement::text(tag, el.vr, PLACEHOLDER));
        }
    }
    out
}
