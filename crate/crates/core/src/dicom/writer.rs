use super::element::{DataSet, DicomElement, ElementValue, Tag, Vr};
use super::reader::{EXPLICIT_VR_LITTLE_ENDIAN, MAGIC, PREAMBLE_LEN};
use super::tags;
use super::DicomError;

/// UUID-derived OID identifying files produced by this writer.
pub const IMPLEMENTATION_CLASS_UID: &str = "2.25.229574327816215469728381956380432127141";

const MAX_SHORT_LEN: usize = 0xFFFF;
const MAX_LONG_LEN: usize = 0xFFFF_FFFE;
const MAX_DS_LEN: usize = 16;

/// Serialises a meta group and dataset as an Explicit VR Little Endian
/// Part 10 stream. The group length and transfer syntax of the meta group
/// are always regenerated.
pub fn write_file(meta: &DataSet, dataset: &DataSet) -> Result<Vec<u8>, DicomError> {
    let mut meta = meta.clone();
    meta.remove(tags::FILE_META_GROUP_LENGTH);
    if !meta.contains(tags::FILE_META_VERSION) {
        meta.put(DicomElement::bytes(tags::FILE_META_VERSION, Vr::OB, vec![0, 1]));
    }
    meta.put(DicomElement::text(
        tags::TRANSFER_SYNTAX_UID,
        Vr::UI,
        EXPLICIT_VR_LITTLE_ENDIAN,
    ));

    let mut meta_body = Vec::new();
    encode_dataset(&meta, &mut meta_body)?;

    let mut out = vec![0u8; PREAMBLE_LEN];
    out.extend_from_slice(MAGIC);
    let group_len = DicomElement::bytes(
        tags::FILE_META_GROUP_LENGTH,
        Vr::UL,
        (meta_body.len() as u32).to_le_bytes().to_vec(),
    );
    encode_element(&group_len, &mut out)?;
    out.extend_from_slice(&meta_body);
    encode_dataset(dataset, &mut out)?;
    Ok(out)
}

pub fn encode_dataset(ds: &DataSet, out: &mut Vec<u8>) -> Result<(), DicomError> {
    for el in ds.iter() {
        encode_element(el, out)?;
    }
    Ok(())
}

fn encode_element(el: &DicomElement, out: &mut Vec<u8>) -> Result<(), DicomError> {
    let body = match &el.value {
        ElementValue::Bytes(b) => {
            if b.len() % 2 == 1 {
                return Err(DicomError::UnencodableValue {
                    tag: el.tag,
                    reason: format!("odd value length {}", b.len()),
                });
            }
            std::borrow::Cow::Borrowed(b.as_slice())
        }
        ElementValue::Sequence(items) => {
            let mut seq = Vec::new();
            for item in items {
                let mut body = Vec::new();
                encode_dataset(item, &mut body)?;
                push_tag(tags::ITEM, &mut seq);
                seq.extend_from_slice(&(body.len() as u32).to_le_bytes());
                seq.extend_from_slice(&body);
            }
            std::borrow::Cow::Owned(seq)
        }
    };
    let vr = if matches!(el.value, ElementValue::Sequence(_)) {
        Vr::SQ
    } else {
        el.vr
    };

    push_tag(el.tag, out);
    out.extend_from_slice(&vr.0);
    if vr.has_long_length() {
        if body.len() > MAX_LONG_LEN {
            return Err(oversized(el.tag, body.len()));
        }
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    } else {
        if body.len() > MAX_SHORT_LEN {
            return Err(oversized(el.tag, body.len()));
        }
        out.extend_from_slice(&(body.len() as u16).to_le_bytes());
    }
    out.extend_from_slice(&body);
    Ok(())
}

fn oversized(tag: Tag, len: usize) -> DicomError {
    DicomError::UnencodableValue {
        tag,
        reason: format!("value of {len} bytes exceeds the length field"),
    }
}

fn push_tag(tag: Tag, out: &mut Vec<u8>) {
    out.extend_from_slice(&tag.group().to_le_bytes());
    out.extend_from_slice(&tag.element().to_le_bytes());
}

/// Decimal string of at most 16 characters. Uses the shortest representation
/// that parses back to the same value when one fits, otherwise rounds.
pub fn format_ds(v: f64) -> String {
    let plain = format!("{v}");
    let exp = format!("{v:e}");
    let shortest = if plain.len() <= exp.len() { plain } else { exp };
    if shortest.len() <= MAX_DS_LEN {
        return shortest;
    }
    for precision in (0..15).rev() {
        let s = format!("{v:.precision$e}");
        if s.len() <= MAX_DS_LEN {
            return s;
        }
    }
    format!("{v:.0e}")
}

pub fn ds_element(tag: Tag, values: &[f64]) -> DicomElement {
    let text = values.iter().map(|v| format_ds(*v)).collect::<Vec<_>>().join("\\");
    DicomElement::text(tag, Vr::DS, &text)
}

pub fn is_element(tag: Tag, value: i64) -> DicomElement {
    DicomElement::text(tag, Vr::IS, &value.to_string())
}
