use super::element::{DataSet, DicomElement, ElementValue, Tag, Vr};
use super::tags;
use super::DicomError;

pub const PREAMBLE_LEN: usize = 128;
pub const MAGIC: &[u8; 4] = b"DICM";

pub const EXPLICIT_VR_LITTLE_ENDIAN: &str = "1.2.840.10008.1.2.1";
pub const IMPLICIT_VR_LITTLE_ENDIAN: &str = "1.2.840.10008.1.2";

const UNDEFINED_LENGTH: u32 = 0xFFFF_FFFF;
const MAX_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferSyntax {
    ExplicitVrLittleEndian,
    ImplicitVrLittleEndian,
}

impl TransferSyntax {
    pub fn from_uid(uid: &str) -> Result<Self, DicomError> {
        match uid {
            EXPLICIT_VR_LITTLE_ENDIAN => Ok(Self::ExplicitVrLittleEndian),
            IMPLICIT_VR_LITTLE_ENDIAN => Ok(Self::ImplicitVrLittleEndian),
            other => Err(DicomError::UnsupportedTransferSyntax(other.to_string())),
        }
    }

    pub fn uid(self) -> &'static str {
        match self {
            Self::ExplicitVrLittleEndian => EXPLICIT_VR_LITTLE_ENDIAN,
            Self::ImplicitVrLittleEndian => IMPLICIT_VR_LITTLE_ENDIAN,
        }
    }
}

/// A decoded Part 10 file: the file meta group and the main dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DicomFile {
    pub meta: DataSet,
    pub dataset: DataSet,
    pub transfer_syntax: TransferSyntax,
}

impl DicomFile {
    /// Meta group and dataset as one element set.
    pub fn elements(&self) -> DataSet {
        let mut all = self.meta.clone();
        all.merge(&self.dataset);
        all
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    fn take(&mut self, n: usize, tag: Option<Tag>) -> Result<&'a [u8], DicomError> {
        if n > self.remaining() {
            return Err(DicomError::Truncated { tag, offset: self.pos });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, tag: Option<Tag>) -> Result<u16, DicomError> {
        let b = self.take(2, tag)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, tag: Option<Tag>) -> Result<u32, DicomError> {
        let b = self.take(4, tag)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn tag(&mut self) -> Result<Tag, DicomError> {
        let group = self.u16(None)?;
        let element = self.u16(None)?;
        Ok(Tag(group, element))
    }

    fn peek_group(&self) -> Option<u16> {
        let b = self.buf.get(self.pos..self.pos + 2)?;
        Some(u16::from_le_bytes([b[0], b[1]]))
    }
}

/// Decodes a Part 10 byte stream into its meta group and dataset.
pub fn read_file(bytes: &[u8]) -> Result<DicomFile, DicomError> {
    if bytes.len() < PREAMBLE_LEN + MAGIC.len() || &bytes[PREAMBLE_LEN..PREAMBLE_LEN + 4] != MAGIC {
        return Err(DicomError::MissingMagic);
    }
    let mut cur = Cursor::new(&bytes[PREAMBLE_LEN + 4..]);

    // The meta group is always explicit VR little endian.
    let mut meta = DataSet::new();
    while cur.peek_group() == Some(0x0002) {
        let el = read_element(&mut cur, TransferSyntax::ExplicitVrLittleEndian, 0)?;
        insert_unique(&mut meta, el)?;
    }
    let ts_uid = meta
        .text(tags::TRANSFER_SYNTAX_UID)
        .ok_or(DicomError::MissingRequiredTag(tags::TRANSFER_SYNTAX_UID))?;
    let ts = TransferSyntax::from_uid(&ts_uid)?;

    let mut dataset = DataSet::new();
    while !cur.is_empty() {
        let el = read_element(&mut cur, ts, 0)?;
        if el.tag.is_meta() {
            return Err(DicomError::InvalidValue {
                tag: el.tag,
                reason: "file meta element after the meta group".into(),
            });
        }
        insert_unique(&mut dataset, el)?;
    }

    Ok(DicomFile {
        meta,
        dataset,
        transfer_syntax: ts,
    })
}

fn insert_unique(ds: &mut DataSet, el: DicomElement) -> Result<(), DicomError> {
    let tag = el.tag;
    if ds.put(el).is_some() {
        return Err(DicomError::DuplicateTag(tag));
    }
    Ok(())
}

fn read_element(cur: &mut Cursor<'_>, ts: TransferSyntax, depth: usize) -> Result<DicomElement, DicomError> {
    let tag = cur.tag()?;
    if tag.group() == 0xFFFE {
        return Err(DicomError::InvalidValue {
            tag,
            reason: "item or delimiter outside a sequence".into(),
        });
    }
    let (vr, len) = match ts {
        TransferSyntax::ExplicitVrLittleEndian => {
            let raw = cur.take(2, Some(tag))?;
            let vr = Vr([raw[0], raw[1]]);
            if !vr.0.iter().all(u8::is_ascii_uppercase) {
                return Err(DicomError::InvalidValue {
                    tag,
                    reason: format!("invalid VR bytes {:02X}{:02X}", raw[0], raw[1]),
                });
            }
            let len = if vr.has_long_length() {
                cur.take(2, Some(tag))?;
                cur.u32(Some(tag))?
            } else {
                u32::from(cur.u16(Some(tag))?)
            };
            (vr, len)
        }
        TransferSyntax::ImplicitVrLittleEndian => {
            let len = cur.u32(Some(tag))?;
            let mut vr = tags::dictionary_vr(tag);
            if vr == Vr::UN && len == UNDEFINED_LENGTH {
                vr = Vr::SQ;
            }
            (vr, len)
        }
    };

    if vr == Vr::SQ {
        if depth >= MAX_DEPTH {
            return Err(DicomError::NestingTooDeep(tag));
        }
        let items = if len == UNDEFINED_LENGTH {
            read_items_undefined(cur, ts, tag, depth)?
        } else {
            let body = cur.take(len as usize, Some(tag))?;
            read_items_defined(body, ts, tag, depth)?
        };
        return Ok(DicomElement::sequence(tag, items));
    }

    if len == UNDEFINED_LENGTH {
        // Encapsulated pixel data only occurs with compressed syntaxes.
        return Err(DicomError::InvalidValue {
            tag,
            reason: "undefined length on a non-sequence element".into(),
        });
    }
    if len % 2 == 1 {
        return Err(DicomError::OddLength { tag, len });
    }
    let value = cur.take(len as usize, Some(tag))?.to_vec();
    Ok(DicomElement {
        tag,
        vr,
        value: ElementValue::Bytes(value),
    })
}

fn read_items_defined(body: &[u8], ts: TransferSyntax, seq_tag: Tag, depth: usize) -> Result<Vec<DataSet>, DicomError> {
    let mut cur = Cursor::new(body);
    let mut items = Vec::new();
    while !cur.is_empty() {
        let tag = cur.tag()?;
        let len = cur.u32(Some(seq_tag))?;
        if tag != tags::ITEM {
            return Err(DicomError::InvalidValue {
                tag: seq_tag,
                reason: format!("expected item, found {tag}"),
            });
        }
        items.push(read_item(&mut cur, ts, seq_tag, len, depth)?);
    }
    Ok(items)
}

fn read_items_undefined(
    cur: &mut Cursor<'_>,
    ts: TransferSyntax,
    seq_tag: Tag,
    depth: usize,
) -> Result<Vec<DataSet>, DicomError> {
    let mut items = Vec::new();
    loop {
        let tag = cur.tag()?;
        let len = cur.u32(Some(seq_tag))?;
        match tag {
            tags::SEQUENCE_DELIMITATION => return Ok(items),
            tags::ITEM => items.push(read_item(cur, ts, seq_tag, len, depth)?),
            other => {
                return Err(DicomError::InvalidValue {
                    tag: seq_tag,
                    reason: format!("expected item, found {other}"),
                })
            }
        }
    }
}

fn read_item(
    cur: &mut Cursor<'_>,
    ts: TransferSyntax,
    seq_tag: Tag,
    len: u32,
    depth: usize,
) -> Result<DataSet, DicomError> {
    let mut item = DataSet::new();
    if len == UNDEFINED_LENGTH {
        loop {
            if cur.peek_group() == Some(0xFFFE) {
                let tag = cur.tag()?;
                cur.u32(Some(seq_tag))?;
                if tag == tags::ITEM_DELIMITATION {
                    return Ok(item);
                }
                return Err(DicomError::InvalidValue {
                    tag: seq_tag,
                    reason: format!("unexpected {tag} inside item"),
                });
            }
            insert_unique(&mut item, read_element(cur, ts, depth + 1)?)?;
        }
    }
    let body = cur.take(len as usize, Some(seq_tag))?;
    let mut inner = Cursor::new(body);
    while !inner.is_empty() {
        insert_unique(&mut item, read_element(&mut inner, ts, depth + 1)?)?;
    }
    Ok(item)
}
