use std::collections::BTreeMap;
use std::fmt;

/// A (group, element) attribute tag. Orders by group, then element, which is
/// the on-disk order of a well-formed dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub u16, pub u16);

impl Tag {
    pub fn group(self) -> u16 {
        self.0
    }

    pub fn element(self) -> u16 {
        self.1
    }

    pub fn is_meta(self) -> bool {
        self.0 == 0x0002
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:04X},{:04X})", self.0, self.1)
    }
}

/// Two-character value representation code.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vr(pub [u8; 2]);

impl Vr {
    pub const AE: Vr = Vr(*b"AE");
    pub const CS: Vr = Vr(*b"CS");
    pub const DA: Vr = Vr(*b"DA");
    pub const DS: Vr = Vr(*b"DS");
    pub const FD: Vr = Vr(*b"FD");
    pub const IS: Vr = Vr(*b"IS");
    pub const LO: Vr = Vr(*b"LO");
    pub const OB: Vr = Vr(*b"OB");
    pub const OW: Vr = Vr(*b"OW");
    pub const PN: Vr = Vr(*b"PN");
    pub const SH: Vr = Vr(*b"SH");
    pub const SQ: Vr = Vr(*b"SQ");
    pub const UI: Vr = Vr(*b"UI");
    pub const UL: Vr = Vr(*b"UL");
    pub const UN: Vr = Vr(*b"UN");
    pub const US: Vr = Vr(*b"US");

    /// VRs whose explicit encoding uses two reserved bytes and a 32-bit length.
    pub fn has_long_length(self) -> bool {
        matches!(
            &self.0,
            b"OB" | b"OD" | b"OF" | b"OL" | b"OV" | b"OW" | b"SQ" | b"SV" | b"UC" | b"UN" | b"UR" | b"UT" | b"UV"
        )
    }

    /// Padding byte used to reach even length.
    pub fn padding(self) -> u8 {
        match &self.0 {
            b"UI" | b"OB" | b"UN" => 0,
            _ => b' ',
        }
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).unwrap_or("??")
    }
}

impl fmt::Debug for Vr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementValue {
    Bytes(Vec<u8>),
    /// Items of a sequence, each its own dataset.
    Sequence(Vec<DataSet>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DicomElement {
    pub tag: Tag,
    pub vr: Vr,
    pub value: ElementValue,
}

impl DicomElement {
    pub fn bytes(tag: Tag, vr: Vr, value: Vec<u8>) -> Self {
        Self {
            tag,
            vr,
            value: ElementValue::Bytes(value),
        }
    }

    /// Text value, padded to even length with the VR's padding byte.
    pub fn text(tag: Tag, vr: Vr, text: &str) -> Self {
        let mut value = text.as_bytes().to_vec();
        if value.len() % 2 == 1 {
            value.push(vr.padding());
        }
        Self::bytes(tag, vr, value)
    }

    pub fn us(tag: Tag, v: u16) -> Self {
        Self::bytes(tag, Vr::US, v.to_le_bytes().to_vec())
    }

    pub fn sequence(tag: Tag, items: Vec<DataSet>) -> Self {
        Self {
            tag,
            vr: Vr::SQ,
            value: ElementValue::Sequence(items),
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match &self.value {
            ElementValue::Bytes(b) => Some(b),
            ElementValue::Sequence(_) => None,
        }
    }

    pub fn items(&self) -> Option<&[DataSet]> {
        match &self.value {
            ElementValue::Sequence(items) => Some(items),
            ElementValue::Bytes(_) => None,
        }
    }

    /// Value decoded as text with trailing padding (spaces and NULs) removed.
    pub fn as_text(&self) -> Option<String> {
        let bytes = self.as_bytes()?;
        let s = String::from_utf8_lossy(bytes);
        Some(s.trim_end_matches([' ', '\0']).to_string())
    }
}

/// A set of elements with unique tags, kept in tag order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataSet {
    elements: BTreeMap<Tag, DicomElement>,
}

impl DataSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces the element carrying the same tag.
    pub fn put(&mut self, element: DicomElement) -> Option<DicomElement> {
        self.elements.insert(element.tag, element)
    }

    pub fn remove(&mut self, tag: Tag) -> Option<DicomElement> {
        self.elements.remove(&tag)
    }

    pub fn get(&self, tag: Tag) -> Option<&DicomElement> {
        self.elements.get(&tag)
    }

    pub fn contains(&self, tag: Tag) -> bool {
        self.elements.contains_key(&tag)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DicomElement> {
        self.elements.values()
    }

    pub fn text(&self, tag: Tag) -> Option<String> {
        self.get(tag).and_then(DicomElement::as_text)
    }

    pub fn u16(&self, tag: Tag) -> Option<u16> {
        let b = self.get(tag)?.as_bytes()?;
        (b.len() >= 2).then(|| u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn f64(&self, tag: Tag) -> Option<f64> {
        let b = self.get(tag)?.as_bytes()?;
        let arr: [u8; 8] = b.get(..8)?.try_into().ok()?;
        Some(f64::from_le_bytes(arr))
    }

    /// Backslash-separated decimal strings (DS / IS).
    pub fn numbers(&self, tag: Tag) -> Option<Vec<f64>> {
        let text = self.text(tag)?;
        text.split('\\').map(|part| part.trim().parse::<f64>().ok()).collect()
    }

    /// Splits into (file meta group, remaining dataset).
    pub fn split_meta(&self) -> (DataSet, DataSet) {
        let mut meta = DataSet::new();
        let mut rest = DataSet::new();
        for el in self.iter() {
            if el.tag.is_meta() {
                meta.put(el.clone());
            } else {
                rest.put(el.clone());
            }
        }
        (meta, rest)
    }

    pub fn merge(&mut self, other: &DataSet) {
        for el in other.iter() {
            self.put(el.clone());
        }
    }
}

impl FromIterator<DicomElement> for DataSet {
    fn from_iter<I: IntoIterator<Item = DicomElement>>(iter: I) -> Self {
        let mut ds = DataSet::new();
        for el in iter {
            ds.put(el);
        }
        ds
    }
}
