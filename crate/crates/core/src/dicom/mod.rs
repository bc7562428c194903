//! Reading and writing the supported DICOM subset: uncompressed 8-bit
//! grayscale multi-frame ultrasound in Explicit or Implicit VR Little Endian.

mod anonymize;
mod clip;
mod element;
mod reader;
pub mod tags;
mod writer;

use thiserror::Error;

pub use anonymize::{anonymize, PHI_TAGS, PLACEHOLDER};
pub use clip::{parse_dicom, parse_dicom_file, write_dicom, ClipMeta, EchoClip, PixelSpacing};
pub use element::{DataSet, DicomElement, ElementValue, Tag, Vr};
pub use reader::{read_file, DicomFile, TransferSyntax};
pub use writer::{encode_dataset, format_ds, write_file};

#[derive(Debug, Error)]
pub enum DicomError {
    #[error("not a DICOM file: missing preamble or DICM magic")]
    MissingMagic,
    #[error("unsupported transfer syntax {0}")]
    UnsupportedTransferSyntax(String),
    #[error("missing required attribute {0} {}", tags::keyword(*.0))]
    MissingRequiredTag(Tag),
    #[error("value truncated at offset {offset} (element {tag:?})")]
    Truncated { tag: Option<Tag>, offset: usize },
    #[error("odd value length {len} for {tag}")]
    OddLength { tag: Tag, len: u32 },
    #[error("duplicate attribute {0}")]
    DuplicateTag(Tag),
    #[error("sequence nesting too deep at {0}")]
    NestingTooDeep(Tag),
    #[error("invalid value for {tag}: {reason}")]
    InvalidValue { tag: Tag, reason: String },
    #[error("unsupported pixel format: {0}")]
    UnsupportedPixelFormat(String),
    #[error("cannot encode {tag}: {reason}")]
    UnencodableValue { tag: Tag, reason: String },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("clip has no pixel spacing; volumetry is unavailable")]
    CalibrationAbsent,
}
