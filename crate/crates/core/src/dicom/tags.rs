//! Attribute tags used by the supported subset, with their dictionary VRs
//! for implicit-VR decoding.

use super::element::{Tag, Vr};

pub const FILE_META_GROUP_LENGTH: Tag = Tag(0x0002, 0x0000);
pub const FILE_META_VERSION: Tag = Tag(0x0002, 0x0001);
pub const MEDIA_STORAGE_SOP_CLASS_UID: Tag = Tag(0x0002, 0x0002);
pub const MEDIA_STORAGE_SOP_INSTANCE_UID: Tag = Tag(0x0002, 0x0003);
pub const TRANSFER_SYNTAX_UID: Tag = Tag(0x0002, 0x0010);
pub const IMPLEMENTATION_CLASS_UID: Tag = Tag(0x0002, 0x0012);

pub const SOP_CLASS_UID: Tag = Tag(0x0008, 0x0016);
pub const SOP_INSTANCE_UID: Tag = Tag(0x0008, 0x0018);
pub const MODALITY: Tag = Tag(0x0008, 0x0060);
pub const INSTITUTION_NAME: Tag = Tag(0x0008, 0x0080);
pub const REFERRING_PHYSICIAN_NAME: Tag = Tag(0x0008, 0x0090);
pub const SERIES_DESCRIPTION: Tag = Tag(0x0008, 0x103E);

pub const PATIENT_NAME: Tag = Tag(0x0010, 0x0010);
pub const PATIENT_ID: Tag = Tag(0x0010, 0x0020);
pub const PATIENT_BIRTH_DATE: Tag = Tag(0x0010, 0x0030);

pub const CINE_RATE: Tag = Tag(0x0018, 0x0040);
pub const FRAME_TIME: Tag = Tag(0x0018, 0x1063);
pub const ULTRASOUND_REGIONS: Tag = Tag(0x0018, 0x6011);
pub const PHYSICAL_UNITS_X: Tag = Tag(0x0018, 0x6024);
pub const PHYSICAL_UNITS_Y: Tag = Tag(0x0018, 0x6026);
pub const PHYSICAL_DELTA_X: Tag = Tag(0x0018, 0x602C);
pub const PHYSICAL_DELTA_Y: Tag = Tag(0x0018, 0x602E);

pub const STUDY_INSTANCE_UID: Tag = Tag(0x0020, 0x000D);
pub const INSTANCE_NUMBER: Tag = Tag(0x0020, 0x0013);

pub const SAMPLES_PER_PIXEL: Tag = Tag(0x0028, 0x0002);
pub const PHOTOMETRIC_INTERPRETATION: Tag = Tag(0x0028, 0x0004);
pub const NUMBER_OF_FRAMES: Tag = Tag(0x0028, 0x0008);
pub const ROWS: Tag = Tag(0x0028, 0x0010);
pub const COLUMNS: Tag = Tag(0x0028, 0x0011);
pub const PIXEL_SPACING: Tag = Tag(0x0028, 0x0030);
pub const BITS_ALLOCATED: Tag = Tag(0x0028, 0x0100);
pub const BITS_STORED: Tag = Tag(0x0028, 0x0101);
pub const HIGH_BIT: Tag = Tag(0x0028, 0x0102);
pub const PIXEL_REPRESENTATION: Tag = Tag(0x0028, 0x0103);

pub const PIXEL_DATA: Tag = Tag(0x7FE0, 0x0010);

pub const ITEM: Tag = Tag(0xFFFE, 0xE000);
pub const ITEM_DELIMITATION: Tag = Tag(0xFFFE, 0xE00D);
pub const SEQUENCE_DELIMITATION: Tag = Tag(0xFFFE, 0xE0DD);

/// Ultrasound region physical unit code for centimetres.
pub const UNITS_CM: u16 = 3;

/// Dictionary VR for implicit-VR datasets. Unknown tags decode as UN.
pub fn dictionary_vr(tag: Tag) -> Vr {
    if tag.element() == 0x0000 {
        return Vr::UL;
    }
    match tag {
        FILE_META_VERSION => Vr::OB,
        MEDIA_STORAGE_SOP_CLASS_UID
        | MEDIA_STORAGE_SOP_INSTANCE_UID
        | TRANSFER_SYNTAX_UID
        | IMPLEMENTATION_CLASS_UID
        | SOP_CLASS_UID
        | SOP_INSTANCE_UID
        | STUDY_INSTANCE_UID => Vr::UI,
        MODALITY | PHOTOMETRIC_INTERPRETATION => Vr::CS,
        INSTITUTION_NAME | SERIES_DESCRIPTION | PATIENT_ID => Vr::LO,
        REFERRING_PHYSICIAN_NAME | PATIENT_NAME => Vr::PN,
        PATIENT_BIRTH_DATE => Vr::DA,
        CINE_RATE | INSTANCE_NUMBER | NUMBER_OF_FRAMES => Vr::IS,
        FRAME_TIME | PIXEL_SPACING => Vr::DS,
        ULTRASOUND_REGIONS => Vr::SQ,
        PHYSICAL_UNITS_X | PHYSICAL_UNITS_Y => Vr::US,
        PHYSICAL_DELTA_X | PHYSICAL_DELTA_Y => Vr::FD,
        SAMPLES_PER_PIXEL | ROWS | COLUMNS | BITS_ALLOCATED | BITS_STORED | HIGH_BIT | PIXEL_REPRESENTATION => Vr::US,
        PIXEL_DATA => Vr::OB,
        _ => Vr::UN,
    }
}

pub fn keyword(tag: Tag) -> &'static str {
    match tag {
        TRANSFER_SYNTAX_UID => "TransferSyntaxUID",
        NUMBER_OF_FRAMES => "NumberOfFrames",
        ROWS => "Rows",
        COLUMNS => "Columns",
        PIXEL_DATA => "PixelData",
        PIXEL_SPACING => "PixelSpacing",
        FRAME_TIME => "FrameTime",
        CINE_RATE => "CineRate",
        PATIENT_NAME => "PatientName",
        PATIENT_ID => "PatientID",
        PATIENT_BIRTH_DATE => "PatientBirthDate",
        INSTITUTION_NAME => "InstitutionName",
        REFERRING_PHYSICIAN_NAME => "ReferringPhysicianName",
        _ => "",
    }
}
