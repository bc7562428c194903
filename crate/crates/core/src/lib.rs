//! Echocardiogram triage: DICOM ingest, view selection, chamber
//! segmentation, method-of-disks volumetry, LVEF and precision-constrained
//! triage of normal heart function.

pub mod backend;
pub mod dicom;
pub mod geometry;
pub mod phantom;
pub mod pipeline;
pub mod segmentation;
pub mod triage;
pub mod view;
