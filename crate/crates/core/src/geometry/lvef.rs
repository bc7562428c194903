use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Beats averaged per study.
pub const MAX_BEATS: usize = 5;

pub const FLAG_FEWER_THAN_5_BEATS: &str = "fewer-than-5-beats";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardiacCycle {
    pub ed_frame: usize,
    pub es_frame: usize,
    pub edv_ml: f64,
    pub esv_ml: f64,
}

impl CardiacCycle {
    pub fn new(ed_frame: usize, es_frame: usize, edv_ml: f64, esv_ml: f64) -> Result<Self, GeometryError> {
        let ok = ed_frame != es_frame
            && edv_ml.is_finite()
            && esv_ml.is_finite()
            && edv_ml > 0.0
            && esv_ml >= 0.0
            && edv_ml >= esv_ml;
        if !ok {
            return Err(GeometryError::InvalidCycle {
                ed_frame,
                es_frame,
                edv_ml,
                esv_ml,
            });
        }
        Ok(Self {
            ed_frame,
            es_frame,
            edv_ml,
            esv_ml,
        })
    }

    /// 100·(EDV − ESV)/EDV.
    pub fn ejection_fraction(&self) -> f64 {
        100.0 * (self.edv_ml - self.esv_ml) / self.edv_ml
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    SinglePlaneA4c,
    SinglePlaneA2c,
    Biplane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LvefResult {
    pub per_cycle_lvef: Vec<f64>,
    pub mean_lvef: f64,
    pub cycles_used: usize,
    pub method: VolumeMethod,
    pub quality_flags: BTreeSet<String>,
}

/// Averages the ejection fraction of the first five beats in temporal order
/// (all of them when fewer are available).
pub fn compute_lvef(cycles: &[CardiacCycle], method: VolumeMethod) -> Result<LvefResult, GeometryError> {
    if cycles.is_empty() {
        return Err(GeometryError::NoCycles);
    }
    let mut ordered = cycles.to_vec();
    ordered.sort_by_key(|c| c.ed_frame);
    let per_cycle_lvef: Vec<f64> = ordered
        .iter()
        .take(MAX_BEATS)
        .map(|c| c.ejection_fraction().clamp(0.0, 100.0))
        .collect();
    let cycles_used = per_cycle_lvef.len();
    let mean_lvef = per_cycle_lvef.iter().sum::<f64>() / cycles_used as f64;
    let mut quality_flags = BTreeSet::new();
    if cycles_used < MAX_BEATS {
        quality_flags.insert(FLAG_FEWER_THAN_5_BEATS.to_string());
    }
    Ok(LvefResult {
        per_cycle_lvef,
        mean_lvef,
        cycles_used,
        method,
        quality_flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(i: usize, edv: f64, esv: f64) -> CardiacCycle {
        CardiacCycle::new(10 * i, 10 * i + 5, edv, esv).unwrap()
    }

    #[test]
    fn single_cycle_formula() {
        let r = compute_lvef(&[cycle(0, 120.0, 50.0)], VolumeMethod::SinglePlaneA4c).unwrap();
        assert!((r.mean_lvef - 58.333_333_333).abs() < 1e-6);
        assert_eq!(r.per_cycle_lvef.len(), 1);
        assert!(r.quality_flags.contains(FLAG_FEWER_THAN_5_BEATS));
    }

    #[test]
    fn no_ejection_is_zero() {
        let r = compute_lvef(&[cycle(0, 80.0, 80.0)], VolumeMethod::Biplane).unwrap();
        assert_eq!(r.mean_lvef, 0.0);
    }

    #[test]
    fn truncates_at_five_beats() {
        let efs = [60.0, 62.0, 58.0, 61.0, 59.0, 10.0, 90.0];
        let cycles: Vec<_> = efs
            .iter()
            .enumerate()
            .map(|(i, ef)| cycle(i, 100.0, 100.0 - ef))
            .collect();
        let r = compute_lvef(&cycles, VolumeMethod::SinglePlaneA4c).unwrap();
        assert_eq!(r.cycles_used, 5);
        assert!((r.mean_lvef - 60.0).abs() < 1e-9);
        assert!(r.quality_flags.is_empty());
    }

    #[test]
    fn uses_temporal_order_not_input_order() {
        let mut cycles: Vec<_> = (0..6).map(|i| cycle(i, 100.0, 40.0 + i as f64)).collect();
        cycles.reverse();
        let r = compute_lvef(&cycles, VolumeMethod::SinglePlaneA4c).unwrap();
        assert_eq!(r.per_cycle_lvef[0], 60.0);
        assert_eq!(r.cycles_used, 5);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(
            compute_lvef(&[], VolumeMethod::Biplane),
            Err(GeometryError::NoCycles)
        ));
    }

    #[test]
    fn invalid_cycles_rejected() {
        assert!(CardiacCycle::new(3, 3, 100.0, 50.0).is_err());
        assert!(CardiacCycle::new(0, 3, 40.0, 50.0).is_err());
        assert!(CardiacCycle::new(0, 3, 0.0, 0.0).is_err());
        assert!(CardiacCycle::new(0, 3, f64::NAN, 0.0).is_err());
    }
}
