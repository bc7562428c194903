use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::Confusion;
use super::TriageError;

/// One labelled study of a calibration cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortEntry {
    pub study_id: String,
    pub estimated_lvef: f64,
    pub truly_normal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub chosen_cutoff: f64,
    /// `None` when the cutoff predicts no study as normal.
    pub achieved_precision: Option<f64>,
    pub achieved_sensitivity: f64,
    pub feasible: bool,
    pub confusion: Confusion,
}

/// Operating point of the rule "NORMAL iff estimated_lvef > cutoff".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub cutoff: f64,
    pub precision: Option<f64>,
    pub sensitivity: f64,
    pub confusion: Confusion,
}

fn check_cohort(cohort: &[(f64, bool)]) -> Result<(), TriageError> {
    if cohort.is_empty() {
        return Err(TriageError::EmptyInput);
    }
    if let Some(&(v, _)) = cohort.iter().find(|(v, _)| !v.is_finite()) {
        return Err(TriageError::InvalidLvef(v));
    }
    Ok(())
}

pub fn evaluate_cutoff(cohort: &[(f64, bool)], cutoff: f64) -> Result<OperatingPoint, TriageError> {
    check_cohort(cohort)?;
    if !cutoff.is_finite() {
        return Err(TriageError::InvalidCutoff(cutoff));
    }
    let pairs: Vec<(bool, bool)> = cohort.iter().map(|&(v, t)| (v > cutoff, t)).collect();
    let m = Confusion::from_pairs(&pairs).metrics()?;
    Ok(OperatingPoint {
        cutoff,
        precision: m.precision,
        sensitivity: m.sensitivity.unwrap_or(0.0),
        confusion: m.confusion,
    })
}

/// Picks the observed LVEF cutoff with the highest sensitivity among those
/// meeting `precision_floor`; ties go to higher precision, then to the
/// larger cutoff. Without a feasible candidate the result predicts nobody
/// normal (cutoff = largest observed value) and `feasible` is false.
pub fn calibrate_cutoff(cohort: &[(f64, bool)], precision_floor: f64) -> Result<CalibrationResult, TriageError> {
    check_cohort(cohort)?;
    if !(0.0..=1.0).contains(&precision_floor) {
        return Err(TriageError::InvalidPrecisionFloor(precision_floor));
    }
    let positives = cohort.iter().filter(|(_, t)| *t).count();
    if positives == 0 || positives == cohort.len() {
        return Err(TriageError::SingleClassCohort);
    }

    // Sweep cutoffs from the largest value down, accumulating the studies
    // strictly above the current cutoff.
    let mut sorted = cohort.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut best: Option<(f64, u64, u64)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let cutoff = sorted[i].0;
        if tp + fp > 0 && tp as f64 / (tp + fp) as f64 >= precision_floor {
            let better = match best {
                None => true,
                Some((_, btp, bfp)) => {
                    // sensitivity shares the denominator, so compare TP;
                    // precision compares by cross-multiplication. Equal
                    // candidates keep the earlier, larger cutoff.
                    tp.cmp(&btp).then((tp * (btp + bfp)).cmp(&(btp * (tp + fp)))) == Ordering::Greater
                }
            };
            if better {
                best = Some((cutoff, tp, fp));
            }
        }
        while i < sorted.len() && sorted[i].0 == cutoff {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
    }

    let (cutoff, feasible) = match best {
        Some((c, _, _)) => (c, true),
        None => (sorted[0].0, false),
    };
    let point = evaluate_cutoff(cohort, cutoff)?;
    Ok(CalibrationResult {
        chosen_cutoff: cutoff,
        achieved_precision: point.precision,
        achieved_sensitivity: point.sensitivity,
        feasible,
        confusion: point.confusion,
    })
}

#[derive(Deserialize)]
struct CohortRow {
    study_id: String,
    estimated_lvef: f64,
    truly_normal: String,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Reads a `study_id,estimated_lvef,truly_normal` CSV.
pub fn read_cohort_csv<R: std::io::Read>(reader: R) -> Result<Vec<CohortEntry>, TriageError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CohortRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| TriageError::CohortFormat {
            line,
            reason: e.to_string(),
        })?;
        let truly_normal = parse_bool(&row.truly_normal).ok_or_else(|| TriageError::CohortFormat {
            line,
            reason: format!("truly_normal must be a boolean, got {:?}", row.truly_normal),
        })?;
        if !(0.0..=100.0).contains(&row.estimated_lvef) {
            return Err(TriageError::CohortFormat {
                line,
                reason: format!("estimated_lvef {} outside [0,100]", row.estimated_lvef),
            });
        }
        out.push(CohortEntry {
            study_id: row.study_id,
            estimated_lvef: row.estimated_lvef,
            truly_normal,
        });
    }
    Ok(out)
}

pub fn load_cohort(path: &Path) -> Result<Vec<CohortEntry>, TriageError> {
    let file = std::fs::File::open(path).map_err(|e| TriageError::CohortFormat {
        line: 0,
        reason: format!("{}: {e}", path.display()),
    })?;
    read_cohort_csv(file)
}

pub fn write_cohort_csv<W: std::io::Write>(writer: W, cohort: &[CohortEntry]) -> Result<(), TriageError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| TriageError::CohortFormat {
        line: 0,
        reason: e.to_string(),
    };
    w.write_record(["study_id", "estimated_lvef", "truly_normal"])
        .map_err(io)?;
    for e in cohort {
        w.write_record([
            e.study_id.as_str(),
            &e.estimated_lvef.to_string(),
            if e.truly_normal { "true" } else { "false" },
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| TriageError::CohortFormat {
        line: 0,
        reason: e.to_string(),
    })
}

pub fn cohort_pairs(cohort: &[CohortEntry]) -> Vec<(f64, bool)> {
    cohort.iter().map(|e| (e.estimated_lvef, e.truly_normal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> Vec<(f64, bool)> {
        vec![(65.0, true), (62.0, true), (55.0, true), (61.0, false), (45.0, false)]
    }

    #[test]
    fn example_cohort() {
        let r = calibrate_cutoff(&example(), 0.8).unwrap();
        assert_eq!(r.chosen_cutoff, 61.0);
        assert_eq!(r.achieved_precision, Some(1.0));
        assert_eq!(r.achieved_sensitivity, 2.0 / 3.0);
        assert!(r.feasible);
    }

    #[test]
    fn separable_cohort() {
        let c = [(70.0, true), (66.0, true), (50.0, false), (30.0, false)];
        let r = calibrate_cutoff(&c, 0.8).unwrap();
        assert_eq!(r.chosen_cutoff, 50.0);
        assert_eq!((r.achieved_precision, r.achieved_sensitivity), (Some(1.0), 1.0));
    }

    #[test]
    fn inverted_cohort_is_infeasible() {
        let c = [(30.0, true), (35.0, true), (60.0, false), (70.0, false)];
        let r = calibrate_cutoff(&c, 0.8).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.chosen_cutoff, 70.0);
        assert_eq!(r.achieved_precision, None);
        assert_eq!(r.achieved_sensitivity, 0.0);
    }

    #[test]
    fn ties_prefer_larger_cutoff() {
        // cutoffs 40 and 50 both give TP=1, FP=0
        let c = [(40.0, false), (50.0, false), (45.0, false), (60.0, true), (20.0, true)];
        let r = calibrate_cutoff(&c, 1.0).unwrap();
        assert_eq!(r.chosen_cutoff, 50.0);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(
            calibrate_cutoff(&[(50.0, true), (60.0, true)], 0.8),
            Err(TriageError::SingleClassCohort)
        ));
        assert!(matches!(calibrate_cutoff(&[], 0.8), Err(TriageError::EmptyInput)));
        assert!(matches!(
            calibrate_cutoff(&example(), 1.5),
            Err(TriageError::InvalidPrecisionFloor(_))
        ));
    }

    #[test]
    fn what_if_at_61() {
        let p = evaluate_cutoff(&example(), 61.0).unwrap();
        assert_eq!((p.precision, p.sensitivity), (Some(1.0), 2.0 / 3.0));
        let p = evaluate_cutoff(&example(), 0.0).unwrap();
        assert_eq!((p.precision, p.sensitivity), (Some(0.6), 1.0));
    }

    #[test]
    fn csv_round_trip() {
        let text = "study_id,estimated_lvef,truly_normal\ns1,65,true\ns2, 45.5 ,0\n";
        let cohort = read_cohort_csv(text.as_bytes()).unwrap();
        assert_eq!(cohort[1].estimated_lvef, 45.5);
        assert!(!cohort[1].truly_normal);
        let mut buf = Vec::new();
        write_cohort_csv(&mut buf, &cohort).unwrap();
        assert_eq!(read_cohort_csv(buf.as_slice()).unwrap(), cohort);
    }

    #[test]
    fn csv_errors_carry_line() {
        let text = "study_id,estimated_lvef,truly_normal\ns1,65,true\ns2,abc,true\n";
        assert!(matches!(
            read_cohort_csv(text.as_bytes()),
            Err(TriageError::CohortFormat { line: 3, .. })
        ));
        let text = "study_id,estimated_lvef,truly_normal\ns1,65,maybe\n";
        assert!(read_cohort_csv(text.as_bytes()).is_err());
    }
}
