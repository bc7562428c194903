use serde::{Deserialize, Serialize};

use super::GeometryError;

/// End-diastole / end-systole frame pair of one detected beat. `next_ed` is
/// the frame that closes the beat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclePhase {
    pub ed_frame: usize,
    pub es_frame: usize,
    pub next_ed: usize,
}

/// Centered moving average with the edges clamped (the first and last
/// samples are repeated outward).
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    let half = (window.max(1) / 2) as isize;
    let n = series.len() as isize;
    let width = (2 * half + 1) as f64;
    (0..n)
        .map(|i| {
            (-half..=half)
                .map(|k| series[(i + k).clamp(0, n - 1) as usize])
                .sum::<f64>()
                / width
        })
        .collect()
}

/// Indices greater than every neighbour present. Edge samples have one
/// neighbour and qualify when strictly above it.
pub fn strict_maxima(s: &[f64]) -> Vec<usize> {
    let n = s.len();
    (0..n)
        .filter(|&i| {
            let left = i == 0 || s[i] > s[i - 1];
            let right = i + 1 == n || s[i] > s[i + 1];
            n > 1 && left && right
        })
        .collect()
}

/// Detects beats in a chamber area series. ED candidates are strict local
/// maxima of the smoothed series; ES is the earliest minimum of the raw
/// series strictly between consecutive EDs.
pub fn detect_cycles(areas: &[f64], window: usize) -> Result<Vec<CyclePhase>, GeometryError> {
    if areas.len() < 3 {
        return Err(GeometryError::SeriesTooShort(areas.len()));
    }
    if areas.iter().any(|a| !a.is_finite()) {
        return Err(GeometryError::NonFiniteArea);
    }
    let maxima = strict_maxima(&smooth(areas, window));
    if maxima.len() < 2 {
        return Err(GeometryError::NoCycleFound { maxima: maxima.len() });
    }
    Ok(maxima
        .windows(2)
        .map(|pair| {
            let (ed, next) = (pair[0], pair[1]);
            let es = (ed + 1..next)
                .min_by(|&a, &b| areas[a].total_cmp(&areas[b]).then(a.cmp(&b)))
                .expect("strict maxima are never adjacent");
            CyclePhase {
                ed_frame: ed,
                es_frame: es,
                next_ed: next,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_traced_series() {
        let areas = [5.0, 7.0, 9.0, 7.0, 5.0, 7.0, 9.0];
        let cycles = detect_cycles(&areas, 3).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!((cycles[0].ed_frame, cycles[0].es_frame), (2, 4));
    }

    #[test]
    fn monotone_has_no_cycle() {
        assert!(matches!(
            detect_cycles(&[1.0, 2.0, 3.0, 4.0], 3),
            Err(GeometryError::NoCycleFound { maxima: 1 })
        ));
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            detect_cycles(&[1.0, 2.0], 3),
            Err(GeometryError::SeriesTooShort(2))
        ));
    }

    #[test]
    fn smoothing_clamps_edges() {
        let s = smooth(&[5.0, 7.0, 9.0, 7.0, 5.0, 7.0, 9.0], 3);
        let expect = [17.0 / 3.0, 7.0, 23.0 / 3.0, 7.0, 19.0 / 3.0, 7.0, 25.0 / 3.0];
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(smooth(&[1.0, 4.0, 2.0], 1), vec![1.0, 4.0, 2.0]);
    }

    #[test]
    fn es_ties_take_earliest_frame() {
        let areas = [9.0, 6.0, 3.0, 3.0, 6.0, 9.0];
        let cycles = detect_cycles(&areas, 1).unwrap();
        assert_eq!((cycles[0].ed_frame, cycles[0].es_frame), (0, 2));
    }
}
