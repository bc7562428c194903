// Exhaustive cutoff sweep used as the calibration oracle. Each candidate is
// scored from scratch with its own confusion count.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepChoice {
    pub cutoff: f64,
    pub feasible: bool,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

pub fn count(cohort: &[(f64, bool)], cutoff: f64) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for &(v, normal) in cohort {
        match (v > cutoff, normal) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    (tp, fp, fn_, tn)
}

pub fn sweep(cohort: &[(f64, bool)], floor: f64) -> SweepChoice {
    let mut candidates: Vec<f64> = cohort.iter().map(|c| c.0).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut feasible: Vec<(f64, (u64, u64, u64, u64))> = candidates
        .iter()
        .map(|&c| (c, count(cohort, c)))
        .filter(|(_, (tp, fp, _, _))| tp + fp > 0 && *tp as f64 / (tp + fp) as f64 >= floor)
        .collect();
    // sensitivity desc, precision desc (exact), cutoff desc
    feasible.sort_by(|(ca, a), (cb, b)| {
        let sens = (b.0 * (a.0 + a.2)).cmp(&(a.0 * (b.0 + b.2)));
        let prec = (b.0 as u128 * (a.0 + a.1) as u128).cmp(&(a.0 as u128 * (b.0 + b.1) as u128));
        sens.then(prec).then(cb.total_cmp(ca))
    });
    match feasible.first() {
        Some(&(cutoff, (tp, fp, fn_, tn))) => SweepChoice {
            cutoff,
            feasible: true,
            tp,
            fp,
            fn_,
            tn,
        },
        None => {
            let cutoff = *candidates.last().unwrap();
            let (tp, fp, fn_, tn) = count(cohort, cutoff);
            SweepChoice {
                cutoff,
                feasible: false,
                tp,
                fp,
                fn_,
                tn,
            }
        }
    }
}
