//! Text run-length sidecar format for chamber masks.
//!
//! Each record is two lines: a header `chamber,frame,rows,cols` and a line of
//! comma-separated run lengths over the row-major pixels, alternating
//! zero-run / one-run and always starting with a zero-run (possibly 0).
//! Only the leading run may be zero. Runs sum to rows × cols. Every line ends
//! with `\n`. A sidecar file is a concatenation of records.

use super::mask::{Chamber, ChamberMask};
use super::SegmentationError;

pub fn encode_runs(bits: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0usize;
    for &b in bits {
        if b == current {
            len += 1;
        } else {
            runs.push(len);
            current = b;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

/// One record, header and runs, each newline-terminated.
pub fn encode_mask(mask: &ChamberMask) -> String {
    let runs = encode_runs(mask.bits())
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "{},{},{},{}\n{}\n",
        mask.chamber(),
        mask.frame_index(),
        mask.rows(),
        mask.cols(),
        runs
    )
}

pub fn encode_sidecar<'a>(masks: impl IntoIterator<Item = &'a ChamberMask>) -> String {
    masks.into_iter().map(encode_mask).collect()
}

fn malformed(line: usize, reason: impl Into<String>) -> SegmentationError {
    SegmentationError::MalformedSidecar {
        line,
        reason: reason.into(),
    }
}

fn parse_count(s: &str, line: usize) -> Result<usize, SegmentationError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0')) {
        return Err(malformed(line, format!("not a canonical count: {s:?}")));
    }
    s.parse()
        .map_err(|_| malformed(line, format!("count out of range: {s:?}")))
}

fn decode_record(header: &str, runs: &str, line: usize) -> Result<ChamberMask, SegmentationError> {
    let fields: Vec<&str> = header.split(',').collect();
    let [chamber, frame, rows, cols] = fields.as_slice() else {
        return Err(malformed(line, "header must be chamber,frame,rows,cols"));
    };
    let chamber: Chamber = chamber.parse().map_err(|e: String| malformed(line, e))?;
    let frame = parse_count(frame, line)?;
    let rows = parse_count(rows, line)?;
    let cols = parse_count(cols, line)?;
    let total = rows
        .checked_mul(cols)
        .filter(|n| *n > 0)
        .ok_or_else(|| malformed(line, "rows × cols must be positive"))?;

    let mut bits = Vec::with_capacity(total);
    let mut value = false;
    for (i, tok) in runs.split(',').enumerate() {
        let n = parse_count(tok, line + 1)?;
        if n == 0 && i > 0 {
            return Err(malformed(line + 1, "zero-length run after the first"));
        }
        if bits.len() + n > total {
            return Err(malformed(line + 1, "runs exceed rows × cols"));
        }
        bits.extend(std::iter::repeat_n(value, n));
        value = !value;
    }
    if bits.len() != total {
        return Err(malformed(line + 1, "runs do not cover rows × cols"));
    }
    ChamberMask::new(chamber, frame, rows, cols, bits)
}

/// Decodes exactly one record.
pub fn decode_mask(record: &str) -> Result<ChamberMask, SegmentationError> {
    let mut masks = decode_sidecar(record)?;
    if masks.len() != 1 {
        return Err(malformed(1, format!("expected one record, found {}", masks.len())));
    }
    Ok(masks.remove(0))
}

pub fn decode_sidecar(text: &str) -> Result<Vec<ChamberMask>, SegmentationError> {
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(malformed(text.lines().count(), "missing final newline"));
    }
    let lines: Vec<&str> = text.split_terminator('\n').collect();
    if lines.len() % 2 == 1 {
        return Err(malformed(lines.len(), "header without runs line"));
    }
    lines
        .chunks_exact(2)
        .enumerate()
        .map(|(i, pair)| decode_record(pair[0], pair[1], 2 * i + 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_single_run() {
        let m = ChamberMask::from_fn(Chamber::Lv, 0, 2, 2, |_, _| true);
        assert_eq!(encode_mask(&m), "LV,0,2,2\n0,4\n");
    }

    #[test]
    fn empty_is_zero_run_only() {
        let m = ChamberMask::empty(Chamber::La, 3, 2, 2);
        assert_eq!(encode_mask(&m), "LA,3,2,2\n4\n");
        assert_eq!(decode_mask("LA,3,2,2\n4\n").unwrap(), m);
    }

    #[test]
    fn mixed_runs() {
        let m = ChamberMask::from_fn(Chamber::Lv, 1, 2, 3, |r, c| r == 0 && c > 0 || r == 1 && c == 2);
        assert_eq!(encode_mask(&m), "LV,1,2,3\n1,2,2,1\n");
        assert_eq!(decode_mask(&encode_mask(&m)).unwrap(), m);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "LV,0,2,2\n0,3\n",
            "LV,0,2,2\n0,5\n",
            "LV,0,2,2\n1,0,3\n",
            "RV,0,2,2\n4\n",
            "LV,0,2\n4\n",
            "LV,0,2,2\n4",
            "LV,0,2,2\n",
            "LV,0,2,2\n04\n",
            "LV,0,0,2\n0\n",
            "LV,0,2,2\n-1,5\n",
            "LV,0,2,2\n 4\n",
        ] {
            assert!(
                matches!(decode_sidecar(bad), Err(SegmentationError::MalformedSidecar { .. })),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn sidecar_of_several_records() {
        let a = ChamberMask::from_fn(Chamber::Lv, 0, 3, 3, |r, c| r == c);
        let b = ChamberMask::from_fn(Chamber::Lv, 1, 3, 3, |r, _| r == 1);
        let text = encode_sidecar([&a, &b]);
        assert_eq!(decode_sidecar(&text).unwrap(), vec![a, b]);
        assert!(decode_sidecar("").unwrap().is_empty());
    }
}
