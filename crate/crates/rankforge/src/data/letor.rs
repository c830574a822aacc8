//! LETOR-format reading and writing.
//!
//! Line grammar: `<label> qid:<id> <fid>:<value> ... [# comment]`.
//! Labels are integer grades `0..=4`; feature ids are 1-based and may
//! appear sparsely (missing features read as 0.0).  Lines of one query
//! must be contiguous — a qid that reappears after another qid has begun
//! is a corrupt export and rejected.  `#` starts a comment anywhere on a
//! line; blank lines are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Dataset, QueryGroup};
use crate::error::{Error, Result};
use crate::metrics::GRADE_MAX;
use crate::numerics::DenseMatrix;

/// Parse a LETOR file from disk.
pub fn parse_letor(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    parse_letor_str(&text, &path.display().to_string())
}

/// Parse LETOR text; `origin` names the source in error messages.
pub fn parse_letor_str(text: &str, origin: &str) -> Result<Dataset> {
    struct RawGroup {
        qid: String,
        labels: Vec<u32>,
        rows: Vec<Vec<(usize, f64)>>,
    }

    let err = |line_no: usize, msg: String| Error::Data(format!("{origin}:{line_no}: {msg}"));

    let mut raw_groups: Vec<RawGroup> = Vec::new();
    let mut closed_qids: Vec<String> = Vec::new();
    let mut max_fid = 0usize;

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let mut toks = line.split_whitespace();
        let Some(label_tok) = toks.next() else {
            continue; // blank or comment-only line
        };
        let label: u32 = label_tok.parse().map_err(|_| {
            err(line_no, format!("invalid label `{label_tok}` (expected an integer)"))
        })?;
        if label > GRADE_MAX {
            return Err(err(
                line_no,
                format!("label {label} outside the grade range 0..={GRADE_MAX}"),
            ));
        }
        let Some(qid_tok) = toks.next() else {
            return Err(err(line_no, "missing qid field".to_string()));
        };
        let Some(qid) = qid_tok.strip_prefix("qid:") else {
            return Err(err(line_no, format!("expected `qid:<id>`, got `{qid_tok}`")));
        };
        if qid.is_empty() {
            return Err(err(line_no, "empty qid".to_string()));
        }

        let mut row: Vec<(usize, f64)> = Vec::new();
        for tok in toks {
            let Some((fid_str, val_str)) = tok.split_once(':') else {
                return Err(err(line_no, format!("expected `<fid>:<value>`, got `{tok}`")));
            };
            let fid: usize = fid_str
                .parse()
                .map_err(|_| err(line_no, format!("invalid feature id `{fid_str}`")))?;
            if fid == 0 {
                return Err(err(line_no, "feature ids are 1-based".to_string()));
            }
            let val: f64 = val_str
                .parse()
                .map_err(|_| err(line_no, format!("invalid feature value `{val_str}`")))?;
            if !val.is_finite() {
                return Err(err(line_no, format!("non-finite feature value `{val_str}`")));
            }
            if row.iter().any(|&(f, _)| f == fid) {
                return Err(err(line_no, format!("feature id {fid} repeated on one line")));
            }
            max_fid = max_fid.max(fid);
            row.push((fid, val));
        }

        match raw_groups.last_mut() {
            Some(g) if g.qid == qid => {
                g.labels.push(label);
                g.rows.push(row);
            }
            _ => {
                if closed_qids.iter().any(|q| q == qid) {
                    return Err(err(
                        line_no,
                        format!("query `{qid}` reappears after other queries (non-contiguous)"),
                    ));
                }
                if let Some(prev) = raw_groups.last() {
                    closed_qids.push(prev.qid.clone());
                }
                raw_groups.push(RawGroup {
                    qid: qid.to_string(),
                    labels: vec![label],
                    rows: vec![row],
                });
            }
        }
    }

    let dim = max_fid;
    let groups = raw_groups
        .into_iter()
        .map(|g| {
            let mut features = DenseMatrix::zeros(g.rows.len(), dim);
            for (r, row) in g.rows.iter().enumerate() {
                for &(fid, val) in row {
                    features.set(r, fid - 1, val);
                }
            }
            QueryGroup {
                qid: g.qid,
                labels: g.labels,
                features,
            }
        })
        .collect();
    Ok(Dataset {
        groups,
        dim,
        grade_max: GRADE_MAX,
    })
}

/// Render a dataset back to LETOR text.  Every feature column is written
/// explicitly (including zeros), so `parse(write(ds)) == ds`.
pub fn to_letor_string(ds: &Dataset) -> String {
    let mut out = String::new();
    for g in &ds.groups {
        for r in 0..g.len() {
            write!(out, "{} qid:{}", g.labels[r], g.qid).unwrap();
            for c in 0..ds.dim {
                // `{}` prints the shortest decimal that parses back to the
                // same f64.
                write!(out, " {}:{}", c + 1, g.features.get(r, c)).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Write a dataset to disk in LETOR format.
pub fn write_letor(ds: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, to_letor_string(ds))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_line_shape() {
        let text = "2 qid:7 1:0.5 3:1.25 # judged\n0 qid:7 2:-1.0\n";
        let ds = parse_letor_str(text, "mem").unwrap();
        assert_eq!(ds.dim, 3);
        assert_eq!(ds.groups.len(), 1);
        let g = &ds.groups[0];
        assert_eq!(g.qid, "7");
        assert_eq!(g.labels, vec![2, 0]);
        assert_eq!(g.features.row(0), &[0.5, 0.0, 1.25]);
        assert_eq!(g.features.row(1), &[0.0, -1.0, 0.0]);
    }

    #[test]
    fn empty_input_gives_an_empty_dataset() {
        let ds = parse_letor_str("", "mem").unwrap();
        assert!(ds.groups.is_empty());
        assert_eq!(ds.dim, 0);
        let ds2 = parse_letor_str("# only a comment\n\n", "mem").unwrap();
        assert!(ds2.groups.is_empty());
    }

    #[test]
    fn non_contiguous_qid_is_rejected() {
        let text = "1 qid:7 1:1.0\n1 qid:9 1:2.0\n0 qid:7 1:3.0\n";
        match parse_letor_str(text, "mem") {
            Err(Error::Data(msg)) => {
                assert!(msg.contains("mem:3"), "{msg}");
                assert!(msg.contains("non-contiguous"), "{msg}");
            }
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn bad_lines_carry_line_numbers() {
        for (text, needle) in [
            ("x qid:1 1:1.0\n", "invalid label"),
            ("9 qid:1 1:1.0\n", "grade range"),
            ("1 1:1.0\n", "qid"),
            ("1 qid:1 0:1.0\n", "1-based"),
            ("1 qid:1 1:abc\n", "invalid feature value"),
            ("1 qid:1 1:inf\n", "non-finite"),
            ("1 qid:1 1:1.0 1:2.0\n", "repeated"),
            ("1 qid:1 feature\n", "<fid>:<value>"),
        ] {
            match parse_letor_str(text, "mem") {
                Err(Error::Data(msg)) => {
                    assert!(msg.contains("mem:1"), "missing location in: {msg}");
                    assert!(msg.contains(needle), "expected `{needle}` in: {msg}");
                }
                other => panic!("expected data error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn write_then_parse_is_identity() {
        let text = "2 qid:a 1:0.1 3:0.30000000000000004\n\
                    0 qid:a 2:-7.5\n\
                    4 qid:b 1:1e-300 2:123456.789 3:0.0\n";
        let ds = parse_letor_str(text, "mem").unwrap();
        let round = parse_letor_str(&to_letor_string(&ds), "mem2").unwrap();
        assert_eq!(round, ds);
    }

    #[test]
    fn qids_may_be_arbitrary_tokens() {
        let text = "1 qid:query-17.b 1:1.0\n";
        let ds = parse_letor_str(text, "mem").unwrap();
        assert_eq!(ds.groups[0].qid, "query-17.b");
    }
}
