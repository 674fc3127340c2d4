//! File formats: Matrix Market coordinate pattern for biadjacency matrices,
//! and one-sign-per-line label files.

use crate::model::{Biadjacency, LabelVector, ModelError};
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoFormatError {
    #[error("bad Matrix Market banner: {0}")]
    BadBanner(String),
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("expected {expected} entries, file ends after {got}")]
    TruncatedEntries { got: usize, expected: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub const MATRIX_MARKET_BANNER: &str = "%%MatrixMarket matrix coordinate pattern general";

/// Writes the coordinate pattern form with 1-based indices, rows in order.
pub fn write_matrix_market<W: Write>(a: &Biadjacency, mut w: W) -> io::Result<()> {
    writeln!(w, "{MATRIX_MARKET_BANNER}")?;
    writeln!(w, "{} {} {}", a.n1(), a.n2(), a.nnz())?;
    for (i, row) in a.rows().enumerate() {
        for &c in row {
            writeln!(w, "{} {}", i + 1, c + 1)?;
        }
    }
    Ok(())
}

/// Reads a coordinate pattern file. Entries may come in any order; duplicates
/// are rejected by the matrix invariants.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<Biadjacency, IoFormatError> {
    let mut lines = r.lines().enumerate();
    let (_, banner) = lines
        .next()
        .ok_or_else(|| IoFormatError::BadBanner("empty file".into()))?;
    let banner = banner?;
    let fields: Vec<String> = banner.split_whitespace().map(str::to_lowercase).collect();
    if fields.len() < 5
        || !fields[0].eq_ignore_ascii_case("%%MatrixMarket")
        || fields[1] != "matrix"
        || fields[2] != "coordinate"
        || fields[3] != "pattern"
        || fields[4] != "general"
    {
        return Err(IoFormatError::BadBanner(banner));
    }

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut rows: Vec<Vec<u32>> = Vec::new();
    let mut seen = 0usize;
    for (idx, line) in lines {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        match dims {
            None => {
                let mut next_dim = |name: &str| -> Result<usize, IoFormatError> {
                    parts
                        .next()
                        .ok_or_else(|| IoFormatError::BadLine {
                            line: line_no,
                            reason: format!("missing {name}"),
                        })?
                        .parse()
                        .map_err(|_| IoFormatError::BadLine {
                            line: line_no,
                            reason: format!("unparseable {name}"),
                        })
                };
                let n1 = next_dim("row count")?;
                let n2 = next_dim("column count")?;
                let nnz = next_dim("nonzero count")?;
                if parts.next().is_some() {
                    return Err(IoFormatError::BadLine {
                        line: line_no,
                        reason: "trailing fields after dimensions".into(),
                    });
                }
                rows = vec![Vec::new(); n1];
                dims = Some((n1, n2, nnz));
            }
            Some((n1, n2, nnz)) => {
                let parse = |s: Option<&str>| -> Result<usize, IoFormatError> {
                    s.ok_or_else(|| IoFormatError::BadLine {
                        line: line_no,
                        reason: "expected two indices".into(),
                    })?
                    .parse()
                    .map_err(|_| IoFormatError::BadLine {
                        line: line_no,
                        reason: "unparseable index".into(),
                    })
                };
                let i = parse(parts.next())?;
                let j = parse(parts.next())?;
                if parts.next().is_some() {
                    return Err(IoFormatError::BadLine {
                        line: line_no,
                        reason: "trailing fields after entry".into(),
                    });
                }
                if i == 0 || i > n1 || j == 0 || j > n2 {
                    return Err(IoFormatError::BadLine {
                        line: line_no,
                        reason: format!("index ({i}, {j}) out of range ({n1} x {n2})"),
                    });
                }
                if seen == nnz {
                    return Err(IoFormatError::BadLine {
                        line: line_no,
                        reason: format!("more than the declared {nnz} entries"),
                    });
                }
                rows[i - 1].push((j - 1) as u32);
                seen += 1;
            }
        }
    }
    let (n1, n2, nnz) = dims.ok_or_else(|| IoFormatError::BadLine {
        line: 1,
        reason: "missing dimension line".into(),
    })?;
    if seen != nnz {
        return Err(IoFormatError::TruncatedEntries {
            got: seen,
            expected: nnz,
        });
    }
    Ok(Biadjacency::from_rows(n1, n2, rows)?)
}

/// One `+1` / `-1` per line.
pub fn write_labels<W: Write>(labels: &LabelVector, mut w: W) -> io::Result<()> {
    for &s in labels.signs() {
        writeln!(w, "{}", if s == 1 { "+1" } else { "-1" })?;
    }
    Ok(())
}

pub fn read_labels<R: BufRead>(r: R) -> Result<LabelVector, IoFormatError> {
    let mut signs = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed {
            "+1" => signs.push(1),
            "-1" => signs.push(-1),
            other => {
                return Err(IoFormatError::BadLine {
                    line: idx + 1,
                    reason: format!("expected +1 or -1, got {other:?}"),
                })
            }
        }
    }
    Ok(LabelVector::from_signs(signs)?)
}
