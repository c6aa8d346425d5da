//! Sparse SDPA (`.dat-s`) export.
//!
//! Variables are the moment ids (1-based), and the problem reads
//! `minimize cᵀy  s.t.  Σ y_i F_i - F0 ⪰ 0`. Block 1 is the moment matrix.
//! Block 2 is diagonal and holds each equality row `a·y = b` as the pair
//! `a·y - b ≥ 0`, `b - a·y ≥ 0`. Maximization problems are exported with a
//! negated objective.

use std::io::Write;

use num_traits::Zero;

use crate::error::Result;
use crate::poly::{rational_to_f64, Rational};

use super::problem::{MomentProblem, PsdEntry, Sense};

fn fmt_value(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{:e}", rational_to_f64(q))
    }
}

/// Writes `problem` in sparse SDPA format. `comments` are emitted as leading
/// `*` lines.
pub fn write_sdpa<W: Write>(problem: &MomentProblem, comments: &[String], out: &mut W) -> Result<()> {
    let m = problem.index.num_moments();
    let n = problem.block_dim();
    let nrows = problem.rows.len();
    for c in comments {
        for line in c.lines() {
            writeln!(out, "* {line}")?;
        }
    }
    let sense = match problem.sense {
        Sense::Minimize => "minimize",
        Sense::Maximize => "maximize (objective negated below)",
    };
    writeln!(out, "* sense: {sense}")?;
    writeln!(out, "{m} = mDIM")?;
    writeln!(out, "2 = nBLOCK")?;
    writeln!(out, "{n} -{} = bLOCKsTRUCT", 2 * nrows)?;

    let mut c = vec![Rational::from_integer(0.into()); m];
    for (id, v) in &problem.objective {
        c[*id] = match problem.sense {
            Sense::Minimize => v.clone(),
            Sense::Maximize => -v.clone(),
        };
    }
    let cline: Vec<String> = c.iter().map(fmt_value).collect();
    writeln!(out, "{}", cline.join(" "))?;

    // (matno, blkno, i, j, value) with 1-based indices
    let mut entries: Vec<(usize, usize, usize, usize, Rational)> = Vec::new();
    for i in 0..n {
        for j in i..n {
            match problem.entry(i, j) {
                PsdEntry::Zero => {}
                PsdEntry::One => entries.push((0, 1, i + 1, j + 1, Rational::from_integer((-1).into()))),
                PsdEntry::Moment(id) => {
                    entries.push((id + 1, 1, i + 1, j + 1, Rational::from_integer(1.into())))
                }
            }
        }
    }
    for (r, row) in problem.rows.iter().enumerate() {
        let (pos, neg) = (2 * r + 1, 2 * r + 2);
        for (id, a) in &row.coeffs {
            entries.push((id + 1, 2, pos, pos, a.clone()));
            entries.push((id + 1, 2, neg, neg, -a.clone()));
        }
        if !row.rhs.is_zero() {
            entries.push((0, 2, pos, pos, row.rhs.clone()));
            entries.push((0, 2, neg, neg, -row.rhs.clone()));
        }
    }
    entries.sort_by_key(|e| (e.0, e.1, e.2, e.3));
    for (mat, blk, i, j, v) in entries {
        writeln!(out, "{mat} {blk} {i} {j} {}", fmt_value(&v))?;
    }
    Ok(())
}

/// The export as a string.
pub fn to_sdpa_string(problem: &MomentProblem, comments: &[String]) -> String {
    let mut buf = Vec::new();
    write_sdpa(problem, comments, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}
