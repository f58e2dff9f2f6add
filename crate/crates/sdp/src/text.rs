//! Sparse text format for standalone SDP instances.
//!
//! ```text
//! # comment
//! free <nf>
//! nonneg <nl>
//! blocks <n_1> <n_2> ...
//! rows <m>
//! rhs
//! <row> <value>
//! objective
//! <block> <i> <j> <value>
//! constraints
//! <row> <block> <i> <j> <value>
//! end
//! ```
//!
//! `<block>` is `f` (free scalars), `l` (nonnegative scalars) or the 0-based
//! index of a PSD block. Scalars use `i = j = index`; PSD entries are given
//! on the upper triangle and mean "coefficient times X[i][j]". Only nonzero
//! entries are written. Values use Rust's shortest round-trip formatting, so
//! writing and reading back is lossless.

use std::fmt::Write as _;

use thiserror::Error;

use crate::problem::{SdpProblem, VarRef};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing header `{0}`")]
    MissingHeader(&'static str),
}

fn var_tokens(v: VarRef) -> String {
    match v {
        VarRef::Free(i) => format!("f {i} {i}"),
        VarRef::NonNeg(i) => format!("l {i} {i}"),
        VarRef::Psd { block, row, col } => format!("{block} {row} {col}"),
    }
}

pub fn write(p: &SdpProblem) -> String {
    let mut s = String::new();
    s.push_str("# sbarrier-sdp sparse format v1\n");
    let _ = writeln!(s, "free {}", p.n_free);
    let _ = writeln!(s, "nonneg {}", p.n_nonneg);
    s.push_str("blocks");
    for b in &p.blocks {
        let _ = write!(s, " {b}");
    }
    s.push('\n');
    let _ = writeln!(s, "rows {}", p.rows.len());
    s.push_str("rhs\n");
    for (i, r) in p.rhs.iter().enumerate() {
        if *r != 0.0 {
            let _ = writeln!(s, "{i} {r:?}");
        }
    }
    s.push_str("objective\n");
    for (v, c) in &p.objective {
        if *c != 0.0 {
            let _ = writeln!(s, "{} {c:?}", var_tokens(*v));
        }
    }
    s.push_str("constraints\n");
    for (i, row) in p.rows.iter().enumerate() {
        for (v, c) in row {
            if *c != 0.0 {
                let _ = writeln!(s, "{i} {} {c:?}", var_tokens(*v));
            }
        }
    }
    s.push_str("end\n");
    s
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    Header,
    Rhs,
    Objective,
    Constraints,
    End,
}

fn err(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, ParseError> {
    tok.ok_or_else(|| err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| err(line, format!("invalid {what}")))
}

fn var(toks: &mut std::str::SplitWhitespace<'_>, line: usize) -> Result<VarRef, ParseError> {
    let block = toks.next().ok_or_else(|| err(line, "missing block"))?;
    let i: usize = num(toks.next(), line, "row index")?;
    let j: usize = num(toks.next(), line, "column index")?;
    match block {
        "f" => Ok(VarRef::Free(i)),
        "l" => Ok(VarRef::NonNeg(i)),
        b => {
            let k: usize = b.parse().map_err(|_| err(line, format!("invalid block `{b}`")))?;
            Ok(VarRef::psd(k, i, j))
        }
    }
}

pub fn read(text: &str) -> Result<SdpProblem, ParseError> {
    let mut p = SdpProblem::new();
    let mut rows: Option<usize> = None;
    let mut seen_blocks = false;
    let mut section = Section::Header;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let mut toks = l.split_whitespace();
        let head = toks.next().unwrap();
        match head {
            "rhs" | "objective" | "constraints" | "end" => {
                let Some(m) = rows else { return Err(ParseError::MissingHeader("rows")) };
                if !seen_blocks {
                    return Err(ParseError::MissingHeader("blocks"));
                }
                if p.rows.is_empty() {
                    p.rows = vec![Vec::new(); m];
                    p.rhs = vec![0.0; m];
                }
                section = match head {
                    "rhs" => Section::Rhs,
                    "objective" => Section::Objective,
                    "constraints" => Section::Constraints,
                    _ => Section::End,
                };
                continue;
            }
            _ => {}
        }
        match section {
            Section::Header => match head {
                "free" => p.n_free = num(toks.next(), line, "count")?,
                "nonneg" => p.n_nonneg = num(toks.next(), line, "count")?,
                "blocks" => {
                    seen_blocks = true;
                    for t in toks.by_ref() {
                        p.blocks.push(t.parse().map_err(|_| err(line, "invalid block size"))?);
                    }
                }
                "rows" => rows = Some(num(toks.next(), line, "count")?),
                other => return Err(err(line, format!("unknown header `{other}`"))),
            },
            Section::Rhs => {
                let i: usize = head.parse().map_err(|_| err(line, "invalid row index"))?;
                let v: f64 = num(toks.next(), line, "value")?;
                *p.rhs.get_mut(i).ok_or_else(|| err(line, "row index out of range"))? = v;
            }
            Section::Objective => {
                let mut all = l.split_whitespace();
                let v = var(&mut all, line)?;
                let c: f64 = num(all.next(), line, "value")?;
                p.objective.push((v, c));
            }
            Section::Constraints => {
                let i: usize = head.parse().map_err(|_| err(line, "invalid row index"))?;
                let v = var(&mut toks, line)?;
                let c: f64 = num(toks.next(), line, "value")?;
                p.rows.get_mut(i).ok_or_else(|| err(line, "row index out of range"))?.push((v, c));
            }
            Section::End => return Err(err(line, "content after `end`")),
        }
    }
    if rows.is_none() {
        return Err(ParseError::MissingHeader("rows"));
    }
    if p.rows.is_empty() {
        let m = rows.unwrap();
        p.rows = vec![Vec::new(); m];
        p.rhs = vec![0.0; m];
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SdpProblem {
        let mut p = SdpProblem::new();
        let t = p.add_free();
        let s = p.add_nonneg();
        let b = p.add_block(2);
        p.add_row(vec![(VarRef::psd(b, 0, 0), 1.0), (t, -1.0)], 0.0);
        p.add_row(vec![(VarRef::psd(b, 0, 1), 1.0), (s, 0.1)], 1.0 / 3.0);
        p.objective.push((t, 1.0));
        p
    }

    #[test]
    fn write_then_read_is_lossless() {
        let p = sample();
        let text = write(&p);
        assert_eq!(read(&text).unwrap(), p);
    }

    #[test]
    fn reports_line_of_bad_token() {
        let text = "free 1\nnonneg 0\nblocks\nrows 1\nrhs\n0 zz\nend\n";
        assert_eq!(read(text), Err(ParseError::Syntax { line: 6, msg: "invalid value".into() }));
    }

    #[test]
    fn missing_rows_header_is_an_error() {
        assert_eq!(read("free 1\nblocks 2\nrhs\n"), Err(ParseError::MissingHeader("rows")));
    }
}
