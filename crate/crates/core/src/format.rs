//! Plain-text lattice files.
//!
//! ```text
//! mrf <rows> <cols> <frames>      obs <rows> <cols> <frames>
//! +1 -1 +1 ...                    1.2345678901234567e0 ...
//! ```
//!
//! After the header come `rows * frames` lines of `cols` space-separated
//! values, frames outermost. Spins are written `+1`/`-1`; observations with
//! 17 significant digits. Blank lines are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{LatticeDims, ObservedField, SpinField};
use crate::scalar::Real;

pub const SPIN_HEADER: &str = "mrf";
pub const OBS_HEADER: &str = "obs";

fn header(tag: &str, d: &LatticeDims) -> String {
    format!("{tag} {} {} {}\n", d.rows, d.cols, d.frames)
}

pub fn format_spins(z: &SpinField) -> String {
    let d = z.dims();
    let mut out = header(SPIN_HEADER, &d);
    for row in z.values().chunks(d.cols) {
        let line: Vec<&str> = row.iter().map(|&s| if s > 0 { "+1" } else { "-1" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn format_obs<T: Real>(y: &ObservedField<T>) -> String {
    let d = y.dims();
    let mut out = header(OBS_HEADER, &d);
    for row in y.values().chunks(d.cols) {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            write!(out, "{:.16e}", v.to_f64_lossy()).expect("write to string");
        }
        out.push('\n');
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Non-blank lines with 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn parse_body<V>(
    text: &str,
    tag: &str,
    mut cell: impl FnMut(&str) -> std::result::Result<V, String>,
) -> Result<(LatticeDims, Vec<V>)> {
    let mut it = lines(text);
    let (hl, head) = it.next().ok_or_else(|| perr(1, "empty file"))?;
    let parts: Vec<&str> = head.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != tag {
        return Err(perr(hl, format!("expected header `{tag} <rows> <cols> <frames>`")));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| perr(hl, format!("bad dimension `{s}`")));
    let dims = LatticeDims::new(num(parts[1])?, num(parts[2])?, num(parts[3])?).map_err(|e| perr(hl, e.to_string()))?;
    let want_rows = dims.rows * dims.frames;
    let mut values = Vec::with_capacity(dims.site_count());
    let mut rows = 0;
    let mut last = hl;
    for (ln, line) in it {
        last = ln;
        if rows == want_rows {
            return Err(perr(ln, format!("more than {want_rows} rows")));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(cell(tok).map_err(|m| perr(ln, m))?);
        }
        let got = values.len() - before;
        if got != dims.cols {
            return Err(perr(ln, format!("expected {} values, found {got}", dims.cols)));
        }
        rows += 1;
    }
    if rows != want_rows {
        return Err(perr(last + 1, format!("expected {want_rows} rows, found {rows}")));
    }
    Ok((dims, values))
}

pub fn parse_spins(text: &str) -> Result<SpinField> {
    let (dims, v) = parse_body(text, SPIN_HEADER, |t| match t {
        "+1" | "1" => Ok(1i8),
        "-1" => Ok(-1i8),
        _ => Err(format!("bad spin `{t}`")),
    })?;
    SpinField::new(dims, v)
}

pub fn parse_obs<T: Real>(text: &str) -> Result<ObservedField<T>> {
    let (dims, v) = parse_body(text, OBS_HEADER, |t| {
        let x: f64 = t.parse().map_err(|_| format!("bad number `{t}`"))?;
        if !x.is_finite() {
            return Err(format!("non-finite value `{t}`"));
        }
        T::from_f64(x).ok_or_else(|| format!("value `{t}` out of range"))
    })?;
    ObservedField::new(dims, v)
}

pub fn read_spins(path: impl AsRef<Path>) -> Result<SpinField> {
    parse_spins(&std::fs::read_to_string(path)?)
}

pub fn read_obs<T: Real>(path: impl AsRef<Path>) -> Result<ObservedField<T>> {
    parse_obs(&std::fs::read_to_string(path)?)
}

pub fn write_spins(path: impl AsRef<Path>, z: &SpinField) -> Result<()> {
    Ok(std::fs::write(path, format_spins(z))?)
}

pub fn write_obs<T: Real>(path: impl AsRef<Path>, y: &ObservedField<T>) -> Result<()> {
    Ok(std::fs::write(path, format_obs(y))?)
}
