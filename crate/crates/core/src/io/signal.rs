//! Signal files.
//!
//! * CSV: one line per row, comma-separated, shortest round-trip decimals.
//!   A 1D signal of length `m` is `m` lines of one value.
//! * PGM: binary 16-bit `P5` on write. Stored level `q` maps to
//!   `lo + (hi − lo)·q/maxval`, where `lo hi` come from a
//!   `# qreg-range lo hi` comment (default `0 1`). Writing quantises to
//!   65536 levels between the signal's min and max. Reading also accepts
//!   8-bit `P5` and ASCII `P2`.
//! * f64 binary: `b"QREGF64\n"`, rows and cols as `u64` LE, then
//!   `rows·cols` `f64` LE values in row-major order. Lossless.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{format_f64, read_bytes, write_atomic, Reader};
use crate::signal::{Shape, Signal};

const F64_MAGIC: &[u8] = b"QREGF64\n";
const RANGE_TAG: &str = "qreg-range";
const PGM_MAX: u32 = 65535;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalFormat {
    Csv,
    Pgm,
    F64,
}

impl SignalFormat {
    /// From the file extension: `csv`, `pgm`, or `f64`/`bin`.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("csv") => Ok(SignalFormat::Csv),
            Some("pgm") => Ok(SignalFormat::Pgm),
            Some("f64") | Some("bin") => Ok(SignalFormat::F64),
            _ => Err(Error::Parameter(format!(
                "cannot infer signal format of {} (use .csv, .pgm or .f64)",
                path.display()
            ))),
        }
    }
}

pub fn write_signal(path: &Path, u: &Signal, format: SignalFormat) -> Result<()> {
    write_atomic(path, &encode(u, format))
}

pub fn read_signal(path: &Path, format: SignalFormat) -> Result<Signal> {
    let bytes = read_bytes(path)?;
    match format {
        SignalFormat::Csv => parse_csv(path, &bytes),
        SignalFormat::Pgm => parse_pgm(path, &bytes),
        SignalFormat::F64 => parse_f64(path, &bytes),
    }
}

pub fn encode(u: &Signal, format: SignalFormat) -> Vec<u8> {
    match format {
        SignalFormat::Csv => {
            let mut s = String::new();
            for row in u.data().chunks(u.cols()) {
                let line: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
                s.push_str(&line.join(","));
                s.push('\n');
            }
            s.into_bytes()
        }
        SignalFormat::Pgm => {
            let lo = u.data().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = u.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            let mut out = format!(
                "P5\n# {RANGE_TAG} {} {}\n{} {}\n{PGM_MAX}\n",
                format_f64(lo),
                format_f64(hi),
                u.cols(),
                u.rows()
            )
            .into_bytes();
            for v in u.data() {
                let q = if span > 0.0 {
                    ((v - lo) / span * PGM_MAX as f64).round() as u16
                } else {
                    0
                };
                out.extend_from_slice(&q.to_be_bytes());
            }
            out
        }
        SignalFormat::F64 => {
            let mut out = F64_MAGIC.to_vec();
            out.extend_from_slice(&(u.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(u.cols() as u64).to_le_bytes());
            for v in u.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
    }
}

/// The value a PGM round trip produces for `v` on range `[lo, hi]`.
pub fn pgm_quantize(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        lo + (hi - lo) * ((v - lo) / (hi - lo) * PGM_MAX as f64).round() / PGM_MAX as f64
    } else {
        lo
    }
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<Signal> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::format(path, format!("byte {}", e.valid_up_to()), "not UTF-8"))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let at = |c: usize| format!("line {}, column {}", i + 1, c + 1);
        let mut n = 0;
        for (c, field) in line.split(',').enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(path, at(c), format!("not a number: {:?}", field.trim())))?;
            if !v.is_finite() {
                return Err(Error::format(path, at(c), "non-finite value"));
            }
            data.push(v);
            n += 1;
        }
        match cols {
            None => cols = Some(n),
            Some(expected) if expected != n => {
                return Err(Error::format(
                    path,
                    format!("line {}", i + 1),
                    format!("expected {expected} values, got {n}"),
                ));
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::format(path, "line 1", "empty file"))?;
    Signal::new(Shape::new(rows, cols), data)
}

fn parse_f64(path: &Path, bytes: &[u8]) -> Result<Signal> {
    let mut r = Reader::new(path, bytes);
    r.expect_magic(F64_MAGIC)?;
    let rows = r.count()?;
    let cols = r.count()?;
    if rows == 0 || cols == 0 {
        return Err(r.error("empty shape"));
    }
    let n = rows.checked_mul(cols).ok_or_else(|| r.error("shape overflow"))?;
    if n > bytes.len() / 8 {
        return Err(r.error(format!("truncated: {rows}x{cols} values declared")));
    }
    let data = (0..n).map(|_| r.finite_f64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Signal::new(Shape::new(rows, cols), data)
}

/// Header tokens of a PNM file, with the byte offset after the last one
/// and any range comment seen.
struct PgmHeader {
    tokens: Vec<u64>,
    offset: usize,
    range: Option<(f64, f64)>,
}

fn pgm_header(path: &Path, bytes: &[u8]) -> Result<PgmHeader> {
    let mut pos = 2;
    let mut tokens = Vec::new();
    let mut range = None;
    while tokens.len() < 3 {
        match bytes.get(pos) {
            None => return Err(Error::format(path, format!("byte {pos}"), "truncated header")),
            Some(b'#') => {
                let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
                let comment = String::from_utf8_lossy(&bytes[pos + 1..end]);
                let mut parts = comment.split_whitespace();
                if parts.next() == Some(RANGE_TAG) {
                    let lo = parts.next().and_then(|s| s.parse::<f64>().ok());
                    let hi = parts.next().and_then(|s| s.parse::<f64>().ok());
                    match (lo, hi) {
                        (Some(lo), Some(hi)) if lo.is_finite() && hi.is_finite() && hi >= lo => range = Some((lo, hi)),
                        _ => return Err(Error::format(path, format!("byte {pos}"), "malformed range comment")),
                    }
                }
                pos = end;
            }
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(b) if b.is_ascii_digit() => {
                let start = pos;
                while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                    pos += 1;
                }
                let tok = std::str::from_utf8(&bytes[start..pos]).expect("digits");
                tokens.push(
                    tok.parse()
                        .map_err(|_| Error::format(path, format!("byte {start}"), "number too large"))?,
                );
            }
            Some(_) => return Err(Error::format(path, format!("byte {pos}"), "unexpected character in header")),
        }
    }
    Ok(PgmHeader {
        tokens,
        offset: pos,
        range,
    })
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<Signal> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(Error::format(path, "byte 0", "not a P2/P5 PGM file")),
    };
    let header = pgm_header(path, bytes)?;
    let (cols, rows, maxval) = (header.tokens[0] as usize, header.tokens[1] as usize, header.tokens[2]);
    if cols == 0 || rows == 0 {
        return Err(Error::format(path, "header", "empty image"));
    }
    if maxval == 0 || maxval > PGM_MAX as u64 {
        return Err(Error::format(path, "header", format!("maxval {maxval} outside 1..=65535")));
    }
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(path, "header", "shape overflow"))?;
    let (lo, hi) = header.range.unwrap_or((0.0, 1.0));
    let scale = |q: u64, at: usize| -> Result<f64> {
        if q > maxval {
            return Err(Error::format(
                path,
                format!("byte {at}"),
                format!("level {q} exceeds maxval {maxval}"),
            ));
        }
        Ok(lo + (hi - lo) * q as f64 / maxval as f64)
    };
    let mut data = Vec::with_capacity(n.min(bytes.len()));
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = header.offset + 1;
        let width = if maxval > 255 { 2 } else { 1 };
        let need = n
            .checked_mul(width)
            .ok_or_else(|| Error::format(path, "header", "shape overflow"))?;
        if bytes.len() < start || bytes.len() - start < need {
            return Err(Error::format(
                path,
                format!("byte {}", bytes.len()),
                format!("truncated raster: need {need} bytes"),
            ));
        }
        for i in 0..n {
            let at = start + i * width;
            let q = if width == 2 {
                u16::from_be_bytes([bytes[at], bytes[at + 1]]) as u64
            } else {
                bytes[at] as u64
            };
            data.push(scale(q, at)?);
        }
    } else {
        let mut pos = header.offset;
        for _ in 0..n {
            while bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
                pos += 1;
            }
            let start = pos;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
            if start == pos {
                return Err(Error::format(path, format!("byte {pos}"), "expected a pixel value"));
            }
            let q: u64 = std::str::from_utf8(&bytes[start..pos])
                .expect("digits")
                .parse()
                .map_err(|_| Error::format(path, format!("byte {start}"), "pixel value too large"))?;
            data.push(scale(q, start)?);
        }
    }
    Signal::new(Shape::new(rows, cols), data)
}
