//! Filter bank text files.
//!
//! ```text
//! # optional comment lines
//! K p q
//! h_1[0] h_1[1] … h_1[p·q−1]
//! …
//! h_K[0] …
//! ```
//!
//! One line per filter, entries row-major, shortest round-trip decimals
//! separated by spaces.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{format_f64, read_bytes, write_atomic};
use crate::signal::{FilterBank, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedBank {
    pub bank: FilterBank,
    /// Set when the bank is not normalised (`‖h‖ = 1`, zero means); such
    /// banks are loaded anyway since intermediate iterates are stored too.
    pub warning: Option<String>,
}

pub fn encode(bank: &FilterBank) -> String {
    let shape = bank.kernel_shape();
    let mut s = format!("{} {} {}\n", bank.count(), shape.rows, shape.cols);
    for f in bank.filters() {
        let line: Vec<String> = f.data().iter().map(|v| format_f64(*v)).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_bank(path: &Path, bank: &FilterBank) -> Result<()> {
    write_atomic(path, encode(bank).as_bytes())
}

pub fn read_bank(path: &Path) -> Result<LoadedBank> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::format(path, format!("byte {}", e.valid_up_to()), "not UTF-8"))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| Error::format(path, "line 1", "missing header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(path, format!("line {hline}"), "header must be three integers K p q"))?;
    let [k, p, q] = dims[..] else {
        return Err(Error::format(
            path,
            format!("line {hline}"),
            "header must be three integers K p q",
        ));
    };
    if k == 0 || p == 0 || q == 0 {
        return Err(Error::format(path, format!("line {hline}"), "K, p and q must be positive"));
    }
    let shape = Shape::new(p, q);

    let mut flat = Vec::new();
    let mut filters = 0;
    for (ln, line) in lines {
        let before = flat.len();
        for (c, tok) in line.split_whitespace().enumerate() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::format(path, format!("line {ln}, entry {}", c + 1), format!("not a number: {tok:?}")))?;
            if !v.is_finite() {
                return Err(Error::format(path, format!("line {ln}, entry {}", c + 1), "non-finite value"));
            }
            flat.push(v);
        }
        if flat.len() - before != shape.len() {
            return Err(Error::format(
                path,
                format!("line {ln}"),
                format!("expected {} entries per filter, got {}", shape.len(), flat.len() - before),
            ));
        }
        filters += 1;
    }
    if filters != k {
        return Err(Error::format(
            path,
            "end of file",
            format!("header declares {k} filters, found {filters}"),
        ));
    }
    let bank = FilterBank::from_flat(k, shape, flat)?;
    let warning = (!bank.satisfies_constraints()).then(|| {
        let msg = format!(
            "{}: bank violates the norm/zero-mean constraints by {:e}",
            path.display(),
            bank.constraint_violation()
        );
        log::warn!("{msg}");
        msg
    });
    Ok(LoadedBank { bank, warning })
}
