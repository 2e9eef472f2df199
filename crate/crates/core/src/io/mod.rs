//! File formats for signals, filter banks and trajectories.
//!
//! Every writer goes through [`write_atomic`]: the bytes land in a
//! temporary file in the target directory which is then renamed over the
//! destination.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub mod bank;
pub mod signal;
pub mod trajectory;

pub use bank::{read_bank, write_bank, LoadedBank};
pub use signal::{read_signal, write_signal, SignalFormat};
pub use trajectory::{read_trajectory, write_trajectory};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    // Temporary files default to owner-only access; results are ordinary files.
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o644));
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Shortest decimal that parses back to the same bits.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Little-endian cursor over a byte buffer with offset-aware errors.
pub(crate) struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Reader { path, bytes, pos: 0 }
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> Error {
        Error::format(self.path, format!("byte {}", self.pos), message)
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(format!(
                "truncated: need {n} more bytes, {} left",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn expect_magic(&mut self, magic: &[u8]) -> Result<()> {
        if self.take(magic.len()).ok() != Some(magic) {
            self.pos = 0;
            return Err(self.error("bad magic"));
        }
        Ok(())
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// A `u64` that must fit a sane in-memory count.
    pub(crate) fn count(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&n| n <= self.bytes.len() * 8 + 1)
            .ok_or_else(|| self.error(format!("implausible count {v}")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn finite_f64(&mut self) -> Result<f64> {
        let at = self.pos;
        let v = self.f64()?;
        if !v.is_finite() {
            return Err(Error::format(self.path, format!("byte {at}"), "non-finite value"));
        }
        Ok(v)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}
