//! Shared CSV formatting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Fixed 17-significant-digit rendering, stable across runs and platforms.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub(crate) fn io_error(path: &Path, err: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

/// Writes `body` to `path` after `preamble` lines, each prefixed with `# `.
pub fn write_with_preamble(path: &Path, preamble: &[String], body: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        out.write_all(body.as_bytes())?;
        out.flush()
    };
    write().map_err(|e| io_error(path, e))
}
