//! Report files.
//!
//! A run writes one JSON verdict per experiment, a flat CSV table for each
//! sweep-shaped experiment, and a single `manifest.json`.  Operator dumps use
//! a plain text format: a header line with the dimension, a basis tag, and a
//! hermitian flag, followed by the matrix entries row-major as real/imaginary
//! decimal pairs.  All numeric text is written with 17 significant digits, so
//! reloading a dump reproduces every entry bit for bit.  Files appear
//! atomically: content goes to a sibling temp file first and is renamed into
//! place, so a crashed run never leaves a partial report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::ExperimentVerdict;
use crate::coupling::FourPointKernel;
use crate::error::{Error, Result};
use crate::fock::FockBasis;

/// Writes `bytes` to `path` through a temp file plus rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes a verdict to `<dir>/<stem>.json`.  The stem comes from the
/// experiment selector, which may differ from the verdict's internal name.
pub fn write_verdict(dir: &Path, stem: &str, verdict: &ExperimentVerdict) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(verdict)
        .map_err(|e| Error::Config(format!("verdict serialization: {e}")))?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Decimal text with 17 significant digits; parses back to the same bits.
pub fn float_cell(value: f64) -> String {
    format!("{value:.16e}")
}

/// Flat numeric table attached to a sweep-shaped experiment.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Table {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes the table to `<dir>/<name>.csv`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = dir.join(format!("{name}.csv"));
        write_atomic(&path, self.render().as_bytes())?;
        Ok(path)
    }
}

/// Short hash identifying the basis a dumped operator acts on.
pub fn basis_tag(basis: &FockBasis) -> String {
    let grid = basis.grid();
    let mut hasher = Sha256::new();
    hasher.update(b"phi4lab-basis");
    hasher.update(grid.mass().to_bits().to_le_bytes());
    hasher.update(grid.box_length().to_bits().to_le_bytes());
    hasher.update(grid.cutoff().to_le_bytes());
    hasher.update((basis.dimension() as u64).to_le_bytes());
    let bytes = hasher.finalize();
    let mut out = String::with_capacity(16);
    for b in &bytes[..8] {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Parsed first line of a matrix dump.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixHeader {
    pub dim: usize,
    pub basis: String,
    pub hermitian: bool,
}

/// Writes a square operator to `path` in the documented dump format.
pub fn write_matrix(
    path: &Path,
    matrix: &DMatrix<Complex64>,
    basis: &str,
    hermitian: bool,
) -> Result<()> {
    let dim = matrix.nrows();
    if matrix.ncols() != dim {
        return Err(Error::InvalidParameter(format!(
            "operator dump needs a square matrix, got {}x{}",
            dim,
            matrix.ncols()
        )));
    }
    let mut text = format!(
        "phi4lab-matrix dim={dim} basis={basis} hermitian={}\n",
        u8::from(hermitian)
    );
    for r in 0..dim {
        for c in 0..dim {
            if c > 0 {
                text.push(' ');
            }
            let z = matrix[(r, c)];
            let _ = write!(text, "{:.16e} {:.16e}", z.re, z.im);
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

fn header_field<'a>(token: Option<&'a str>, key: &str, path: &Path) -> Result<&'a str> {
    token
        .and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| {
            Error::Config(format!("{}: malformed dump header, expected {key}=...", path.display()))
        })
}

fn parse_float(token: &str, path: &Path, line: usize) -> Result<f64> {
    token.parse::<f64>().map_err(|e| {
        Error::Config(format!("{}, line {line}: bad float {token:?}: {e}", path.display()))
    })
}

/// Reads a matrix dump back; inverse of [`write_matrix`] down to the bits.
pub fn read_matrix(path: &Path) -> Result<(MatrixHeader, DMatrix<Complex64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty dump file", path.display())))?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("phi4lab-matrix") {
        return Err(Error::Config(format!(
            "{}: not a matrix dump (bad magic)",
            path.display()
        )));
    }
    let dim: usize = header_field(tokens.next(), "dim", path)?
        .parse()
        .map_err(|e| Error::Config(format!("{}: bad dimension: {e}", path.display())))?;
    if dim > 10_000 {
        return Err(Error::Config(format!(
            "{}: implausible dimension {dim} in dump header",
            path.display()
        )));
    }
    let basis = header_field(tokens.next(), "basis", path)?.to_string();
    let hermitian = match header_field(tokens.next(), "hermitian", path)? {
        "0" => false,
        "1" => true,
        other => {
            return Err(Error::Config(format!(
                "{}: hermitian flag must be 0 or 1, got {other}",
                path.display()
            )))
        }
    };

    let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
    for r in 0..dim {
        let line = lines.next().ok_or_else(|| {
            Error::Config(format!("{}: expected {dim} matrix rows, got {r}", path.display()))
        })?;
        let mut tokens = line.split_whitespace();
        for c in 0..dim {
            let re = parse_float(
                tokens.next().ok_or_else(|| {
                    Error::Config(format!("{}, row {r}: short line", path.display()))
                })?,
                path,
                r + 2,
            )?;
            let im = parse_float(
                tokens.next().ok_or_else(|| {
                    Error::Config(format!("{}, row {r}: short line", path.display()))
                })?,
                path,
                r + 2,
            )?;
            matrix[(r, c)] = Complex64::new(re, im);
        }
        if tokens.next().is_some() {
            return Err(Error::Config(format!(
                "{}, row {r}: trailing entries beyond column {dim}",
                path.display()
            )));
        }
    }
    Ok((MatrixHeader { dim, basis, hermitian }, matrix))
}

/// Writes a four-point kernel: header with the mode cutoff and value count,
/// then one complex pair per line in the kernel's canonical mode order.
pub fn write_kernel(path: &Path, kernel: &FourPointKernel) -> Result<()> {
    let values = kernel.values();
    let mut text = format!(
        "phi4lab-kernel cutoff={} count={}\n",
        kernel.grid().cutoff(),
        values.len()
    );
    for z in values {
        let _ = writeln!(text, "{:.16e} {:.16e}", z.re, z.im);
    }
    write_atomic(path, text.as_bytes())
}

/// Reads a kernel dump back as (mode cutoff, values).
pub fn read_kernel(path: &Path) -> Result<(i64, Vec<Complex64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty dump file", path.display())))?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("phi4lab-kernel") {
        return Err(Error::Config(format!(
            "{}: not a kernel dump (bad magic)",
            path.display()
        )));
    }
    let cutoff: i64 = header_field(tokens.next(), "cutoff", path)?
        .parse()
        .map_err(|e| Error::Config(format!("{}: bad cutoff: {e}", path.display())))?;
    let count: usize = header_field(tokens.next(), "count", path)?
        .parse()
        .map_err(|e| Error::Config(format!("{}: bad count: {e}", path.display())))?;
    let mut values = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let mut tokens = line.split_whitespace();
        let (Some(re), Some(im), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(Error::Config(format!(
                "{}, line {}: expected one complex pair",
                path.display(),
                i + 2
            )));
        };
        values.push(Complex64::new(parse_float(re, path, i + 2)?, parse_float(im, path, i + 2)?));
    }
    if values.len() != count {
        return Err(Error::Config(format!(
            "{}: header promises {count} values, found {}",
            path.display(),
            values.len()
        )));
    }
    Ok((cutoff, values))
}

/// Per-experiment entry in the run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub passed: bool,
    pub wall_ms: u128,
}

/// Run metadata.  The only place timing or other nondeterministic values are
/// recorded; every other report file is byte-identical across reruns.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub format_version: u32,
    pub crate_version: &'static str,
    pub config_digest: String,
    pub seed: u64,
    pub threads: usize,
    pub generated_unix_ms: u128,
    pub experiments: Vec<ManifestEntry>,
}

/// Writes `manifest.json`.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}
