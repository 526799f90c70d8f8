//! Deterministic CSV output.
//!
//! Every file starts with a `#`-prefixed metadata block (config hash, seed,
//! generator, crate version, aspect ratio) so a result can always be traced
//! back to the exact run that produced it. No timestamps or timings appear
//! anywhere: rerunning with the same config must reproduce each file byte
//! for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{DoaLabError, Result};

/// Metadata block prepended to every CSV.
#[derive(Debug, Clone)]
pub struct CsvMeta {
    /// SHA-256 of the resolved configuration, hex-encoded.
    pub config_hash: String,
    pub seed: u64,
    /// RNG family name.
    pub generator: String,
    /// Crate version that wrote the file.
    pub version: String,
    /// Aspect ratio M/N of the scenario, when one applies.
    pub c_n: Option<f64>,
}

impl CsvMeta {
    pub fn new(config_hash: String, seed: u64, c_n: Option<f64>) -> Self {
        CsvMeta {
            config_hash,
            seed,
            generator: crate::array::GENERATOR_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            c_n,
        }
    }

    fn header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# config_hash = {}", self.config_hash);
        let _ = writeln!(s, "# seed = {}", self.seed);
        let _ = writeln!(s, "# generator = {}", self.generator);
        let _ = writeln!(s, "# version = {}", self.version);
        if let Some(c) = self.c_n {
            let _ = writeln!(s, "# c_n = {}", format_float(c));
        }
        s
    }
}

/// SHA-256 hex digest of a resolved configuration string.
pub fn config_hash(canonical: &str) -> String {
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    /// Rendered as an empty field (e.g. a prediction that does not apply).
    Missing,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        match x {
            Some(v) => Cell::Float(v),
            None => Cell::Missing,
        }
    }
}

/// 17 significant digits, scientific, locale-independent. Lossless for f64.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn render_cell(cell: &Cell) -> String {
    match cell {
        Cell::Float(x) => format_float(*x),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) => {
            debug_assert!(
                !s.contains(',') && !s.contains('\n'),
                "cell text must not need quoting: {s:?}"
            );
            s.clone()
        }
        Cell::Missing => String::new(),
    }
}

/// Renders a complete CSV document (header block, column line, rows).
pub fn render_csv(meta: &CsvMeta, columns: &[&str], rows: &[Vec<Cell>]) -> Result<String> {
    let mut s = meta.header();
    let _ = writeln!(s, "{}", columns.join(","));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != columns.len() {
            return Err(DoaLabError::InvalidArgument(format!(
                "row {i} has {} cells for {} columns",
                row.len(),
                columns.len()
            )));
        }
        let line: Vec<String> = row.iter().map(render_cell).collect();
        let _ = writeln!(s, "{}", line.join(","));
    }
    Ok(s)
}

/// Writes a CSV document to `path`, creating parent directories.
pub fn write_csv(
    path: &Path,
    meta: &CsvMeta,
    columns: &[&str],
    rows: &[Vec<Cell>],
) -> Result<()> {
    let doc = render_csv(meta, columns, rows)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, doc)?;
    Ok(())
}

/// Parses a document written by [`render_csv`] back into column names and
/// float cells (empty cells become NaN); used by the SVG renderer and tests.
pub fn parse_csv(doc: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = doc.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| DoaLabError::InvalidArgument("empty CSV document".into()))?;
    let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                if cell.is_empty() || cell == "nan" {
                    f64::NAN
                } else {
                    cell.parse::<f64>().unwrap_or(f64::NAN)
                }
            })
            .collect();
        rows.push(row);
    }
    Ok((columns, rows))
}
