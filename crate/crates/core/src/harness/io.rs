//! Output files: atomic writes, float formatting, CSV/TSV tables and content hashes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename, so readers never
/// observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("`{}` is not a file path", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// A cell of a delimited table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i128),
    Float(f64),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_f64(*x),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&String> for Cell {
    fn from(s: &String) -> Self {
        Cell::Text(s.clone())
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

macro_rules! int_cell {
    ($($t:ty),*) => {$(
        impl From<$t> for Cell {
            fn from(i: $t) -> Self {
                Cell::Int(i as i128)
            }
        }
    )*};
}
int_cell!(usize, u64, u32, i64, i32);

/// An in-memory table rendered as CSV or TSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, sep: char) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(&sep.to_string()));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| quote(&c.render(), sep)).collect();
            out.push_str(&cells.join(&sep.to_string()));
            out.push('\n');
        }
        out
    }

    /// Column-aligned text with short float formatting, for terminal summaries.
    pub fn render_pretty(&self) -> String {
        let short = |c: &Cell| match c {
            Cell::Float(x) if x.is_finite() && *x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) => format!("{x:.3e}"),
            Cell::Float(x) if x.is_finite() => format!("{x:.4}"),
            other => other.render(),
        };
        let body: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(short).collect()).collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| body.iter().map(|r| r[j].len()).chain([self.header[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
        };
        let mut out = line(&self.header);
        out.push('\n');
        for r in &body {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

fn quote(s: &str, sep: char) -> String {
    if s.contains(sep) || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Long-format plot data: one `(x, y, series)` row per point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotData {
    pub rows: Vec<(f64, f64, String)>,
}

impl PlotData {
    pub fn push(&mut self, x: f64, y: f64, series: impl Into<String>) {
        self.rows.push((x, y, series.into()));
    }

    pub fn extend_series(&mut self, xs: &[f64], ys: &[f64], series: &str) {
        for (x, y) in xs.iter().zip(ys) {
            self.push(*x, *y, series);
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["x", "y", "series"]);
        for (x, y, s) in &self.rows {
            t.push(vec![(*x).into(), (*y).into(), s.into()]);
        }
        t
    }
}

/// Collects the files an experiment writes so the manifest can hash them.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    prefix: String,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), prefix: String::new(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Subdirectory prepended to every later write; empty for the root.
    pub fn set_prefix(&mut self, prefix: &str) {
        self.prefix = prefix.trim_end_matches('/').to_string();
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let rel = if self.prefix.is_empty() { rel.to_string() } else { format!("{}/{rel}", self.prefix) };
        write_atomic(&self.root.join(&rel), bytes)?;
        let rel = PathBuf::from(rel);
        if !self.written.contains(&rel) {
            self.written.push(rel);
        }
        Ok(())
    }

    pub fn write_csv(&mut self, rel: &str, table: &Table) -> Result<()> {
        self.write_bytes(rel, table.render(',').as_bytes())
    }

    pub fn write_tsv(&mut self, rel: &str, table: &Table) -> Result<()> {
        self.write_bytes(rel, table.render('\t').as_bytes())
    }

    pub fn write_plot(&mut self, rel: &str, plot: &PlotData) -> Result<()> {
        self.write_tsv(rel, &plot.to_table())
    }

    /// Relative paths written so far, in write order.
    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
