//! File formats: numeric CSV, plain-text snapshot matrices and atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header row followed by one line per record, values in `{:.16e}`.
pub fn csv_string<const N: usize>(header: &[&str; N], rows: impl IntoIterator<Item = [f64; N]>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv<const N: usize>(
    path: &Path,
    header: &[&str; N],
    rows: impl IntoIterator<Item = [f64; N]>,
) -> Result<()> {
    write_atomic(path, csv_string(header, rows).as_bytes())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Snapshot matrix: a `# grid x_left= x_right= n=` header, then one line per
/// record holding `t` followed by the node values.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshots {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
}

impl Snapshots {
    pub fn new(grid: Grid, times: Vec<f64>, fields: Vec<Field>) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(Error::InvalidField("snapshot times and fields differ in count".into()));
        }
        if fields.iter().any(|f| f.grid() != &grid) {
            return Err(Error::InvalidGrid("snapshot field on a different grid".into()));
        }
        Ok(Self { grid, times, fields })
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = format!(
            "# grid x_left={} x_right={} n={}\n",
            format_value(g.x_left()),
            format_value(g.x_right()),
            g.len()
        );
        for (t, f) in self.times.iter().zip(&self.fields) {
            out.push_str(&format_value(*t));
            for v in &f.u {
                let _ = write!(out, " {}", format_value(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidField(format!("snapshot file: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("missing grid header".into()))?;
        let items = header
            .strip_prefix('#')
            .map(str::trim)
            .and_then(|h| h.strip_prefix("grid"))
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        let (mut xl, mut xr, mut n) = (None, None, None);
        for item in items.split_whitespace() {
            let (k, v) = item.split_once('=').ok_or_else(|| bad(format!("bad header item {item:?}")))?;
            match k {
                "x_left" => xl = v.parse::<f64>().ok(),
                "x_right" => xr = v.parse::<f64>().ok(),
                "n" => n = v.parse::<usize>().ok(),
                _ => return Err(bad(format!("unknown header item {k:?}"))),
            }
        }
        let (Some(xl), Some(xr), Some(n)) = (xl, xr, n) else {
            return Err(bad("header needs x_left, x_right and n".into()));
        };
        let grid = Grid::new(xl, xr, n)?;
        let mut times = Vec::new();
        let mut fields = Vec::new();
        for (i, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
            if vals.len() != n + 1 {
                return Err(bad(format!("row {} has {} values, expected {}", i + 1, vals.len(), n + 1)));
            }
            times.push(vals[0]);
            fields.push(Field::new(grid, vals[1..].to_vec())?);
        }
        Ok(Self { grid, times, fields })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }
}
