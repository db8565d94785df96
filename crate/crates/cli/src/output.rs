//! Tables, CSV files and the run directory.

use serde::Serialize;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Bumped when the columns of any table change.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x.is_infinite() { if x > 0.0 { "inf".into() } else { "-inf".into() } } else { "0".into() };
    }
    let a = x.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => {
        vec![$($crate::output::Cell::from($x)),*]
    };
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Self { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn schema_tag(&self) -> String {
        format!("xplab/{}/v{SCHEMA_VERSION}", self.name)
    }

    /// One `# schema:` comment line, then RFC 4180 records.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# schema: {}", self.schema_tag())?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns)?;
        for r in &self.rows {
            csv.write_record(r.iter().map(Cell::render))?;
        }
        csv.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
}

/// Layout of one run: `data/`, `plots/`, `manifest.json`, and
/// `quarantine/` when a stage fails.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    /// Create the directory and clear outputs left by an earlier run.
    pub fn prepare(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        for d in ["data", "plots", "quarantine"] {
            let p = root.join(d);
            if p.exists() {
                fs::remove_dir_all(&p)?;
            }
        }
        let m = root.join("manifest.json");
        if m.exists() {
            fs::remove_file(m)?;
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn plots(&self) -> PathBuf {
        self.root.join("plots")
    }

    pub fn write_table(&self, t: &Table) -> io::Result<FileEntry> {
        fs::create_dir_all(self.data())?;
        let rel = format!("data/{}.csv", t.name);
        let mut w = BufWriter::new(File::create(self.root.join(&rel))?);
        t.write_csv(&mut w)?;
        w.flush()?;
        Ok(FileEntry { path: rel, kind: "csv", schema: Some(t.schema_tag()), rows: Some(t.rows.len()) })
    }

    pub fn write_json(&self, rel: &str, v: &impl Serialize) -> io::Result<()> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut text = serde_json::to_string_pretty(v).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(p, text)
    }

    /// Move everything written so far under `quarantine/`.
    pub fn quarantine(&self) -> io::Result<PathBuf> {
        let q = self.root.join("quarantine");
        fs::create_dir_all(&q)?;
        for d in ["data", "plots"] {
            let p = self.root.join(d);
            if p.exists() {
                fs::rename(&p, q.join(d))?;
            }
        }
        Ok(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -2.5e-7, 1.0 / 3.0, 6.02e23, 1e-4, 123456.789, -0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), if x == 0.0 { 0.0 } else { x }, "{s}");
        }
        assert_eq!(fmt_f64(2e-5), "2e-5");
        assert_eq!(fmt_f64(0.25), "0.25");
    }

    #[test]
    fn csv_has_schema_line_and_quotes() {
        let mut t = Table::new("demo", &["label", "x"]);
        t.push(row!["a,b", 1.5]);
        t.push(row!["plain", 2usize]);
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "# schema: xplab/demo/v1\nlabel,x\n\"a,b\",1.5\nplain,2\n");
    }
}
