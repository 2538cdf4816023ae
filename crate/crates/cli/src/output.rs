//! Result tables, CSV rendering and the files a run leaves behind.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Text(String::new()), Cell::Float)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => sig10(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

/// A CSV table with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self { name, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 fields")
    }
}

/// Ten significant digits, fixed-point where that stays readable.
pub fn sig10(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        // rounding may carry into a new leading digit, e.g. 9.9999999999 → 10.00000000
        let digits = s.chars().filter(char::is_ascii_digit).skip_while(|c| *c == '0').count();
        if digits > 10 && decimals > 0 {
            format!("{v:.prec$}", prec = decimals - 1)
        } else {
            s
        }
    } else {
        format!("{v:.9e}")
    }
}

/// Everything a run produces.
pub struct RunOutput {
    /// Body of `results.json`.
    pub results: serde_json::Value,
    pub tables: Vec<Table>,
    pub summary: serde_json::Value,
}

pub fn to_json_text<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Writes result files into `dir`; the manifest is written last.
pub fn write_dir(dir: &Path, format: Format, out: &RunOutput, manifest: &serde_json::Value) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    match format {
        Format::Json => std::fs::write(dir.join("results.json"), to_json_text(&out.results))?,
        Format::Csv => {
            for t in &out.tables {
                std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
            }
        }
    }
    std::fs::write(dir.join("manifest.json"), to_json_text(manifest))
}

/// Writes results to standard output. CSV tables are each preceded by a
/// `# name` line.
pub fn write_stdout(format: Format, out: &RunOutput) -> std::io::Result<()> {
    let mut stdout = std::io::stdout().lock();
    match format {
        Format::Json => stdout.write_all(to_json_text(&out.results).as_bytes())?,
        Format::Csv => {
            for (i, t) in out.tables.iter().enumerate() {
                if i > 0 {
                    stdout.write_all(b"\n")?;
                }
                writeln!(stdout, "# {}", t.name)?;
                stdout.write_all(t.to_csv().as_bytes())?;
            }
        }
    }
    stdout.flush()
}
