//! Run manifests and the files they describe.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cubicstring::C64;
use serde::Serialize;
use serde_json::Value;

use crate::fail::Failure;

/// Provenance record written as `<out>.manifest.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub args: Vec<String>,
    pub config: Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub struct Run {
    pub manifest: RunManifest,
    /// Output the manifest is named after.
    primary: Option<PathBuf>,
    start: Instant,
}

impl Run {
    pub fn new(command: &str, config: Value) -> Self {
        Run {
            manifest: RunManifest {
                command: command.to_string(),
                version: cubicstring::VERSION,
                args: std::env::args().skip(1).collect(),
                config,
                inputs: Vec::new(),
                outputs: Vec::new(),
                wall_clock_seconds: 0.0,
            },
            primary: None,
            start: Instant::now(),
        }
    }

    pub fn primary(&mut self, out: &Path) {
        self.primary = Some(out.to_path_buf());
    }

    fn manifest_name(&self, path: &Path) -> String {
        manifest_name(self.primary.as_deref().unwrap_or(path))
    }

    pub fn input(&mut self, path: &Path) {
        self.manifest.inputs.push(path.display().to_string());
    }

    /// Writes `text` to `path` and records it.
    pub fn write(&mut self, path: &Path, text: &str) -> Result<(), Failure> {
        std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        self.manifest.outputs.push(path.display().to_string());
        Ok(())
    }

    /// CSV preceded by a comment line naming the manifest.
    pub fn write_csv(&mut self, path: &Path, table: &Table) -> Result<(), Failure> {
        let text = format!("# manifest: {}\n{}", self.manifest_name(path), table.render());
        self.write(path, &text)
    }

    /// JSON object with an added `manifest` key.
    pub fn write_json(&mut self, path: &Path, value: impl Serialize) -> Result<(), Failure> {
        let mut v = serde_json::to_value(value).map_err(|e| Failure::Numeric(e.to_string()))?;
        if let Value::Object(m) = &mut v {
            m.insert("manifest".into(), Value::String(self.manifest_name(path)));
        }
        let text = serde_json::to_string_pretty(&v).map_err(|e| Failure::Numeric(e.to_string()))?;
        self.write(path, &text)
    }

    /// Writes the manifest next to the primary output, or next to `out` when none was set.
    pub fn finish(mut self, out: &Path) -> Result<(), Failure> {
        self.manifest.wall_clock_seconds = self.start.elapsed().as_secs_f64();
        let path = manifest_path(self.primary.as_deref().unwrap_or(out));
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| Failure::Numeric(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn manifest_name(out: &Path) -> String {
    manifest_path(out)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// `out` with its extension replaced by `suffix`, e.g. `run.csv` to `run.report.json`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

/// Header plus rows of already formatted cells.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    /// Whitespace-aligned rendering for the terminal.
    pub fn print(&self, out: &mut impl Write) -> std::io::Result<()> {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| {
                self.rows
                    .iter()
                    .filter_map(|r| r.get(j))
                    .chain(std::iter::once(&self.header[j]))
                    .map(String::len)
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        for r in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            writeln!(out, "{}", cells.join("  ").trim_end())?;
        }
        Ok(())
    }
}

/// Shortest round-trip scientific form.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn cplx(z: C64) -> [String; 2] {
    [num(z.re), num(z.im)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(["x", "y_re", "y_im"]);
        let [a, b] = cplx(C64::new(0.5, -2.0));
        t.push(vec![num(1.0), a, b]);
        assert_eq!(t.render(), "x,y_re,y_im\n1e0,5e-1,-2e0\n");
        let x = 0.1 + 0.2;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn paths() {
        assert_eq!(manifest_path(Path::new("a/b.csv")), PathBuf::from("a/b.csv.manifest.json"));
        assert_eq!(sibling(Path::new("a/b.csv"), "report.json"), PathBuf::from("a/b.report.json"));
        assert_eq!(manifest_name(Path::new("a/b.csv")), "b.csv.manifest.json");
    }
}
