//! File emission: CSV tables with a provenance header, JSON summaries.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

/// Identifies the run an output file came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    pub backend: String,
    pub dims: (usize, usize),
}

impl Provenance {
    pub fn new(config_hash: String, backend: &str, dims: (usize, usize)) -> Self {
        Self { version: env!("CARGO_PKG_VERSION").to_string(), config_hash, backend: backend.to_string(), dims }
    }

    pub fn line(&self) -> String {
        format!(
            "otto {} config={} backend={} dims={},{}",
            self.version, self.config_hash, self.backend, self.dims.0, self.dims.1
        )
    }
}

/// Shortest round-trip decimal, switching to exponent form for very large or
/// small magnitudes.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a == 0.0 || (1e-4..1e6).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// In-memory CSV table. Written in one go so a file is never half formatted.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    failure: Option<String>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new(), failure: None }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_values(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| fmt_f64(v)).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Marks the table as partial; the reason is appended as a trailing
    /// comment line.
    pub fn fail(&mut self, reason: &str) {
        self.failure = Some(reason.replace('\n', " "));
    }

    pub fn render(&self, prov: &Provenance) -> io::Result<Vec<u8>> {
        let mut buf = format!("# {}\n", prov.line()).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        if let Some(reason) = &self.failure {
            buf.extend_from_slice(format!("# FAILED: {reason}\n").as_bytes());
        }
        Ok(buf)
    }
}

/// Output directory plus the provenance stamped on every file.
pub struct Sink {
    dir: PathBuf,
    prov: Provenance,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, prov: Provenance) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), prov, written: Vec::new() })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.prov
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        log::info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> io::Result<()> {
        let bytes = table.render(&self.prov)?;
        self.put(name, &bytes)
    }

    /// Writes `{provenance, status, ...body}`; `error` switches the status to
    /// `failed`.
    pub fn json(&mut self, name: &str, body: Value, error: Option<&str>) -> io::Result<()> {
        let mut doc = json!({
            "provenance": self.prov,
            "status": if error.is_some() { "failed" } else { "ok" },
        });
        if let Some(e) = error {
            doc["error"] = Value::String(e.to_string());
        }
        if let (Value::Object(dst), Value::Object(src)) = (&mut doc, body) {
            dst.extend(src);
        }
        let mut text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    pub fn svg(&mut self, name: &str, body: &str) -> io::Result<()> {
        let text = body.replacen("<svg ", &format!("<!-- {} -->\n<svg ", self.prov.line()), 1);
        self.put(name, text.as_bytes())
    }
}
