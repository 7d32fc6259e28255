//! Output plumbing: CSV writers, the run manifest, quaternion columns.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::so3::{quat_from_rotation, rotation_from_quat, Rotation, UnitQuaternion};
use crate::{Error, Result};

/// Creates the parent directory of `path` if needed.
pub fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// CSV writer over a file, with I/O errors tagged by path.
pub struct CsvOut {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        ensure_parent(path)?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = CsvOut { path: path.to_path_buf(), inner: csv::Writer::from_writer(BufWriter::new(file)) };
        out.row(header.iter().map(|s| s.to_string()))?;
        Ok(out)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(|e| self.err(e))
    }

    /// A row of numbers in shortest round-trip form.
    pub fn numbers(&mut self, values: &[f64]) -> Result<()> {
        self.row(values.iter().map(|v| fmt_f64(*v)))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }

    fn err(&self, e: csv::Error) -> Error {
        Error::io(&self.path, std::io::Error::other(e))
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Canonical quaternion `(a, b, c, d)` of a rotation.
pub fn quat_fields(r: &Rotation) -> [f64; 4] {
    quat_from_rotation(r).to_array()
}

pub fn rotation_from_fields(a: f64, b: f64, c: f64, d: f64) -> Result<Rotation> {
    Ok(rotation_from_quat(&UnitQuaternion::new(a, b, c, d)?))
}

/// A parsed CSV: header and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericCsv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericCsv {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Reads a CSV whose every field is a number.
pub fn read_numeric_csv(path: &Path) -> Result<NumericCsv> {
    let parse_err = |msg: String| Error::Parse { path: path.into(), msg };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(format!("{other:?}")),
    })?;
    let header = reader
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(format!("row {}: {f:?} is not a number", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(NumericCsv { header, rows })
}

/// What a command ran with and what it wrote.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    /// Extra facts the command reports (cache hits, statistics).
    #[serde(default)]
    pub notes: serde_json::Value,
    pub duration_seconds: f64,
}

/// Builds and writes a [`RunManifest`].
pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seed: Option<u64>,
    outputs: Vec<PathBuf>,
    notes: serde_json::Map<String, serde_json::Value>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: &impl serde::Serialize, seed: Option<u64>) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("argument structs serialize"),
            seed,
            outputs: Vec::new(),
            notes: serde_json::Map::new(),
            started: Instant::now(),
        }
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn note(&mut self, key: &str, value: impl serde::Serialize) {
        self.notes.insert(key.into(), serde_json::to_value(value).expect("notes serialize"));
    }

    pub fn write(self, path: &Path) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config,
            seed: self.seed,
            outputs: self.outputs,
            notes: serde_json::Value::Object(self.notes),
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        write_json(path, &manifest)?;
        Ok(manifest)
    }
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.into(), msg: e.to_string() })
}

/// `<file>.manifest.json` next to a single-file output.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}
