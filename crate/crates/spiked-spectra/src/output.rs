//! CSV tables, JSON manifests and the no-overwrite rule.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;

use crate::config::{hash_bytes, VERSION};

/// Float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A cell of a CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    /// Integer column.
    Int(u64),
    /// Float column.
    Float(f64),
}

/// In-memory CSV with a `#` provenance line, a header and LF line endings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Column names.
    pub header: Vec<String>,
    /// Rows.
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Empty table with the given columns.
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Serialize, first line `# spiked-spectra <version> config <hash>`.
    pub fn to_bytes(&self, config_hash: &str) -> Result<Vec<u8>> {
        let mut out = format!("# spiked-spectra {VERSION} config {config_hash}\n").into_bytes();
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Int(v) => v.to_string(),
                Cell::Float(v) => fmt_f64(*v),
            }))?;
        }
        out.extend(w.into_inner().map_err(|e| anyhow::anyhow!("flushing CSV: {e}"))?);
        Ok(out)
    }
}

/// Columns of a CSV file written by [`Table::to_bytes`], parsed as floats.
pub fn read_columns(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut cols: BTreeMap<String, Vec<f64>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in r.records() {
        let rec = rec?;
        for (h, v) in header.iter().zip(rec.iter()) {
            let x: f64 = v.parse().with_context(|| format!("column {h}: bad number {v:?}"))?;
            cols.get_mut(h).expect("column exists").push(x);
        }
    }
    Ok(cols)
}

/// Whether a file was written or an existing one kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteOutcome {
    /// New or forced write.
    Written,
    /// Existing file left untouched.
    Kept,
}

/// Write `bytes` to `path` unless it exists and `force` is off.
pub fn write_guarded(path: &Path, bytes: &[u8], force: bool) -> Result<WriteOutcome> {
    if path.exists() && !force {
        return Ok(WriteOutcome::Kept);
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    // write-then-rename keeps a single writer from leaving half a file behind
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(WriteOutcome::Written)
}

/// JSON manifest; keys come out sorted because `serde_json::Map` is a B-tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Top-level fields.
    pub fields: BTreeMap<String, Value>,
}

impl Manifest {
    /// Manifest stub with artifact, version, command and config hash.
    pub fn new(command: &str, config_hash: &str, config: Value) -> Self {
        let mut fields = BTreeMap::new();
        fields.insert("artifact".into(), Value::from("spiked-spectra"));
        fields.insert("version".into(), Value::from(VERSION));
        fields.insert("command".into(), Value::from(command));
        fields.insert("config_hash".into(), Value::from(config_hash));
        fields.insert("config".into(), config);
        Manifest { fields }
    }

    /// Set a field.
    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.fields.insert(key.into(), value.into());
    }

    /// Record a file under `key` (`"outputs"` or `"inputs"`) by name and SHA-256.
    pub fn reference(&mut self, key: &str, path: &Path, bytes: &[u8]) {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let entry = self.fields.entry(key.into()).or_insert_with(|| Value::Object(Default::default()));
        if let Value::Object(map) = entry {
            map.insert(name, Value::from(hash_bytes(bytes)));
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut s = serde_json::to_string_pretty(&self.fields)?;
        s.push('\n');
        Ok(s.into_bytes())
    }
}

/// `<dir>/<stem>-<first 16 hex digits of hash>.<ext>`.
pub fn output_path(dir: &Path, stem: &str, hash: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}-{}.{ext}", &hash[..16]))
}
