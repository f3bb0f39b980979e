//! Output directory handling and CSV writers with a provenance comment.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::io::format_f64;
use crate::{Error, Result};

/// Everything an experiment wrote, plus its headline numbers.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config_hash: String,
    pub master_seed: u64,
    /// Paths relative to the output directory, in write order.
    pub files: Vec<String>,
    pub scalars: BTreeMap<String, f64>,
    pub seeds: BTreeMap<String, u64>,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn scalar(&self, key: &str) -> Option<f64> {
        self.scalars.get(key).copied()
    }
}

/// Writes files under one directory and records them.
pub struct OutputSink {
    root: PathBuf,
    comment: String,
    files: Vec<String>,
}

impl OutputSink {
    pub fn new(root: &Path, config_hash: &str, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::from(e).context(format!("creating {}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            comment: format!("# config_hash={config_hash} seed={seed}\n"),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn register(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    /// Opens `name` for writing; CSV files get the comment line first.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let f = File::create(&path).map_err(|e| Error::from(e).context(format!("creating {}", path.display())))?;
        let mut w = BufWriter::new(f);
        if name.ends_with(".csv") {
            w.write_all(self.comment.as_bytes())?;
        }
        self.register(name);
        Ok(w)
    }

    /// Writes a CSV table of numbers with the given header.
    pub fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut out = csv::Writer::from_writer(self.create(name)?);
        out.write_record(header)?;
        for row in rows {
            if row.len() != header.len() {
                return Err(Error::Dimension {
                    expected: header.len(),
                    got: row.len(),
                });
            }
            out.write_record(row.iter().map(|v| format_f64(*v)))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Registers a file written by other means (e.g. binary containers).
    pub fn record_external(&mut self, name: &str) {
        self.register(name);
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn into_files(self) -> Vec<String> {
        self.files
    }
}

/// Serializes the report next to the outputs as `<experiment>_report.toml`.
pub fn write_report(root: &Path, report: &ExperimentReport) -> Result<PathBuf> {
    let path = root.join(format!("{}_report.toml", report.experiment));
    let text = toml::to_string(report).map_err(|e| Error::Internal(format!("cannot serialize report: {e}")))?;
    std::fs::write(&path, text).map_err(|e| Error::from(e).context(format!("writing {}", path.display())))?;
    Ok(path)
}
