use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Reproducibility metadata attached to every JSON summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub config_echo: C,
    pub master_seed: u64,
    pub tool_version: &'static str,
    pub started_at: String,
    pub wall_time_s: f64,
    /// CSV files written alongside this summary.
    pub artifacts: Vec<String>,
}

pub struct Csv {
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    /// Appends one row; floats use Rust's shortest round-trip formatting.
    pub fn row(&mut self, cells: &[&dyn Display]) {
        self.writer
            .write_record(cells.iter().map(|c| c.to_string()))
            .expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

/// A set of files that are only made visible once all of them are ready.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, contents: Vec<u8>) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Writes each file to a temporary sibling, then renames them all into place.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating {}", self.dir.display()))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
                .with_context(|| format!("creating a temporary file in {}", self.dir.display()))?;
            tmp.write_all(contents)?;
            tmp.as_file().sync_all()?;
            staged.push((tmp, self.dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(&path)
                .with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}
