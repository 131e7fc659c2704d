use std::fs;
use std::path::{Path, PathBuf};

use chebyquad_core::config::FORMAT_VERSION;
use chebyquad_core::verify::sha256_hex;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats::to_pretty_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileRecord {
    pub fn of(path: impl Into<String>, bytes: &[u8]) -> Self {
        Self {
            path: path.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        }
    }
}

/// What a run read, what it wrote and with which parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub library_version: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Output directory of one run; records every file it writes.
pub struct Artifacts {
    dir: Option<PathBuf>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

impl Artifacts {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn enabled(&self) -> bool {
        self.dir.is_some()
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs
            .push(FileRecord::of(path.display().to_string(), bytes));
    }

    /// Writes `name` inside the output directory; a no-op without one.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(FileRecord::of(name, bytes));
        Ok(())
    }

    /// Records a file written elsewhere (the results log) by its current content.
    pub fn external_output(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.outputs
            .push(FileRecord::of(path.display().to_string(), &bytes));
        Ok(())
    }

    pub fn finish(
        self,
        subcommand: &str,
        parameters: serde_json::Value,
        threads: usize,
        seconds: f64,
    ) -> Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let m = RunManifest {
            format_version: FORMAT_VERSION,
            subcommand: subcommand.into(),
            parameters,
            inputs: self.inputs,
            outputs: self.outputs,
            threads,
            wall_clock_seconds: seconds,
            library_version: env!("CARGO_PKG_VERSION").into(),
        };
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, to_pretty_json(&m)).map_err(|e| CliError::io(&path, e))
    }
}
