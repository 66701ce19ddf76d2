use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, MANIFEST_KEY};
use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;

/// Output directory plus the list of files written so far.
pub struct Sink {
    dir: PathBuf,
    written: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Sink {
    pub fn new(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write via a temporary file in the same directory, then rename.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io_err(&self.dir))?;
        tmp.write_all(bytes).map_err(io_err(&path))?;
        tmp.as_file().sync_all().map_err(io_err(&path))?;
        tmp.persist(&path).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e.error,
        })?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("result types serialize");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Floats as `{:.16e}` (17 significant digits).
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?;
        self.write_bytes(name, &bytes)
    }

    /// The manifest echoes the resolved config; it is the only output carrying a timestamp.
    pub fn finish(mut self, command: &str, config: &RunConfig, units: &[(&str, &str)]) -> Result<PathBuf, CliError> {
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let units: serde_json::Map<String, serde_json::Value> = units.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        let manifest = json!({
            MANIFEST_KEY: MANIFEST_VERSION,
            "tool": "deforce",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "created_unix": created,
            "outputs": self.written,
            "units": units,
            "config": config,
        });
        self.write_json("manifest.json", &manifest)
    }
}
