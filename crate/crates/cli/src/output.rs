//! Output directory: atomic data files plus a timestamped `run.log`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dps_core::io::write_atomic;
use serde::Serialize;

use crate::failure::Failure;

pub struct Output {
    dir: PathBuf,
    written: Vec<String>,
    log: Vec<String>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::config(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            log: vec![format!("started {:.3}", unix_now())],
        })
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.log.push(line.into());
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        write_atomic(&path, contents).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::config(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Writes `run.log`; the only file that carries wall-clock time.
    pub fn finish(mut self, status: &str) -> Result<(), Failure> {
        for f in &self.written {
            self.log.push(format!("wrote {f}"));
        }
        self.log.push(format!("finished {:.3} {status}", unix_now()));
        let mut text = self.log.join("\n");
        text.push('\n');
        let path = self.dir.join("run.log");
        write_atomic(&path, text.as_bytes()).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }
}
