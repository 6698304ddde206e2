use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cnls::{snapshot, FieldPair, SystemParams};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Output directory of one run. Nothing written here depends on wall-clock
/// time, so identical configs give identical files.
pub struct OutDir {
    root: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        File::create(&path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
    }

    pub fn manifest(&self, command: &str, config: &RunConfig) -> Result<()> {
        let m = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
        };
        let text = toml::to_string(&m).map_err(|e| CliError::Encode {
            what: "manifest".into(),
            message: e.to_string(),
        })?;
        self.text("manifest.toml", &text)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Encode {
            what: name.into(),
            message: e.to_string(),
        })?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(self.path(name), e))
    }

    pub fn text(&self, name: &str, body: &str) -> Result<()> {
        let mut w = self.file(name)?;
        w.write_all(body.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(self.path(name), e))
    }

    /// Hands a buffered writer to a CSV producer from the core crate.
    pub fn csv(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> cnls::Result<()>) -> Result<()> {
        let mut w = self.file(name)?;
        f(&mut w)?;
        w.flush().map_err(|e| CliError::io(self.path(name), e))
    }

    pub fn snapshot(&self, name: &str, field: &FieldPair, params: &SystemParams) -> Result<()> {
        let w = self.file(name)?;
        snapshot::write_snapshot(w, field, params)?;
        Ok(())
    }
}
