//! Output files stamped with the tool version and the config hash.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const TOOL: &str = "kahler-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub config_sha256: String,
}

impl Meta {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self { tool: TOOL, version: VERSION, scenario: cfg.scenario.clone(), config_sha256: cfg.sha256() }
    }

    pub fn csv_header(&self) -> String {
        format!("# {} {} scenario={} config_sha256={}\n", self.tool, self.version, self.scenario, self.config_sha256)
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

/// Output directory with its metadata.
pub struct OutputDir {
    pub dir: PathBuf,
    pub meta: Meta,
}

impl OutputDir {
    pub fn create(dir: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        Self::with_meta(dir, Meta::of(cfg))
    }

    pub fn with_meta(dir: &Path, meta: Meta) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
        Ok(Self { dir: dir.into(), meta })
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| CliError::Io { path: parent.into(), source })?;
        }
        std::fs::write(&path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
        Ok(path)
    }

    /// CSV body preceded by a `#` metadata line.
    pub fn csv(&self, name: &str, body: &str) -> Result<PathBuf> {
        self.write(name, &format!("{}{}", self.meta.csv_header(), body))
    }

    /// JSON object with a `meta` field next to the fields of `body`.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(&Stamped { meta: &self.meta, body })?;
        self.write(name, &(text + "\n"))
    }

    /// Raw file without metadata, for the config echo.
    pub fn plain(&self, name: &str, text: &str) -> Result<PathBuf> {
        self.write(name, text)
    }
}
