//! Run configuration and model sidecar files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use mva_core::dataset::WindowConfig;
use mva_core::net::NetConfig;
use mva_core::train::TrainConfig;
use mva_diff::{checkpoint, ParamStore};

use crate::error::{CliError, Result};

/// Everything a run needs. Flags override values loaded from `--config`,
/// which override the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub net: NetConfig,
    pub train: TrainConfig,
    pub window: WindowConfig,
    /// Matching threshold; the validated choice from training when unset.
    pub tau: Option<f64>,
    pub scenarios: Vec<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.train.validate()?;
        if let Some(t) = self.tau {
            if !(0.0..=1.0).contains(&t) {
                return Err(CliError::Usage(format!("tau {t} outside [0, 1]")));
            }
        }
        if self.window.k < 2 || self.window.stride < 1 {
            return Err(CliError::Usage(format!(
                "window needs k >= 2 and stride >= 1 (got k={}, stride={})",
                self.window.k, self.window.stride
            )));
        }
        Ok(())
    }
}

/// Metadata stored next to a checkpoint as `<checkpoint>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format_version: u32,
    pub net: NetConfig,
    pub window: WindowConfig,
    pub tau: f64,
    pub seed: u64,
    pub best_epoch: usize,
}

pub fn sidecar_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_model(path: &Path, store: &ParamStore, meta: &ModelMeta) -> Result<()> {
    checkpoint::save(path, store).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    write_json(&sidecar_path(path), meta)
}

pub fn load_model(path: &Path) -> Result<(ParamStore, ModelMeta)> {
    let meta: ModelMeta = read_json(&sidecar_path(path))?;
    if meta.format_version != checkpoint::FORMAT_VERSION {
        return Err(CliError::Input(format!(
            "{}: checkpoint format version {} is not supported (expected {})",
            path.display(),
            meta.format_version,
            checkpoint::FORMAT_VERSION
        )));
    }
    let store = checkpoint::load(path, meta.seed).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((store, meta))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), e.line())))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}
