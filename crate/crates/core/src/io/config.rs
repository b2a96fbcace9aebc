//! Run configuration and world files.
//!
//! One JSON document fully determines a run (together with its seed). Schema
//! validation is strict: unknown keys are errors, referenced files must
//! exist.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::detector::{SyntheticDetectorConfig, WorldSpec};
use crate::filters::{KfConfig, PfConfig};
use crate::iop::IopConfig;
use crate::pipeline::PipelineKind;

pub const CONFIG_FORMAT_VERSION: u32 = 1;

fn default_format() -> u32 {
    CONFIG_FORMAT_VERSION
}

fn default_timeout_ms() -> u64 {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Synthetic,
    Replay,
    External,
}

/// A fully specified run: which pipeline, which detector, the module configs
/// and the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_format")]
    pub format: u32,
    pub pipeline: PipelineKind,
    pub detector: DetectorKind,
    /// World file for the synthetic detector.
    #[serde(default)]
    pub world: Option<PathBuf>,
    /// MOT detection file for the replay detector.
    #[serde(default)]
    pub detections: Option<PathBuf>,
    /// Command line of the external detector process.
    #[serde(default)]
    pub external_command: Option<Vec<String>>,
    #[serde(default = "default_timeout_ms")]
    pub external_timeout_ms: u64,
    /// Frames to run; defaults to the world or detection file length.
    #[serde(default)]
    pub frames: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub iop: IopConfig,
    #[serde(default)]
    pub pf: PfConfig,
    #[serde(default)]
    pub kf: KfConfig,
    #[serde(default)]
    pub synthetic: SyntheticDetectorConfig,
}

impl RunConfig {
    pub fn validate(&self, origin: &str) -> Result<(), FormatError> {
        let fail = |reason: String| FormatError::Invalid {
            path: origin.to_string(),
            reason,
        };
        if self.format != CONFIG_FORMAT_VERSION {
            return Err(fail(format!(
                "unsupported format {} (expected {CONFIG_FORMAT_VERSION})",
                self.format
            )));
        }
        match self.detector {
            DetectorKind::Synthetic => {
                let world = self
                    .world
                    .as_ref()
                    .ok_or_else(|| fail("synthetic detector requires a 'world' file".into()))?;
                if !world.exists() {
                    return Err(FormatError::MissingFile {
                        path: world.display().to_string(),
                    });
                }
            }
            DetectorKind::Replay => {
                let dets = self
                    .detections
                    .as_ref()
                    .ok_or_else(|| fail("replay detector requires a 'detections' file".into()))?;
                if !dets.exists() {
                    return Err(FormatError::MissingFile {
                        path: dets.display().to_string(),
                    });
                }
            }
            DetectorKind::External => {
                let cmd = self
                    .external_command
                    .as_ref()
                    .ok_or_else(|| fail("external detector requires 'external_command'".into()))?;
                if cmd.is_empty() {
                    return Err(fail("'external_command' must not be empty".into()));
                }
                if self.frames.is_none() {
                    return Err(fail("external detector requires 'frames'".into()));
                }
            }
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, FormatError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Unreadable {
        path: display.clone(),
        source,
    })?;
    let config: RunConfig = serde_json::from_str(&text).map_err(|e| FormatError::Invalid {
        path: display.clone(),
        reason: e.to_string(),
    })?;
    config.validate(&display)?;
    Ok(config)
}

pub fn load_world(path: &Path) -> Result<WorldSpec, FormatError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Unreadable {
        path: display.clone(),
        source,
    })?;
    let world: WorldSpec = serde_json::from_str(&text).map_err(|e| FormatError::Invalid {
        path: display.clone(),
        reason: e.to_string(),
    })?;
    world.validate().map_err(|e| FormatError::Invalid {
        path: display,
        reason: e.to_string(),
    })?;
    Ok(world)
}

pub fn save_world(path: &Path, world: &WorldSpec) -> Result<(), FormatError> {
    let text = serde_json::to_string_pretty(world).expect("world serializes");
    std::fs::write(path, text).map_err(|source| FormatError::Unwritable {
        path: path.display().to_string(),
        source,
    })
}
