//! The two-stage detector abstraction and its implementations.
//!
//! A two-stage detector exposes a proposal stage and a scoring/refinement
//! stage. Three implementations are provided: a synthetic detector driven by
//! a scripted world, a replay detector serving precomputed MOT detection
//! files, and a client for an external second stage speaking
//! newline-delimited JSON over a byte stream.

mod external;
mod replay;
mod synthetic;
mod world;

pub use external::ExternalDetector;
pub use replay::ReplayDetector;
pub use synthetic::{
    emission_probability, second_stage_score, SyntheticDetector, SyntheticDetectorConfig,
};
pub use world::{
    scenario_preset, visibility, AgentSpec, PresetKind, WorldSpec, WORLD_FORMAT_VERSION,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, ScoredDetection};

/// A candidate region forwarded to the second stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub bbox: BBox,
    pub objectness: f64,
}

impl Proposal {
    pub fn new(bbox: BBox, objectness: f64) -> Self {
        Proposal { bbox, objectness }
    }
}

/// A detector with a proposal stage and a refinement stage.
///
/// Implementations are read-only after construction: both calls must be
/// deterministic given the detector's seed and the frame index, and `refine`
/// must return exactly one scored detection per input proposal, in input
/// order. Nothing in the pipeline ever mutates a detector.
pub trait TwoStageDetector {
    fn propose(&self, frame: usize) -> Result<Vec<Proposal>, DetectorError>;

    fn refine(
        &self,
        frame: usize,
        proposals: &[Proposal],
    ) -> Result<Vec<ScoredDetection>, DetectorError>;
}

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("frame {frame} out of range (sequence has {frames} frames)")]
    FrameOutOfRange { frame: usize, frames: usize },
    #[error("zero-area agent box has no defined visibility")]
    ZeroAreaAgent,
    #[error("unknown scenario preset '{0}' (expected pole_occlusion, crossing or crowd)")]
    UnknownPreset(String),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("external detector protocol error: {0}")]
    Protocol(String),
    #[error("external detector timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
