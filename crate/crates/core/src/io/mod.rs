//! Data ingestion and persistence: MOT CSV parsing and writing, world and run
//! configuration JSON, and report serialization.
//!
//! Malformed benchmark rows are rejected outright rather than skipped; a
//! corrupted file must not silently bias metrics.

mod config;
mod mot;

pub use config::{
    load_config, load_world, save_world, DetectorKind, RunConfig, CONFIG_FORMAT_VERSION,
};
pub use mot::{
    detections_by_frame, parse_mot, parse_mot_reader, write_gt, write_results, MotRecord,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("{path}: referenced file does not exist")]
    MissingFile { path: String },
}
