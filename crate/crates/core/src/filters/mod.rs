//! Decoupled tracking baselines: a particle filter with
//! resample / measure / predict steps and a constant-velocity Kalman filter
//! over detections.
//!
//! Both run downstream of a detector and never feed anything back into it;
//! the feedback pipelines live in [`crate::iop`].

mod kalman;
mod particle;

pub use kalman::{kf_pipeline_step, kf_predict, kf_update, KalmanTrack, KfConfig};
pub use particle::{pf_emit, pf_measure, pf_predict, pf_resample, Particle, ParticleSet, PfConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("non-finite measurement: {0:?}")]
    NonFiniteMeasurement(crate::geometry::BBox),
}
