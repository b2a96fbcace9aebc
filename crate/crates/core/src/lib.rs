//! Object permanence for two-stage detectors at inference time.
//!
//! Two-stage detectors lose occluded objects because every frame is treated
//! in isolation. This crate closes the loop: the previous frame's predictions
//! re-enter the detector as additional second-stage proposals, so a tight
//! prior can recover an object the proposal stage can no longer see. No
//! detector weights change; the integration is pure inference-time plumbing.
//!
//! The crate ships the feedback pipelines (lite, with history, with
//! particles), decoupled Kalman- and particle-filter baselines, a calibrated
//! synthetic two-stage detector with a scripted world for desk-scale
//! verification, MOT file I/O, and an evaluation suite (VOC mAP, CLEAR-MOT,
//! IDF1, DetA, latency overhead).

pub mod assignment;
pub mod detector;
pub mod filters;
pub mod geometry;
pub mod io;
pub mod iop;
pub mod metrics;
pub mod pipeline;

#[cfg(any(test, feature = "testutil"))]
pub mod testutil;

pub use assignment::{greedy_iou_assign, optimal_assign, Assignment};
pub use geometry::{clip, iou, nms, BBox, ScoredDetection, PEDESTRIAN_CLASS};
pub use pipeline::{run_pipeline, FrameResult, Pipeline, PipelineConfig, PipelineKind};
