//! Per-frame trace output: the intermediate pipeline stages as JSON, for
//! debugging and for checks defined over intermediate state (the feedback
//! superset property in particular).

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use iop_core::pipeline::FrameResult;

#[derive(Serialize)]
struct TraceFile {
    format: u32,
    frames: Vec<TraceFrame>,
}

#[derive(Serialize)]
struct TraceFrame {
    frame: usize,
    /// `[left, top, width, height, objectness]`
    proposals: Vec<[f64; 5]>,
    /// `[left, top, width, height, confidence]`
    refined: Vec<[f64; 5]>,
    /// `[left, top, width, height, confidence, track_id]`
    emitted: Vec<[f64; 6]>,
}

pub fn write_trace(path: &Path, results: &[FrameResult]) -> Result<()> {
    let frames = results
        .iter()
        .enumerate()
        .map(|(frame, r)| TraceFrame {
            frame,
            proposals: r
                .proposals
                .iter()
                .map(|p| {
                    [
                        p.bbox.left,
                        p.bbox.top,
                        p.bbox.width,
                        p.bbox.height,
                        p.objectness,
                    ]
                })
                .collect(),
            refined: r
                .refined
                .iter()
                .map(|d| {
                    [
                        d.bbox.left,
                        d.bbox.top,
                        d.bbox.width,
                        d.bbox.height,
                        d.confidence,
                    ]
                })
                .collect(),
            emitted: r
                .emitted
                .iter()
                .map(|d| {
                    [
                        d.bbox.left,
                        d.bbox.top,
                        d.bbox.width,
                        d.bbox.height,
                        d.confidence,
                        d.track_id.unwrap_or(-1) as f64,
                    ]
                })
                .collect(),
        })
        .collect();
    let trace = TraceFile { format: 1, frames };
    std::fs::write(path, serde_json::to_string(&trace)?)
        .with_context(|| format!("writing trace to {}", path.display()))
}
