//! Replay detector: serves precomputed per-frame detections from a MOT
//! detection file as both stages of a two-stage detector.
//!
//! `propose` returns the stored boxes for the frame; `refine` scores an
//! arbitrary proposal as `stored confidence * IoU` against its best stored
//! match, leaving the box unchanged. Stored files cannot re-score arbitrary
//! boxes, so the refinement is an IoU-weighted surrogate: faithful for the
//! filter baselines, approximate for the feedback pipelines.

use std::collections::BTreeMap;
use std::path::Path;

use super::{DetectorError, Proposal, TwoStageDetector};
use crate::geometry::{BBox, ScoredDetection, PEDESTRIAN_CLASS};
use crate::io::{parse_mot, MotRecord};

pub struct ReplayDetector {
    frames: BTreeMap<u32, Vec<ScoredDetection>>,
    frame_count: usize,
}

impl ReplayDetector {
    pub fn from_file(path: &Path) -> Result<Self, crate::io::FormatError> {
        Ok(Self::from_records(&parse_mot(path)?))
    }

    pub fn from_records(records: &BTreeMap<u32, Vec<MotRecord>>) -> Self {
        let frames: BTreeMap<u32, Vec<ScoredDetection>> = records
            .iter()
            .map(|(&frame, rows)| {
                let dets = rows
                    .iter()
                    .map(|r| ScoredDetection {
                        bbox: BBox::new(r.left, r.top, r.width, r.height),
                        confidence: r.confidence.clamp(0.0, 1.0),
                        class_id: PEDESTRIAN_CLASS,
                        track_id: None,
                    })
                    .collect();
                (frame, dets)
            })
            .collect();
        let frame_count = frames.keys().next_back().map(|&f| f as usize).unwrap_or(0);
        ReplayDetector {
            frames,
            frame_count,
        }
    }

    /// Number of frames in the sequence (the highest 1-based frame number in
    /// the file).
    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    /// Detector frames are 0-based; MOT rows are 1-based.
    fn stored(&self, frame: usize) -> &[ScoredDetection] {
        self.frames
            .get(&(frame as u32 + 1))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

impl TwoStageDetector for ReplayDetector {
    fn propose(&self, frame: usize) -> Result<Vec<Proposal>, DetectorError> {
        Ok(self
            .stored(frame)
            .iter()
            .map(|d| Proposal::new(d.bbox, d.confidence))
            .collect())
    }

    fn refine(
        &self,
        frame: usize,
        proposals: &[Proposal],
    ) -> Result<Vec<ScoredDetection>, DetectorError> {
        let stored = self.stored(frame);
        Ok(proposals
            .iter()
            .map(|p| {
                let best = stored
                    .iter()
                    .map(|d| (p.bbox.iou(&d.bbox), d.confidence))
                    .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
                let confidence = best.map(|(iou, conf)| iou * conf).unwrap_or(0.0);
                ScoredDetection {
                    bbox: p.bbox,
                    confidence,
                    class_id: PEDESTRIAN_CLASS,
                    track_id: None,
                }
            })
            .collect())
    }
}
