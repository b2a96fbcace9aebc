//! Feedback-loop pipelines: previous predictions re-enter the detector as
//! additional second-stage proposals at inference time.
//!
//! Three variants with increasing machinery:
//!
//! * **lite** concatenates the previous frame's emitted detections, verbatim,
//!   to the current proposals;
//! * **history** does the same over the last N frames, deduplicating
//!   near-identical feedback;
//! * **particles** keeps a particle set whose boxes join the proposals, with
//!   resample / measure / predict wrapped around the detector call.
//!
//! None of them touch detector state; the feedback only ever adds proposals,
//! so the refined output of a feedback step is a strict superset of what the
//! plain pipeline produces for the same frame and seed.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::assignment::greedy_iou_assign;
use crate::detector::{DetectorError, Proposal, TwoStageDetector};
use crate::filters::{pf_measure, pf_predict, pf_resample, ParticleSet, PfConfig};
use crate::geometry::{nms, BBox, ScoredDetection};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IopConfig {
    /// Buffered predictions below this confidence are not fed back.
    pub feedback_conf: f64,
    /// Refined detections below this confidence are not emitted.
    pub emit_conf: f64,
    /// Suppression threshold on the refined set.
    pub nms_iou: f64,
    /// History length N (frames of feedback); 1 reduces to the lite variant.
    pub history: usize,
    /// Particle budget for the particle variant.
    pub particles: usize,
    /// IoU threshold for id propagation and particle association.
    pub assign_iou: f64,
    /// History feedback closer than this IoU to already collected feedback is
    /// dropped (newest wins).
    pub dedup_iou: f64,
}

impl Default for IopConfig {
    fn default() -> Self {
        IopConfig {
            feedback_conf: 0.3,
            emit_conf: 0.5,
            nms_iou: 0.5,
            history: 1,
            particles: 100,
            assign_iou: 0.3,
            dedup_iou: 0.95,
        }
    }
}

/// Ring buffer of per-frame emitted detections, newest first on iteration.
#[derive(Debug, Clone, Default)]
pub struct FeedbackBuffer {
    slots: VecDeque<Vec<ScoredDetection>>,
    capacity: usize,
}

impl FeedbackBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "feedback buffer needs at least one slot");
        FeedbackBuffer {
            slots: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, frame: Vec<ScoredDetection>) {
        if self.slots.len() == self.capacity {
            self.slots.pop_front();
        }
        self.slots.push_back(frame);
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Buffered frames, newest first.
    pub fn newest_first(&self) -> impl Iterator<Item = &Vec<ScoredDetection>> {
        self.slots.iter().rev()
    }
}

/// Everything a pipeline step produces, including the intermediate stages
/// needed by trace output and the superset checks.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub proposals: Vec<Proposal>,
    pub refined: Vec<ScoredDetection>,
    pub emitted: Vec<ScoredDetection>,
}

/// Shared emission path: confidence filter plus suppression.
///
/// Filtering first is equivalent to suppressing first (a below-threshold
/// detection can never suppress an above-threshold one) and keeps the
/// suppression cost independent of how many feedback proposals were added.
pub fn emit(refined: &[ScoredDetection], cfg: &IopConfig) -> Vec<ScoredDetection> {
    let confident: Vec<ScoredDetection> = refined
        .iter()
        .filter(|d| d.confidence >= cfg.emit_conf)
        .copied()
        .collect();
    nms(&confident, cfg.nms_iou)
}

/// Plain single-frame pipeline: propose, refine, emit. The reference that
/// every feedback variant degenerates to on its first frame.
pub fn plain_step(
    detector: &dyn TwoStageDetector,
    frame: usize,
    cfg: &IopConfig,
) -> Result<StepOutput, DetectorError> {
    let proposals = detector.propose(frame)?;
    let refined = detector.refine(frame, &proposals)?;
    let emitted = emit(&refined, cfg);
    Ok(StepOutput {
        proposals,
        refined,
        emitted,
    })
}

/// Lite feedback: the previous frame's emitted detections are concatenated,
/// unchanged, after the current proposals. Feedback only adds proposals and
/// never removes any.
pub fn iop_lite_step(
    buffer: &mut FeedbackBuffer,
    detector: &dyn TwoStageDetector,
    frame: usize,
    cfg: &IopConfig,
) -> Result<StepOutput, DetectorError> {
    let mut proposals = detector.propose(frame)?;
    if let Some(previous) = buffer.newest_first().next() {
        proposals.extend(
            previous
                .iter()
                .filter(|d| d.confidence >= cfg.feedback_conf)
                .map(|d| Proposal::new(d.bbox, d.confidence.min(1.0))),
        );
    }
    let refined = detector.refine(frame, &proposals)?;
    let emitted = emit(&refined, cfg);
    buffer.push(emitted.clone());
    Ok(StepOutput {
        proposals,
        refined,
        emitted,
    })
}

/// History feedback: the union of the last N emitted frames joins the
/// proposals, newest first, dropping feedback boxes that overlap already
/// collected feedback above `dedup_iou`.
pub fn iop_history_step(
    buffer: &mut FeedbackBuffer,
    detector: &dyn TwoStageDetector,
    frame: usize,
    cfg: &IopConfig,
) -> Result<StepOutput, DetectorError> {
    let mut proposals = detector.propose(frame)?;
    let mut feedback: Vec<BBox> = Vec::new();
    for slot in buffer.newest_first() {
        for det in slot.iter().filter(|d| d.confidence >= cfg.feedback_conf) {
            let duplicate = feedback
                .iter()
                .any(|kept| kept.iou(&det.bbox) > cfg.dedup_iou);
            if !duplicate {
                feedback.push(det.bbox);
                proposals.push(Proposal::new(det.bbox, det.confidence.min(1.0)));
            }
        }
    }
    let refined = detector.refine(frame, &proposals)?;
    let emitted = emit(&refined, cfg);
    buffer.push(emitted.clone());
    Ok(StepOutput {
        proposals,
        refined,
        emitted,
    })
}

/// Particle feedback: resample against the previous frame's emissions, feed
/// every particle box as a proposal, emit, correct the particles against the
/// emissions and predict them into the next frame.
#[allow(clippy::too_many_arguments)]
pub fn iop_particles_step(
    particles: &mut ParticleSet,
    last_emitted: Option<&[ScoredDetection]>,
    detector: &dyn TwoStageDetector,
    frame: usize,
    cfg: &IopConfig,
    pf_cfg: &PfConfig,
    rng: &mut impl Rng,
) -> Result<StepOutput, DetectorError> {
    // Cold start: with no previous emissions and no particles there is
    // nothing to resample against, and the step must equal the plain
    // pipeline bit for bit.
    if last_emitted.is_some() || !particles.is_empty() {
        pf_resample(particles, last_emitted.unwrap_or(&[]), pf_cfg, rng);
    }

    let mut proposals = detector.propose(frame)?;
    proposals.extend(
        particles
            .particles
            .iter()
            .map(|p| Proposal::new(p.bbox, p.score.min(1.0))),
    );
    let refined = detector.refine(frame, &proposals)?;
    let emitted = emit(&refined, cfg);

    pf_measure(particles, &emitted, pf_cfg);
    pf_predict(particles, pf_cfg.dt);
    Ok(StepOutput {
        proposals,
        refined,
        emitted,
    })
}

/// IoU id propagation between consecutive emitted frames: matched detections
/// inherit the previous id, unmatched ones draw a fresh id from the counter.
pub fn assign_ids(
    previous: &[ScoredDetection],
    current: &mut [ScoredDetection],
    next_id: &mut i64,
    assign_iou: f64,
) {
    let prev_boxes: Vec<BBox> = previous.iter().map(|d| d.bbox).collect();
    let cur_boxes: Vec<BBox> = current.iter().map(|d| d.bbox).collect();
    let assignment = greedy_iou_assign(&prev_boxes, &cur_boxes, assign_iou);

    let mut assigned = vec![false; current.len()];
    for (pi, ci, _) in assignment.pairs {
        current[ci].track_id = previous[pi].track_id;
        assigned[ci] = true;
    }
    for (ci, det) in current.iter_mut().enumerate() {
        if !assigned[ci] || det.track_id.is_none() {
            det.track_id = Some(*next_id);
            *next_id += 1;
        }
    }
}
