//! Sequence runner: drives one pipeline over a detector frame by frame and
//! collects per-frame traces (proposals, refined, emitted).
//!
//! Pipeline state is strictly sequential per sequence; distinct sequences are
//! independent and can run on distinct threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{DetectorError, Proposal, TwoStageDetector};
use crate::filters::{kf_pipeline_step, KalmanTrack, KfConfig, ParticleSet, PfConfig};
use crate::filters::{pf_emit, pf_measure, pf_predict, pf_resample};
use crate::geometry::ScoredDetection;
use crate::iop::{
    assign_ids, iop_history_step, iop_lite_step, iop_particles_step, plain_step, FeedbackBuffer,
    IopConfig, StepOutput,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    Plain,
    Kf,
    Pf,
    IopLite,
    IopHistory,
    IopParticles,
}

impl PipelineKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "plain" => Some(PipelineKind::Plain),
            "kf" => Some(PipelineKind::Kf),
            "pf" => Some(PipelineKind::Pf),
            "iop-lite" => Some(PipelineKind::IopLite),
            "iop-history" => Some(PipelineKind::IopHistory),
            "iop-particles" => Some(PipelineKind::IopParticles),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PipelineKind::Plain => "plain",
            PipelineKind::Kf => "kf",
            PipelineKind::Pf => "pf",
            PipelineKind::IopLite => "iop-lite",
            PipelineKind::IopHistory => "iop-history",
            PipelineKind::IopParticles => "iop-particles",
        }
    }

    pub const ALL: [PipelineKind; 6] = [
        PipelineKind::Plain,
        PipelineKind::Kf,
        PipelineKind::Pf,
        PipelineKind::IopLite,
        PipelineKind::IopHistory,
        PipelineKind::IopParticles,
    ];
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub iop: IopConfig,
    pub pf: PfConfig,
    pub kf: KfConfig,
}

/// Per-frame trace of a pipeline step. `emitted` carries track ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub proposals: Vec<Proposal>,
    pub refined: Vec<ScoredDetection>,
    pub emitted: Vec<ScoredDetection>,
}

enum State {
    Plain,
    Kf {
        tracks: Vec<KalmanTrack>,
        next_id: i64,
    },
    Pf {
        particles: ParticleSet,
    },
    Buffered {
        buffer: FeedbackBuffer,
    },
    Particles {
        particles: ParticleSet,
        last_emitted: Option<Vec<ScoredDetection>>,
    },
}

/// One pipeline instance bound to a kind, a config and a seed. Frames must be
/// stepped in order.
pub struct Pipeline {
    kind: PipelineKind,
    cfg: PipelineConfig,
    state: State,
    rng: ChaCha8Rng,
    prev_emitted: Vec<ScoredDetection>,
    next_track_id: i64,
}

impl Pipeline {
    pub fn new(kind: PipelineKind, cfg: PipelineConfig, seed: u64) -> Self {
        let state = match kind {
            PipelineKind::Plain => State::Plain,
            PipelineKind::Kf => State::Kf {
                tracks: Vec::new(),
                next_id: 1,
            },
            PipelineKind::Pf => State::Pf {
                particles: ParticleSet::new(cfg.iop.particles),
            },
            PipelineKind::IopLite => State::Buffered {
                buffer: FeedbackBuffer::new(1),
            },
            PipelineKind::IopHistory => State::Buffered {
                buffer: FeedbackBuffer::new(cfg.iop.history.max(1)),
            },
            PipelineKind::IopParticles => State::Particles {
                particles: ParticleSet::new(cfg.iop.particles),
                last_emitted: None,
            },
        };
        Pipeline {
            kind,
            cfg,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            prev_emitted: Vec::new(),
            next_track_id: 1,
        }
    }

    pub fn kind(&self) -> PipelineKind {
        self.kind
    }

    pub fn step(
        &mut self,
        detector: &dyn TwoStageDetector,
        frame: usize,
    ) -> Result<FrameResult, DetectorError> {
        let iop = &self.cfg.iop;
        let (output, external_ids) = match &mut self.state {
            State::Plain => (plain_step(detector, frame, iop)?, false),
            State::Kf { tracks, next_id } => {
                let base = plain_step(detector, frame, iop)?;
                let emitted = kf_pipeline_step(tracks, &base.emitted, &self.cfg.kf, next_id);
                (
                    StepOutput {
                        proposals: base.proposals,
                        refined: base.refined,
                        emitted,
                    },
                    true,
                )
            }
            State::Pf { particles } => {
                let base = plain_step(detector, frame, iop)?;
                pf_resample(particles, &base.emitted, &self.cfg.pf, &mut self.rng);
                pf_measure(particles, &base.emitted, &self.cfg.pf);
                let emitted = pf_emit(particles, self.cfg.pf.min_score, self.cfg.pf.nms_iou);
                pf_predict(particles, self.cfg.pf.dt);
                (
                    StepOutput {
                        proposals: base.proposals,
                        refined: base.refined,
                        emitted,
                    },
                    false,
                )
            }
            State::Buffered { buffer } => {
                let step = if self.kind == PipelineKind::IopLite {
                    iop_lite_step(buffer, detector, frame, iop)?
                } else {
                    iop_history_step(buffer, detector, frame, iop)?
                };
                (step, false)
            }
            State::Particles {
                particles,
                last_emitted,
            } => {
                let step = iop_particles_step(
                    particles,
                    last_emitted.as_deref(),
                    detector,
                    frame,
                    iop,
                    &self.cfg.pf,
                    &mut self.rng,
                )?;
                *last_emitted = Some(step.emitted.clone());
                (step, false)
            }
        };

        let mut emitted = output.emitted;
        if !external_ids {
            // The Kalman baseline manages its own track identities; everything
            // else gets ids by IoU propagation over the emitted stream.
            assign_ids(
                &self.prev_emitted,
                &mut emitted,
                &mut self.next_track_id,
                iop.assign_iou,
            );
        }
        self.prev_emitted = emitted.clone();
        Ok(FrameResult {
            proposals: output.proposals,
            refined: output.refined,
            emitted,
        })
    }
}

/// Runs `frames` frames of a pipeline over a detector and returns the
/// per-frame traces.
pub fn run_pipeline(
    kind: PipelineKind,
    cfg: PipelineConfig,
    detector: &dyn TwoStageDetector,
    frames: usize,
    seed: u64,
) -> Result<Vec<FrameResult>, DetectorError> {
    let mut pipeline = Pipeline::new(kind, cfg, seed);
    (0..frames)
        .map(|frame| pipeline.step(detector, frame))
        .collect()
}

/// Emitted detections only, per frame.
pub fn emitted_frames(results: &[FrameResult]) -> Vec<Vec<ScoredDetection>> {
    results.iter().map(|r| r.emitted.clone()).collect()
}
