//! Synthetic two-stage detector driven by a scripted world.
//!
//! The proposal stage emits one jittered proposal per sufficiently visible
//! agent plus a batch of background boxes; the second stage scores any
//! proposal from the visibility of its best-overlapping agent and the quality
//! of that overlap, and regresses the box towards the agent.
//!
//! The defaults below were frozen by the calibration sweep in
//! `tests/calibration.rs`. The load-bearing asymmetry: under heavy occlusion
//! the proposal stage goes blind (visibility below `visibility_floor` never
//! proposes) while the second stage still scores a tight externally supplied
//! box far above the emission threshold. That is what makes feeding
//! predictions back as proposals recover otherwise lost objects.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::world::WorldSpec;
use super::{DetectorError, Proposal, TwoStageDetector};
use crate::geometry::{BBox, ScoredDetection, PEDESTRIAN_CLASS};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDetectorConfig {
    /// Visibility at which the proposal stage reaches emission probability 1.
    pub rpn_visibility_cutoff: f64,
    /// Positional jitter sigma (pixels) on agent proposals.
    pub rpn_jitter: f64,
    /// Uniform background proposals per frame.
    pub background_proposals: u32,
    /// Second-stage score weight on agent visibility.
    pub score_visibility_gain: f64,
    /// Second-stage score weight on proposal-agent overlap.
    pub score_overlap_gain: f64,
    /// Second-stage score offset.
    pub score_offset: f64,
    /// Fraction of the proposal-to-agent gap closed by box regression,
    /// scaled by visibility.
    pub refine_pull: f64,
    /// Positional noise sigma (pixels) added by refinement.
    pub refine_noise: f64,
    /// Below this visibility the proposal stage never emits; it also floors
    /// the regression strength.
    pub visibility_floor: f64,
}

impl Default for SyntheticDetectorConfig {
    fn default() -> Self {
        SyntheticDetectorConfig {
            rpn_visibility_cutoff: 0.8,
            rpn_jitter: 6.0,
            background_proposals: 20,
            score_visibility_gain: 19.0,
            score_overlap_gain: 8.0,
            score_offset: 8.5,
            refine_pull: 0.9,
            refine_noise: 0.3,
            visibility_floor: 0.45,
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Probability that the proposal stage emits a proposal for an agent of
/// visibility `v`: zero below the floor, then linear up to 1 at the cutoff.
pub fn emission_probability(v: f64, cfg: &SyntheticDetectorConfig) -> f64 {
    if v < cfg.visibility_floor {
        0.0
    } else {
        ((v - cfg.visibility_floor) / (cfg.rpn_visibility_cutoff - cfg.visibility_floor)).min(1.0)
    }
}

/// Second-stage confidence for a proposal overlapping an agent with
/// visibility `v` at IoU `q > 0`.
pub fn second_stage_score(cfg: &SyntheticDetectorConfig, v: f64, q: f64) -> f64 {
    logistic(cfg.score_visibility_gain * v + cfg.score_overlap_gain * q - cfg.score_offset)
}

pub struct SyntheticDetector {
    world: WorldSpec,
    cfg: SyntheticDetectorConfig,
    seed: u64,
}

// Distinct stream keys so propose and refine draw independent noise for the
// same frame.
const SALT_PROPOSE: u64 = 0x5250;
const SALT_REFINE: u64 = 0x5246;

impl SyntheticDetector {
    pub fn new(world: WorldSpec, cfg: SyntheticDetectorConfig, seed: u64) -> Self {
        SyntheticDetector { world, cfg, seed }
    }

    pub fn world(&self) -> &WorldSpec {
        &self.world
    }

    pub fn config(&self) -> &SyntheticDetectorConfig {
        &self.cfg
    }

    /// Per-call random stream keyed by (seed, frame, salt): repeated calls for
    /// the same frame replay the same stream, which is what makes runs
    /// reproducible and feedback pipelines exact supersets of the plain one.
    fn rng(&self, frame: usize, salt: u64) -> ChaCha8Rng {
        let mut mix = self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        mix = mix.wrapping_add((frame as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9));
        ChaCha8Rng::seed_from_u64(mix)
    }

    fn check_frame(&self, frame: usize) -> Result<(), DetectorError> {
        if frame >= self.world.frames as usize {
            Err(DetectorError::FrameOutOfRange {
                frame,
                frames: self.world.frames as usize,
            })
        } else {
            Ok(())
        }
    }

    fn frame_truth(&self, frame: usize) -> Vec<(BBox, f64)> {
        self.world
            .ground_truth(frame as u32)
            .into_iter()
            .map(|(_, bbox)| {
                let v = self.world.visibility_of(&bbox).unwrap_or(0.0);
                (bbox, v)
            })
            .collect()
    }
}

impl TwoStageDetector for SyntheticDetector {
    fn propose(&self, frame: usize) -> Result<Vec<Proposal>, DetectorError> {
        self.check_frame(frame)?;
        let mut rng = self.rng(frame, SALT_PROPOSE);
        let jitter = Normal::new(0.0, self.cfg.rpn_jitter).expect("finite jitter");
        let truth = self.frame_truth(frame);
        let mut proposals = Vec::new();

        for (bbox, v) in &truth {
            let p = emission_probability(*v, &self.cfg);
            if rng.random::<f64>() < p {
                let (cx, cy) = bbox.center();
                let w = bbox.width * rng.random_range(0.9..1.1);
                let h = bbox.height * rng.random_range(0.9..1.1);
                let jittered = BBox::from_center(
                    cx + jitter.sample(&mut rng),
                    cy + jitter.sample(&mut rng),
                    w,
                    h,
                );
                proposals.push(Proposal::new(jittered, *v));
            }
        }

        // Background proposals model proposal-stage noise over object-free
        // regions, so they are resampled away from live agents. Spurious
        // proposals near objects are already covered by the jittered agent
        // proposals above.
        let (fw, fh) = self.world.frame_size;
        for _ in 0..self.cfg.background_proposals {
            let mut bbox = BBox::new(0.0, 0.0, 0.0, 0.0);
            for _attempt in 0..16 {
                let w = rng.random_range(fw * 0.02..fw * 0.08);
                let h = (w * rng.random_range(1.8..2.6)).min(fh * 0.9);
                bbox = BBox::new(
                    rng.random_range(0.0..fw - w),
                    rng.random_range(0.0..fh - h),
                    w,
                    h,
                );
                if truth.iter().all(|(gt, _)| bbox.iou(gt) <= 0.15) {
                    break;
                }
            }
            proposals.push(Proposal::new(bbox, rng.random_range(0.0..0.3)));
        }
        Ok(proposals)
    }

    fn refine(
        &self,
        frame: usize,
        proposals: &[Proposal],
    ) -> Result<Vec<ScoredDetection>, DetectorError> {
        self.check_frame(frame)?;
        let mut rng = self.rng(frame, SALT_REFINE);
        let noise = Normal::new(0.0, self.cfg.refine_noise).expect("finite noise");
        let truth = self.frame_truth(frame);

        let mut refined = Vec::with_capacity(proposals.len());
        for proposal in proposals {
            let best = truth
                .iter()
                .map(|(gt, v)| (proposal.bbox.iou(gt), gt, *v))
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

            let detection = match best {
                Some((q, gt, v)) if q > 0.0 => {
                    let confidence = second_stage_score(&self.cfg, v, q);
                    let pull = self.cfg.refine_pull * v.max(self.cfg.visibility_floor);
                    let p = proposal.bbox;
                    let bbox = BBox::new(
                        p.left + pull * (gt.left - p.left) + noise.sample(&mut rng),
                        p.top + pull * (gt.top - p.top) + noise.sample(&mut rng),
                        p.width + pull * (gt.width - p.width),
                        p.height + pull * (gt.height - p.height),
                    );
                    ScoredDetection {
                        bbox,
                        confidence,
                        class_id: PEDESTRIAN_CLASS,
                        track_id: None,
                    }
                }
                // No overlap with anything real: score from objectness alone,
                // box returned unrefined.
                _ => ScoredDetection {
                    bbox: proposal.bbox,
                    confidence: logistic(-self.cfg.score_offset) * proposal.objectness,
                    class_id: PEDESTRIAN_CLASS,
                    track_id: None,
                },
            };
            refined.push(detection);
        }
        Ok(refined)
    }
}
