//! Particle filter over bounding boxes.
//!
//! A particle is a detection with a planar velocity, a score and an identity.
//! The filter cycles resample -> measure -> predict once per frame: resample
//! replenishes the hypothesis set (biased towards detections no particle
//! covers yet), measure corrects matched particles by linear interpolation
//! and rescores them, predict applies the constant-velocity motion model.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::assignment::greedy_iou_assign;
use crate::geometry::{nms, BBox, ScoredDetection};

/// Tunables for the particle filter. Every value the motion / scoring rules
/// depend on lives here so a run is fully determined by its config and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PfConfig {
    /// Minimum IoU for particle-detection association.
    pub assign_iou: f64,
    /// Interpolation factor lambda applied on a successful assignment.
    pub interp: f64,
    /// Score multiplier for particles that missed an assignment.
    pub decay: f64,
    /// Fraction of the lowest-scoring particles removed per resample.
    pub kill_fraction: f64,
    /// Probability of spawning on an uncovered detection instead of cloning.
    pub bias: f64,
    /// A detection counts as uncovered when its best IoU against surviving
    /// particles is below this.
    pub coverage_iou: f64,
    /// Positional jitter sigma (pixels) for spawned and cloned particles.
    pub jitter: f64,
    /// Minimum score for a particle to be emitted as a detection.
    pub min_score: f64,
    /// Suppression threshold used when emitting.
    pub nms_iou: f64,
    /// Frame interval; constant across a sequence.
    pub dt: f64,
    /// Frame bounds for uniform fallback spawns.
    pub frame_size: (f64, f64),
}

impl Default for PfConfig {
    fn default() -> Self {
        PfConfig {
            assign_iou: 0.3,
            interp: 0.5,
            decay: 0.5,
            kill_fraction: 0.25,
            bias: 0.7,
            coverage_iou: 0.3,
            jitter: 2.0,
            min_score: 0.5,
            nms_iou: 0.5,
            dt: 1.0,
            frame_size: (640.0, 360.0),
        }
    }
}

/// A box hypothesis with velocity, score and identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub bbox: BBox,
    pub vx: f64,
    pub vy: f64,
    pub score: f64,
    pub id: i64,
    pub age: u32,
}

/// A bounded multiset of particles; after every resample the set holds
/// exactly `capacity` particles.
#[derive(Debug, Clone)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    pub capacity: usize,
    next_id: i64,
}

impl ParticleSet {
    pub fn new(capacity: usize) -> Self {
        ParticleSet {
            particles: Vec::with_capacity(capacity),
            capacity,
            next_id: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    fn alloc_id(&mut self) -> i64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }
}

/// Constant-velocity prediction: every particle's center shifts by
/// `velocity * dt`; size and velocity stay put, age increments.
pub fn pf_predict(set: &mut ParticleSet, dt: f64) {
    for p in &mut set.particles {
        p.bbox = p.bbox.shifted(p.vx * dt, p.vy * dt);
        p.age += 1;
    }
}

/// Measurement correction. Matched particles interpolate linearly towards
/// their detection (box and velocity) and are rescored as
/// `matched IoU * detection confidence`; unmatched particles decay.
pub fn pf_measure(set: &mut ParticleSet, detections: &[ScoredDetection], cfg: &PfConfig) {
    let particle_boxes: Vec<BBox> = set.particles.iter().map(|p| p.bbox).collect();
    let det_boxes: Vec<BBox> = detections.iter().map(|d| d.bbox).collect();
    let assignment = greedy_iou_assign(&particle_boxes, &det_boxes, cfg.assign_iou);

    let mut matched = vec![false; set.particles.len()];
    let lambda = cfg.interp;
    for (pi, di, iou) in assignment.pairs {
        matched[pi] = true;
        let p = &mut set.particles[pi];
        let det = &detections[di];
        let (pcx, pcy) = p.bbox.center();
        let (dcx, dcy) = det.bbox.center();
        // The displacement observed this frame is measured against the
        // particle's pre-prediction position, so a perfectly tracked target
        // leaves the velocity untouched.
        let observed_vx = (dcx - pcx) / cfg.dt + p.vx;
        let observed_vy = (dcy - pcy) / cfg.dt + p.vy;
        p.vx = (1.0 - lambda) * p.vx + lambda * observed_vx;
        p.vy = (1.0 - lambda) * p.vy + lambda * observed_vy;
        p.bbox = BBox::new(
            (1.0 - lambda) * p.bbox.left + lambda * det.bbox.left,
            (1.0 - lambda) * p.bbox.top + lambda * det.bbox.top,
            (1.0 - lambda) * p.bbox.width + lambda * det.bbox.width,
            (1.0 - lambda) * p.bbox.height + lambda * det.bbox.height,
        );
        p.score = iou * det.confidence;
    }
    for (pi, was_matched) in matched.iter().enumerate() {
        if !was_matched {
            set.particles[pi].score *= cfg.decay;
        }
    }
}

/// Resampling. Drops the lowest-scoring `kill_fraction` of particles and
/// refills to capacity, spawning on uncovered detections with probability
/// `bias` and cloning surviving particles (score-proportionally) otherwise.
/// When neither source exists the refill falls back to uniform background
/// boxes, which doubles as first-frame initialization.
pub fn pf_resample(
    set: &mut ParticleSet,
    detections: &[ScoredDetection],
    cfg: &PfConfig,
    rng: &mut impl Rng,
) {
    let n = set.particles.len();
    let kill = ((n as f64) * cfg.kill_fraction).floor() as usize;
    if kill > 0 {
        // Partition around the kill boundary under the total order
        // (score, index); survivors keep their original relative order.
        let mut order: Vec<usize> = (0..n).collect();
        let by_score = |a: &usize, b: &usize| {
            set.particles[*a]
                .score
                .partial_cmp(&set.particles[*b].score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(b))
        };
        order.select_nth_unstable_by(kill - 1, by_score);
        let mut doomed = vec![false; n];
        for &idx in &order[..kill] {
            doomed[idx] = true;
        }
        let mut idx = 0;
        set.particles.retain(|_| {
            let keep = !doomed[idx];
            idx += 1;
            keep
        });
    }

    // Coverage is judged against the survivors only; with no survivors every
    // detection is uncovered.
    let uncovered: Vec<&ScoredDetection> = detections
        .iter()
        .filter(|d| {
            set.particles
                .iter()
                .map(|p| p.bbox.iou(&d.bbox))
                .fold(0.0f64, f64::max)
                < cfg.coverage_iou
        })
        .collect();

    let survivor_count = set.particles.len();
    let cumulative: Vec<f64> = {
        let mut acc = 0.0;
        set.particles
            .iter()
            .map(|p| {
                acc += p.score;
                acc
            })
            .collect()
    };
    let total_score = cumulative.last().copied().unwrap_or(0.0);

    let jitter = Normal::new(0.0, cfg.jitter).expect("jitter sigma must be finite");
    while set.particles.len() < set.capacity {
        let take_bias_path = rng.random::<f64>() < cfg.bias;
        let spawned = if take_bias_path && !uncovered.is_empty() {
            let det = uncovered[rng.random_range(0..uncovered.len())];
            Some(spawn_on_detection(set, det, &jitter, rng))
        } else if survivor_count > 0 {
            let parent = if total_score > 0.0 {
                let target = rng.random::<f64>() * total_score;
                cumulative
                    .partition_point(|&c| c <= target)
                    .min(survivor_count - 1)
            } else {
                rng.random_range(0..survivor_count)
            };
            Some(clone_particle(&set.particles[parent], &jitter, rng))
        } else if !uncovered.is_empty() {
            let det = uncovered[rng.random_range(0..uncovered.len())];
            Some(spawn_on_detection(set, det, &jitter, rng))
        } else {
            None
        };
        let particle = spawned.unwrap_or_else(|| uniform_background(set, cfg, rng));
        set.particles.push(particle);
    }
}

fn spawn_on_detection(
    set: &mut ParticleSet,
    det: &ScoredDetection,
    jitter: &Normal<f64>,
    rng: &mut impl Rng,
) -> Particle {
    let id = set.alloc_id();
    let (cx, cy) = det.bbox.center();
    Particle {
        bbox: BBox::from_center(
            cx + jitter.sample(rng),
            cy + jitter.sample(rng),
            det.bbox.width,
            det.bbox.height,
        ),
        vx: 0.0,
        vy: 0.0,
        score: det.confidence,
        id,
        age: 0,
    }
}

fn clone_particle(parent: &Particle, jitter: &Normal<f64>, rng: &mut impl Rng) -> Particle {
    let (cx, cy) = parent.bbox.center();
    Particle {
        bbox: BBox::from_center(
            cx + jitter.sample(rng),
            cy + jitter.sample(rng),
            parent.bbox.width,
            parent.bbox.height,
        ),
        ..*parent
    }
}

fn uniform_background(set: &mut ParticleSet, cfg: &PfConfig, rng: &mut impl Rng) -> Particle {
    let id = set.alloc_id();
    let (fw, fh) = cfg.frame_size;
    let w = rng.random_range(fw * 0.02..fw * 0.12);
    let h = (w * rng.random_range(1.6..2.8)).min(fh);
    Particle {
        bbox: BBox::new(
            rng.random_range(0.0..(fw - w).max(1.0)),
            rng.random_range(0.0..(fh - h).max(1.0)),
            w,
            h,
        ),
        vx: 0.0,
        vy: 0.0,
        score: 0.0,
        id,
        age: 0,
    }
}

/// Emits the particle set as detections: particles scoring at least
/// `min_score` survive suppression with `confidence = min(score, 1)` and
/// carry their particle id.
pub fn pf_emit(set: &ParticleSet, min_score: f64, nms_iou: f64) -> Vec<ScoredDetection> {
    let candidates: Vec<ScoredDetection> = set
        .particles
        .iter()
        .filter(|p| p.score.min(1.0) >= min_score)
        .map(|p| ScoredDetection::with_id(p.bbox, p.score.min(1.0), p.id))
        .collect();
    nms(&candidates, nms_iou)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{nms_bruteforce, rng};

    fn particle_at(cx: f64, cy: f64, vx: f64, vy: f64) -> Particle {
        Particle {
            bbox: BBox::from_center(cx, cy, 10.0, 10.0),
            vx,
            vy,
            score: 1.0,
            id: 1,
            age: 0,
        }
    }

    #[test]
    fn predict_shifts_center_by_velocity() {
        let mut set = ParticleSet::new(4);
        set.particles.push(particle_at(10.0, 10.0, 2.0, 0.0));
        pf_predict(&mut set, 1.0);
        assert_eq!(set.particles[0].bbox.center(), (12.0, 10.0));
        assert_eq!(set.particles[0].age, 1);
    }

    #[test]
    fn predict_zero_velocity_is_identity_on_box() {
        let mut set = ParticleSet::new(4);
        set.particles.push(particle_at(10.0, 10.0, 0.0, 0.0));
        let before = set.particles[0].bbox;
        pf_predict(&mut set, 1.0);
        assert_eq!(set.particles[0].bbox, before);
    }

    #[test]
    fn predict_composes_exactly() {
        let mut set = ParticleSet::new(4);
        set.particles.push(particle_at(0.0, 0.0, 1.0, -3.0));
        for _ in 0..5 {
            pf_predict(&mut set, 1.0);
        }
        assert_eq!(set.particles[0].bbox.center(), (5.0, -15.0));

        // dt1 then dt2 equals dt1 + dt2.
        let mut a = ParticleSet::new(1);
        a.particles.push(particle_at(3.0, 4.0, 0.5, 0.25));
        let mut b = a.clone();
        pf_predict(&mut a, 0.5);
        pf_predict(&mut a, 1.5);
        pf_predict(&mut b, 2.0);
        assert_eq!(a.particles[0].bbox, b.particles[0].bbox);
    }

    #[test]
    fn measure_fixed_point_keeps_box_and_scores_confidence() {
        let mut set = ParticleSet::new(4);
        set.particles.push(particle_at(10.0, 10.0, 1.0, 0.0));
        let det = ScoredDetection::new(BBox::from_center(10.0, 10.0, 10.0, 10.0), 0.8);
        pf_measure(&mut set, &[det], &PfConfig::default());
        let p = &set.particles[0];
        assert_eq!(p.bbox, BBox::from_center(10.0, 10.0, 10.0, 10.0));
        assert_eq!(p.score, 0.8);
        // Zero innovation: velocity unchanged.
        assert_eq!(p.vx, 1.0);
    }

    #[test]
    fn measure_without_detections_halves_scores() {
        let mut set = ParticleSet::new(4);
        set.particles.push(particle_at(10.0, 10.0, 0.0, 0.0));
        set.particles.push(particle_at(50.0, 50.0, 0.0, 0.0));
        pf_measure(&mut set, &[], &PfConfig::default());
        assert_eq!(set.particles[0].score, 0.5);
        assert_eq!(set.particles[1].score, 0.5);
    }

    #[test]
    fn measure_interpolation_hand_trace() {
        // Particle (0,0,10,10), detection (10,0,10,10) at confidence 1,
        // lambda 0.5, assignment threshold 0: midpoint box, score 0.
        let mut set = ParticleSet::new(4);
        set.particles.push(Particle {
            bbox: BBox::new(0.0, 0.0, 10.0, 10.0),
            vx: 0.0,
            vy: 0.0,
            score: 1.0,
            id: 1,
            age: 0,
        });
        let det = ScoredDetection::new(BBox::new(10.0, 0.0, 10.0, 10.0), 1.0);
        let cfg = PfConfig {
            assign_iou: 0.0,
            ..PfConfig::default()
        };
        pf_measure(&mut set, &[det], &cfg);
        assert_eq!(set.particles[0].bbox, BBox::new(5.0, 0.0, 10.0, 10.0));
        assert_eq!(set.particles[0].score, 0.0);
    }

    #[test]
    fn resample_preserves_capacity() {
        let cfg = PfConfig::default();
        let mut r = rng(5);
        let mut set = ParticleSet::new(4);
        for i in 0..4 {
            set.particles
                .push(particle_at(10.0 + i as f64, 10.0, 0.0, 0.0));
        }
        pf_resample(&mut set, &[], &cfg, &mut r);
        assert_eq!(set.len(), 4);

        let mut big = ParticleSet::new(200);
        pf_resample(&mut big, &[], &cfg, &mut r);
        assert_eq!(big.len(), 200);
        pf_resample(&mut big, &[], &cfg, &mut r);
        assert_eq!(big.len(), 200);
    }

    #[test]
    fn resample_scores_stay_nonnegative() {
        let cfg = PfConfig::default();
        let mut r = rng(9);
        let mut set = ParticleSet::new(32);
        let det = ScoredDetection::new(BBox::new(30.0, 30.0, 12.0, 24.0), 0.9);
        for _ in 0..20 {
            pf_resample(&mut set, std::slice::from_ref(&det), &cfg, &mut r);
            pf_measure(&mut set, std::slice::from_ref(&det), &cfg);
            pf_predict(&mut set, cfg.dt);
            assert!(set.particles.iter().all(|p| p.score >= 0.0));
            assert_eq!(set.len(), 32);
        }
    }

    #[test]
    fn resample_biases_towards_uncovered_detection() {
        // One detection with zero IoU to every particle, bias 1.0: over many
        // seeded runs a spawned particle must land within 3 sigma of it.
        let cfg = PfConfig {
            bias: 1.0,
            ..PfConfig::default()
        };
        let det = ScoredDetection::new(BBox::from_center(200.0, 200.0, 10.0, 10.0), 1.0);
        let mut landed = 0;
        for seed in 0..1000 {
            let mut r = rng(seed);
            let mut set = ParticleSet::new(16);
            for i in 0..8 {
                set.particles
                    .push(particle_at(20.0 + i as f64 * 2.0, 20.0, 0.0, 0.0));
            }
            pf_resample(&mut set, std::slice::from_ref(&det), &cfg, &mut r);
            let hit = set.particles.iter().any(|p| {
                let (cx, cy) = p.bbox.center();
                (cx - 200.0).abs() <= 3.0 * cfg.jitter && (cy - 200.0).abs() <= 3.0 * cfg.jitter
            });
            if hit {
                landed += 1;
            }
        }
        // Ten refilled slots all spawn on the detection each run; every one of
        // them escaping 3 sigma simultaneously has probability far below 1e-6.
        assert_eq!(landed, 1000);
    }

    #[test]
    fn emit_empty_set_is_empty() {
        let set = ParticleSet::new(8);
        assert!(pf_emit(&set, 0.5, 0.5).is_empty());
    }

    #[test]
    fn emit_passes_score_and_id() {
        let mut set = ParticleSet::new(8);
        set.particles.push(Particle {
            bbox: BBox::new(0.0, 0.0, 10.0, 10.0),
            vx: 0.0,
            vy: 0.0,
            score: 0.9,
            id: 7,
            age: 3,
        });
        let out = pf_emit(&set, 0.5, 0.5);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].confidence, 0.9);
        assert_eq!(out[0].track_id, Some(7));
    }

    #[test]
    fn emit_collapses_jittered_copies_to_one() {
        let mut set = ParticleSet::new(64);
        let mut r = rng(3);
        let jitter = Normal::new(0.0, 1.0).unwrap();
        for i in 0..50 {
            set.particles.push(Particle {
                bbox: BBox::from_center(
                    100.0 + jitter.sample(&mut r),
                    100.0 + jitter.sample(&mut r),
                    20.0,
                    40.0,
                ),
                vx: 0.0,
                vy: 0.0,
                score: 0.6 + 0.005 * i as f64,
                id: i,
                age: 0,
            });
        }
        let fast = pf_emit(&set, 0.5, 0.5);
        assert_eq!(fast.len(), 1);

        // Against the brute-force suppression oracle.
        let candidates: Vec<ScoredDetection> = set
            .particles
            .iter()
            .map(|p| ScoredDetection::with_id(p.bbox, p.score.min(1.0), p.id))
            .collect();
        assert_eq!(fast, nms_bruteforce(&candidates, 0.5));
    }
}
