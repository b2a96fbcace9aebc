//! Per-frame latency measurement across pipelines.
//!
//! Every pipeline runs over the identical input stream; the first frames of
//! each repetition are warm-up and excluded. Time spent inside the detector
//! is accounted separately so the overhead a pipeline adds around the
//! detector can be compared across configurations.

use std::cell::Cell;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::detector::{DetectorError, Proposal, TwoStageDetector, WorldSpec};
use crate::geometry::ScoredDetection;
use crate::pipeline::{Pipeline, PipelineConfig, PipelineKind};

/// Frames excluded from the statistics at the start of every repetition.
pub const WARMUP_FRAMES: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyEntry {
    pub pipeline: String,
    /// Mean wall time per frame, milliseconds.
    pub mean_ms: f64,
    /// Mean per-frame overhead against the plain pipeline on the same input.
    pub overhead_ms: f64,
    /// Mean per-frame time spent outside the detector calls.
    pub non_detector_mean_ms: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyReport {
    pub frames: usize,
    pub repetitions: usize,
    pub entries: Vec<LatencyEntry>,
}

impl LatencyReport {
    pub fn entry(&self, name: &str) -> Option<&LatencyEntry> {
        self.entries.iter().find(|e| e.pipeline == name)
    }
}

/// Wraps a detector and accumulates the wall time of its calls.
struct TimedDetector<'a> {
    inner: &'a dyn TwoStageDetector,
    spent: Cell<Duration>,
}

impl<'a> TimedDetector<'a> {
    fn new(inner: &'a dyn TwoStageDetector) -> Self {
        TimedDetector {
            inner,
            spent: Cell::new(Duration::ZERO),
        }
    }

    fn take(&self) -> Duration {
        self.spent.replace(Duration::ZERO)
    }
}

impl TwoStageDetector for TimedDetector<'_> {
    fn propose(&self, frame: usize) -> Result<Vec<Proposal>, DetectorError> {
        let start = Instant::now();
        let result = self.inner.propose(frame);
        self.spent.set(self.spent.get() + start.elapsed());
        result
    }

    fn refine(
        &self,
        frame: usize,
        proposals: &[Proposal],
    ) -> Result<Vec<ScoredDetection>, DetectorError> {
        let start = Instant::now();
        let result = self.inner.refine(frame, proposals);
        self.spent.set(self.spent.get() + start.elapsed());
        result
    }
}

/// Measures mean per-frame latency for each pipeline over `frames` frames and
/// `repetitions` repetitions of the identical input stream. The plain
/// pipeline always runs (it is the overhead reference) even when not
/// requested.
pub fn bench_latency(
    kinds: &[PipelineKind],
    detector: &dyn TwoStageDetector,
    cfg: &PipelineConfig,
    frames: usize,
    repetitions: usize,
    seed: u64,
) -> Result<LatencyReport, MetricsError> {
    if frames <= WARMUP_FRAMES || frames * repetitions < 100 {
        return Err(MetricsError::InsufficientSamples {
            needed: 100,
            got: frames * repetitions,
        });
    }

    let mut ordered: Vec<PipelineKind> = vec![PipelineKind::Plain];
    ordered.extend(kinds.iter().copied().filter(|k| *k != PipelineKind::Plain));

    let mut means: Vec<(PipelineKind, f64, f64, usize)> = Vec::new();
    for kind in &ordered {
        let mut total = Duration::ZERO;
        let mut non_detector = Duration::ZERO;
        let mut samples = 0usize;
        for rep in 0..repetitions {
            let timed = TimedDetector::new(detector);
            let mut pipeline = Pipeline::new(*kind, cfg.clone(), seed.wrapping_add(rep as u64));
            for frame in 0..frames {
                let start = Instant::now();
                pipeline
                    .step(&timed, frame)
                    .map_err(|e| MetricsError::Pipeline(e.to_string()))?;
                let elapsed = start.elapsed();
                let inside = timed.take();
                if frame >= WARMUP_FRAMES {
                    total += elapsed;
                    non_detector += elapsed.saturating_sub(inside);
                    samples += 1;
                }
            }
        }
        means.push((
            *kind,
            total.as_secs_f64() * 1e3 / samples as f64,
            non_detector.as_secs_f64() * 1e3 / samples as f64,
            samples,
        ));
    }

    let plain_mean = means[0].1;
    let entries = means
        .into_iter()
        .filter(|(kind, ..)| *kind == PipelineKind::Plain || kinds.contains(kind))
        .map(
            |(kind, mean_ms, non_detector_mean_ms, samples)| LatencyEntry {
                pipeline: kind.name().to_string(),
                mean_ms,
                overhead_ms: mean_ms - plain_mean,
                non_detector_mean_ms,
                samples,
            },
        )
        .collect();
    Ok(LatencyReport {
        frames,
        repetitions,
        entries,
    })
}

/// A small world sized for latency runs: two agents and one pole over an
/// arbitrary frame count, so per-frame detector work stays low and flat.
pub fn bench_world(frames: u32, seed: u64) -> WorldSpec {
    use crate::detector::AgentSpec;
    let last = frames.saturating_sub(1).max(1);
    WorldSpec {
        format: crate::detector::WORLD_FORMAT_VERSION,
        frame_size: (640.0, 360.0),
        frames,
        agents: vec![
            AgentSpec {
                id: 1,
                size: (28.0, 64.0),
                waypoints: vec![(0, 140.0, 120.0), (last, 420.0, 140.0)],
            },
            AgentSpec {
                id: 2,
                size: (24.0, 56.0),
                waypoints: vec![(0, 500.0, 240.0), (last, 180.0, 230.0)],
            },
        ],
        occluders: vec![crate::geometry::BBox::new(300.0, 0.0, 26.0, 360.0)],
        seed,
    }
}
