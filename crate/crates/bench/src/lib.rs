//! Shared scenario builders for the criterion benches.

use iop_core::detector::{SyntheticDetector, SyntheticDetectorConfig, WorldSpec};
use iop_core::metrics::bench_world;

/// A detector over the standard latency world.
pub fn bench_detector(frames: u32, seed: u64) -> SyntheticDetector {
    let world: WorldSpec = bench_world(frames, seed);
    SyntheticDetector::new(world, SyntheticDetectorConfig::default(), seed)
}
