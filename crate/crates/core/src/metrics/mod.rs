//! Evaluation: Pascal VOC mAP, CLEAR-MOT counters, IDF1, DetA and latency
//! overhead measurement, plus the combined report serialization.

mod latency;
mod map;
mod mot;

pub use latency::{bench_latency, bench_world, LatencyEntry, LatencyReport, WARMUP_FRAMES};
pub use map::{voc_map, ApResult, ClassAp, Interpolation};
pub use mot::{
    clear_mot, det_a, det_a_averaged, evaluate_tracking, evaluate_tracking_with, idf1,
    ClearMotStats, MotReport, TrackingEvalOptions,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("ground truth is empty; the metric is undefined")]
    EmptyGroundTruth,
    #[error("frame {frame}: {side} detection without a track id")]
    MissingId { frame: usize, side: String },
    #[error("frame {frame}: duplicate {side} id {id}")]
    DuplicateId { frame: usize, id: i64, side: String },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("pipeline failed during measurement: {0}")]
    Pipeline(String),
}

pub const REPORT_FORMAT_VERSION: u32 = 1;

fn default_report_format() -> u32 {
    REPORT_FORMAT_VERSION
}

/// Combined evaluation report, serialized as JSON and printable as an aligned
/// text table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default = "default_report_format")]
    pub format: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<ApResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mot: Option<MotReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyReport>,
}

impl EvalReport {
    pub fn new() -> Self {
        EvalReport {
            format: REPORT_FORMAT_VERSION,
            map: None,
            mot: None,
            latency: None,
        }
    }

    /// Aligned plain-text rendering of whatever sections are present.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        if let Some(map) = &self.map {
            out.push_str(&format!("{:<12} {:>8}\n", "class", "AP"));
            for (class, ap) in &map.per_class {
                out.push_str(&format!("{:<12} {:>8.4}\n", class, ap.ap));
            }
            out.push_str(&format!("{:<12} {:>8.4}\n\n", "mAP", map.map));
        }
        if let Some(mot) = &self.mot {
            out.push_str(&format!(
                "{:>8} {:>8} {:>8} {:>5} {:>5} {:>7} {:>7} {:>5} {:>8}\n",
                "MOTA", "MOTP", "IDF1", "MT", "ML", "FP", "FN", "IDS", "DetA"
            ));
            out.push_str(&format!(
                "{:>8.3} {:>8.3} {:>8.3} {:>5} {:>5} {:>7} {:>7} {:>5} {:>8.3}\n\n",
                mot.mota,
                mot.motp,
                mot.idf1,
                mot.mostly_tracked,
                mot.mostly_lost,
                mot.false_positives,
                mot.false_negatives,
                mot.id_switches,
                mot.deta,
            ));
        }
        if let Some(latency) = &self.latency {
            out.push_str(&format!(
                "{:<14} {:>10} {:>12} {:>14} {:>8}\n",
                "pipeline", "mean ms", "overhead ms", "non-det ms", "samples"
            ));
            for e in &latency.entries {
                out.push_str(&format!(
                    "{:<14} {:>10.4} {:>12.4} {:>14.4} {:>8}\n",
                    e.pipeline, e.mean_ms, e.overhead_ms, e.non_detector_mean_ms, e.samples
                ));
            }
        }
        out
    }
}

impl Default for EvalReport {
    fn default() -> Self {
        Self::new()
    }
}
