//! Axis-aligned box arithmetic, IoU and non-maximum suppression.
//!
//! Every pipeline and every metric in this crate speaks in terms of [`BBox`]
//! and [`ScoredDetection`]. Boxes are stored corner-form (`left`, `top`,
//! `width`, `height`) so MOT CSV rows map onto them without conversion;
//! center-form is derived.

use serde::{Deserialize, Serialize};

/// Class id used for pedestrians throughout the MOT conventions.
pub const PEDESTRIAN_CLASS: i32 = 1;

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        BBox {
            left,
            top,
            width,
            height,
        }
    }

    /// Builds a box from its center point and size.
    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        BBox {
            left: cx - width / 2.0,
            top: cy - height / 2.0,
            width,
            height,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + self.width / 2.0, self.top + self.height / 2.0)
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Area of the intersection with `other`; zero for disjoint boxes.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = (self.right().min(other.right()) - self.left.max(other.left)).max(0.0);
        let h = (self.bottom().min(other.bottom()) - self.top.max(other.top)).max(0.0);
        w * h
    }

    /// Intersection over union. Zero-area boxes participate with value 0
    /// rather than raising an error: clipping can legitimately produce them
    /// mid-pipeline.
    ///
    /// Areas are computed from the same edge coordinates as the
    /// intersection, so identical boxes score exactly 1.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let area_a = (self.right() - self.left) * (self.bottom() - self.top);
        let area_b = (other.right() - other.left) * (other.bottom() - other.top);
        let union = area_a + area_b - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Translates the box by `(dx, dy)`.
    pub fn shifted(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            left: self.left + dx,
            top: self.top + dy,
            ..*self
        }
    }

    /// Intersects the box with the frame rectangle `[0, w] x [0, h]`.
    /// Degenerate (zero-area) results are permitted.
    pub fn clip(&self, frame_width: f64, frame_height: f64) -> BBox {
        let left = self.left.max(0.0);
        let top = self.top.max(0.0);
        let width = (self.right().min(frame_width) - left).max(0.0);
        let height = (self.bottom().min(frame_height) - top).max(0.0);
        BBox {
            left,
            top,
            width,
            height,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.left.is_finite()
            && self.top.is_finite()
            && self.width.is_finite()
            && self.height.is_finite()
    }
}

/// Intersection-over-union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

/// See [`BBox::clip`].
pub fn clip(bbox: &BBox, frame_width: f64, frame_height: f64) -> BBox {
    bbox.clip(frame_width, frame_height)
}

/// A box with a confidence score, a class and an optional track identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredDetection {
    pub bbox: BBox,
    pub confidence: f64,
    pub class_id: i32,
    pub track_id: Option<i64>,
}

impl ScoredDetection {
    pub fn new(bbox: BBox, confidence: f64) -> Self {
        ScoredDetection {
            bbox,
            confidence,
            class_id: PEDESTRIAN_CLASS,
            track_id: None,
        }
    }

    pub fn with_id(bbox: BBox, confidence: f64, track_id: i64) -> Self {
        ScoredDetection {
            bbox,
            confidence,
            class_id: PEDESTRIAN_CLASS,
            track_id: Some(track_id),
        }
    }
}

/// Greedy descending-confidence non-maximum suppression.
///
/// Every pair of surviving detections has IoU <= `iou_threshold`, the output
/// is a subset of the input, and confidence ties break towards the smaller
/// insertion index so runs are reproducible bit-for-bit.
pub fn nms(candidates: &[ScoredDetection], iou_threshold: f64) -> Vec<ScoredDetection> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    // Stable sort keeps insertion order among equal confidences.
    order.sort_by(|&a, &b| {
        candidates[b]
            .confidence
            .partial_cmp(&candidates[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut kept: Vec<ScoredDetection> = Vec::new();
    for idx in order {
        let candidate = &candidates[idx];
        let suppressed = kept
            .iter()
            .any(|k| k.bbox.iou(&candidate.bbox) > iou_threshold);
        if !suppressed {
            kept.push(*candidate);
        }
    }
    kept
}
