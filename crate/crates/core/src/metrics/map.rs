//! Pascal VOC average precision.
//!
//! Detections are ranked by confidence globally per class and matched
//! greedily to the highest-IoU unmatched ground truth of their frame; AP is
//! the area under the precision envelope (all-point interpolation by default,
//! the historical 11-point protocol behind a flag).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::geometry::ScoredDetection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    AllPoint,
    ElevenPoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassAp {
    pub ap: f64,
    /// `(recall, precision)` after each ranked detection; recall is
    /// non-decreasing along the curve.
    pub curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApResult {
    pub per_class: BTreeMap<i32, ClassAp>,
    /// Mean AP over the classes present in the ground truth.
    pub map: f64,
}

/// Computes per-class AP and their mean. Frames are aligned by index. Errors
/// if the ground truth is empty: AP is undefined then, not zero.
pub fn voc_map(
    predictions: &[Vec<ScoredDetection>],
    ground_truth: &[Vec<ScoredDetection>],
    iou_thr: f64,
    interpolation: Interpolation,
) -> Result<ApResult, MetricsError> {
    let classes: Vec<i32> = {
        let mut set: Vec<i32> = ground_truth.iter().flatten().map(|d| d.class_id).collect();
        set.sort_unstable();
        set.dedup();
        set
    };
    if classes.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }

    let mut per_class = BTreeMap::new();
    for class in classes {
        per_class.insert(
            class,
            class_ap(predictions, ground_truth, class, iou_thr, interpolation),
        );
    }
    let map = per_class.values().map(|c| c.ap).sum::<f64>() / per_class.len() as f64;
    Ok(ApResult { per_class, map })
}

fn class_ap(
    predictions: &[Vec<ScoredDetection>],
    ground_truth: &[Vec<ScoredDetection>],
    class: i32,
    iou_thr: f64,
    interpolation: Interpolation,
) -> ClassAp {
    let gt_total: usize = ground_truth
        .iter()
        .flatten()
        .filter(|d| d.class_id == class)
        .count();

    // (confidence, frame, index-within-frame), ranked by confidence with a
    // deterministic tie-break.
    let mut ranked: Vec<(f64, usize, usize)> = Vec::new();
    for (frame, dets) in predictions.iter().enumerate() {
        for (idx, det) in dets.iter().enumerate() {
            if det.class_id == class {
                ranked.push((det.confidence, frame, idx));
            }
        }
    }
    ranked.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut matched: Vec<Vec<bool>> = ground_truth.iter().map(|f| vec![false; f.len()]).collect();
    let mut curve = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    for (_, frame, idx) in &ranked {
        let det = &predictions[*frame][*idx];
        let frame_gt = ground_truth.get(*frame).map(Vec::as_slice).unwrap_or(&[]);
        // Highest-IoU unmatched ground truth of this frame.
        let best = frame_gt
            .iter()
            .enumerate()
            .filter(|(gi, g)| g.class_id == class && !matched[*frame][*gi])
            .map(|(gi, g)| (gi, det.bbox.iou(&g.bbox)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        match best {
            Some((gi, iou)) if iou >= iou_thr => {
                matched[*frame][gi] = true;
                tp += 1;
            }
            _ => fp += 1,
        }
        curve.push((
            tp as f64 / gt_total.max(1) as f64,
            tp as f64 / (tp + fp) as f64,
        ));
    }

    ClassAp {
        ap: interpolate(&curve, interpolation),
        curve,
    }
}

/// Area under the precision envelope of a PR curve.
fn interpolate(curve: &[(f64, f64)], interpolation: Interpolation) -> f64 {
    match interpolation {
        Interpolation::AllPoint => {
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for (i, &(recall, _)) in curve.iter().enumerate() {
                if recall > prev_recall {
                    let envelope = curve[i..].iter().map(|&(_, p)| p).fold(0.0f64, f64::max);
                    ap += (recall - prev_recall) * envelope;
                    prev_recall = recall;
                }
            }
            ap
        }
        Interpolation::ElevenPoint => {
            let mut total = 0.0;
            for step in 0..=10 {
                let r = step as f64 / 10.0;
                let envelope = curve
                    .iter()
                    .filter(|&&(recall, _)| recall >= r - 1e-12)
                    .map(|&(_, p)| p)
                    .fold(0.0f64, f64::max);
                total += envelope;
            }
            total / 11.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    fn det(l: f64, conf: f64) -> ScoredDetection {
        ScoredDetection::new(BBox::new(l, 0.0, 10.0, 10.0), conf)
    }

    #[test]
    fn perfect_predictions_give_ap_one() {
        let gt = vec![vec![det(0.0, 1.0), det(50.0, 1.0)], vec![det(20.0, 1.0)]];
        let result = voc_map(&gt, &gt, 0.5, Interpolation::AllPoint).unwrap();
        assert_eq!(result.map, 1.0);
    }

    #[test]
    fn disjoint_predictions_give_ap_zero() {
        let gt = vec![vec![det(0.0, 1.0)]];
        let pred = vec![vec![det(500.0, 0.9)]];
        let result = voc_map(&pred, &gt, 0.5, Interpolation::AllPoint).unwrap();
        assert_eq!(result.map, 0.0);
    }

    #[test]
    fn empty_ground_truth_is_an_error() {
        let pred = vec![vec![det(0.0, 0.9)]];
        let gt = vec![vec![]];
        assert!(voc_map(&pred, &gt, 0.5, Interpolation::AllPoint).is_err());
    }

    #[test]
    fn toy_curve_matches_hand_computation() {
        // Three ground-truth boxes across three frames; two true positives at
        // high confidence, then one false positive. PR points:
        // (1/3, 1), (2/3, 1), (2/3, 2/3); all-point AP = 2/3.
        let gt = vec![
            vec![det(0.0, 1.0)],
            vec![det(0.0, 1.0)],
            vec![det(0.0, 1.0)],
        ];
        let pred = vec![
            vec![det(0.0, 0.9)],
            vec![det(0.0, 0.8)],
            vec![det(500.0, 0.7)],
        ];
        let result = voc_map(&pred, &gt, 0.5, Interpolation::AllPoint).unwrap();
        let class = &result.per_class[&1];
        let expect = [(1.0 / 3.0, 1.0), (2.0 / 3.0, 1.0), (2.0 / 3.0, 2.0 / 3.0)];
        assert_eq!(class.curve.len(), 3);
        for ((r, p), (er, ep)) in class.curve.iter().zip(expect) {
            assert!((r - er).abs() < 1e-12 && (p - ep).abs() < 1e-12);
        }
        assert!((class.ap - 2.0 / 3.0).abs() < 1e-12);

        // Eleven-point: envelope 1.0 for recall grid points up to 0.6, zero
        // above 2/3 -> 7/11.
        let eleven = voc_map(&pred, &gt, 0.5, Interpolation::ElevenPoint).unwrap();
        assert!((eleven.map - 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn ap_is_invariant_under_monotone_confidence_transforms() {
        let mut rng = crate::testutil::rng(8);
        let (pred, gt) = crate::testutil::random_detection_dataset(&mut rng, 6, 5);
        let base = voc_map(&pred, &gt, 0.5, Interpolation::AllPoint).unwrap();
        let squashed: Vec<Vec<ScoredDetection>> = pred
            .iter()
            .map(|frame| {
                frame
                    .iter()
                    .map(|d| ScoredDetection {
                        confidence: (d.confidence * 3.0).tanh(),
                        ..*d
                    })
                    .collect()
            })
            .collect();
        let transformed = voc_map(&squashed, &gt, 0.5, Interpolation::AllPoint).unwrap();
        assert!((base.map - transformed.map).abs() < 1e-12);
    }
}
