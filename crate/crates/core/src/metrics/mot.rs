//! CLEAR-MOT counters, IDF1 and DetA.
//!
//! CLEAR matching carries previous-frame correspondences that still hold at
//! the gate, matches the remainder optimally on 1-IoU cost, and counts FP,
//! FN and id switches. IDF1 matches whole trajectories globally; DetA is a
//! gated per-frame detection accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::assignment::optimal_assign;
use crate::geometry::{BBox, ScoredDetection};

/// Cost standing in for "no match" in gated optimal assignments. Far larger
/// than any sum of real costs (which are at most 1 each), so the solver
/// maximizes the number of gated matches first.
const NO_MATCH: f64 = 1e9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotReport {
    pub mota: f64,
    /// Mean IoU of all matches.
    pub motp: f64,
    pub idf1: f64,
    pub mostly_tracked: usize,
    pub mostly_lost: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
    pub deta: f64,
    pub true_positives: usize,
    pub gt_count: usize,
}

/// CLEAR-MOT counters (everything except IDF1/DetA, which have their own
/// matching conventions).
#[derive(Debug, Clone, PartialEq)]
pub struct ClearMotStats {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
    pub gt_count: usize,
    pub mota: f64,
    /// Mean IoU of matches (the convention the reports use).
    pub motp: f64,
    /// Mean center distance of matches in pixels, the alternative MOTP
    /// convention.
    pub motp_distance: f64,
    pub mostly_tracked: usize,
    pub mostly_lost: usize,
}

fn ided_frames(
    frames: &[Vec<ScoredDetection>],
    side: &str,
) -> Result<Vec<Vec<(i64, BBox)>>, MetricsError> {
    let mut out = Vec::with_capacity(frames.len());
    for (frame_idx, dets) in frames.iter().enumerate() {
        let mut seen = std::collections::HashSet::new();
        let mut rows = Vec::with_capacity(dets.len());
        for d in dets {
            let id = d.track_id.ok_or(MetricsError::MissingId {
                frame: frame_idx + 1,
                side: side.to_string(),
            })?;
            if !seen.insert(id) {
                return Err(MetricsError::DuplicateId {
                    frame: frame_idx + 1,
                    id,
                    side: side.to_string(),
                });
            }
            rows.push((id, d.bbox));
        }
        out.push(rows);
    }
    Ok(out)
}

/// Runs the CLEAR protocol over aligned frame lists.
pub fn clear_mot(
    tracked: &[Vec<ScoredDetection>],
    ground_truth: &[Vec<ScoredDetection>],
    iou_thr: f64,
) -> Result<ClearMotStats, MetricsError> {
    let hyp = ided_frames(tracked, "hypothesis")?;
    let gt = ided_frames(ground_truth, "ground truth")?;
    let gt_count: usize = gt.iter().map(Vec::len).sum();
    if gt_count == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }

    let frames = gt.len().max(hyp.len());
    let empty: Vec<(i64, BBox)> = Vec::new();

    // gt id -> hyp id correspondence surviving from the previous frame, and
    // the last hypothesis ever matched to each gt (for id switches).
    let mut active: BTreeMap<i64, i64> = BTreeMap::new();
    let mut last_matched: BTreeMap<i64, i64> = BTreeMap::new();
    // Per-gt-trajectory presence and coverage for MT/ML.
    let mut lifespan: BTreeMap<i64, usize> = BTreeMap::new();
    let mut covered: BTreeMap<i64, usize> = BTreeMap::new();

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_count = 0usize;
    let mut ids = 0usize;
    let mut iou_sum = 0.0f64;
    let mut distance_sum = 0.0f64;

    for frame in 0..frames {
        let gts = gt.get(frame).unwrap_or(&empty);
        let hyps = hyp.get(frame).unwrap_or(&empty);
        for (gid, _) in gts {
            *lifespan.entry(*gid).or_insert(0) += 1;
        }

        let mut gt_free: Vec<bool> = vec![true; gts.len()];
        let mut hyp_free: Vec<bool> = vec![true; hyps.len()];
        let mut matches: Vec<(usize, usize, f64)> = Vec::new();

        // Carry over correspondences that still hold at the gate.
        let mut next_active: BTreeMap<i64, i64> = BTreeMap::new();
        for (gi, (gid, gbox)) in gts.iter().enumerate() {
            if let Some(hid) = active.get(gid) {
                if let Some(hi) = hyps.iter().position(|(h, _)| h == hid) {
                    if hyp_free[hi] {
                        let iou = gbox.iou(&hyps[hi].1);
                        if iou >= iou_thr {
                            gt_free[gi] = false;
                            hyp_free[hi] = false;
                            matches.push((gi, hi, iou));
                        }
                    }
                }
            }
        }

        // Optimal matching on the remainder, gated at the threshold.
        let free_gt: Vec<usize> = (0..gts.len()).filter(|&i| gt_free[i]).collect();
        let free_hyp: Vec<usize> = (0..hyps.len()).filter(|&i| hyp_free[i]).collect();
        if !free_gt.is_empty() && !free_hyp.is_empty() {
            let cost: Vec<Vec<f64>> = free_gt
                .iter()
                .map(|&gi| {
                    free_hyp
                        .iter()
                        .map(|&hi| {
                            let iou = gts[gi].1.iou(&hyps[hi].1);
                            if iou >= iou_thr {
                                1.0 - iou
                            } else {
                                NO_MATCH
                            }
                        })
                        .collect()
                })
                .collect();
            for (row, col) in optimal_assign(&cost) {
                if cost[row][col] < NO_MATCH {
                    let (gi, hi) = (free_gt[row], free_hyp[col]);
                    matches.push((gi, hi, gts[gi].1.iou(&hyps[hi].1)));
                }
            }
        }

        let mut hyp_matched = vec![false; hyps.len()];
        for (gi, hi, iou) in &matches {
            let gid = gts[*gi].0;
            let hid = hyps[*hi].0;
            hyp_matched[*hi] = true;
            tp += 1;
            iou_sum += iou;
            let (gx, gy) = gts[*gi].1.center();
            let (hx, hy) = hyps[*hi].1.center();
            distance_sum += ((gx - hx).powi(2) + (gy - hy).powi(2)).sqrt();
            *covered.entry(gid).or_insert(0) += 1;
            if let Some(prev) = last_matched.get(&gid) {
                if *prev != hid {
                    ids += 1;
                }
            }
            last_matched.insert(gid, hid);
            next_active.insert(gid, hid);
        }
        fn_count += gts.len() - matches.len();
        fp += hyps.len() - hyp_matched.iter().filter(|&&m| m).count();
        active = next_active;
    }

    let mostly_tracked = lifespan
        .iter()
        .filter(|(gid, &life)| covered.get(gid).copied().unwrap_or(0) as f64 >= 0.8 * life as f64)
        .count();
    let mostly_lost = lifespan
        .iter()
        .filter(|(gid, &life)| covered.get(gid).copied().unwrap_or(0) as f64 <= 0.2 * life as f64)
        .count();

    Ok(ClearMotStats {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_count,
        id_switches: ids,
        gt_count,
        mota: 1.0 - (fn_count + fp + ids) as f64 / gt_count as f64,
        motp: if tp > 0 { iou_sum / tp as f64 } else { 0.0 },
        motp_distance: if tp > 0 {
            distance_sum / tp as f64
        } else {
            0.0
        },
        mostly_tracked,
        mostly_lost,
    })
}

type Trajectory = BTreeMap<usize, BBox>;

fn trajectories(frames: &[Vec<(i64, BBox)>]) -> BTreeMap<i64, Trajectory> {
    let mut out: BTreeMap<i64, Trajectory> = BTreeMap::new();
    for (frame, rows) in frames.iter().enumerate() {
        for (id, bbox) in rows {
            out.entry(*id).or_default().insert(frame, *bbox);
        }
    }
    out
}

/// Frames in which the two trajectories co-locate (IoU at or above the gate).
fn overlap_frames(a: &Trajectory, b: &Trajectory, iou_thr: f64) -> usize {
    a.iter()
        .filter(|(frame, bbox)| {
            b.get(frame)
                .map(|other| bbox.iou(other) >= iou_thr)
                .unwrap_or(false)
        })
        .count()
}

/// Identity F1: a global min-cost bipartite matching between ground-truth and
/// hypothesis trajectories where a pair costs its number of unmatched frames;
/// IDF1 = 2 IDTP / (2 IDTP + IDFP + IDFN).
pub fn idf1(
    tracked: &[Vec<ScoredDetection>],
    ground_truth: &[Vec<ScoredDetection>],
    iou_thr: f64,
) -> Result<f64, MetricsError> {
    let hyp = trajectories(&ided_frames(tracked, "hypothesis")?);
    let gt = trajectories(&ided_frames(ground_truth, "ground truth")?);
    let gt_frames: usize = gt.values().map(Trajectory::len).sum();
    if gt_frames == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let hyp_frames: usize = hyp.values().map(Trajectory::len).sum();
    if hyp.is_empty() {
        return Ok(0.0);
    }

    let gt_list: Vec<&Trajectory> = gt.values().collect();
    let hyp_list: Vec<&Trajectory> = hyp.values().collect();
    let (n_gt, n_hyp) = (gt_list.len(), hyp_list.len());

    // Square cost matrix with unmatched blocks: matching gt i to hyp j costs
    // the frames where they do not co-locate; leaving either unmatched costs
    // its full length.
    let n = n_gt + n_hyp;
    let mut cost = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            cost[i][j] = match (i < n_gt, j < n_hyp) {
                (true, true) => {
                    let overlap = overlap_frames(gt_list[i], hyp_list[j], iou_thr);
                    (gt_list[i].len() + hyp_list[j].len()) as f64 - 2.0 * overlap as f64
                }
                // gt i unmatched (paired with its dummy column).
                (true, false) => {
                    if j - n_hyp == i {
                        gt_list[i].len() as f64
                    } else {
                        NO_MATCH
                    }
                }
                // hyp j unmatched (paired with its dummy row).
                (false, true) => {
                    if i - n_gt == j {
                        hyp_list[j].len() as f64
                    } else {
                        NO_MATCH
                    }
                }
                (false, false) => 0.0,
            };
        }
    }

    let mut idtp = 0usize;
    for (i, j) in optimal_assign(&cost) {
        if i < n_gt && j < n_hyp {
            idtp += overlap_frames(gt_list[i], hyp_list[j], iou_thr);
        }
    }
    // IDFN + IDFP = (gt_frames - IDTP) + (hyp_frames - IDTP).
    Ok(2.0 * idtp as f64 / (gt_frames + hyp_frames) as f64)
}

/// Gated per-frame detection accuracy `TP / (TP + FN + FP)` under optimal
/// matching at IoU >= `alpha`.
pub fn det_a(
    tracked: &[Vec<ScoredDetection>],
    ground_truth: &[Vec<ScoredDetection>],
    alpha: f64,
) -> Result<f64, MetricsError> {
    let hyp = ided_frames(tracked, "hypothesis")?;
    let gt = ided_frames(ground_truth, "ground truth")?;
    let gt_count: usize = gt.iter().map(Vec::len).sum();
    if gt_count == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }

    let frames = gt.len().max(hyp.len());
    let empty: Vec<(i64, BBox)> = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_count = 0usize;
    for frame in 0..frames {
        let gts = gt.get(frame).unwrap_or(&empty);
        let hyps = hyp.get(frame).unwrap_or(&empty);
        let mut matched = 0usize;
        if !gts.is_empty() && !hyps.is_empty() {
            let cost: Vec<Vec<f64>> = gts
                .iter()
                .map(|(_, g)| {
                    hyps.iter()
                        .map(|(_, h)| {
                            let iou = g.iou(h);
                            if iou >= alpha {
                                1.0 - iou
                            } else {
                                NO_MATCH
                            }
                        })
                        .collect()
                })
                .collect();
            matched = optimal_assign(&cost)
                .into_iter()
                .filter(|&(i, j)| cost[i][j] < NO_MATCH)
                .count();
        }
        tp += matched;
        fn_count += gts.len() - matched;
        fp += hyps.len() - matched;
    }
    Ok(tp as f64 / (tp + fn_count + fp) as f64)
}

/// Averaged DetA over the HOTA-style alpha grid 0.05..0.95.
pub fn det_a_averaged(
    tracked: &[Vec<ScoredDetection>],
    ground_truth: &[Vec<ScoredDetection>],
) -> Result<f64, MetricsError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for step in 1..=19 {
        total += det_a(tracked, ground_truth, step as f64 * 0.05)?;
        count += 1;
    }
    Ok(total / count as f64)
}

/// Conventions for the combined tracking report.
#[derive(Debug, Clone, Copy)]
pub struct TrackingEvalOptions {
    pub iou_thr: f64,
    /// Report MOTP as mean matched center distance (pixels) instead of mean
    /// matched IoU.
    pub motp_as_distance: bool,
    /// Average DetA over the 0.05..0.95 alpha grid instead of the single
    /// gate.
    pub deta_averaged: bool,
}

impl Default for TrackingEvalOptions {
    fn default() -> Self {
        TrackingEvalOptions {
            iou_thr: 0.5,
            motp_as_distance: false,
            deta_averaged: false,
        }
    }
}

/// Full tracking report at one gate with default conventions.
pub fn evaluate_tracking(
    tracked: &[Vec<ScoredDetection>],
    ground_truth: &[Vec<ScoredDetection>],
    iou_thr: f64,
) -> Result<MotReport, MetricsError> {
    evaluate_tracking_with(
        tracked,
        ground_truth,
        TrackingEvalOptions {
            iou_thr,
            ..TrackingEvalOptions::default()
        },
    )
}

pub fn evaluate_tracking_with(
    tracked: &[Vec<ScoredDetection>],
    ground_truth: &[Vec<ScoredDetection>],
    options: TrackingEvalOptions,
) -> Result<MotReport, MetricsError> {
    let clear = clear_mot(tracked, ground_truth, options.iou_thr)?;
    let idf1 = idf1(tracked, ground_truth, options.iou_thr)?;
    let deta = if options.deta_averaged {
        det_a_averaged(tracked, ground_truth)?
    } else {
        det_a(tracked, ground_truth, options.iou_thr)?
    };
    Ok(MotReport {
        mota: clear.mota,
        motp: if options.motp_as_distance {
            clear.motp_distance
        } else {
            clear.motp
        },
        idf1,
        mostly_tracked: clear.mostly_tracked,
        mostly_lost: clear.mostly_lost,
        false_positives: clear.false_positives,
        false_negatives: clear.false_negatives,
        id_switches: clear.id_switches,
        deta,
        true_positives: clear.true_positives,
        gt_count: clear.gt_count,
    })
}
