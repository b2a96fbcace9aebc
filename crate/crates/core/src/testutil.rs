//! Independent oracles and generators used by the test suites.
//!
//! Everything here deliberately re-derives results from first principles
//! (exhaustive enumeration, closed forms, plane decomposition) so the oracles
//! stay independent of the implementation paths they check. The module is
//! compiled only for tests and for the `testutil` feature that the
//! integration suites enable.

use crate::geometry::{BBox, ScoredDetection};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_boxes(rng: &mut impl Rng, count: usize, extent: f64) -> Vec<BBox> {
    (0..count)
        .map(|_| {
            BBox::new(
                rng.random_range(-10.0..extent),
                rng.random_range(-10.0..extent),
                rng.random_range(0.0..extent / 2.0),
                rng.random_range(0.0..extent / 2.0),
            )
        })
        .collect()
}

pub fn random_detections(rng: &mut impl Rng, count: usize, extent: f64) -> Vec<ScoredDetection> {
    random_boxes(rng, count, extent)
        .into_iter()
        .map(|b| ScoredDetection::new(b, rng.random_range(0.0..1.0)))
        .collect()
}

/// Suppression by repeated extraction of the global confidence maximum,
/// the textbook formulation of greedy NMS.
pub fn nms_bruteforce(candidates: &[ScoredDetection], iou_threshold: f64) -> Vec<ScoredDetection> {
    let mut remaining: Vec<(usize, ScoredDetection)> =
        candidates.iter().copied().enumerate().collect();
    let mut kept = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0usize;
        for k in 1..remaining.len() {
            let (bi, bd) = remaining[best];
            let (ki, kd) = remaining[k];
            if kd.confidence > bd.confidence || (kd.confidence == bd.confidence && ki < bi) {
                best = k;
            }
        }
        let (_, seed) = remaining.remove(best);
        remaining.retain(|(_, d)| seed.bbox.iou(&d.bbox) <= iou_threshold);
        kept.push(seed);
    }
    kept
}

/// IoU recomputed through plane decomposition: the union area of the two
/// rectangles is measured on the compressed coordinate grid, and the
/// intersection follows from inclusion-exclusion.
pub fn iou_decomposition(a: &BBox, b: &BBox) -> f64 {
    let union = union_area(&[*a, *b]);
    let inter = a.area() + b.area() - union;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Exact area of a union of rectangles via coordinate compression.
pub fn union_area(rects: &[BBox]) -> f64 {
    let rects: Vec<&BBox> = rects.iter().filter(|r| r.area() > 0.0).collect();
    if rects.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = rects.iter().flat_map(|r| [r.left, r.right()]).collect();
    let mut ys: Vec<f64> = rects.iter().flat_map(|r| [r.top, r.bottom()]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    ys.dedup();

    let mut area = 0.0;
    for xi in 0..xs.len() - 1 {
        for yi in 0..ys.len() - 1 {
            let cx = (xs[xi] + xs[xi + 1]) / 2.0;
            let cy = (ys[yi] + ys[yi + 1]) / 2.0;
            let covered = rects
                .iter()
                .any(|r| cx > r.left && cx < r.right() && cy > r.top && cy < r.bottom());
            if covered {
                area += (xs[xi + 1] - xs[xi]) * (ys[yi + 1] - ys[yi]);
            }
        }
    }
    area
}

/// Minimum assignment cost of a square matrix by enumerating every
/// permutation.
pub fn bruteforce_min_cost(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        if total < best {
            best = total;
        }
    });
    best
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Monte-Carlo estimate of the fraction of `target` covered by the union of
/// `covers`.
pub fn monte_carlo_covered_fraction(
    target: &BBox,
    covers: &[BBox],
    samples: usize,
    seed: u64,
) -> f64 {
    let mut r = rng(seed);
    let mut hit = 0usize;
    for _ in 0..samples {
        let x = target.left + r.random::<f64>() * target.width;
        let y = target.top + r.random::<f64>() * target.height;
        if covers
            .iter()
            .any(|c| x >= c.left && x <= c.right() && y >= c.top && y <= c.bottom())
        {
            hit += 1;
        }
    }
    hit as f64 / samples as f64
}

/// Closed-form scalar Kalman recursion: state x, variance p, process noise q,
/// measurement noise r. Returns the posterior (x, p) after one
/// predict/update cycle against measurement z.
pub fn scalar_kalman_step(x: f64, p: f64, q: f64, r: f64, z: f64) -> (f64, f64) {
    let p_pred = p + q;
    let k = p_pred / (p_pred + r);
    let x_post = x + k * (z - x);
    let p_post = (1.0 - k) * p_pred;
    (x_post, p_post)
}

/// A random toy detection dataset: ground truth on a loose grid, predictions
/// perturbed from it plus pure-noise extras, unique confidences.
pub fn random_detection_dataset(
    rng: &mut impl Rng,
    frames: usize,
    objects_per_frame: usize,
) -> (Vec<Vec<ScoredDetection>>, Vec<Vec<ScoredDetection>>) {
    let mut predictions = Vec::with_capacity(frames);
    let mut ground_truth = Vec::with_capacity(frames);
    for _ in 0..frames {
        let mut gt_frame = Vec::new();
        let mut pred_frame = Vec::new();
        for k in 0..rng.random_range(1..=objects_per_frame) {
            let bbox = BBox::new(
                60.0 * k as f64 + rng.random_range(0.0..10.0),
                rng.random_range(0.0..120.0),
                rng.random_range(12.0..30.0),
                rng.random_range(20.0..50.0),
            );
            gt_frame.push(ScoredDetection::new(bbox, 1.0));
            // Perturbed prediction; sometimes badly off.
            let miss = rng.random::<f64>() < 0.25;
            let offset = if miss {
                80.0
            } else {
                rng.random_range(0.0..4.0)
            };
            pred_frame.push(ScoredDetection::new(
                bbox.shifted(offset, rng.random_range(-2.0..2.0)),
                rng.random_range(0.05..1.0),
            ));
        }
        for _ in 0..rng.random_range(0..3) {
            pred_frame.push(ScoredDetection::new(
                BBox::new(
                    rng.random_range(300.0..500.0),
                    rng.random_range(200.0..400.0),
                    rng.random_range(10.0..40.0),
                    rng.random_range(10.0..40.0),
                ),
                rng.random_range(0.05..1.0),
            ));
        }
        predictions.push(pred_frame);
        ground_truth.push(gt_frame);
    }
    (predictions, ground_truth)
}

/// A random tracking instance with up to `tracks` trajectories per side over
/// `frames` frames, built so identities fragment and drift.
#[allow(clippy::needless_range_loop)] // the index is both lane and track id
pub fn random_tracking_instance(
    rng: &mut impl Rng,
    tracks: usize,
    frames: usize,
) -> (Vec<Vec<ScoredDetection>>, Vec<Vec<ScoredDetection>>) {
    let n_gt = rng.random_range(1..=tracks);
    let n_hyp = rng.random_range(1..=tracks);
    let lanes: Vec<f64> = (0..tracks.max(1)).map(|i| 100.0 * i as f64).collect();

    let mut gt = vec![Vec::new(); frames];
    for id in 0..n_gt {
        let start = rng.random_range(0..frames / 2 + 1);
        let end = rng.random_range(start..frames);
        for (frame, gt_frame) in gt.iter_mut().enumerate().take(end + 1).skip(start) {
            gt_frame.push(ScoredDetection::with_id(
                BBox::new(lanes[id] + 2.0 * frame as f64, 0.0, 20.0, 40.0),
                1.0,
                id as i64 + 1,
            ));
        }
    }
    let mut hyp = vec![Vec::new(); frames];
    for id in 0..n_hyp {
        let lane = rng.random_range(0..tracks.max(1));
        let start = rng.random_range(0..frames / 2 + 1);
        let end = rng.random_range(start..frames);
        let jitter = rng.random_range(0.0..14.0);
        for (frame, hyp_frame) in hyp.iter_mut().enumerate().take(end + 1).skip(start) {
            hyp_frame.push(ScoredDetection::with_id(
                BBox::new(lanes[lane] + 2.0 * frame as f64 + jitter, 0.0, 20.0, 40.0),
                1.0,
                id as i64 + 1,
            ));
        }
    }
    (hyp, gt)
}

/// Average precision by threshold enumeration: for every distinct confidence
/// threshold, re-match the kept detections from scratch and collect one
/// precision/recall point, then integrate the precision envelope explicitly.
/// Mean over the classes present in the ground truth.
pub fn ap_threshold_oracle(
    predictions: &[Vec<ScoredDetection>],
    ground_truth: &[Vec<ScoredDetection>],
    iou_thr: f64,
) -> f64 {
    let mut classes: Vec<i32> = ground_truth.iter().flatten().map(|d| d.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    assert!(!classes.is_empty(), "oracle needs ground truth");

    let mut total = 0.0;
    for class in &classes {
        let gt_total = ground_truth
            .iter()
            .flatten()
            .filter(|d| d.class_id == *class)
            .count();
        let mut thresholds: Vec<f64> = predictions
            .iter()
            .flatten()
            .filter(|d| d.class_id == *class)
            .map(|d| d.confidence)
            .collect();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();

        // One PR point per threshold, matched from scratch.
        let mut points: Vec<(f64, f64)> = Vec::new();
        for &t in &thresholds {
            let mut ranked: Vec<(f64, usize, usize)> = Vec::new();
            for (frame, dets) in predictions.iter().enumerate() {
                for (idx, d) in dets.iter().enumerate() {
                    if d.class_id == *class && d.confidence >= t {
                        ranked.push((d.confidence, frame, idx));
                    }
                }
            }
            ranked.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .unwrap()
                    .then(a.1.cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            });
            let mut matched: Vec<Vec<bool>> =
                ground_truth.iter().map(|f| vec![false; f.len()]).collect();
            let mut tp = 0usize;
            let mut fp = 0usize;
            for (_, frame, idx) in ranked {
                let det = &predictions[frame][idx];
                let frame_gt = ground_truth.get(frame).map(Vec::as_slice).unwrap_or(&[]);
                let best = frame_gt
                    .iter()
                    .enumerate()
                    .filter(|(gi, g)| g.class_id == *class && !matched[frame][*gi])
                    .map(|(gi, g)| (gi, det.bbox.iou(&g.bbox)))
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
                match best {
                    Some((gi, iou)) if iou >= iou_thr => {
                        matched[frame][gi] = true;
                        tp += 1;
                    }
                    _ => fp += 1,
                }
            }
            points.push((
                tp as f64 / gt_total.max(1) as f64,
                if tp + fp > 0 {
                    tp as f64 / (tp + fp) as f64
                } else {
                    1.0
                },
            ));
        }

        // Envelope integration over increasing recall.
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for (i, &(recall, _)) in points.iter().enumerate() {
            if recall > prev_recall {
                let envelope = points[i..].iter().map(|&(_, p)| p).fold(0.0f64, f64::max);
                ap += (recall - prev_recall) * envelope;
                prev_recall = recall;
            }
        }
        total += ap;
    }
    total / classes.len() as f64
}

/// IDF1 by brute force: enumerate every injective partial mapping from
/// ground-truth trajectories to hypothesis trajectories and maximize the
/// co-located frame count.
pub fn idf1_bruteforce(
    tracked: &[Vec<ScoredDetection>],
    ground_truth: &[Vec<ScoredDetection>],
    iou_thr: f64,
) -> f64 {
    use std::collections::BTreeMap;
    fn collect(frames: &[Vec<ScoredDetection>]) -> BTreeMap<i64, BTreeMap<usize, BBox>> {
        let mut out: BTreeMap<i64, BTreeMap<usize, BBox>> = BTreeMap::new();
        for (frame, dets) in frames.iter().enumerate() {
            for d in dets {
                out.entry(d.track_id.expect("id"))
                    .or_default()
                    .insert(frame, d.bbox);
            }
        }
        out
    }
    let gt = collect(ground_truth);
    let hyp = collect(tracked);
    let gt_list: Vec<&BTreeMap<usize, BBox>> = gt.values().collect();
    let hyp_list: Vec<&BTreeMap<usize, BBox>> = hyp.values().collect();
    let gt_frames: usize = gt_list.iter().map(|t| t.len()).sum();
    let hyp_frames: usize = hyp_list.iter().map(|t| t.len()).sum();

    let overlap = |a: &BTreeMap<usize, BBox>, b: &BTreeMap<usize, BBox>| -> usize {
        a.iter()
            .filter(|(f, bb)| b.get(f).map(|o| bb.iou(o) >= iou_thr).unwrap_or(false))
            .count()
    };

    fn search(
        gi: usize,
        used: &mut Vec<bool>,
        gt_list: &[&BTreeMap<usize, BBox>],
        hyp_list: &[&BTreeMap<usize, BBox>],
        overlap: &impl Fn(&BTreeMap<usize, BBox>, &BTreeMap<usize, BBox>) -> usize,
    ) -> usize {
        if gi == gt_list.len() {
            return 0;
        }
        // gt gi left unmatched.
        let mut best = search(gi + 1, used, gt_list, hyp_list, overlap);
        for hi in 0..hyp_list.len() {
            if !used[hi] {
                used[hi] = true;
                let score = overlap(gt_list[gi], hyp_list[hi])
                    + search(gi + 1, used, gt_list, hyp_list, overlap);
                used[hi] = false;
                best = best.max(score);
            }
        }
        best
    }

    let mut used = vec![false; hyp_list.len()];
    let idtp = search(0, &mut used, &gt_list, &hyp_list, &overlap);
    if gt_frames + hyp_frames == 0 {
        return 0.0;
    }
    2.0 * idtp as f64 / (gt_frames + hyp_frames) as f64
}
