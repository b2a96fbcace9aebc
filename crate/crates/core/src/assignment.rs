//! Matching between box sets.
//!
//! Two matchers with different jobs: [`greedy_iou_assign`] is the cheap
//! deterministic association used on the runtime filter path, and
//! [`optimal_assign`] is an exact minimum-cost bipartite solver reserved for
//! the evaluation metrics, which require optimal matching.

use crate::geometry::BBox;

/// Result of matching a `left` box list against a `right` box list.
///
/// Each index appears in at most one pair; pairs plus the unmatched lists
/// cover both sides exactly once, and every pair carries an IoU at or above
/// the threshold it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(left_index, right_index, iou)` triples.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_left: Vec<usize>,
    pub unmatched_right: Vec<usize>,
}

impl Assignment {
    /// Right index matched to `left_index`, if any.
    pub fn right_of(&self, left_index: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == left_index).map(|p| p.1)
    }
}

/// Repeatedly matches the globally highest-IoU remaining pair with
/// IoU >= `min_iou`. Ties break by `(left index, right index)`.
///
/// When one side is small (the per-frame filter path: many particles, few
/// detections) the pair list is consumed by repeated maximum scans instead of
/// a full sort; both routes pick pairs in the identical order.
pub fn greedy_iou_assign(left: &[BBox], right: &[BBox], min_iou: f64) -> Assignment {
    let rounds = left.len().min(right.len());
    let mut left_used = vec![false; left.len()];
    let mut right_used = vec![false; right.len()];
    let mut pairs = Vec::new();

    if rounds <= 8 {
        for _ in 0..rounds {
            let mut best: Option<(usize, usize, f64)> = None;
            for (i, a) in left.iter().enumerate() {
                if left_used[i] {
                    continue;
                }
                for (j, b) in right.iter().enumerate() {
                    if right_used[j] {
                        continue;
                    }
                    let iou = a.iou(b);
                    if iou < min_iou {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bi, bj, biou)) => iou > biou || (iou == biou && (i, j) < (bi, bj)),
                    };
                    if better {
                        best = Some((i, j, iou));
                    }
                }
            }
            match best {
                Some((i, j, iou)) => {
                    left_used[i] = true;
                    right_used[j] = true;
                    pairs.push((i, j, iou));
                }
                None => break,
            }
        }
    } else {
        let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
        for (i, a) in left.iter().enumerate() {
            for (j, b) in right.iter().enumerate() {
                let iou = a.iou(b);
                if iou >= min_iou {
                    candidates.push((i, j, iou));
                }
            }
        }
        candidates.sort_by(|x, y| {
            y.2.partial_cmp(&x.2)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(x.0.cmp(&y.0))
                .then(x.1.cmp(&y.1))
        });
        for (i, j, iou) in candidates {
            if !left_used[i] && !right_used[j] {
                left_used[i] = true;
                right_used[j] = true;
                pairs.push((i, j, iou));
            }
        }
    }

    Assignment {
        pairs,
        unmatched_left: (0..left.len()).filter(|&i| !left_used[i]).collect(),
        unmatched_right: (0..right.len()).filter(|&j| !right_used[j]).collect(),
    }
}

/// Exact minimum-cost bipartite assignment (Hungarian algorithm with
/// potentials, O(n^3)).
///
/// Rectangular matrices are padded internally with zero-cost dummy rows or
/// columns, so every row is matched when `rows <= cols` and every column when
/// `cols <= rows`. Returns `(row, col)` pairs sorted by row. Costs must be
/// finite; the matrix must be rectangular.
pub fn optimal_assign(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return Vec::new();
    }
    assert!(
        cost.iter().all(|r| r.len() == cols),
        "cost matrix must be rectangular"
    );
    assert!(
        cost.iter().flatten().all(|c| c.is_finite()),
        "cost matrix entries must be finite"
    );

    let n = rows.max(cols);
    let at = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            cost[i][j]
        } else {
            0.0
        }
    };

    // 1-based internals; p[j] is the row matched to column j, 0 means free.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter_map(|j| {
            let i = p[j];
            if i >= 1 && i - 1 < rows && j - 1 < cols {
                Some((i - 1, j - 1))
            } else {
                None
            }
        })
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Total cost of a pairing under a cost matrix.
pub fn pairing_cost(cost: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| cost[i][j]).sum()
}
