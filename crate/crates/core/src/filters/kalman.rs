//! Constant-velocity Kalman filter over box detections.
//!
//! State is `(cx, cy, w, h, vx, vy)` in pixels and pixels per frame; the
//! measurement is the box `(cx, cy, w, h)`. Updates use the Joseph form and
//! explicit re-symmetrization to keep the covariance well behaved.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::FilterError;
use crate::assignment::greedy_iou_assign;
use crate::geometry::{BBox, ScoredDetection};

pub type StateVector = SVector<f64, 6>;
pub type StateCovariance = SMatrix<f64, 6, 6>;
type Measurement = SVector<f64, 4>;
type MeasurementMatrix = SMatrix<f64, 4, 6>;

const MIN_SIZE: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KfConfig {
    /// Process noise diagonal for (cx, cy, w, h, vx, vy).
    pub q_diag: [f64; 6],
    /// Measurement noise diagonal for (cx, cy, w, h).
    pub r_diag: [f64; 4],
    /// Initial variance of position and size components.
    pub p0_pos: f64,
    /// Initial variance of the velocity components.
    pub p0_vel: f64,
    /// Detections below this confidence never spawn a track.
    pub spawn_conf: f64,
    /// Tracks unmatched for more than this many frames are pruned.
    pub max_misses: u32,
    pub assign_iou: f64,
    /// Emitted confidence decays by this factor per missed frame.
    pub decay: f64,
    pub dt: f64,
}

impl Default for KfConfig {
    fn default() -> Self {
        KfConfig {
            q_diag: [1.0, 1.0, 0.25, 0.25, 0.5, 0.5],
            r_diag: [1.0, 1.0, 1.0, 1.0],
            p0_pos: 1.0,
            p0_vel: 10.0,
            spawn_conf: 0.5,
            max_misses: 5,
            assign_iou: 0.3,
            decay: 0.5,
            dt: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KalmanTrack {
    pub state: StateVector,
    pub covariance: StateCovariance,
    pub id: i64,
    /// Consecutive unmatched frames.
    pub misses: u32,
    pub last_confidence: f64,
}

impl KalmanTrack {
    pub fn from_detection(det: &ScoredDetection, id: i64, cfg: &KfConfig) -> Self {
        let (cx, cy) = det.bbox.center();
        let state =
            StateVector::from_column_slice(&[cx, cy, det.bbox.width, det.bbox.height, 0.0, 0.0]);
        let mut covariance = StateCovariance::zeros();
        for i in 0..4 {
            covariance[(i, i)] = cfg.p0_pos;
        }
        covariance[(4, 4)] = cfg.p0_vel;
        covariance[(5, 5)] = cfg.p0_vel;
        KalmanTrack {
            state,
            covariance,
            id,
            misses: 0,
            last_confidence: det.confidence,
        }
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_center(
            self.state[0],
            self.state[1],
            self.state[2].max(MIN_SIZE),
            self.state[3].max(MIN_SIZE),
        )
    }
}

fn transition(dt: f64) -> StateCovariance {
    let mut f = StateCovariance::identity();
    f[(0, 4)] = dt;
    f[(1, 5)] = dt;
    f
}

fn measurement_matrix() -> MeasurementMatrix {
    let mut h = MeasurementMatrix::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

/// Linear predict: `state <- F state`, `P <- F P F' + Q`.
pub fn kf_predict(track: &mut KalmanTrack, dt: f64, cfg: &KfConfig) {
    let f = transition(dt);
    track.state = f * track.state;
    let mut p = f * track.covariance * f.transpose();
    for i in 0..6 {
        p[(i, i)] += cfg.q_diag[i];
    }
    track.covariance = (p + p.transpose()) * 0.5;
}

/// Gain-based correction against a measured box. Joseph-form covariance
/// update plus re-symmetrization.
pub fn kf_update(track: &mut KalmanTrack, z: &BBox, cfg: &KfConfig) -> Result<(), FilterError> {
    if !z.is_finite() {
        return Err(FilterError::NonFiniteMeasurement(*z));
    }
    let (cx, cy) = z.center();
    let z = Measurement::from_column_slice(&[cx, cy, z.width, z.height]);

    let h = measurement_matrix();
    let mut r = SMatrix::<f64, 4, 4>::zeros();
    for i in 0..4 {
        r[(i, i)] = cfg.r_diag[i];
    }

    let p = track.covariance;
    let s = h * p * h.transpose() + r;
    let s_inv = s
        .try_inverse()
        .ok_or(FilterError::NonFiniteMeasurement(BBox::new(
            cx, cy, z[2], z[3],
        )))?;
    let k = p * h.transpose() * s_inv;

    let innovation = z - h * track.state;
    track.state += k * innovation;

    let i_kh = StateCovariance::identity() - k * h;
    let mut post = i_kh * p * i_kh.transpose() + k * r * k.transpose();
    post = (post + post.transpose()) * 0.5;
    track.covariance = post;

    track.state[2] = track.state[2].max(MIN_SIZE);
    track.state[3] = track.state[3].max(MIN_SIZE);
    Ok(())
}

/// One frame of the Kalman tracking baseline: predict every track, associate
/// detections greedily by IoU, correct matches, spawn tracks from confident
/// unmatched detections, prune stale tracks, then emit every live track with
/// its confidence decayed per miss.
pub fn kf_pipeline_step(
    tracks: &mut Vec<KalmanTrack>,
    detections: &[ScoredDetection],
    cfg: &KfConfig,
    next_id: &mut i64,
) -> Vec<ScoredDetection> {
    for track in tracks.iter_mut() {
        kf_predict(track, cfg.dt, cfg);
    }

    let track_boxes: Vec<BBox> = tracks.iter().map(|t| t.bbox()).collect();
    let det_boxes: Vec<BBox> = detections.iter().map(|d| d.bbox).collect();
    let assignment = greedy_iou_assign(&track_boxes, &det_boxes, cfg.assign_iou);

    let mut matched = vec![false; tracks.len()];
    for (ti, di, _) in &assignment.pairs {
        matched[*ti] = true;
        let det = &detections[*di];
        // Non-finite detections are a caller bug upstream of this step;
        // kf_update only fails on them.
        kf_update(&mut tracks[*ti], &det.bbox, cfg).expect("finite detection");
        tracks[*ti].misses = 0;
        tracks[*ti].last_confidence = det.confidence;
    }
    for (ti, was_matched) in matched.iter().enumerate() {
        if !was_matched {
            tracks[ti].misses += 1;
        }
    }

    for &di in &assignment.unmatched_right {
        let det = &detections[di];
        if det.confidence >= cfg.spawn_conf {
            tracks.push(KalmanTrack::from_detection(det, *next_id, cfg));
            *next_id += 1;
        }
    }

    tracks.retain(|t| t.misses <= cfg.max_misses);

    tracks
        .iter()
        .map(|t| {
            let conf = t.last_confidence * cfg.decay.powi(t.misses as i32);
            ScoredDetection::with_id(t.bbox(), conf, t.id)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rng, scalar_kalman_step};
    use rand::Rng;

    fn det(cx: f64, cy: f64, w: f64, h: f64, conf: f64) -> ScoredDetection {
        ScoredDetection::new(BBox::from_center(cx, cy, w, h), conf)
    }

    #[test]
    fn predict_zero_velocity_zero_noise_is_identity() {
        let cfg = KfConfig {
            q_diag: [0.0; 6],
            p0_vel: 0.0,
            ..KfConfig::default()
        };
        let mut track = KalmanTrack::from_detection(&det(10.0, 20.0, 5.0, 9.0, 0.9), 1, &cfg);
        let before = track.state;
        let cov_before = track.covariance;
        kf_predict(&mut track, 1.0, &cfg);
        assert_eq!(track.state, before);
        // With no velocity uncertainty, F P F' has nothing to propagate.
        assert_eq!(track.covariance, cov_before);
    }

    #[test]
    fn predict_moves_center_by_velocity() {
        let cfg = KfConfig::default();
        let mut track = KalmanTrack::from_detection(&det(10.0, 20.0, 5.0, 9.0, 0.9), 1, &cfg);
        track.state[4] = 3.0;
        kf_predict(&mut track, 1.0, &cfg);
        assert_eq!(track.state[0], 13.0);
    }

    #[test]
    fn predict_grows_covariance_trace_with_positive_noise() {
        let cfg = KfConfig::default();
        let mut track = KalmanTrack::from_detection(&det(10.0, 20.0, 5.0, 9.0, 0.9), 1, &cfg);
        let before = track.covariance.trace();
        kf_predict(&mut track, 1.0, &cfg);
        assert!(track.covariance.trace() > before);
    }

    #[test]
    fn update_with_predicted_mean_changes_nothing() {
        let cfg = KfConfig::default();
        let mut track = KalmanTrack::from_detection(&det(10.0, 20.0, 5.0, 9.0, 0.9), 1, &cfg);
        kf_predict(&mut track, 1.0, &cfg);
        let mean_box = track.bbox();
        let state_before = track.state;
        kf_update(&mut track, &mean_box, &cfg).unwrap();
        for i in 0..6 {
            assert!((track.state[i] - state_before[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn update_with_zero_measurement_noise_snaps_to_measurement() {
        let cfg = KfConfig {
            r_diag: [0.0; 4],
            ..KfConfig::default()
        };
        let mut track = KalmanTrack::from_detection(&det(10.0, 20.0, 5.0, 9.0, 0.9), 1, &cfg);
        kf_predict(&mut track, 1.0, &cfg);
        let z = BBox::from_center(14.0, 17.0, 6.0, 8.0);
        kf_update(&mut track, &z, &cfg).unwrap();
        assert!((track.state[0] - 14.0).abs() < 1e-9);
        assert!((track.state[1] - 17.0).abs() < 1e-9);
        assert!((track.state[2] - 6.0).abs() < 1e-9);
        assert!((track.state[3] - 8.0).abs() < 1e-9);
    }

    #[test]
    fn update_rejects_non_finite_measurement() {
        let cfg = KfConfig::default();
        let mut track = KalmanTrack::from_detection(&det(10.0, 20.0, 5.0, 9.0, 0.9), 1, &cfg);
        let z = BBox::new(f64::NAN, 0.0, 1.0, 1.0);
        assert!(kf_update(&mut track, &z, &cfg).is_err());
    }

    #[test]
    fn scalar_reduction_matches_closed_form() {
        // Decouple the cx component: zero initial velocity variance and zero
        // velocity process noise turn the first state dimension into a
        // textbook scalar filter.
        let cfg = KfConfig {
            q_diag: [0.7, 0.0, 0.0, 0.0, 0.0, 0.0],
            r_diag: [1.3, 1e12, 1e12, 1e12],
            p0_pos: 2.0,
            p0_vel: 0.0,
            ..KfConfig::default()
        };
        let mut track = KalmanTrack::from_detection(&det(0.0, 0.0, 10.0, 10.0, 0.9), 1, &cfg);
        // Closed-form scalar recursion state.
        let mut x = 0.0f64;
        let mut p = 2.0f64;
        let mut r = rng(21);
        for _ in 0..10 {
            let z = r.random_range(-5.0..5.0);
            kf_predict(&mut track, 1.0, &cfg);
            kf_update(&mut track, &BBox::from_center(z, 0.0, 10.0, 10.0), &cfg).unwrap();
            let (nx, np) = scalar_kalman_step(x, p, 0.7, 1.3, z);
            x = nx;
            p = np;
            assert!((track.state[0] - x).abs() < 1e-9, "state diverged");
            assert!(
                (track.covariance[(0, 0)] - p).abs() < 1e-9,
                "variance diverged"
            );
        }
    }

    #[test]
    fn covariance_stays_symmetric_and_psd_under_random_steps() {
        let cfg = KfConfig::default();
        let mut r = rng(33);
        let mut track = KalmanTrack::from_detection(&det(50.0, 50.0, 10.0, 20.0, 0.9), 1, &cfg);
        for _ in 0..1000 {
            kf_predict(&mut track, 1.0, &cfg);
            let z = BBox::from_center(
                r.random_range(0.0..100.0),
                r.random_range(0.0..100.0),
                r.random_range(5.0..30.0),
                r.random_range(5.0..30.0),
            );
            kf_update(&mut track, &z, &cfg).unwrap();

            let p = track.covariance;
            let asym = (p - p.transpose()).abs().max();
            assert!(asym < 1e-9, "asymmetry {asym}");
            let eig = p.symmetric_eigenvalues();
            assert!(eig.min() > -1e-9, "negative eigenvalue {}", eig.min());
            assert!(track.state[2] > 0.0 && track.state[3] > 0.0);
        }
    }

    #[test]
    fn pipeline_steady_state_single_track() {
        let cfg = KfConfig::default();
        let mut tracks = Vec::new();
        let mut next_id = 1;
        for t in 0..10 {
            let d = det(10.0 + 2.0 * t as f64, 20.0, 10.0, 20.0, 0.9);
            let out = kf_pipeline_step(&mut tracks, &[d], &cfg, &mut next_id);
            assert_eq!(out.len(), 1);
            assert_eq!(out[0].track_id, Some(1));
        }
        assert_eq!(next_id, 2, "no spurious spawns");
    }

    #[test]
    fn pipeline_prunes_after_exactly_max_misses() {
        let cfg = KfConfig::default();
        let mut tracks = Vec::new();
        let mut next_id = 1;
        kf_pipeline_step(
            &mut tracks,
            &[det(10.0, 20.0, 10.0, 20.0, 0.9)],
            &cfg,
            &mut next_id,
        );
        // Track survives max_misses consecutive empty frames, gone on the next.
        for _ in 0..cfg.max_misses {
            let out = kf_pipeline_step(&mut tracks, &[], &cfg, &mut next_id);
            assert_eq!(out.len(), 1);
        }
        let out = kf_pipeline_step(&mut tracks, &[], &cfg, &mut next_id);
        assert!(out.is_empty());
    }

    #[test]
    fn pipeline_retains_id_through_short_occlusion() {
        let cfg = KfConfig::default();
        let mut tracks = Vec::new();
        let mut next_id = 1;
        // Constant velocity 3 px/frame along x.
        for t in 0..5 {
            kf_pipeline_step(
                &mut tracks,
                &[det(10.0 + 3.0 * t as f64, 20.0, 12.0, 24.0, 0.9)],
                &cfg,
                &mut next_id,
            );
        }
        // Occluded for 3 frames.
        for _ in 0..3 {
            kf_pipeline_step(&mut tracks, &[], &cfg, &mut next_id);
        }
        // Reappears on trajectory at t = 8.
        let out = kf_pipeline_step(
            &mut tracks,
            &[det(10.0 + 3.0 * 8.0, 20.0, 12.0, 24.0, 0.9)],
            &cfg,
            &mut next_id,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(
            out[0].track_id,
            Some(1),
            "same id before and after occlusion"
        );
        assert_eq!(next_id, 2);
    }
}
