//! Bézier keypoint trajectories: initialisation, evaluation, frame sampling
//! and arc length.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::Point2D;

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("curve parameter {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("trajectory order must be at least 1")]
    ZeroOrder,
    #[error("mixed trajectory orders {0} and {1}")]
    MixedOrder(usize, usize),
    #[error("invalid frame schedule: {0}")]
    Schedule(String),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("trajectory file {path}: {message}")]
    File { path: String, message: String },
}

/// Bézier curve of order `k` with `k + 1` control points; `c₀` is the rest
/// keypoint and stays pinned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BezierTrajectory {
    pub control_points: Vec<Point2D>,
}

impl BezierTrajectory {
    pub fn new(control_points: Vec<Point2D>) -> Result<Self, TrajectoryError> {
        if control_points.len() < 2 {
            return Err(TrajectoryError::ZeroOrder);
        }
        Ok(Self { control_points })
    }

    /// A static curve with every control point at `p`.
    pub fn constant(p: Point2D, order: usize) -> Self {
        Self { control_points: vec![p; order + 1] }
    }

    pub fn order(&self) -> usize {
        self.control_points.len() - 1
    }

    /// Bernstein-form evaluation, written as `c₀ + Σ_{j≥1} B_j (c_j − c₀)`
    /// (equal by partition of unity) so static curves return `c₀` exactly.
    pub fn eval(&self, u: f64) -> Result<Point2D, TrajectoryError> {
        let w = bernstein(self.order(), u)?;
        let c0 = self.control_points[0];
        if u == 1.0 {
            return Ok(self.control_points[self.order()]);
        }
        Ok(self.control_points[1..].iter().zip(&w[1..]).fold(c0, |acc, (&c, &b)| acc + (c - c0) * b))
    }

    /// Weights of each control point in `eval(u)`; `∂eval/∂c_j = w_j I`.
    pub fn eval_gradient(&self, u: f64) -> Result<Vec<f64>, TrajectoryError> {
        bernstein(self.order(), u)
    }

    pub fn is_static(&self) -> bool {
        self.control_points.iter().all(|&c| c == self.control_points[0])
    }

    /// Adaptive-subdivision length: a piece is accepted once its control
    /// polygon exceeds its chord by less than `tol`.
    pub fn arc_length(&self, tol: f64) -> f64 {
        assert!(tol > 0.0, "arc_length tolerance must be positive");
        arc_length_rec(&self.control_points, tol, 0)
    }
}

/// Bernstein basis `B_{j,k}(u)` for `j = 0..=k`.
pub fn bernstein(k: usize, u: f64) -> Result<Vec<f64>, TrajectoryError> {
    if !(0.0..=1.0).contains(&u) {
        return Err(TrajectoryError::ParameterOutOfRange(u));
    }
    let v = 1.0 - u;
    let mut binom = 1.0;
    let mut out = Vec::with_capacity(k + 1);
    for j in 0..=k {
        out.push(binom * u.powi(j as i32) * v.powi((k - j) as i32));
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    Ok(out)
}

/// Evaluation by repeated linear interpolation.
pub fn de_casteljau(points: &[Point2D], u: f64) -> Point2D {
    let mut work = points.to_vec();
    for level in 1..points.len() {
        for i in 0..points.len() - level {
            work[i] = work[i].lerp(work[i + 1], u);
        }
    }
    work[0]
}

/// Splits a Bézier curve at `u` into left and right halves.
pub fn subdivide(points: &[Point2D], u: f64) -> (Vec<Point2D>, Vec<Point2D>) {
    let n = points.len();
    let mut work = points.to_vec();
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    left.push(work[0]);
    right.push(work[n - 1]);
    for level in 1..n {
        for i in 0..n - level {
            work[i] = work[i].lerp(work[i + 1], u);
        }
        left.push(work[0]);
        right.push(work[n - 1 - level]);
    }
    right.reverse();
    (left, right)
}

fn arc_length_rec(points: &[Point2D], tol: f64, depth: u32) -> f64 {
    let k = points.len() - 1;
    let chord = points[0].distance(points[k]);
    let poly: f64 = points.windows(2).map(|w| w[0].distance(w[1])).sum();
    if poly - chord < tol || depth >= 40 {
        // Gravesen's estimate; exact for segments, error O(h⁵) otherwise.
        return (2.0 * chord + (k as f64 - 1.0) * poly) / (k as f64 + 1.0);
    }
    let (l, r) = subdivide(points, 0.5);
    arc_length_rec(&l, tol, depth + 1) + arc_length_rec(&r, tol, depth + 1)
}

/// One trajectory per skeleton keypoint, all of the same order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub trajectories: Vec<BezierTrajectory>,
}

impl TrajectorySet {
    pub fn new(trajectories: Vec<BezierTrajectory>) -> Result<Self, TrajectoryError> {
        let set = Self { trajectories };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let Some(first) = self.trajectories.first() else { return Ok(()) };
        for t in &self.trajectories {
            if t.control_points.len() < 2 {
                return Err(TrajectoryError::ZeroOrder);
            }
            if t.order() != first.order() {
                return Err(TrajectoryError::MixedOrder(first.order(), t.order()));
            }
            if t.control_points.iter().any(|c| !c.is_finite()) {
                return Err(TrajectoryError::Invalid("non-finite control point".into()));
            }
        }
        Ok(())
    }

    pub fn static_at(keypoints: &[Point2D], order: usize) -> Self {
        Self { trajectories: keypoints.iter().map(|&k| BezierTrajectory::constant(k, order)).collect() }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn order(&self) -> usize {
        self.trajectories.first().map_or(0, |t| t.order())
    }

    /// Rest keypoints (`c₀` of every curve).
    pub fn anchors(&self) -> Vec<Point2D> {
        self.trajectories.iter().map(|t| t.control_points[0]).collect()
    }

    /// Free parameters (`c₁..c_k` of every curve), flattened as
    /// `[x, y]` pairs in keypoint-major order.
    pub fn free_parameters(&self) -> Vec<f64> {
        self.trajectories
            .iter()
            .flat_map(|t| t.control_points[1..].iter().flat_map(|c| [c.x, c.y]))
            .collect()
    }

    pub fn set_free_parameters(&mut self, params: &[f64]) {
        let k = self.order();
        assert_eq!(params.len(), self.len() * k * 2, "free parameter count mismatch");
        for (t, chunk) in self.trajectories.iter_mut().zip(params.chunks_exact(2 * k)) {
            for (c, xy) in t.control_points[1..].iter_mut().zip(chunk.chunks_exact(2)) {
                *c = Point2D::new(xy[0], xy[1]);
            }
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<(), TrajectoryError> {
        let file_err = |message: String| TrajectoryError::File { path: path.display().to_string(), message };
        let text = serde_json::to_string_pretty(self).map_err(|e| file_err(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| file_err(e.to_string()))
    }

    pub fn load_json(path: &Path) -> Result<Self, TrajectoryError> {
        let file_err = |message: String| TrajectoryError::File { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
        let set: Self = serde_json::from_str(&text).map_err(|e| file_err(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }
}

/// `c₀` at the keypoint; `c_j ~ N(c_{j−1}, σ² I)` for `j ≥ 1`.
pub fn init_trajectories(keypoints: &[Point2D], order: usize, sigma: f64, seed: u64) -> Result<TrajectorySet, TrajectoryError> {
    if order == 0 {
        return Err(TrajectoryError::ZeroOrder);
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(TrajectoryError::Invalid(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let trajectories = keypoints
        .iter()
        .map(|&k| {
            let mut cps = vec![k];
            for _ in 0..order {
                let prev = *cps.last().expect("nonempty");
                let dx = normal.sample(&mut rng);
                let dy = normal.sample(&mut rng);
                cps.push(prev + Point2D::new(dx, dy));
            }
            BezierTrajectory { control_points: cps }
        })
        .collect();
    Ok(TrajectorySet { trajectories })
}

/// Frame count, looping flag and the parameter convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSchedule {
    pub frame_count: usize,
    pub looping: bool,
    /// `u = t/(n−1)` instead of `u = t/n`, so the last unique frame reaches
    /// the curve end.
    #[serde(default)]
    pub reach_end: bool,
}

impl FrameSchedule {
    pub fn new(frame_count: usize, looping: bool) -> Result<Self, TrajectoryError> {
        let s = Self { frame_count, looping, reach_end: false };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if self.frame_count < 2 {
            return Err(TrajectoryError::Schedule(format!("need at least 2 frames, got {}", self.frame_count)));
        }
        if self.looping && self.frame_count % 2 != 0 {
            return Err(TrajectoryError::Schedule(format!(
                "looping needs an even frame count, got {}",
                self.frame_count
            )));
        }
        Ok(())
    }

    /// Number of distinct frames evaluated on the curves.
    pub fn unique_frames(&self) -> usize {
        if self.looping {
            self.frame_count / 2
        } else {
            self.frame_count
        }
    }

    /// Curve parameter of each unique frame.
    pub fn parameters(&self) -> Vec<f64> {
        let k = self.unique_frames();
        let denom = if self.reach_end { (k.max(2) - 1) as f64 } else { k as f64 };
        (0..k).map(|t| (t as f64 / denom).min(1.0)).collect()
    }

    /// Unique frame shown at output frame `t`.
    pub fn source_frame(&self, t: usize) -> usize {
        let k = self.unique_frames();
        if self.looping && t >= k {
            self.frame_count - 1 - t
        } else {
            t
        }
    }
}

/// Keypoint positions of every unique frame: `result[t][i]`.
pub fn sample_unique(set: &TrajectorySet, sched: &FrameSchedule) -> Vec<Vec<Point2D>> {
    sched
        .parameters()
        .iter()
        .map(|&u| set.trajectories.iter().map(|tr| tr.eval(u).expect("schedule parameters lie in [0, 1]")).collect())
        .collect()
}

/// Keypoint positions for all `N` output frames: `result[t][i]`.
pub fn sample_frames(set: &TrajectorySet, sched: &FrameSchedule) -> Vec<Vec<Point2D>> {
    let unique = sample_unique(set, sched);
    (0..sched.frame_count).map(|t| unique[sched.source_frame(t)].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2D {
        Point2D::new(x, y)
    }

    fn arch() -> BezierTrajectory {
        BezierTrajectory::new(vec![p(0., 0.), p(0., 1.), p(1., 1.), p(1., 0.)]).unwrap()
    }

    #[test]
    fn midpoint_of_arch() {
        assert_eq!(arch().eval(0.5).unwrap(), p(0.5, 0.75));
        assert_eq!(de_casteljau(&arch().control_points, 0.5), p(0.5, 0.75));
        assert_eq!(arch().eval_gradient(0.5).unwrap(), vec![0.125, 0.375, 0.375, 0.125]);
    }

    #[test]
    fn endpoints_and_range() {
        assert_eq!(arch().eval(0.0).unwrap(), p(0., 0.));
        assert_eq!(arch().eval(1.0).unwrap(), p(1., 0.));
        assert_eq!(arch().eval_gradient(0.0).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(arch().eval(1.5), Err(TrajectoryError::ParameterOutOfRange(_))));
        assert!(arch().eval(-1e-9).is_err());
    }

    #[test]
    fn subdivision_halves_reproduce_curve() {
        let (l, r) = subdivide(&arch().control_points, 0.3);
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            assert!(de_casteljau(&l, s).distance(arch().eval(0.3 * s).unwrap()) < 1e-14);
            assert!(de_casteljau(&r, s).distance(arch().eval(0.3 + 0.7 * s).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn looping_schedule_is_palindrome() {
        let s = FrameSchedule::new(4, true).unwrap();
        let src: Vec<usize> = (0..4).map(|t| s.source_frame(t)).collect();
        assert_eq!(src, vec![0, 1, 1, 0]);
        assert_eq!(s.parameters(), vec![0.0, 0.5]);
        assert!(FrameSchedule::new(5, true).is_err());
        assert!(FrameSchedule::new(1, false).is_err());
    }

    #[test]
    fn frame_twelve_of_twenty_four_is_midpoint() {
        let set = TrajectorySet::new(vec![arch()]).unwrap();
        let frames = sample_frames(&set, &FrameSchedule::new(24, false).unwrap());
        assert_eq!(frames.len(), 24);
        assert_eq!(frames[12][0], p(0.5, 0.75));
    }

    #[test]
    fn reach_end_alternative() {
        let s = FrameSchedule { frame_count: 5, looping: false, reach_end: true };
        assert_eq!(s.parameters(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn zero_sigma_is_static() {
        let set = init_trajectories(&[p(1., 2.), p(3., 4.)], 3, 0.0, 9).unwrap();
        assert!(set.trajectories.iter().all(|t| t.is_static()));
        assert_eq!(set.free_parameters().len(), 2 * 3 * 2);
    }

    #[test]
    fn free_parameter_round_trip() {
        let mut set = init_trajectories(&[p(1., 2.), p(3., 4.)], 2, 1.0, 3).unwrap();
        let params: Vec<f64> = (0..8).map(|i| i as f64).collect();
        set.set_free_parameters(&params);
        assert_eq!(set.free_parameters(), params);
        assert_eq!(set.anchors(), vec![p(1., 2.), p(3., 4.)]);
    }
}
