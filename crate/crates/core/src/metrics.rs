//! Animation quality metrics: motion vibrancy, temporal consistency and
//! geometric deviation, plus the pseudo-trajectory length used when no
//! parametric trajectories exist.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::document::ClipartDocument;
use crate::geometry::Point2D;
use crate::pipeline::{PipelineError, Scene};
use crate::trajectory::TrajectorySet;

/// Arc-length tolerance for motion vibrancy.
pub const ARC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("empty point set")]
    EmptySet,
    #[error("need at least {need} frames, got {got}")]
    TooFewFrames { need: usize, got: usize },
    #[error("frame {frame} has {got} points, expected {expected}")]
    Inconsistent { frame: usize, expected: usize, got: usize },
}

/// Mean arc length over all trajectories of all sets.
pub fn motion_vibrancy(sets: &[TrajectorySet]) -> f64 {
    let (sum, n) = sets
        .iter()
        .flat_map(|s| &s.trajectories)
        .fold((0.0, 0usize), |(s, n), t| (s + t.arc_length(ARC_TOL), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn check_frames(frames: &[Vec<Point2D>], need: usize) -> Result<usize, MetricsError> {
    if frames.len() < need {
        return Err(MetricsError::TooFewFrames { need, got: frames.len() });
    }
    let n = frames[0].len();
    if let Some((t, f)) = frames.iter().enumerate().find(|(_, f)| f.len() != n) {
        return Err(MetricsError::Inconsistent { frame: t, expected: n, got: f.len() });
    }
    Ok(n)
}

/// Mean over points of the polyline length through consecutive frames.
pub fn pseudo_trajectory_length(frames: &[Vec<Point2D>]) -> Result<f64, MetricsError> {
    let m = check_frames(frames, 2)?;
    if m == 0 {
        return Err(MetricsError::EmptySet);
    }
    let total: f64 = (0..m).map(|i| frames.windows(2).map(|w| w[0][i].distance(w[1][i])).sum::<f64>()).sum();
    Ok(total / m as f64)
}

/// Directed Hausdorff distance `max_a min_b |a − b|`.
///
/// `b` is searched in x order outward from each query, stopping once the x
/// gap alone exceeds the best distance; a query stops early once its
/// nearest distance drops below the running maximum.
fn directed_hausdorff(a: &[Point2D], b_sorted: &[Point2D]) -> f64 {
    let mut worst: f64 = 0.0;
    for &q in a {
        let start = b_sorted.partition_point(|p| p.x < q.x);
        let mut best_sq = f64::INFINITY;
        let (mut lo, mut hi) = (start, start);
        loop {
            let left = (lo > 0).then(|| b_sorted[lo - 1]);
            let right = (hi < b_sorted.len()).then(|| b_sorted[hi]);
            let dl = left.map_or(f64::INFINITY, |p| (q.x - p.x) * (q.x - p.x));
            let dr = right.map_or(f64::INFINITY, |p| (p.x - q.x) * (p.x - q.x));
            if dl.min(dr) >= best_sq {
                break;
            }
            let p = if dl <= dr {
                lo -= 1;
                left.expect("finite gap implies a point")
            } else {
                hi += 1;
                right.expect("finite gap implies a point")
            };
            best_sq = best_sq.min((p - q).norm_sq());
            if best_sq <= worst * worst {
                break;
            }
        }
        worst = worst.max(best_sq.sqrt());
    }
    worst
}

/// Symmetric Hausdorff distance between two point sets.
pub fn hausdorff(a: &[Point2D], b: &[Point2D]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let sorted = |s: &[Point2D]| {
        let mut v = s.to_vec();
        v.sort_by(|p, q| p.x.total_cmp(&q.x));
        v
    };
    Ok(directed_hausdorff(a, &sorted(b)).max(directed_hausdorff(b, &sorted(a))))
}

/// Mean Hausdorff distance between consecutive frames.
pub fn temporal_consistency(frames: &[Vec<Point2D>]) -> Result<f64, MetricsError> {
    if frames.len() < 2 {
        return Err(MetricsError::TooFewFrames { need: 2, got: frames.len() });
    }
    let sum = frames.windows(2).map(|w| hausdorff(&w[0], &w[1])).sum::<Result<f64, _>>()?;
    Ok(sum / (frames.len() - 1) as f64)
}

/// Turning angle over adjacent edge length at every point.
///
/// A point with a zero-length adjacent edge has curvature 0.
pub fn discrete_curvature(points: &[Point2D], adjacency: &[(usize, usize)]) -> Vec<f64> {
    adjacency
        .iter()
        .enumerate()
        .map(|(i, &(prev, next))| {
            let v1 = points[prev] - points[i];
            let v2 = points[i] - points[next];
            let (l1, l2) = (v1.norm(), v2.norm());
            if l1 == 0.0 || l2 == 0.0 {
                return 0.0;
            }
            v1.cross(v2).abs().atan2(v1.dot(v2)) / (l1 + l2)
        })
        .collect()
}

/// Mean absolute curvature change against frame 0 over frames `1..N`.
pub fn geometric_deviation(frames: &[Vec<Point2D>], adjacency: &[(usize, usize)]) -> Result<f64, MetricsError> {
    let l = check_frames(frames, 2)?;
    if l == 0 {
        return Err(MetricsError::EmptySet);
    }
    if adjacency.len() != l {
        return Err(MetricsError::Inconsistent { frame: 0, expected: l, got: adjacency.len() });
    }
    let k0 = discrete_curvature(&frames[0], adjacency);
    let sum: f64 = frames[1..]
        .iter()
        .map(|f| discrete_curvature(f, adjacency).iter().zip(&k0).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .sum();
    Ok(sum / ((frames.len() - 1) * l) as f64)
}

/// Predecessor and successor of every control point, wrapping within each
/// subpath, in `ClipartDocument::control_points` order.
pub fn path_adjacency(doc: &ClipartDocument) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(doc.control_point_count());
    for path in doc.paths_in_paint_order() {
        for sp in &path.subpaths {
            let base = out.len();
            let n = sp.points.len();
            for i in 0..n {
                out.push((base + (i + n - 1) % n, base + (i + 1) % n));
            }
        }
    }
    out
}

/// What the metrics need from one animation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnimationRecord {
    pub name: String,
    /// Parametric trajectories, when the animation has them.
    pub trajectories: Option<Vec<TrajectorySet>>,
    /// Keypoints of every frame, all layers concatenated.
    pub keypoints: Vec<Vec<Point2D>>,
    /// Path control points of every frame.
    pub control_points: Vec<Vec<Point2D>>,
    pub adjacency: Vec<(usize, usize)>,
}

impl AnimationRecord {
    /// Samples `sets` through the scene and records every output frame.
    pub fn capture(name: &str, scene: &Scene, sets: &[TrajectorySet]) -> Result<Self, PipelineError> {
        let pass = scene.forward(sets)?;
        let kps: Vec<Vec<Vec<Point2D>>> = (0..scene.layer_count()).map(|l| pass.layer_keypoints(l)).collect();
        let keypoints = (0..pass.frame_count()).map(|t| kps.iter().flat_map(|k| k[t].iter().copied()).collect()).collect();
        let control_points = scene.frame_documents(&pass)?.iter().map(ClipartDocument::control_points).collect();
        Ok(Self {
            name: name.to_string(),
            trajectories: Some(sets.to_vec()),
            keypoints,
            control_points,
            adjacency: path_adjacency(scene.document()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub name: String,
    /// Motion vibrancy, higher is livelier.
    pub motion_vibrancy: f64,
    /// Mean consecutive-frame Hausdorff distance, lower is smoother.
    pub temporal_consistency: f64,
    /// Mean curvature change, lower preserves shape better.
    pub geometric_deviation: f64,
}

/// Metrics of one record. Without trajectories, motion vibrancy falls back
/// to the pseudo-trajectory length of the keypoints.
pub fn evaluate(record: &AnimationRecord) -> Result<MetricsRow, MetricsError> {
    let motion_vibrancy = match &record.trajectories {
        Some(sets) => motion_vibrancy(sets),
        None => pseudo_trajectory_length(&record.keypoints)?,
    };
    Ok(MetricsRow {
        name: record.name.clone(),
        motion_vibrancy,
        temporal_consistency: temporal_consistency(&record.control_points)?,
        geometric_deviation: geometric_deviation(&record.control_points, &record.adjacency)?,
    })
}

const HEADERS: [&str; 4] = ["name", "motion_vibrancy", "temporal_consistency", "geometric_deviation"];

/// Aligned plain-text table, rows in input order.
pub fn report_text(rows: &[MetricsRow]) -> String {
    let titles = ["run", "MV ↑", "TC ↓", "GD ↓"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                format!("{:.4}", r.motion_vibrancy),
                format!("{:.4}", r.temporal_consistency),
                format!("{:.6}", r.geometric_deviation),
            ]
        })
        .collect();
    let mut width = titles.map(|t| t.chars().count());
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: [&str; 4]| {
        let _ = write!(out, "{:<w$}", row[0], w = width[0]);
        for k in 1..4 {
            let pad = width[k] - row[k].chars().count();
            let _ = write!(out, "  {}{}", " ".repeat(pad), row[k]);
        }
        out.push('\n');
    };
    line(&mut out, titles);
    for row in &cells {
        line(&mut out, [&row[0], &row[1], &row[2], &row[3]]);
    }
    out
}

/// CSV with full-precision values, rows in input order.
pub fn report_csv(rows: &[MetricsRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADERS).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.motion_vibrancy.to_string(),
            r.temporal_consistency.to_string(),
            r.geometric_deviation.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
