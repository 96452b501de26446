mod common;

use std::f64::consts::{FRAC_PI_4, PI};

use clipmotion::document::parse_svg;
use clipmotion::geometry::Point2D;
use clipmotion::guidance::MockTargetGuidance;
use clipmotion::metrics::{
    discrete_curvature, evaluate, geometric_deviation, hausdorff, motion_vibrancy, path_adjacency,
    pseudo_trajectory_length, report_csv, report_text, temporal_consistency, AnimationRecord, MetricsError, MetricsRow,
};
use clipmotion::optimize::{OptimConfig, Optimizer};
use clipmotion::pipeline::Scene;
use clipmotion::trajectory::{BezierTrajectory, TrajectorySet};
use common::{p, rig_layer, FIGURE_SVG};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Hodograph speed from the power-basis derivative, independent of the
/// library's evaluation.
fn speed(cp: &[Point2D], u: f64) -> f64 {
    let k = cp.len() - 1;
    let mut d = p(0., 0.);
    for j in 0..k {
        let b = binomial(k - 1, j) * u.powi(j as i32) * (1.0 - u).powi((k - 1 - j) as i32);
        d = d + (cp[j + 1] - cp[j]) * (k as f64 * b);
    }
    d.norm()
}

/// Composite Simpson over `n` (even) intervals.
fn simpson_length(cp: &[Point2D], n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let inner: f64 = (1..n).map(|i| speed(cp, i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (speed(cp, 0.0) + inner + speed(cp, 1.0)) * h / 3.0
}

fn brute_directed(a: &[Point2D], b: &[Point2D]) -> f64 {
    a.iter().map(|x| b.iter().map(|y| (*x - *y).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
}

fn brute_hausdorff(a: &[Point2D], b: &[Point2D]) -> f64 {
    brute_directed(a, b).max(brute_directed(b, a))
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Point2D> {
    (0..n).map(|_| p(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))).collect()
}

fn ring(points: &[Point2D]) -> Vec<(usize, usize)> {
    let n = points.len();
    (0..n).map(|i| ((i + n - 1) % n, (i + 1) % n)).collect()
}

fn unit_square() -> Vec<Point2D> {
    vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)]
}

fn set_of(curves: Vec<Vec<Point2D>>) -> TrajectorySet {
    TrajectorySet::new(curves.into_iter().map(|c| BezierTrajectory::new(c).unwrap()).collect()).unwrap()
}

#[test]
fn motion_vibrancy_of_static_set_is_zero() {
    let set = TrajectorySet::static_at(&[p(1., 2.), p(-3., 4.)], 3);
    assert_eq!(motion_vibrancy(&[set]), 0.0);
}

#[test]
fn motion_vibrancy_is_mean_of_chord_lengths_for_collinear_curves() {
    let set = set_of(vec![
        vec![p(0., 0.), p(1., 0.), p(2., 0.), p(3., 0.)],
        vec![p(0., 0.), p(1., 4. / 3.), p(2., 8. / 3.), p(3., 4.)],
    ]);
    assert!((motion_vibrancy(&[set]) - 4.0).abs() < 1e-9);
}

#[test]
fn motion_vibrancy_matches_simpson_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let curves: Vec<Vec<Point2D>> = (0..6).map(|_| random_points(&mut rng, 4, 50.0)).collect();
    let want = curves.iter().map(|c| simpson_length(c, 20_000)).sum::<f64>() / curves.len() as f64;
    let got = motion_vibrancy(&[set_of(curves)]);
    assert!((got - want).abs() < 1e-3, "{got} vs {want}");
}

#[test]
fn pseudo_length_of_static_frames_is_zero() {
    let f = vec![p(1., 1.), p(2., 5.)];
    assert_eq!(pseudo_trajectory_length(&[f.clone(), f.clone(), f]).unwrap(), 0.0);
}

#[test]
fn pseudo_length_of_l_path_is_two() {
    let frames = vec![vec![p(0., 0.)], vec![p(1., 0.)], vec![p(1., 1.)]];
    assert!((pseudo_trajectory_length(&frames).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn pseudo_length_needs_two_frames() {
    assert_eq!(pseudo_trajectory_length(&[vec![p(0., 0.)]]), Err(MetricsError::TooFewFrames { need: 2, got: 1 }));
}

#[test]
fn pseudo_length_approaches_arc_length_from_below() {
    let cp = vec![p(0., 0.), p(20., 40.), p(60., -30.), p(80., 10.)];
    let curve = BezierTrajectory::new(cp.clone()).unwrap();
    let arc = curve.arc_length(1e-9);
    let mut prev = 0.0;
    for n in [4, 16, 64, 256, 1024] {
        let frames: Vec<Vec<Point2D>> =
            (0..=n).map(|i| vec![curve.eval(i as f64 / n as f64).unwrap()]).collect();
        let len = pseudo_trajectory_length(&frames).unwrap();
        assert!(len <= arc + 1e-9 && len >= prev - 1e-12, "n={n}: {len} vs arc {arc}");
        prev = len;
    }
    assert!((arc - prev).abs() < 1e-3 * arc, "{prev} vs {arc}");
}

#[test]
fn hausdorff_of_identical_sets_is_zero() {
    let a = unit_square();
    assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
}

#[test]
fn hausdorff_of_single_displaced_point_is_displacement() {
    let a = unit_square();
    let mut b = a.clone();
    b[2] = b[2] + p(3., 4.);
    assert!((hausdorff(&a, &b).unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn hausdorff_rejects_empty_sets() {
    assert_eq!(hausdorff(&[], &unit_square()), Err(MetricsError::EmptySet));
    assert_eq!(hausdorff(&unit_square(), &[]), Err(MetricsError::EmptySet));
}

#[test]
fn hausdorff_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..40 {
        let a = random_points(&mut rng, 50, 100.0);
        let b = random_points(&mut rng, 20 + trial, 100.0);
        let got = hausdorff(&a, &b).unwrap();
        let want = brute_hausdorff(&a, &b);
        assert!((got - want).abs() < 1e-12, "trial {trial}: {got} vs {want}");
    }
}

#[test]
fn hausdorff_handles_duplicate_x_coordinates() {
    let a = vec![p(0., 0.), p(0., 10.), p(0., -7.), p(1., 3.)];
    let b = vec![p(0., 1.), p(0., 1.), p(0., 9.), p(2., 2.)];
    assert!((hausdorff(&a, &b).unwrap() - brute_hausdorff(&a, &b)).abs() < 1e-12);
}

#[test]
fn temporal_consistency_is_mean_consecutive_hausdorff() {
    let a = unit_square();
    let b: Vec<Point2D> = a.iter().map(|&q| q + p(3., 4.)).collect();
    let c: Vec<Point2D> = b.iter().map(|&q| q + p(1., 0.)).collect();
    let tc = temporal_consistency(&[a, b, c]).unwrap();
    assert!((tc - 3.0).abs() < 1e-12);
}

#[test]
fn temporal_consistency_of_static_frames_is_zero() {
    let a = unit_square();
    assert_eq!(temporal_consistency(&[a.clone(), a.clone(), a]).unwrap(), 0.0);
}

#[test]
fn curvature_of_collinear_points_is_zero() {
    let pts = vec![p(0., 0.), p(1., 0.), p(2., 0.)];
    assert_eq!(discrete_curvature(&pts, &[(0, 2), (0, 2), (1, 0)])[1], 0.0);
}

#[test]
fn curvature_of_unit_right_angle_is_quarter_pi() {
    let k = discrete_curvature(&unit_square(), &ring(&unit_square()));
    for v in k {
        assert!((v - FRAC_PI_4).abs() < 1e-9, "{v}");
    }
}

#[test]
fn curvature_with_degenerate_edge_is_zero() {
    let pts = vec![p(0., 0.), p(0., 0.), p(1., 1.)];
    assert_eq!(discrete_curvature(&pts, &ring(&pts))[1], 0.0);
}

#[test]
fn geometric_deviation_of_stretched_square_matches_hand_value() {
    // Square corners have κ = (π/2)/2; a 2×1 rectangle has κ = (π/2)/3.
    let sq = unit_square();
    let rect: Vec<Point2D> = sq.iter().map(|q| p(2. * q.x, q.y)).collect();
    let gd = geometric_deviation(&[sq.clone(), rect], &ring(&sq)).unwrap();
    assert!((gd - PI / 12.0).abs() < 1e-12, "{gd}");
}

#[test]
fn geometric_deviation_excludes_frame_zero_from_the_mean() {
    let sq = unit_square();
    let rect: Vec<Point2D> = sq.iter().map(|q| p(2. * q.x, q.y)).collect();
    let gd = geometric_deviation(&[sq.clone(), rect, sq.clone()], &ring(&sq)).unwrap();
    assert!((gd - PI / 24.0).abs() < 1e-12, "{gd}");
}

proptest! {
    #[test]
    fn geometric_deviation_vanishes_under_rigid_motion(
        angle in -PI..PI, tx in -50.0..50.0f64, ty in -50.0..50.0f64, seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_points(&mut rng, 9, 30.0);
        let moved: Vec<Point2D> = base.iter().map(|q| q.rotate(angle) + p(tx, ty)).collect();
        let gd = geometric_deviation(&[base.clone(), moved], &ring(&base)).unwrap();
        prop_assert!(gd < 1e-9, "{}", gd);
    }

    #[test]
    fn hausdorff_is_symmetric_and_translation_invariant(seed in 0u64..1000, tx in -20.0..20.0f64, ty in -20.0..20.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_points(&mut rng, 12, 10.0);
        let b = random_points(&mut rng, 7, 10.0);
        let shift = |s: &[Point2D]| s.iter().map(|&q| q + p(tx, ty)).collect::<Vec<_>>();
        let h = hausdorff(&a, &b).unwrap();
        prop_assert!((h - hausdorff(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((h - hausdorff(&shift(&a), &shift(&b)).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn pseudo_length_never_exceeds_arc_length(seed in 0u64..1000, frames in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curve = BezierTrajectory::new(random_points(&mut rng, 4, 40.0)).unwrap();
        let samples: Vec<Vec<Point2D>> = (0..frames)
            .map(|i| vec![curve.eval(i as f64 / (frames - 1) as f64).unwrap()])
            .collect();
        prop_assert!(pseudo_trajectory_length(&samples).unwrap() <= curve.arc_length(1e-9) + 1e-9);
    }
}

#[test]
fn adjacency_wraps_within_each_subpath() {
    let doc = parse_svg(FIGURE_SVG).unwrap();
    let adj = path_adjacency(&doc);
    assert_eq!(adj.len(), doc.control_point_count());
    for (i, &(prev, next)) in adj.iter().enumerate() {
        assert_eq!(adj[next].0, i);
        assert_eq!(adj[prev].1, i);
    }
}

fn figure_scene(cfg: &OptimConfig) -> Scene {
    let doc = parse_svg(FIGURE_SVG).unwrap();
    let rig = rig_layer(&doc, 0);
    Scene::single(doc, rig, cfg.render_settings(), cfg.schedule().unwrap(), cfg.deform).unwrap()
}

#[test]
fn static_animation_scores_zero() {
    let cfg = OptimConfig { frames: 6, width: 64, height: 64, ..OptimConfig::default() };
    let scene = figure_scene(&cfg);
    let set = TrajectorySet::static_at(&scene.skeleton(0).keypoints, 3);
    let record = AnimationRecord::capture("static", &scene, &[set]).unwrap();
    let row = evaluate(&record).unwrap();
    assert_eq!((row.motion_vibrancy, row.temporal_consistency), (0.0, 0.0));
    assert!(row.geometric_deviation < 1e-9, "{}", row.geometric_deviation);
}

#[test]
fn record_without_trajectories_uses_pseudo_length() {
    let frames = vec![unit_square(), unit_square().iter().map(|&q| q + p(0., 2.)).collect()];
    let record = AnimationRecord {
        name: "traced".into(),
        trajectories: None,
        keypoints: vec![vec![p(0., 0.)], vec![p(0., 2.)]],
        control_points: frames.clone(),
        adjacency: ring(&frames[0]),
    };
    let row = evaluate(&record).unwrap();
    assert_eq!(row.motion_vibrancy, 2.0);
    assert_eq!(row.temporal_consistency, 2.0);
    assert_eq!(row.geometric_deviation, 0.0);
}

#[test]
fn reports_keep_row_order() {
    let rows = vec![
        MetricsRow { name: "b,run".into(), motion_vibrancy: 1.5, temporal_consistency: 0.25, geometric_deviation: 1e-3 },
        MetricsRow { name: "a".into(), motion_vibrancy: 0.0, temporal_consistency: 0.0, geometric_deviation: 0.0 },
    ];
    let csv = report_csv(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "name,motion_vibrancy,temporal_consistency,geometric_deviation");
    assert_eq!(lines[1], "\"b,run\",1.5,0.25,0.001");
    assert_eq!(lines[2], "a,0,0,0");
    let text = report_text(&rows);
    let t: Vec<&str> = text.lines().collect();
    assert_eq!(t.len(), 3);
    assert!(t[0].starts_with("run") && t[1].starts_with("b,run") && t[2].starts_with("a "));
    assert!(t[1].contains("1.5000") && t[1].contains("0.001000"));
}

/// Under one curved mock target, a first-order (straight) trajectory moves
/// less than a cubic one.
#[test]
fn first_order_trajectories_are_less_vibrant_than_cubic() {
    let base = OptimConfig { frames: 8, steps: 120, lambda: 3e-4, ..OptimConfig::default() };
    let scene = figure_scene(&base);
    let offsets = [p(0., 0.), p(14., -18.), p(-6., 20.), p(10., 2.)];
    let reference = set_of(
        scene.skeleton(0).keypoints.iter().map(|&k| offsets.iter().map(|&d| k + d).collect()).collect(),
    );
    let targets = scene.forward(&[reference]).unwrap().frames();
    let run = |order: usize| {
        let cfg = OptimConfig { bezier_order: order, ..base.clone() };
        let mut mock = MockTargetGuidance::new(targets.clone()).unwrap();
        let mut opt = Optimizer::new(&scene, cfg.clone()).unwrap();
        opt.run_until(&mut mock, cfg.steps, None, |_| {}).unwrap();
        let state = opt.into_state();
        evaluate(&AnimationRecord::capture(&format!("order {order}"), &scene, &state.sets).unwrap()).unwrap()
    };
    let linear = run(1);
    let cubic = run(3);
    eprint!("{}", report_text(&[linear.clone(), cubic.clone()]));
    assert!(linear.motion_vibrancy < cubic.motion_vibrancy);
}
