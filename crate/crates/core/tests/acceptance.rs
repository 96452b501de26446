//! Acceptance suite: one PASS/FAIL line per criterion, mock guidance only.
//! Exits non-zero when any criterion fails.

mod common;

use std::f64::consts::FRAC_PI_4;
use std::panic::{self, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use clipmotion::arap::ArapFactorization;
use clipmotion::config::RunConfig;
use clipmotion::document::{parse_svg, RasterImage, RasterPatch};
use clipmotion::geometry::{Point2D, Rgba};
use clipmotion::guidance::{fidelity_loss, MockTargetGuidance};
use clipmotion::metrics::{discrete_curvature, evaluate, hausdorff, motion_vibrancy, AnimationRecord};
use clipmotion::optimize::{load_checkpoint, save_checkpoint, OptimConfig, Optimizer, RunState};
use clipmotion::pipeline::Scene;
use clipmotion::renderer::{render_bitmap, render_document, render_vector, FrameBuffer, RenderSettings};
use clipmotion::rigging::{
    bind, bind_extrapolated, prune_outer_bones, simplify_skeleton, straight_skeleton, triangulate, MeshOptions, Rig,
    RigOptions, Skeleton, TriangleMesh,
};
use clipmotion::trajectory::{de_casteljau, init_trajectories, sample_frames, BezierTrajectory, FrameSchedule, TrajectorySet};
use common::{exact_render, figure, fixture_shapes, p, polygon_doc, radial, rect, relative_error, rig_layer, FIGURE_SVG};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_dev(a: &[Point2D], b: &[Point2D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.distance(*y)).fold(0.0, f64::max)
}

/// Central differences of `loss` at every coordinate of `x`.
fn central_differences(x: &[Point2D], h: f64, loss: impl Fn(&[Point2D]) -> f64) -> Vec<Point2D> {
    let mut out = vec![Point2D::ZERO; x.len()];
    for v in 0..x.len() {
        for axis in 0..2 {
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            if axis == 0 {
                a[v].x += h;
                b[v].x -= h;
                out[v].x = (loss(&a) - loss(&b)) / (2.0 * h);
            } else {
                a[v].y += h;
                b[v].y -= h;
                out[v].y = (loss(&a) - loss(&b)) / (2.0 * h);
            }
        }
    }
    out
}

fn weighted_sum(f: &FrameBuffer, w: &FrameBuffer) -> f64 {
    f.pixels.iter().zip(&w.pixels).map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).sum()
}

// ------------------------------------------------------------- configuration

fn configuration() -> Outcome {
    let c = RunConfig::default();
    let o = &c.optimize;
    let got = (c.rig.rho, o.lambda, c.remote.guidance_scale, o.frames, o.steps, o.learning_rate, o.width, o.height);
    ensure(got == (0.7, 25.0, 50.0, 24, 500, 0.5, 256, 256), || format!("defaults {got:?}"))?;
    let text = c.to_toml();
    for line in ["rho = 0.7", "lambda = 25.0", "guidance_scale = 50.0", "frames = 24", "steps = 500", "learning_rate = 0.5"] {
        ensure(text.lines().any(|l| l == line), || format!("snapshot lacks `{line}`"))?;
    }
    ensure(RunConfig::from_toml_str(&text).map_err(|e| e.to_string())? == c, || "snapshot does not round-trip".into())?;
    ensure(RunConfig::from_toml_str("").map_err(|e| e.to_string())? == c, || "empty file is not the default".into())?;
    Ok("ρ=0.7 λ=25 s=50 N=24 500 steps lr=0.5 256×256".into())
}

// ------------------------------------------------------------------- ARAP

/// Random mesh of at most 50 vertices with 2 to 4 handles.
fn random_mesh(rng: &mut ChaCha8Rng) -> (TriangleMesh, Vec<usize>) {
    loop {
        let n = rng.gen_range(5..10);
        let radii: Vec<f64> = (0..n).map(|_| rng.gen_range(6.0..12.0)).collect();
        let poly = radial(0.0, 0.0, &radii);
        let kps: Vec<Point2D> =
            (0..rng.gen_range(2..5)).map(|_| p(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0))).collect();
        let opts = MeshOptions { min_angle_deg: 20.0, max_area: poly.area() / rng.gen_range(4.0..25.0) };
        let Ok(mesh) = triangulate(&poly, &kps, &opts) else { continue };
        if mesh.vertices.len() <= 50 {
            let handles = mesh.keypoint_vertex.clone();
            return (mesh, handles);
        }
    }
}

fn arap() -> Outcome {
    let start = Instant::now();
    let rig = Rig::build(&figure(), None, &RigOptions::default()).map_err(|e| e.to_string())?;
    let handles = rig.mesh.keypoint_vertex.clone();
    let f = ArapFactorization::new(&rig.mesh, &handles).map_err(|e| e.to_string())?;
    let rest: Vec<Point2D> = handles.iter().map(|&h| rig.mesh.vertices[h]).collect();
    ensure(f.solve(&rest).unwrap().pose.vertices == rig.mesh.vertices, || "identity is not exact".into())?;

    let d = p(5.0, -3.0);
    let moved: Vec<Point2D> = rest.iter().map(|&q| q + d).collect();
    let want: Vec<Point2D> = rig.mesh.vertices.iter().map(|&q| q + d).collect();
    let tr = max_dev(&f.solve(&moved).unwrap().pose.vertices, &want);
    ensure(tr <= 1e-7, || format!("translation deviation {tr:e}"))?;

    let c = rig.mesh.vertices.iter().fold(Point2D::ZERO, |a, &q| a + q) * (1.0 / rig.mesh.vertices.len() as f64);
    let rot = |q: Point2D| c + (q - c).rotate(30f64.to_radians());
    let want: Vec<Point2D> = rig.mesh.vertices.iter().map(|&q| rot(q)).collect();
    let rt = max_dev(&f.solve(&rest.iter().map(|&q| rot(q)).collect::<Vec<_>>()).unwrap().pose.vertices, &want);
    ensure(rt <= 1e-6, || format!("rotation deviation {rt:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 100 {
        let (mesh, handles) = random_mesh(&mut rng);
        let f = ArapFactorization::new(&mesh, &handles).map_err(|e| e.to_string())?;
        let targets: Vec<Point2D> =
            handles.iter().map(|&v| mesh.vertices[v] + p(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))).collect();
        let upstream: Vec<Point2D> =
            mesh.vertices.iter().map(|_| p(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let s = f.solve(&targets).unwrap();
        if s.min_fit_scale() < 1e-6 {
            continue;
        }
        let g = f.backward(&s, &targets, &upstream).unwrap();
        let fd = central_differences(&targets, 1e-4, |t| {
            f.solve(t).unwrap().pose.vertices.iter().zip(&upstream).map(|(a, b)| a.dot(*b)).sum()
        });
        worst = worst.max(relative_error(&g, &fd));
        checked += 1;
    }
    ensure(worst < 1e-4, || format!("worst adjoint relative error {worst:e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("translation {tr:.1e}, rotation {rt:.1e}, adjoint {worst:.1e} over 100 meshes, {secs:.2}s"))
}

// ------------------------------------------------------------ skeleton

fn skeleton() -> Outcome {
    let square = straight_skeleton(&rect(0.0, 0.0, 1.0, 1.0)).map_err(|e| e.to_string())?;
    let inner: Vec<Point2D> = square.interior_nodes().map(|(_, n)| n.position).collect();
    ensure(inner.len() == 1 && inner[0].distance(p(0.5, 0.5)) < 1e-12, || format!("unit square nodes {inner:?}"))?;

    let spine = prune_outer_bones(&straight_skeleton(&rect(0.0, 0.0, 2.0, 1.0)).map_err(|e| e.to_string())?);
    let mut ends = spine.keypoints.clone();
    ends.sort_by(|a, b| a.x.total_cmp(&b.x));
    let ok = spine.bones.len() == 1
        && ends.len() == 2
        && ends[0].distance(p(0.5, 0.5)) <= 1e-6
        && ends[1].distance(p(1.5, 0.5)) <= 1e-6;
    ensure(ok, || format!("2×1 spine {ends:?} bones {:?}", spine.bones))?;

    let rhos = [0.1, 0.2, 0.3, 0.5, 0.7, 0.85, 1.0, 1.2];
    let mut shapes = 0;
    for (name, poly) in fixture_shapes() {
        let pruned = prune_outer_bones(&straight_skeleton(&poly).map_err(|e| e.to_string())?);
        let counts: Vec<usize> =
            rhos.iter().map(|&r| simplify_skeleton(&pruned, r).map(|s| s.keypoints.len())).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        ensure(counts.windows(2).all(|w| w[1] <= w[0]), || format!("{name}: counts {counts:?}"))?;
        shapes += 1;
    }
    Ok(format!("centre node, spine within 1e-6, monotone in ρ on {shapes} shapes"))
}

// ---------------------------------------------------------------- Bézier

/// Polyline length over `n` uniform parameter steps.
fn quadrature_length(c: &BezierTrajectory, n: usize) -> f64 {
    let mut prev = c.control_points[0];
    (1..=n)
        .map(|i| {
            let q = de_casteljau(&c.control_points, i as f64 / n as f64);
            let d = prev.distance(q);
            prev = q;
            d
        })
        .sum()
}

fn bezier() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_dc = 0.0f64;
    for _ in 0..2000 {
        let k = rng.gen_range(1..=6);
        let c = BezierTrajectory::new((0..=k).map(|_| p(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0))).collect())
            .unwrap();
        ensure(c.eval(0.0).unwrap() == c.control_points[0], || "start not interpolated".into())?;
        ensure(c.eval(1.0).unwrap() == c.control_points[k], || "end not interpolated".into())?;
        let u = rng.gen_range(0.0..=1.0);
        let w = c.eval_gradient(u).unwrap();
        let sum: f64 = w.iter().sum();
        ensure((sum - 1.0).abs() < 1e-12 && w.iter().all(|&x| x >= 0.0), || format!("Bernstein sum {sum}"))?;
        worst_dc = worst_dc.max(c.eval(u).unwrap().distance(de_casteljau(&c.control_points, u)) / 100.0);
    }
    ensure(worst_dc <= 1e-12, || format!("de Casteljau relative deviation {worst_dc:e}"))?;

    let mut worst_len = 0.0f64;
    for _ in 0..4 {
        let c = BezierTrajectory::new((0..4).map(|_| p(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0))).collect())
            .unwrap();
        worst_len = worst_len.max((c.arc_length(1e-9) - quadrature_length(&c, 1_000_000)).abs());
    }
    ensure(worst_len <= 1e-3, || format!("arc length off by {worst_len:e}"))?;

    for half in [1, 2, 6, 12] {
        let n = 2 * half;
        let set = init_trajectories(&[p(10., 10.), p(50., 20.)], 3, 5.0, half as u64).unwrap();
        let frames = sample_frames(&set, &FrameSchedule::new(n, true).unwrap());
        ensure((0..n).all(|t| frames[t] == frames[n - 1 - t]), || format!("N={n} is not palindromic"))?;
    }
    Ok(format!("de Casteljau {worst_dc:.1e}, arc length vs 10⁶ samples {worst_len:.1e}, palindromes exact"))
}

// -------------------------------------------------------------- fidelity

fn random_skeleton(rng: &mut ChaCha8Rng, m: usize) -> Skeleton {
    let kps: Vec<Point2D> = (0..m).map(|_| p(rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0))).collect();
    let mut bones: Vec<(usize, usize)> = (1..m).map(|i| (rng.gen_range(0..i), i)).collect();
    if m > 3 {
        bones.push((0, m - 1));
    }
    Skeleton::new(kps, bones).unwrap()
}

fn jitter(rng: &mut ChaCha8Rng, pts: &[Point2D], s: f64) -> Vec<Point2D> {
    pts.iter().map(|&q| q + p(rng.gen_range(-s..s), rng.gen_range(-s..s))).collect()
}

fn fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let skel = random_skeleton(&mut rng, 7);
    let rest = fidelity_loss(&vec![skel.keypoints.clone(); 24], &skel);
    ensure(rest.loss == 0.0 && rest.gradients.iter().flatten().all(|g| *g == Point2D::ZERO), || {
        format!("rest loss {}", rest.loss)
    })?;

    for _ in 0..50 {
        let frames: Vec<Vec<Point2D>> =
            (0..4).map(|t| if t == 0 { skel.keypoints.clone() } else { jitter(&mut rng, &skel.keypoints, 5.0) }).collect();
        let base = fidelity_loss(&frames, &skel).loss;
        let (s, c) = rng.gen_range(-3.2f64..3.2).sin_cos();
        let d = p(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let mut moved = frames.clone();
        moved[2] = moved[2].iter().map(|q| p(c * q.x - s * q.y, s * q.x + c * q.y) + d).collect();
        let after = fidelity_loss(&moved, &skel).loss;
        ensure((after - base).abs() <= 1e-9 * (1.0 + base), || format!("rigid motion changed {base} to {after}"))?;
    }

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.gen_range(2..9);
        let skel = random_skeleton(&mut rng, m);
        let n = rng.gen_range(2..6);
        let mut frames = vec![skel.keypoints.clone()];
        for _ in 1..n {
            frames.push(jitter(&mut rng, &skel.keypoints, 6.0));
        }
        let f = fidelity_loss(&frames, &skel);
        for t in 1..n {
            let fd = central_differences(&frames[t], 1e-6, |x| {
                let mut fr = frames.clone();
                fr[t] = x.to_vec();
                fidelity_loss(&fr, &skel).loss
            });
            worst = worst.max(relative_error(&f.gradients[t], &fd));
        }
    }
    ensure(worst < 1e-6, || format!("gradient relative error {worst:e}"))?;

    let (a, b) = (p(2.0, 1.0), p(4.0, 1.0 + 5f64.sqrt()));
    let bone = Skeleton::new(vec![a, b], vec![(0, 1)]).unwrap();
    let mid = (a + b) * 0.5;
    for s in [0.0, 0.5, 1.7, 3.0] {
        let scaled = vec![mid + (a - mid) * s, mid + (b - mid) * s];
        let loss = fidelity_loss(&[bone.keypoints.clone(), scaled], &bone).loss;
        let want = 9.0 * (s - 1.0) * (s - 1.0);
        ensure((loss - want).abs() < 1e-9, || format!("s={s}: {loss} vs L²(s−1)² = {want}"))?;
    }
    Ok(format!("zero at rest, rigid invariant, gradient {worst:.1e}, single-bone scale exact"))
}

// -------------------------------------------------------------- renderer

/// Smooth texture that fades to white towards the border.
fn soft_texture(n: usize, margin: f64) -> RasterImage {
    let c = n as f64 / 2.0;
    RasterImage::from_fn(n, n, |x, y| {
        let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
        let r = ((fx - c).hypot(fy - c) / (c - margin)).min(1.0);
        let fade = (1.0 - r * r).max(0.0).powi(2);
        let v = [0.5 + 0.5 * (fx * 0.31).sin(), 0.5 + 0.5 * (fy * 0.23).cos(), 0.5 + 0.5 * ((fx + fy) * 0.17).sin()];
        Rgba::new(1.0 - fade * (1.0 - v[0]), 1.0 - fade * (1.0 - v[1]), 1.0 - fade * (1.0 - v[2]), 1.0)
    })
}

fn square_mesh(lo: f64, hi: f64, area: f64, kps: &[Point2D]) -> TriangleMesh {
    triangulate(&rect(lo, lo, hi - lo, hi - lo), kps, &MeshOptions { min_angle_deg: 20.0, max_area: area }).unwrap()
}

fn renderer() -> Outcome {
    let doc = parse_svg(FIGURE_SVG).map_err(|e| e.to_string())?;
    let rig = rig_layer(&doc, 0);
    let binding = bind_extrapolated(&rig.mesh, &doc.control_points()).map_err(|e| e.to_string())?;
    let s = RenderSettings::default();
    let direct = render_document(&doc, &s).unwrap();
    let (warped, _) = render_vector(&doc, &binding, &rig.mesh, &rig.mesh.vertices, &s).unwrap();
    ensure(direct == warped, || "identity warp differs from the direct render".into())?;

    let n = 64;
    let img = soft_texture(n, 4.0);
    let patch = RasterPatch { image: img.clone(), origin: Point2D::ZERO };
    let mesh = square_mesh(2.0, 62.0, 60.0, &[p(30.0, 31.0), p(40.0, 20.0)]);
    let pose: Vec<Point2D> = mesh.vertices.iter().map(|&v| v + p(7.0, -3.0)).collect();
    let (moved, _) = render_bitmap(&patch, &mesh, &pose, (64.0, 64.0), &RenderSettings::new(n, n)).unwrap();
    for y in 3..55 {
        for x in 12..63 {
            ensure(moved.get(x, y) == img.rgb_over_white(x - 7, y + 3), || format!("bitmap pixel ({x},{y}) moved"))?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let size = 48;
        let mesh = triangulate(
            &rect(8.0, 8.0, 32.0, 32.0),
            &[p(20.0, 24.0), p(30.0, 22.0)],
            &MeshOptions { min_angle_deg: 20.0, max_area: 120.0 },
        )
        .unwrap();
        let radii: Vec<f64> = (0..7).map(|_| rng.gen_range(6.0..13.0)).collect();
        let poly = radial(24.0, 24.0, &radii).vertices;
        let color = [0, 1, 2].map(|_| rng.gen_range(0.0..0.6));
        let doc = polygon_doc(&poly, Rgba::new(color[0], color[1], color[2], 1.0), size as f64);
        let binding = bind(&mesh, &poly).unwrap();
        let pose: Vec<Point2D> =
            mesh.vertices.iter().map(|&v| v + p(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5))).collect();
        let mut weights = FrameBuffer::white(size, size);
        for px in &mut weights.pixels {
            *px = [0, 1, 2].map(|_| rng.gen_range(-1.0..1.0));
        }
        let (_, tape) = render_vector(&doc, &binding, &mesh, &pose, &RenderSettings::new(size, size)).unwrap();
        let grad = binding.backward(&mesh, &tape.backward(&weights).unwrap());
        let fd = central_differences(&pose, 0.05, |q| {
            weighted_sum(&exact_render(&binding.apply(&mesh, &poly, q), color, size, size), &weights)
        });
        worst = worst.max(relative_error(&grad, &fd));
    }
    for _ in 0..3 {
        let n = 40;
        let patch = RasterPatch { image: soft_texture(n, 5.0), origin: Point2D::ZERO };
        let mesh = square_mesh(1.0, 39.0, rng.gen_range(40.0..120.0), &[p(rng.gen_range(14.0..26.0), rng.gen_range(14.0..26.0))]);
        let pose: Vec<Point2D> = mesh
            .vertices
            .iter()
            .map(|&v| {
                let j = if v.x > 1.5 && v.x < 38.5 && v.y > 1.5 && v.y < 38.5 { 1.5 } else { 0.3 };
                v + p(rng.gen_range(-j..j), rng.gen_range(-j..j))
            })
            .collect();
        let s = RenderSettings::new(n, n);
        let weights = FrameBuffer::filled(n, n, [1.0; 3]);
        let (_, tape) = render_bitmap(&patch, &mesh, &pose, (40.0, 40.0), &s).unwrap();
        let grad = tape.backward(&weights).unwrap();
        let fd = central_differences(&pose, 0.05, |q| {
            weighted_sum(&render_bitmap(&patch, &mesh, q, (40.0, 40.0), &s).unwrap().0, &weights)
        });
        worst = worst.max(relative_error(&grad, &fd));
    }
    ensure(worst < 5e-2, || format!("backward relative error {worst:e}"))?;
    Ok(format!("identity warp bit-exact, bitmap shift exact, backward {worst:.1e} on 7 instances"))
}

// ------------------------------------------------------------ end to end

struct Convergence {
    cfg: OptimConfig,
    scene: Scene,
    targets: Vec<FrameBuffer>,
    reference: TrajectorySet,
    first: RunState,
    second: RunState,
    elapsed: Duration,
}

/// λ is scaled to the mock loss, a mean over `N·H·W·3` values.
fn convergence() -> &'static Convergence {
    static RUN: OnceLock<Convergence> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = OptimConfig { steps: 300, lambda: 3e-4, ..OptimConfig::default() };
        let doc = parse_svg(FIGURE_SVG).unwrap();
        let rig = rig_layer(&doc, 0);
        let scene = Scene::single(doc, rig, cfg.render_settings(), cfg.schedule().unwrap(), cfg.deform).unwrap();
        let offsets = [p(0., 0.), p(3., -2.), p(6., 1.), p(9., 4.)];
        let reference = TrajectorySet::new(
            scene
                .skeleton(0)
                .keypoints
                .iter()
                .map(|&k| BezierTrajectory::new(offsets.iter().map(|&d| k + d).collect()).unwrap())
                .collect(),
        )
        .unwrap();
        let targets = scene.forward(&[reference.clone()]).unwrap().frames();
        let run = || {
            let mut mock = MockTargetGuidance::new(targets.clone()).unwrap();
            let mut opt = Optimizer::new(&scene, cfg.clone()).unwrap();
            opt.run_until(&mut mock, cfg.steps, None, |_| {}).unwrap();
            opt.into_state()
        };
        let start = Instant::now();
        let first = run();
        let elapsed = start.elapsed();
        let second = run();
        Convergence { cfg, scene, targets, reference, first, second, elapsed }
    })
}

fn end_to_end() -> Outcome {
    let c = convergence();
    let u = *c.scene.schedule().parameters().last().unwrap();
    let at = |s: &TrajectorySet| s.trajectories.iter().map(|t| t.eval(u).unwrap()).collect::<Vec<_>>();
    let worst = max_dev(&at(&c.reference), &at(&c.first.sets[0]));
    ensure(c.cfg.width == 256 && c.cfg.steps <= 300, || "fixture is not 256² in ≤ 300 steps".into())?;
    ensure(worst < 1.0, || format!("final-frame keypoint error {worst:.3} px"))?;
    ensure(c.elapsed < Duration::from_secs(120), || format!("took {:.1?}", c.elapsed))?;
    ensure(c.first.sets == c.second.sets, || "two runs differ".into())?;
    Ok(format!(
        "{} keypoints within {worst:.3} px after {} steps in {:.1?}, bitwise repeatable",
        c.reference.len(),
        c.cfg.steps,
        c.elapsed
    ))
}

// --------------------------------------------------------------- metrics

fn metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let pts = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Point2D> {
            (0..n).map(|_| p(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0))).collect()
        };
        let (na, nb) = (rng.gen_range(1..80), rng.gen_range(1..80));
        let (a, b) = (pts(&mut rng, na), pts(&mut rng, nb));
        let directed = |x: &[Point2D], y: &[Point2D]| {
            x.iter().map(|q| y.iter().map(|r| q.distance(*r)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
        };
        let brute = directed(&a, &b).max(directed(&b, &a));
        worst = worst.max((hausdorff(&a, &b).map_err(|e| e.to_string())? - brute).abs());
    }
    ensure(worst <= 1e-12, || format!("Hausdorff deviates by {worst:e}"))?;

    // Unit square: a right angle between unit edges at every corner.
    let square = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
    let ring: Vec<(usize, usize)> = (0..4).map(|i| ((i + 3) % 4, (i + 1) % 4)).collect();
    let kappa = discrete_curvature(&square, &ring);
    ensure(kappa.iter().all(|k| (k - FRAC_PI_4).abs() < 1e-9), || format!("right-angle curvature {kappa:?}"))?;

    let still = TrajectorySet::static_at(&[p(3.0, 4.0), p(10.0, -2.0)], 3);
    let mv = motion_vibrancy(&[still]);
    ensure(mv == 0.0, || format!("static MV {mv}"))?;

    let base = OptimConfig { frames: 8, steps: 120, lambda: 3e-4, ..OptimConfig::default() };
    let doc = parse_svg(FIGURE_SVG).unwrap();
    let rig = rig_layer(&doc, 0);
    let scene = Scene::single(doc, rig, base.render_settings(), base.schedule().unwrap(), base.deform).unwrap();
    let offsets = [p(0., 0.), p(14., -18.), p(-6., 20.), p(10., 2.)];
    let reference = TrajectorySet::new(
        scene
            .skeleton(0)
            .keypoints
            .iter()
            .map(|&k| BezierTrajectory::new(offsets.iter().map(|&d| k + d).collect()).unwrap())
            .collect(),
    )
    .unwrap();
    let targets = scene.forward(&[reference]).unwrap().frames();
    let run = |order: usize| -> Result<f64, String> {
        let cfg = OptimConfig { bezier_order: order, ..base.clone() };
        let mut mock = MockTargetGuidance::new(targets.clone()).unwrap();
        let mut opt = Optimizer::new(&scene, cfg.clone()).map_err(|e| e.to_string())?;
        opt.run_until(&mut mock, cfg.steps, None, |_| {}).map_err(|e| e.to_string())?;
        let record = AnimationRecord::capture("ablation", &scene, &opt.into_state().sets).map_err(|e| e.to_string())?;
        Ok(evaluate(&record).map_err(|e| e.to_string())?.motion_vibrancy)
    };
    let (linear, cubic) = (run(1)?, run(3)?);
    ensure(linear < cubic, || format!("MV order 1 {linear:.3} ≥ order 3 {cubic:.3}"))?;
    Ok(format!("Hausdorff {worst:.1e}, κ(right angle)=π/4, static MV 0, MV order 1 {linear:.2} < order 3 {cubic:.2}"))
}

// ------------------------------------------------------------ checkpoint

fn checkpoint() -> Outcome {
    let c = convergence();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("state.json");
    let mut mock = MockTargetGuidance::new(c.targets.clone()).unwrap();
    let mut opt = Optimizer::new(&c.scene, c.cfg.clone()).map_err(|e| e.to_string())?;
    opt.run_until(&mut mock, 150, None, |_| {}).map_err(|e| e.to_string())?;
    save_checkpoint(opt.state(), &path).map_err(|e| e.to_string())?;
    drop(opt);

    let state = load_checkpoint(&path).map_err(|e| e.to_string())?;
    let mut mock = MockTargetGuidance::new(c.targets.clone()).unwrap();
    let mut opt = Optimizer::resume(&c.scene, c.cfg.clone(), state).map_err(|e| e.to_string())?;
    opt.run_until(&mut mock, c.cfg.steps, None, |_| {}).map_err(|e| e.to_string())?;
    let resumed = opt.into_state();
    let losses = |s: &RunState| s.history.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>();
    let same = resumed.sets == c.first.sets
        && resumed.adam_m == c.first.adam_m
        && resumed.adam_v == c.first.adam_v
        && resumed.rng == c.first.rng
        && losses(&resumed) == losses(&c.first);
    ensure(same, || "resumed run differs from the uninterrupted one".into())?;
    Ok("stop at 150, reload, finish at 300: trajectories, moments, RNG and losses bitwise equal".into())
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 9] = [
        ("configuration defaults", configuration),
        ("ARAP suite", arap),
        ("straight-skeleton oracle", skeleton),
        ("Bézier suite", bezier),
        ("fidelity loss", fidelity),
        ("renderer", renderer),
        ("end-to-end mock convergence", end_to_end),
        ("metrics oracles and ablation", metrics),
        ("checkpoint/resume", checkpoint),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason} [{secs:.1}s]");
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
