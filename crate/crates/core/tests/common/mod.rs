#![allow(dead_code)]

use clipmotion::document::{ClipartDocument, FillRule, Layer, LayerContent, Polygon, Segment, Subpath, VectorPath};
use clipmotion::geometry::{Point2D, Rgba};
use clipmotion::renderer::FrameBuffer;

pub fn p(x: f64, y: f64) -> Point2D {
    Point2D::new(x, y)
}

pub fn rect(x: f64, y: f64, w: f64, h: f64) -> Polygon {
    Polygon::new(vec![p(x, y), p(x + w, y), p(x + w, y + h), p(x, y + h)])
}

/// Star with `arms` limbs alternating between radii `outer` and `inner`.
pub fn star(cx: f64, cy: f64, arms: usize, outer: f64, inner: f64) -> Polygon {
    let n = 2 * arms;
    Polygon::new(
        (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64 + 0.1;
                let r = if i % 2 == 0 { outer } else { inner };
                p(cx + r * a.cos(), cy + r * a.sin())
            })
            .collect(),
    )
}

/// Starfish: a star whose limbs are widened with extra vertices.
pub fn starfish(cx: f64, cy: f64, r: f64) -> Polygon {
    let arms = 5;
    let mut v = Vec::new();
    for k in 0..arms {
        let a0 = std::f64::consts::TAU * k as f64 / arms as f64;
        let da = std::f64::consts::TAU / arms as f64;
        for (frac, rad) in [(0.0, 0.35), (0.3, 0.45), (0.42, 0.9), (0.5, 1.0), (0.58, 0.9), (0.7, 0.45)] {
            let a = a0 + frac * da;
            v.push(p(cx + r * rad * a.cos(), cy + r * rad * a.sin()));
        }
    }
    Polygon::new(v)
}

pub fn l_shape() -> Polygon {
    Polygon::new(vec![p(0., 0.), p(40., 0.), p(40., 10.), p(10., 10.), p(10., 30.), p(0., 30.)])
}

pub fn t_shape() -> Polygon {
    Polygon::new(vec![
        p(0., 0.),
        p(60., 0.),
        p(60., 12.),
        p(36., 12.),
        p(36., 50.),
        p(24., 50.),
        p(24., 12.),
        p(0., 12.),
    ])
}

pub fn plus_shape() -> Polygon {
    Polygon::new(vec![
        p(20., 0.),
        p(30., 0.),
        p(30., 20.),
        p(50., 20.),
        p(50., 30.),
        p(30., 30.),
        p(30., 50.),
        p(20., 50.),
        p(20., 30.),
        p(0., 30.),
        p(0., 20.),
        p(20., 20.),
    ])
}

/// A stick-figure-like silhouette: torso, head, two arms, two legs.
pub fn figure() -> Polygon {
    Polygon::new(vec![
        p(120., 40.),
        p(136., 40.),
        p(136., 70.),
        p(180., 80.),
        p(178., 92.),
        p(140., 88.),
        p(142., 140.),
        p(160., 200.),
        p(146., 204.),
        p(128., 150.),
        p(110., 204.),
        p(96., 200.),
        p(114., 140.),
        p(116., 88.),
        p(78., 92.),
        p(76., 80.),
        p(120., 70.),
    ])
}

/// Star-shaped simple polygon from sorted angles and radii.
pub fn radial(cx: f64, cy: f64, radii: &[f64]) -> Polygon {
    let n = radii.len();
    Polygon::new(
        (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                p(cx + radii[i] * a.cos(), cy + radii[i] * a.sin())
            })
            .collect(),
    )
}

pub fn fixture_shapes() -> Vec<(&'static str, Polygon)> {
    vec![
        ("rect", rect(0., 0., 80., 30.)),
        ("l", l_shape()),
        ("t", t_shape()),
        ("plus", plus_shape()),
        ("starfish", starfish(100., 100., 80.)),
        ("figure", figure()),
    ]
}

pub fn pixel_overlap(poly: &[Point2D], x0: f64, y0: f64) -> f64 {
    let mut pts = poly.to_vec();
    let planes: [(Point2D, f64); 4] =
        [(p(1., 0.), x0), (p(-1., 0.), -(x0 + 1.0)), (p(0., 1.), y0), (p(0., -1.), -(y0 + 1.0))];
    for (n, c) in planes {
        if pts.is_empty() {
            return 0.0;
        }
        let mut out = Vec::new();
        for i in 0..pts.len() {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            let (da, db) = (n.dot(a) - c, n.dot(b) - c);
            if da >= 0.0 {
                out.push(a);
            }
            if (da >= 0.0) != (db >= 0.0) {
                out.push(a + (b - a) * (da / (da - db)));
            }
        }
        pts = out;
    }
    let n = pts.len();
    (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum::<f64>().abs() * 0.5
}

/// Box-filtered rendering of one opaque polygon over white.
pub fn exact_render(poly: &[Point2D], color: [f64; 3], w: usize, h: usize) -> FrameBuffer {
    let mut f = FrameBuffer::white(w, h);
    let lo = poly.iter().fold(p(f64::MAX, f64::MAX), |a, q| p(a.x.min(q.x), a.y.min(q.y)));
    let hi = poly.iter().fold(p(f64::MIN, f64::MIN), |a, q| p(a.x.max(q.x), a.y.max(q.y)));
    for y in (lo.y.floor().max(0.0) as usize)..(hi.y.ceil() as usize).min(h) {
        for x in (lo.x.floor().max(0.0) as usize)..(hi.x.ceil() as usize).min(w) {
            let a = pixel_overlap(poly, x as f64, y as f64);
            if a > 0.0 {
                f.set(x, y, [0, 1, 2].map(|c| 1.0 - a + a * color[c]));
            }
        }
    }
    f
}

pub fn polygon_doc(poly: &[Point2D], color: Rgba, size: f64) -> ClipartDocument {
    let n = poly.len();
    let mut segments: Vec<Segment> = (1..n).map(|end| Segment::Line { end }).collect();
    segments.push(Segment::Line { end: 0 });
    ClipartDocument {
        layers: vec![Layer {
            name: "shape".into(),
            z_order: 0,
            content: LayerContent::Paths(vec![VectorPath {
                subpaths: vec![Subpath { points: poly.to_vec(), segments, closed: true }],
                fill: color,
                fill_rule: FillRule::NonZero,
            }]),
        }],
        width: size,
        height: size,
    }
}

pub fn relative_error(a: &[Point2D], b: &[Point2D]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x.x - y.x).abs().max((x.y - y.y).abs())).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.x.abs().max(y.y.abs())).fold(0.0, f64::max);
    num / den.max(1e-12)
}

/// Three-part figure used by the renderer and optimisation suites.
pub const FIGURE_SVG: &str = r##"<svg xmlns="http://www.w3.org/2000/svg" width="256" height="256" viewBox="0 0 256 256">
  <g id="body">
    <rect x="88" y="80" width="80" height="110" fill="#3a7bd5"/>
    <circle cx="128" cy="60" r="28" fill="#f2c14e"/>
    <path d="M 90 100 C 60 110 50 140 60 160 L 72 156 C 66 140 74 122 96 116 Z" fill="#d1495b"/>
  </g>
</svg>"##;

/// Two shapes far apart, one per layer.
pub const TWO_LAYER_SVG: &str = r##"<svg xmlns="http://www.w3.org/2000/svg" width="256" height="256" viewBox="0 0 256 256">
  <g id="left">
    <rect x="24" y="70" width="60" height="110" fill="#3a7bd5"/>
    <circle cx="54" cy="60" r="20" fill="#f2c14e"/>
  </g>
  <g id="right">
    <rect x="160" y="90" width="70" height="70" fill="#d1495b"/>
    <circle cx="195" cy="170" r="18" fill="#2e8b57"/>
  </g>
</svg>"##;

/// Automatic rig of one document layer.
pub fn rig_layer(doc: &ClipartDocument, layer: usize) -> clipmotion::rigging::Rig {
    let contour = clipmotion::document::extract_contour(&doc.layers[layer], 0.1).unwrap();
    clipmotion::rigging::Rig::build(&contour.polygon, None, &clipmotion::rigging::RigOptions::default()).unwrap()
}
