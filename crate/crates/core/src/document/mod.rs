//! Clipart ingestion: the supported SVG subset, raster input, and extraction
//! of closed boundary polygons used for rigging.

mod contour;
mod path_data;
mod raster;
mod svg;
mod trace;

use serde::{Deserialize, Serialize};

use crate::geometry::{signed_area, BBox, Point2D, Rgba};

pub use contour::{cubic_pieces, cubic_point, extract_contour, flatten_cubic, group_contour, flatten_subpath, Contour};
pub use path_data::parse_path_data;
pub use raster::RasterImage;
pub use svg::{parse_svg, serialize_svg};
pub use trace::{trace_bitmap, TraceResult};

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("malformed markup: {0}")]
    Xml(String),
    #[error("unsupported SVG feature: {0}")]
    Unsupported(String),
    #[error("malformed path data at byte {offset}: {message}")]
    PathData { offset: usize, message: String },
    #[error("invalid attribute `{name}`: {value}")]
    Attribute { name: String, value: String },
    #[error("invalid document: {0}")]
    Invalid(String),
    #[error("empty silhouette: {0}")]
    EmptySilhouette(String),
    #[error("image error: {0}")]
    Image(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One segment of a subpath. Indices point into [`Subpath::points`]; a segment
/// starts where the previous one ended (or at `points[0]`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Line { end: usize },
    Cubic { ctrl1: usize, ctrl2: usize, end: usize },
}

impl Segment {
    pub fn end(&self) -> usize {
        match *self {
            Segment::Line { end } | Segment::Cubic { end, .. } => end,
        }
    }
}

/// A single contour of a path. Quadratic input segments are stored as cubics.
///
/// Closed subpaths end with a segment whose `end` is `0`, so the closing anchor
/// is never duplicated in `points`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subpath {
    pub points: Vec<Point2D>,
    pub segments: Vec<Segment>,
    pub closed: bool,
}

impl Subpath {
    /// Start index of segment `k`.
    pub fn segment_start(&self, k: usize) -> usize {
        if k == 0 {
            0
        } else {
            self.segments[k - 1].end()
        }
    }

    /// Control-point indices of segment `k` as a cubic `[p0, p1, p2, p3]`;
    /// lines report `None` for the handles.
    pub fn segment_indices(&self, k: usize) -> (usize, Option<(usize, usize)>, usize) {
        let s = self.segment_start(k);
        match self.segments[k] {
            Segment::Line { end } => (s, None, end),
            Segment::Cubic { ctrl1, ctrl2, end } => (s, Some((ctrl1, ctrl2)), end),
        }
    }

    fn validate(&self) -> Result<(), DocumentError> {
        if self.points.is_empty() {
            return Err(DocumentError::Invalid("subpath without points".into()));
        }
        let n = self.points.len();
        for seg in &self.segments {
            let ok = match *seg {
                Segment::Line { end } => end < n,
                Segment::Cubic { ctrl1, ctrl2, end } => ctrl1 < n && ctrl2 < n && end < n,
            };
            if !ok {
                return Err(DocumentError::Invalid("segment index out of range".into()));
            }
        }
        if self.closed {
            if self.segments.last().map(Segment::end) != Some(0) {
                return Err(DocumentError::Invalid(
                    "closed subpath must end at its first anchor".into(),
                ));
            }
            if n < 3 && self.segments.len() > 1 {
                return Err(DocumentError::Invalid("closed subpath needs L >= 3".into()));
            }
        }
        if self.points.iter().any(|p| !p.is_finite()) {
            return Err(DocumentError::Invalid("non-finite coordinate".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FillRule {
    #[default]
    NonZero,
    EvenOdd,
}

impl FillRule {
    #[inline]
    pub fn is_inside(self, winding: i32) -> bool {
        match self {
            FillRule::NonZero => winding != 0,
            FillRule::EvenOdd => winding & 1 != 0,
        }
    }
}

/// A filled path made of one or more subpaths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorPath {
    pub subpaths: Vec<Subpath>,
    pub fill: Rgba,
    #[serde(default)]
    pub fill_rule: FillRule,
}

impl VectorPath {
    pub fn control_point_count(&self) -> usize {
        self.subpaths.iter().map(|s| s.points.len()).sum()
    }

    pub fn control_points(&self) -> impl Iterator<Item = &Point2D> {
        self.subpaths.iter().flat_map(|s| s.points.iter())
    }

    pub fn control_points_mut(&mut self) -> impl Iterator<Item = &mut Point2D> {
        self.subpaths.iter_mut().flat_map(|s| s.points.iter_mut())
    }
}

/// A bitmap placed on the canvas with its top-left corner at `origin`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterPatch {
    pub image: RasterImage,
    pub origin: Point2D,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerContent {
    Paths(Vec<VectorPath>),
    Raster(RasterPatch),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub name: String,
    pub z_order: i32,
    pub content: LayerContent,
}

impl Layer {
    pub fn paths(&self) -> &[VectorPath] {
        match &self.content {
            LayerContent::Paths(p) => p,
            LayerContent::Raster(_) => &[],
        }
    }

    pub fn has_geometry(&self) -> bool {
        match &self.content {
            LayerContent::Paths(p) => p.iter().any(|p| p.control_point_count() > 0),
            LayerContent::Raster(r) => r.image.width > 0 && r.image.height > 0,
        }
    }
}

/// The animation subject: ordered layers on a `width × height` canvas.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipartDocument {
    pub layers: Vec<Layer>,
    pub width: f64,
    pub height: f64,
}

impl ClipartDocument {
    /// A bitmap clipart as a single raster layer covering the canvas.
    pub fn from_raster(image: RasterImage) -> Self {
        let (w, h) = (image.width as f64, image.height as f64);
        Self {
            layers: vec![Layer {
                name: "bitmap".into(),
                z_order: 0,
                content: LayerContent::Raster(RasterPatch { image, origin: Point2D::ZERO }),
            }],
            width: w,
            height: h,
        }
    }

    pub fn validate(&self) -> Result<(), DocumentError> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(DocumentError::Invalid("canvas width and height must be > 0".into()));
        }
        if !self.layers.iter().any(Layer::has_geometry) {
            return Err(DocumentError::Invalid("document has no geometry".into()));
        }
        let mut z: Vec<i32> = self.layers.iter().map(|l| l.z_order).collect();
        z.sort_unstable();
        if z.windows(2).any(|w| w[0] == w[1]) {
            return Err(DocumentError::Invalid("duplicate layer z_order".into()));
        }
        for path in self.layers.iter().flat_map(|l| l.paths()) {
            for sp in &path.subpaths {
                sp.validate()?;
            }
        }
        Ok(())
    }

    /// Layers sorted by z (paint order).
    pub fn layers_in_paint_order(&self) -> Vec<&Layer> {
        let mut ls: Vec<&Layer> = self.layers.iter().collect();
        ls.sort_by_key(|l| l.z_order);
        ls
    }

    /// All vector paths in paint order.
    pub fn paths_in_paint_order(&self) -> Vec<&VectorPath> {
        self.layers_in_paint_order().into_iter().flat_map(|l| l.paths().iter()).collect()
    }

    /// Total number of path control points (anchors and handles).
    pub fn control_point_count(&self) -> usize {
        self.paths_in_paint_order().iter().map(|p| p.control_point_count()).sum()
    }

    /// Flattened control points of every path, in paint order.
    pub fn control_points(&self) -> Vec<Point2D> {
        self.paths_in_paint_order().into_iter().flat_map(|p| p.control_points().copied()).collect()
    }

    /// Overwrites every path control point, in paint order.
    pub fn set_control_points(&mut self, points: &[Point2D]) {
        assert_eq!(points.len(), self.control_point_count(), "control point count mismatch");
        let mut it = points.iter();
        let mut layers: Vec<&mut Layer> = self.layers.iter_mut().collect();
        layers.sort_by_key(|l| l.z_order);
        for layer in layers {
            if let LayerContent::Paths(paths) = &mut layer.content {
                for cp in paths.iter_mut().flat_map(|p| p.control_points_mut()) {
                    *cp = *it.next().expect("length checked");
                }
            }
        }
    }

    pub fn bbox(&self) -> Option<BBox> {
        let pts = self.control_points();
        BBox::from_points(pts.iter())
    }

    /// Finds a layer by name.
    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }
}

/// Boundary polygon: CCW outer ring, CW holes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point2D>,
    #[serde(default)]
    pub holes: Vec<Vec<Point2D>>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point2D>) -> Self {
        Self { vertices, holes: Vec::new() }
    }

    /// Area of the outer ring minus holes.
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices) + self.holes.iter().map(|h| signed_area(h)).sum::<f64>()
    }

    /// Reorients rings to CCW outer / CW holes.
    pub fn normalize_orientation(&mut self) {
        if signed_area(&self.vertices) < 0.0 {
            self.vertices.reverse();
        }
        for h in &mut self.holes {
            if signed_area(h) > 0.0 {
                h.reverse();
            }
        }
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::from_points(self.vertices.iter())
    }

    /// All rings (outer first) as closed edge lists.
    pub fn edges(&self) -> Vec<(Point2D, Point2D)> {
        let mut out = Vec::new();
        for ring in std::iter::once(&self.vertices).chain(self.holes.iter()) {
            for i in 0..ring.len() {
                out.push((ring[i], ring[(i + 1) % ring.len()]));
            }
        }
        out
    }

    /// Point containment honouring holes.
    pub fn contains(&self, p: Point2D) -> bool {
        crate::geometry::point_in_ring(p, &self.vertices)
            && !self.holes.iter().any(|h| crate::geometry::point_in_ring(p, h))
    }

    /// Distance from `p` to the nearest boundary edge.
    pub fn boundary_distance(&self, p: Point2D) -> f64 {
        self.edges()
            .iter()
            .map(|&(a, b)| crate::geometry::point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Removes consecutive duplicates and exactly collinear vertices from a ring.
pub(crate) fn clean_ring(ring: &mut Vec<Point2D>, collinear_eps: f64) {
    ring.dedup();
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    let mut changed = true;
    while changed && ring.len() > 3 {
        changed = false;
        let n = ring.len();
        for i in 0..n {
            let a = ring[(i + n - 1) % n];
            let b = ring[i];
            let c = ring[(i + 1) % n];
            let len = (c - a).norm().max(1e-300);
            if crate::geometry::orient2d(a, b, c).abs() / len <= collinear_eps
                && (b - a).dot(c - b) >= 0.0
            {
                ring.remove(i);
                changed = true;
                break;
            }
        }
    }
}
