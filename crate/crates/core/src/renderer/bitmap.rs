use super::{check_upstream, pixel_scale, FrameBuffer, PixelGradient, RenderError, RenderSettings};
use crate::document::RasterPatch;
use crate::geometry::Point2D;
use crate::rigging::TriangleMesh;

/// Deformed triangles with pixel-space area below this are skipped.
const DEGENERATE_AREA: f64 = 1e-12;
/// Source coordinates this close to a pixel center snap onto it, so identity
/// and integer-translation warps sample the grid exactly.
const SNAP: f64 = 1e-7;

#[derive(Clone, Copy, Debug)]
struct TapeEntry {
    pixel: usize,
    triangle: usize,
    bary: [f64; 3],
    /// `∂color/∂(output pixel position)`, one row per channel.
    dcdp: [[f64; 2]; 3],
}

/// Per covered pixel: triangle, barycentric weights and local color
/// gradient.
#[derive(Clone, Debug)]
pub struct BitmapTape {
    entries: Vec<TapeEntry>,
    triangles: Vec<[usize; 3]>,
    vertex_count: usize,
    scale: Point2D,
    width: usize,
    height: usize,
}

impl BitmapTape {
    pub fn covered_pixels(&self) -> usize {
        self.entries.len()
    }

    /// Gradient with respect to the deformed mesh vertices, canvas units.
    pub fn backward(&self, upstream: &PixelGradient) -> Result<Vec<Point2D>, RenderError> {
        check_upstream((self.width, self.height), upstream)?;
        let mut grad = vec![Point2D::ZERO; self.vertex_count];
        for e in &self.entries {
            let up = upstream.pixels[e.pixel];
            let gp = Point2D::new(
                (0..3).map(|c| up[c] * e.dcdp[c][0]).sum(),
                (0..3).map(|c| up[c] * e.dcdp[c][1]).sum(),
            );
            if gp == Point2D::ZERO {
                continue;
            }
            // Moving vertex k by δ moves the sampled point by −β_k δ.
            let tri = self.triangles[e.triangle];
            for k in 0..3 {
                grad[tri[k]] -= gp * e.bary[k];
            }
        }
        for g in &mut grad {
            *g = Point2D::new(g.x * self.scale.x, g.y * self.scale.y);
        }
        Ok(grad)
    }
}

fn snap(v: f64) -> f64 {
    let c = (v - 0.5).round() + 0.5;
    if (v - c).abs() < SNAP {
        c
    } else {
        v
    }
}

/// Bilinear sample at source position `s` (pixel centers at `i + ½`), with
/// the gradient of each channel with respect to `s`.
fn bilinear(patch: &RasterPatch, s: Point2D) -> ([f64; 3], [[f64; 2]; 3]) {
    let img = &patch.image;
    let fx = s.x - 0.5;
    let fy = s.y - 0.5;
    let ix = fx.floor();
    let iy = fy.floor();
    let (tx, ty) = (fx - ix, fy - iy);
    let clamp = |v: f64, n: usize| v.clamp(0.0, (n - 1) as f64) as usize;
    let (x0, x1) = (clamp(ix, img.width), clamp(ix + 1.0, img.width));
    let (y0, y1) = (clamp(iy, img.height), clamp(iy + 1.0, img.height));
    let c00 = img.rgb_over_white(x0, y0);
    let c10 = img.rgb_over_white(x1, y0);
    let c01 = img.rgb_over_white(x0, y1);
    let c11 = img.rgb_over_white(x1, y1);
    let mut c = [0.0; 3];
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        if tx == 0.0 && ty == 0.0 {
            c[k] = c00[k];
        } else {
            let top = c00[k] + tx * (c10[k] - c00[k]);
            let bot = c01[k] + tx * (c11[k] - c01[k]);
            c[k] = top + ty * (bot - top);
        }
        g[k][0] = (1.0 - ty) * (c10[k] - c00[k]) + ty * (c11[k] - c01[k]);
        g[k][1] = (1.0 - tx) * (c01[k] - c00[k]) + tx * (c11[k] - c10[k]);
    }
    (c, g)
}

/// Inverse-affine warp of `patch` by the deformed mesh `pose`.
///
/// Every output pixel center inside a deformed triangle is mapped back to
/// the rest triangle and sampled bilinearly; the first triangle in index
/// order claims shared pixels. Pixels outside the mesh stay white.
pub fn render_bitmap(
    patch: &RasterPatch,
    mesh: &TriangleMesh,
    pose: &[Point2D],
    canvas: (f64, f64),
    settings: &RenderSettings,
) -> Result<(FrameBuffer, BitmapTape), RenderError> {
    settings.validate()?;
    if pose.len() != mesh.vertices.len() {
        return Err(RenderError::PoseMismatch { expected: mesh.vertices.len(), got: pose.len() });
    }
    let (w, h) = (settings.width, settings.height);
    let scale = pixel_scale(settings, canvas.0, canvas.1);
    let identity = pose == mesh.vertices.as_slice();
    let mut frame = FrameBuffer::white(w, h);
    let mut claimed = vec![false; w * h];
    let mut entries = Vec::new();
    let mut degenerate = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|v| Point2D::new(pose[v].x * scale.x, pose[v].y * scale.y));
        let r = tri.map(|v| mesh.vertices[v] - patch.origin);
        let e1 = p[1] - p[0];
        let e2 = p[2] - p[0];
        let det = e1.cross(e2);
        if det.abs() < 2.0 * DEGENERATE_AREA {
            degenerate.push(t);
            continue;
        }
        // Rest position as an affine function of the output pixel position:
        // s = r0 + R M⁻¹ (c − p0), with M = [e1 e2] and R the rest edges.
        let inv = [[e2.y / det, -e2.x / det], [-e1.y / det, e1.x / det]];
        let (f1, f2) = (r[1] - r[0], r[2] - r[0]);
        let a = [
            [f1.x * inv[0][0] + f2.x * inv[1][0], f1.x * inv[0][1] + f2.x * inv[1][1]],
            [f1.y * inv[0][0] + f2.y * inv[1][0], f1.y * inv[0][1] + f2.y * inv[1][1]],
        ];
        let lo_x = p.iter().map(|q| q.x).fold(f64::INFINITY, f64::min);
        let hi_x = p.iter().map(|q| q.x).fold(f64::NEG_INFINITY, f64::max);
        let lo_y = p.iter().map(|q| q.y).fold(f64::INFINITY, f64::min);
        let hi_y = p.iter().map(|q| q.y).fold(f64::NEG_INFINITY, f64::max);
        if hi_x < 0.0 || hi_y < 0.0 || lo_x >= w as f64 || lo_y >= h as f64 {
            continue;
        }
        let x0 = (lo_x - 0.5).ceil().max(0.0) as usize;
        let x1 = ((hi_x - 0.5).floor().max(-1.0) + 1.0).min(w as f64) as usize;
        let y0 = (lo_y - 0.5).ceil().max(0.0) as usize;
        let y1 = ((hi_y - 0.5).floor().max(-1.0) + 1.0).min(h as f64) as usize;
        for y in y0..y1 {
            for x in x0..x1 {
                let idx = y * w + x;
                if claimed[idx] {
                    continue;
                }
                let c = Point2D::new(x as f64 + 0.5, y as f64 + 0.5);
                let d = c - p[0];
                let b1 = d.cross(e2) / det;
                let b2 = e1.cross(d) / det;
                let b0 = 1.0 - b1 - b2;
                if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                    continue;
                }
                claimed[idx] = true;
                let src = if identity && scale == Point2D::new(1.0, 1.0) {
                    c - patch.origin
                } else {
                    let s = r[0] + f1 * b1 + f2 * b2;
                    Point2D::new(snap(s.x), snap(s.y))
                };
                let (color, jc) = bilinear(patch, src);
                frame.pixels[idx] = color;
                let mut dcdp = [[0.0; 2]; 3];
                for k in 0..3 {
                    dcdp[k][0] = jc[k][0] * a[0][0] + jc[k][1] * a[1][0];
                    dcdp[k][1] = jc[k][0] * a[0][1] + jc[k][1] * a[1][1];
                }
                entries.push(TapeEntry { pixel: idx, triangle: t, bary: [b0, b1, b2], dcdp });
            }
        }
    }
    if !degenerate.is_empty() {
        log::warn!("skipped {} degenerate triangle(s): {:?}", degenerate.len(), &degenerate[..degenerate.len().min(8)]);
    }
    let tape = BitmapTape {
        entries,
        triangles: mesh.triangles.clone(),
        vertex_count: mesh.vertices.len(),
        scale,
        width: w,
        height: h,
    };
    Ok((frame, tape))
}
