//! Frame rendering with reverse-mode gradients.
//!
//! Vector frames are scanline-filled with 4×4 supersampling. Their backward
//! pass differentiates the box-filtered image: every path edge is sampled,
//! and each sample carries the upstream gradient of its pixel times the color
//! jump across the edge. Bitmap frames are an inverse-affine, bilinear warp;
//! the backward pass chains through the sampling location.

mod bitmap;
mod export;
mod raster;
mod vector;

pub use bitmap::{render_bitmap, BitmapTape};
pub use export::{export_frames, write_gif, write_png, ExportOptions, ExportedFiles};
pub use raster::{coverage, winding_number, Coverage};
pub use vector::{deform_document, render_deformed, render_document, render_vector, VectorTape};

use crate::geometry::Point2D;

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("gradient shape {got:?} does not match frame shape {expected:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("binding covers {got} control points, document has {expected}")]
    BindingMismatch { expected: usize, got: usize },
    #[error("pose has {got} vertices, mesh has {expected}")]
    PoseMismatch { expected: usize, got: usize },
    #[error("no frames to export")]
    NoFrames,
    #[error("frames differ in size")]
    MixedSizes,
    #[error("invalid render settings: {0}")]
    Settings(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Row-major RGB in `[0, 1]`, composited over white.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBuffer {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl FrameBuffer {
    pub fn white(width: usize, height: usize) -> Self {
        Self::filled(width, height, [1.0; 3])
    }

    pub fn filled(width: usize, height: usize, value: [f64; 3]) -> Self {
        Self { width, height, pixels: vec![value; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: [f64; 3]) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect()
    }

    pub fn max_abs_diff(&self, other: &FrameBuffer) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.pixels
            .iter()
            .zip(&other.pixels)
            .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).abs()))
            .fold(0.0, f64::max)
    }

    /// Pixels differing from white.
    pub fn covered_pixels(&self) -> usize {
        self.pixels.iter().filter(|p| p.iter().any(|&c| c < 1.0)).count()
    }
}

/// Per-pixel RGB gradient of a scalar loss, same layout as [`FrameBuffer`].
pub type PixelGradient = FrameBuffer;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderSettings {
    pub width: usize,
    pub height: usize,
    /// Samples per pixel along each axis in the forward pass.
    pub supersample: usize,
    /// Curve flattening tolerance in output pixels.
    pub flatten_tol: f64,
    /// Backward-pass edge pieces per output pixel of edge length, on top of
    /// the splits at pixel boundaries.
    pub edge_density: f64,
}

impl RenderSettings {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, supersample: 4, flatten_tol: 0.05, edge_density: 2.0 }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::Settings("resolution must be nonzero".into()));
        }
        if self.supersample == 0 || self.supersample > 16 {
            return Err(RenderError::Settings(format!("supersample {} outside 1..=16", self.supersample)));
        }
        if !(self.flatten_tol > 0.0) || !(self.edge_density > 0.0) {
            return Err(RenderError::Settings("tolerances must be positive".into()));
        }
        Ok(())
    }
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self::new(256, 256)
    }
}

/// Canvas-to-pixel scale factors.
pub(crate) fn pixel_scale(settings: &RenderSettings, canvas_w: f64, canvas_h: f64) -> Point2D {
    Point2D::new(settings.width as f64 / canvas_w, settings.height as f64 / canvas_h)
}

pub(crate) fn check_upstream(frame: (usize, usize), upstream: &PixelGradient) -> Result<(), RenderError> {
    if upstream.shape() != frame {
        return Err(RenderError::ShapeMismatch { expected: frame, got: upstream.shape() });
    }
    Ok(())
}
