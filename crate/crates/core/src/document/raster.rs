use std::path::Path;

use super::DocumentError;
use crate::geometry::Rgba;

/// Row-major straight-alpha image with channels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgba>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, fill: Rgba) -> Self {
        Self { width, height, pixels: vec![fill; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgba) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgba {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: Rgba) {
        self.pixels[y * self.width + x] = c;
    }

    /// True when every pixel is fully opaque, i.e. the alpha channel carries
    /// no silhouette information.
    pub fn is_opaque(&self) -> bool {
        self.pixels.iter().all(|p| p.a >= 1.0)
    }

    /// Composites over white and returns RGB.
    #[inline]
    pub fn rgb_over_white(&self, x: usize, y: usize) -> [f64; 3] {
        let p = self.get(x, y);
        [p.r * p.a + 1.0 - p.a, p.g * p.a + 1.0 - p.a, p.b * p.a + 1.0 - p.a]
    }

    pub fn load_png(path: &Path) -> Result<Self, DocumentError> {
        let img = image::open(path)
            .map_err(|e| DocumentError::Image(format!("{}: {e}", path.display())))?
            .to_rgba8();
        let (w, h) = img.dimensions();
        let pixels = img
            .pixels()
            .map(|p| {
                let [r, g, b, a] = p.0;
                Rgba::new(
                    f64::from(r) / 255.0,
                    f64::from(g) / 255.0,
                    f64::from(b) / 255.0,
                    f64::from(a) / 255.0,
                )
            })
            .collect();
        Ok(Self { width: w as usize, height: h as usize, pixels })
    }
}
