use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::{FrameBuffer, RenderError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExportOptions {
    /// Delay between GIF frames in milliseconds (stored in 10 ms units).
    pub frame_delay_ms: u32,
    pub write_pngs: bool,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self { frame_delay_ms: 1000 / 12, write_pngs: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExportedFiles {
    pub pngs: Vec<PathBuf>,
    pub gif: Option<PathBuf>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RenderError {
    RenderError::Io { path: path.display().to_string(), message: e.to_string() }
}

pub fn write_png(frame: &FrameBuffer, path: &Path) -> Result<(), RenderError> {
    let img = image::RgbImage::from_raw(frame.width as u32, frame.height as u32, frame.to_rgb8())
        .expect("buffer length matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| io_err(path, e))
}

/// Looping GIF with one global palette quantised over all frames.
pub fn write_gif(frames: &[FrameBuffer], path: &Path, frame_delay_ms: u32) -> Result<(), RenderError> {
    let first = frames.first().ok_or(RenderError::NoFrames)?;
    if frames.iter().any(|f| f.shape() != first.shape()) {
        return Err(RenderError::MixedSizes);
    }
    let (w, h) = (first.width, first.height);
    if w > usize::from(u16::MAX) || h > usize::from(u16::MAX) {
        return Err(io_err(path, "frame too large for GIF"));
    }
    let rgba: Vec<Vec<u8>> = frames
        .iter()
        .map(|f| f.to_rgb8().chunks_exact(3).flat_map(|c| [c[0], c[1], c[2], 255]).collect())
        .collect();
    let all: Vec<u8> = rgba.concat();
    let quant = color_quant::NeuQuant::new(10, 256, &all);
    let palette = quant.color_map_rgb();

    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut enc = gif::Encoder::new(BufWriter::new(file), w as u16, h as u16, &palette).map_err(|e| io_err(path, e))?;
    enc.set_repeat(gif::Repeat::Infinite).map_err(|e| io_err(path, e))?;
    let delay = ((frame_delay_ms + 5) / 10).max(1) as u16;
    for px in &rgba {
        let indices: Vec<u8> = px.chunks_exact(4).map(|c| quant.index_of(c) as u8).collect();
        let mut frame = gif::Frame::from_indexed_pixels(w as u16, h as u16, indices, None);
        frame.delay = delay;
        enc.write_frame(&frame).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Writes `frame_0000.png …` and `animation.gif` into `dir`.
pub fn export_frames(frames: &[FrameBuffer], dir: &Path, opts: &ExportOptions) -> Result<ExportedFiles, RenderError> {
    if frames.is_empty() {
        return Err(RenderError::NoFrames);
    }
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut out = ExportedFiles::default();
    if opts.write_pngs {
        for (i, f) in frames.iter().enumerate() {
            let p = dir.join(format!("frame_{i:04}.png"));
            write_png(f, &p)?;
            out.pngs.push(p);
        }
    }
    let gif = dir.join("animation.gif");
    write_gif(frames, &gif, opts.frame_delay_ms)?;
    out.gif = Some(gif);
    Ok(out)
}
