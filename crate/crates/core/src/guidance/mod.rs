//! Losses and guidance providers.
//!
//! A provider sees rendered frames only and answers with a scalar and a
//! per-pixel gradient; geometry never crosses that boundary. The skeleton
//! fidelity term is computed here with its analytic gradient, and
//! [`total_gradient`] chains both back to the free trajectory control points.

mod fidelity;
mod remote;
pub mod wire;

pub use fidelity::{fidelity_loss, FidelityTerms};
pub use remote::{HealthInfo, RemoteConfig, RemoteGuidance};

use crate::pipeline::{ForwardPass, PipelineError, Scene};
use crate::renderer::{FrameBuffer, PixelGradient};

#[derive(Debug, thiserror::Error)]
pub enum GuidanceError {
    #[error("request has no frames")]
    NoFrames,
    #[error("frame {index} is {got:?}, expected {expected:?}")]
    ShapeMismatch { index: usize, expected: (usize, usize), got: (usize, usize) },
    #[error("expected {expected} frames, got {got}")]
    FrameCount { expected: usize, got: usize },
    #[error("non-finite value in guidance response")]
    NonFinite,
    #[error("malformed message: {0}")]
    Protocol(String),
    #[error("service error {status}: {message}")]
    Service { status: u16, message: String },
    #[error("guidance endpoint unreachable after {attempts} attempt(s): {message}")]
    Unreachable { attempts: u32, message: String },
}

/// One guidance query: the rendered animation and its conditioning.
#[derive(Clone, Debug)]
pub struct GuidanceRequest {
    pub frames: Vec<FrameBuffer>,
    pub prompt: String,
    pub step_index: u64,
    pub seed: u64,
}

impl GuidanceRequest {
    pub fn validate(&self) -> Result<(usize, usize), GuidanceError> {
        let first = self.frames.first().ok_or(GuidanceError::NoFrames)?;
        check_shapes(&self.frames, first.shape())?;
        Ok(first.shape())
    }
}

#[derive(Clone, Debug)]
pub struct GuidanceResult {
    /// For logging; providers may return a noisy estimate.
    pub loss_value: f64,
    pub pixel_gradients: Vec<PixelGradient>,
}

impl GuidanceResult {
    /// Same frame count and shapes as `frames`, all values finite.
    pub fn validate_against(&self, frames: &[FrameBuffer]) -> Result<(), GuidanceError> {
        if self.pixel_gradients.len() != frames.len() {
            return Err(GuidanceError::FrameCount { expected: frames.len(), got: self.pixel_gradients.len() });
        }
        for (i, (g, f)) in self.pixel_gradients.iter().zip(frames).enumerate() {
            if g.shape() != f.shape() {
                return Err(GuidanceError::ShapeMismatch { index: i, expected: f.shape(), got: g.shape() });
            }
        }
        let finite = self.loss_value.is_finite()
            && self.pixel_gradients.iter().all(|g| g.pixels.iter().all(|p| p.iter().all(|c| c.is_finite())));
        if finite {
            Ok(())
        } else {
            Err(GuidanceError::NonFinite)
        }
    }
}

fn check_shapes(frames: &[FrameBuffer], shape: (usize, usize)) -> Result<(), GuidanceError> {
    match frames.iter().position(|f| f.shape() != shape) {
        Some(i) => Err(GuidanceError::ShapeMismatch { index: i, expected: shape, got: frames[i].shape() }),
        None => Ok(()),
    }
}

/// Source of pixel-space gradients for a rendered animation.
///
/// Calls within one optimisation are sequential; providers may keep state.
pub trait GuidanceProvider {
    fn guidance(&mut self, request: &GuidanceRequest) -> Result<GuidanceResult, GuidanceError>;

    /// Frame size the provider expects, if it declares one.
    fn resolution(&self) -> Option<(usize, usize)> {
        None
    }

    /// Provider settings for the run log.
    fn describe(&self) -> serde_json::Value;
}

/// Mean squared difference to fixed target frames.
#[derive(Clone, Debug)]
pub struct MockTargetGuidance {
    pub targets: Vec<FrameBuffer>,
}

impl MockTargetGuidance {
    pub fn new(targets: Vec<FrameBuffer>) -> Result<Self, GuidanceError> {
        let first = targets.first().ok_or(GuidanceError::NoFrames)?;
        check_shapes(&targets, first.shape())?;
        Ok(Self { targets })
    }
}

/// `loss = mean((f − t)²)` over every channel of every pixel of every frame;
/// the gradient is `2(f − t)/count` with the same `count`.
pub fn mock_target_guidance(frames: &[FrameBuffer], targets: &[FrameBuffer]) -> Result<GuidanceResult, GuidanceError> {
    if frames.len() != targets.len() {
        return Err(GuidanceError::FrameCount { expected: targets.len(), got: frames.len() });
    }
    let Some(first) = targets.first() else { return Err(GuidanceError::NoFrames) };
    check_shapes(targets, first.shape())?;
    check_shapes(frames, first.shape())?;
    let count = (frames.len() * first.width * first.height * 3) as f64;
    let mut sum = 0.0;
    let pixel_gradients = frames
        .iter()
        .zip(targets)
        .map(|(f, t)| {
            let pixels = f
                .pixels
                .iter()
                .zip(&t.pixels)
                .map(|(a, b)| {
                    let mut g = [0.0; 3];
                    for c in 0..3 {
                        let d = a[c] - b[c];
                        sum += d * d;
                        g[c] = 2.0 * d / count;
                    }
                    g
                })
                .collect();
            FrameBuffer { width: f.width, height: f.height, pixels }
        })
        .collect();
    Ok(GuidanceResult { loss_value: sum / count, pixel_gradients })
}

impl GuidanceProvider for MockTargetGuidance {
    fn guidance(&mut self, request: &GuidanceRequest) -> Result<GuidanceResult, GuidanceError> {
        mock_target_guidance(&request.frames, &self.targets)
    }

    fn resolution(&self) -> Option<(usize, usize)> {
        self.targets.first().map(FrameBuffer::shape)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "provider": "mock", "frames": self.targets.len() })
    }
}

/// Zero loss and zero gradient everywhere.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullGuidance;

impl GuidanceProvider for NullGuidance {
    fn guidance(&mut self, request: &GuidanceRequest) -> Result<GuidanceResult, GuidanceError> {
        request.validate()?;
        let pixel_gradients =
            request.frames.iter().map(|f| FrameBuffer::filled(f.width, f.height, [0.0; 3])).collect();
        Ok(GuidanceResult { loss_value: 0.0, pixel_gradients })
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "provider": "null" })
    }
}

/// Loss and free-parameter gradient of one step, per scene layer.
#[derive(Clone, Debug)]
pub struct TotalGradient {
    pub guidance_loss: f64,
    /// Unweighted fidelity loss, summed over layers.
    pub fidelity_loss: f64,
    pub lambda: f64,
    /// Gradient over each layer's `TrajectorySet::free_parameters`.
    pub layers: Vec<Vec<f64>>,
}

impl TotalGradient {
    pub fn total_loss(&self) -> f64 {
        self.guidance_loss + self.lambda * self.fidelity_loss
    }

    pub fn norm(&self) -> f64 {
        self.layers.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Pixel gradients and the λ-weighted fidelity gradient chained back to the
/// free control points `c₁..c_k` of every trajectory.
///
/// `c₀` never receives gradient. Mirrored frames of a looping schedule
/// accumulate into their shared source frame.
pub fn total_gradient(
    scene: &Scene,
    pass: &ForwardPass,
    guidance: &GuidanceResult,
    lambda: f64,
) -> Result<TotalGradient, PipelineError> {
    let keypoint_grads = scene.backward(pass, &guidance.pixel_gradients)?;
    let mut fidelity_total = 0.0;
    let mut layers = Vec::with_capacity(scene.layer_count());
    for (l, kg) in keypoint_grads.into_iter().enumerate() {
        let frames = pass.layer_keypoints(l);
        let fid = fidelity_loss(&frames, scene.skeleton(l));
        fidelity_total += fid.loss;
        // Output frame gradients fold onto unique frames, then onto curves.
        let mut unique = kg;
        for (t, g) in fid.gradients.iter().enumerate() {
            let s = scene.schedule().source_frame(t);
            for (u, &gi) in unique[s].iter_mut().zip(g) {
                *u += gi * lambda;
            }
        }
        layers.push(scene.keypoint_to_parameter_grad(l, pass.order(l), &unique));
    }
    Ok(TotalGradient { guidance_loss: guidance.loss_value, fidelity_loss: fidelity_total, lambda, layers })
}
