//! MessagePack messages exchanged with a remote guidance service.
//!
//! Tensors travel as `{dtype: "float32", shape: [N, H, W, 3], data: bytes}`
//! with `data` the row-major little-endian `f32` values. Requests are maps
//! `{frames, prompt, seed, step}`; responses are `{grad, loss, meta}` with
//! `grad` shaped like `frames`.

use serde::{Deserialize, Serialize};

use super::{GuidanceError, GuidanceRequest, GuidanceResult};
use crate::renderer::FrameBuffer;

pub const DTYPE: &str = "float32";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub dtype: String,
    pub shape: Vec<u64>,
    #[serde(with = "serde_bytes")]
    pub data: Vec<u8>,
}

impl Tensor {
    /// Packs frames as `N × H × W × 3`.
    pub fn from_frames(frames: &[FrameBuffer]) -> Self {
        let (w, h) = frames.first().map_or((0, 0), FrameBuffer::shape);
        let mut data = Vec::with_capacity(frames.len() * w * h * 12);
        for f in frames {
            for px in &f.pixels {
                for &c in px {
                    data.extend_from_slice(&(c as f32).to_le_bytes());
                }
            }
        }
        Self { dtype: DTYPE.into(), shape: vec![frames.len() as u64, h as u64, w as u64, 3], data }
    }

    /// Unpacks an `N × H × W × 3` tensor.
    pub fn to_frames(&self) -> Result<Vec<FrameBuffer>, GuidanceError> {
        if self.dtype != DTYPE {
            return Err(GuidanceError::Protocol(format!("unsupported dtype {:?}", self.dtype)));
        }
        let &[n, h, w, c] = self.shape.as_slice() else {
            return Err(GuidanceError::Protocol(format!("tensor rank {} != 4", self.shape.len())));
        };
        if c != 3 {
            return Err(GuidanceError::Protocol(format!("expected 3 channels, got {c}")));
        }
        let (n, h, w) = (n as usize, h as usize, w as usize);
        let expected = n.checked_mul(h).and_then(|v| v.checked_mul(w)).and_then(|v| v.checked_mul(12));
        if expected != Some(self.data.len()) {
            return Err(GuidanceError::Protocol(format!(
                "{} data bytes for shape {:?}",
                self.data.len(),
                self.shape
            )));
        }
        let values: Vec<f64> = self
            .data
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        Ok(values
            .chunks_exact((w * h * 3).max(1))
            .take(n)
            .map(|frame| FrameBuffer {
                width: w,
                height: h,
                pixels: frame.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect(),
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub frames: Tensor,
    pub prompt: String,
    pub seed: u64,
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub grad: Tensor,
    pub loss: f64,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl WireRequest {
    pub fn from_request(req: &GuidanceRequest) -> Self {
        Self { frames: Tensor::from_frames(&req.frames), prompt: req.prompt.clone(), seed: req.seed, step: req.step_index }
    }
}

pub fn encode_request(req: &GuidanceRequest) -> Result<Vec<u8>, GuidanceError> {
    rmp_serde::to_vec_named(&WireRequest::from_request(req)).map_err(|e| GuidanceError::Protocol(e.to_string()))
}

pub fn decode_request(bytes: &[u8]) -> Result<WireRequest, GuidanceError> {
    rmp_serde::from_slice(bytes).map_err(|e| GuidanceError::Protocol(e.to_string()))
}

pub fn encode_response(resp: &WireResponse) -> Result<Vec<u8>, GuidanceError> {
    rmp_serde::to_vec_named(resp).map_err(|e| GuidanceError::Protocol(e.to_string()))
}

/// Decodes a response and checks it against the frames that were sent.
pub fn decode_response(
    bytes: &[u8],
    sent: &[FrameBuffer],
) -> Result<(GuidanceResult, serde_json::Map<String, serde_json::Value>), GuidanceError> {
    let resp: WireResponse = rmp_serde::from_slice(bytes).map_err(|e| GuidanceError::Protocol(e.to_string()))?;
    let result = GuidanceResult { loss_value: resp.loss, pixel_gradients: resp.grad.to_frames()? };
    result.validate_against(sent)?;
    Ok((result, resp.meta))
}
