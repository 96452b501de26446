use crate::geometry::Point2D;
use crate::rigging::Skeleton;

/// Bone-length deviation loss and its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityTerms {
    pub loss: f64,
    /// `(len_t − len_rest)²` per frame and bone; row 0 is all zeros.
    pub deviations: Vec<Vec<f64>>,
    /// Gradient per frame and keypoint; row 0 is all zeros.
    pub gradients: Vec<Vec<Point2D>>,
}

/// Mean squared bone-length deviation over frames `1..N` and all bones.
///
/// Rest lengths come from the skeleton, which holds frame 0's pose. A bone
/// collapsed to zero length contributes its loss but no gradient.
pub fn fidelity_loss(frames: &[Vec<Point2D>], skel: &Skeleton) -> FidelityTerms {
    let n = frames.len();
    let m = skel.keypoints.len();
    let bones = skel.bones.len();
    let mut out = FidelityTerms {
        loss: 0.0,
        deviations: vec![vec![0.0; bones]; n],
        gradients: vec![vec![Point2D::ZERO; m]; n],
    };
    if n < 2 || bones == 0 {
        return out;
    }
    let norm = 1.0 / ((n - 1) * bones) as f64;
    for t in 1..n {
        let p = &frames[t];
        assert_eq!(p.len(), m, "frame {t} keypoints do not match the skeleton");
        for (b, (&(i, j), &rest)) in skel.bones.iter().zip(&skel.rest_lengths).enumerate() {
            let d = p[i] - p[j];
            let len = d.norm();
            let dev = len - rest;
            out.deviations[t][b] = dev * dev;
            out.loss += dev * dev;
            if len > 0.0 {
                let g = d * (2.0 * dev * norm / len);
                out.gradients[t][i] += g;
                out.gradients[t][j] -= g;
            }
        }
    }
    out.loss *= norm;
    out
}
