//! Clipart animation by Bézier keypoint trajectories.
//!
//! The pipeline rigs a static clipart (contour, straight-skeleton keypoints,
//! triangle mesh, barycentric binding), deforms the mesh per frame with
//! two-step as-rigid-as-possible deformation driven by keypoint trajectories,
//! renders frames, and optimises trajectory control points against a
//! pluggable pixel-space guidance signal plus a bone-length fidelity term.

pub mod arap;
pub mod config;
pub mod document;
pub mod geometry;
pub mod guidance;
pub mod metrics;
pub mod optimize;
pub mod pipeline;
pub mod renderer;
pub mod rigging;
pub mod trajectory;
