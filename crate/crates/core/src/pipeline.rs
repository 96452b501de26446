//! Trajectories to frames and back.
//!
//! A [`Scene`] fixes everything that does not change during optimisation:
//! the document, one rig per animated layer group, the cached deformers, the
//! render settings and the frame schedule. [`Scene::forward`] samples the
//! trajectories, deforms every layer independently, composites the deformed
//! control points into one document and renders it; [`Scene::backward`] runs
//! the adjoint of the same chain down to keypoint targets.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::arap::{ArapError, Deformation, Deformer, LbsModel};
use crate::document::{ClipartDocument, LayerContent, RasterPatch};
use crate::geometry::Point2D;
use crate::renderer::{
    render_bitmap, render_deformed, BitmapTape, FrameBuffer, PixelGradient, RenderError, RenderSettings, VectorTape,
};
use crate::rigging::{bind_extrapolated, lbs_weights, BarycentricBinding, Rig, RigError, Skeleton};
use crate::trajectory::{bernstein, FrameSchedule, TrajectoryError, TrajectorySet};

static NEXT_SCENE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Deform(#[from] ArapError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Rig(#[from] RigError),
    #[error("forward pass belongs to a different scene")]
    PassMismatch,
    #[error("{0}")]
    Invalid(String),
}

/// Mesh deformation model used for every layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeformModel {
    #[default]
    Arap,
    /// Linear blend skinning, the ablation baseline.
    Lbs,
}

/// A group of document layers animated by one rig.
#[derive(Clone, Debug)]
pub struct LayerGroup {
    pub name: String,
    /// Document layer names; empty means every layer.
    pub layers: Vec<String>,
    pub rig: Rig,
}

#[derive(Clone, Debug)]
struct SceneLayer {
    name: String,
    rig: Rig,
    deformer: Deformer,
    /// Indices into `doc.control_points()` moved by this layer.
    points: Vec<usize>,
    rest_points: Vec<Point2D>,
    binding: BarycentricBinding,
}

#[derive(Clone, Debug)]
enum Content {
    Vector,
    Bitmap(RasterPatch),
}

#[derive(Clone, Debug)]
pub struct Scene {
    id: u64,
    doc: ClipartDocument,
    rest_points: Vec<Point2D>,
    layers: Vec<SceneLayer>,
    content: Content,
    settings: RenderSettings,
    schedule: FrameSchedule,
}

#[derive(Clone, Debug)]
enum Tape {
    Vector(VectorTape),
    Bitmap(BitmapTape),
}

#[derive(Clone, Debug)]
struct UniqueFrame {
    /// Per layer: keypoint targets of this frame.
    keypoints: Vec<Vec<Point2D>>,
    deformations: Vec<Deformation>,
    frame: FrameBuffer,
    tape: Tape,
}

/// Frames and tapes of one forward evaluation.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    scene_id: u64,
    unique: Vec<UniqueFrame>,
    /// Output frame `t` shows unique frame `source[t]`.
    source: Vec<usize>,
    /// Bézier order of each layer's trajectories.
    orders: Vec<usize>,
}

impl ForwardPass {
    /// All `N` output frames in order.
    pub fn frames(&self) -> Vec<FrameBuffer> {
        self.source.iter().map(|&s| self.unique[s].frame.clone()).collect()
    }

    pub fn frame(&self, t: usize) -> &FrameBuffer {
        &self.unique[self.source[t]].frame
    }

    pub fn order(&self, l: usize) -> usize {
        self.orders[l]
    }

    pub fn frame_count(&self) -> usize {
        self.source.len()
    }

    /// Keypoints of layer `l` for all `N` output frames.
    pub fn layer_keypoints(&self, l: usize) -> Vec<Vec<Point2D>> {
        self.source.iter().map(|&s| self.unique[s].keypoints[l].clone()).collect()
    }

    /// Deformed mesh vertices of layer `l` for all `N` output frames.
    pub fn layer_poses(&self, l: usize) -> Vec<Vec<Point2D>> {
        self.source.iter().map(|&s| self.unique[s].deformations[l].pose.vertices.clone()).collect()
    }
}

impl Scene {
    /// One rig animating the whole document.
    pub fn single(
        doc: ClipartDocument,
        rig: Rig,
        settings: RenderSettings,
        schedule: FrameSchedule,
        model: DeformModel,
    ) -> Result<Self, PipelineError> {
        let group = LayerGroup { name: "all".into(), layers: Vec::new(), rig };
        Self::layered(doc, vec![group], settings, schedule, model)
    }

    /// Independent rigs per layer group, composited in z order.
    ///
    /// Every path control point must belong to exactly one group. A bitmap
    /// document supports a single group.
    pub fn layered(
        doc: ClipartDocument,
        groups: Vec<LayerGroup>,
        settings: RenderSettings,
        schedule: FrameSchedule,
        model: DeformModel,
    ) -> Result<Self, PipelineError> {
        settings.validate()?;
        schedule.validate()?;
        if groups.is_empty() {
            return Err(PipelineError::Invalid("no layer groups".into()));
        }
        let rasters: Vec<&RasterPatch> = doc
            .layers
            .iter()
            .filter_map(|l| match &l.content {
                LayerContent::Raster(r) => Some(r),
                LayerContent::Paths(_) => None,
            })
            .collect();
        let content = match rasters.as_slice() {
            [] => Content::Vector,
            [r] if groups.len() == 1 && doc.control_point_count() == 0 => Content::Bitmap((*r).clone()),
            _ => {
                return Err(PipelineError::Invalid(
                    "bitmap documents need exactly one raster layer, no paths and one layer group".into(),
                ))
            }
        };

        // Owner group of each doc layer, then of each control point.
        let paint = doc.layers_in_paint_order();
        let mut owner_of_layer: Vec<Option<usize>> = vec![None; paint.len()];
        for (g, group) in groups.iter().enumerate() {
            for name in &group.layers {
                if !doc.layers.iter().any(|l| &l.name == name) {
                    return Err(PipelineError::Invalid(format!("group {:?}: unknown layer {name:?}", group.name)));
                }
            }
            for (i, layer) in paint.iter().enumerate() {
                if group.layers.is_empty() || group.layers.contains(&layer.name) {
                    if let Some(prev) = owner_of_layer[i] {
                        return Err(PipelineError::Invalid(format!(
                            "layer {:?} is in groups {:?} and {:?}",
                            layer.name, groups[prev].name, group.name
                        )));
                    }
                    owner_of_layer[i] = Some(g);
                }
            }
        }
        let rest_points = doc.control_points();
        let mut points: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
        let mut next = 0;
        for (i, layer) in paint.iter().enumerate() {
            let n: usize = layer.paths().iter().map(|p| p.control_point_count()).sum();
            match owner_of_layer[i] {
                Some(g) => points[g].extend(next..next + n),
                None if n > 0 => return Err(PipelineError::Invalid(format!("layer {:?} is in no group", layer.name))),
                None => {}
            }
            next += n;
        }

        let layers = groups
            .into_iter()
            .zip(points)
            .map(|(group, pts)| {
                group.rig.mesh.validate()?;
                let handles = &group.rig.mesh.keypoint_vertex;
                if handles.len() != group.rig.skeleton.keypoints.len() {
                    return Err(PipelineError::Invalid(format!(
                        "group {:?}: {} keypoints but {} handle vertices",
                        group.name,
                        group.rig.skeleton.keypoints.len(),
                        handles.len()
                    )));
                }
                let deformer = match model {
                    DeformModel::Arap => Deformer::arap(&group.rig.mesh, handles)?,
                    DeformModel::Lbs => {
                        let w = lbs_weights(&group.rig.mesh, &group.rig.skeleton);
                        Deformer::Lbs(LbsModel::new(&group.rig.mesh, handles, &w)?)
                    }
                };
                let layer_rest: Vec<Point2D> = pts.iter().map(|&i| rest_points[i]).collect();
                let binding = bind_extrapolated(&group.rig.mesh, &layer_rest)?;
                Ok(SceneLayer { name: group.name, rig: group.rig, deformer, points: pts, rest_points: layer_rest, binding })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;

        Ok(Self {
            id: NEXT_SCENE_ID.fetch_add(1, Ordering::Relaxed),
            doc,
            rest_points,
            layers,
            content,
            settings,
            schedule,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_name(&self, l: usize) -> &str {
        &self.layers[l].name
    }

    pub fn skeleton(&self, l: usize) -> &Skeleton {
        &self.layers[l].rig.skeleton
    }

    pub fn rig(&self, l: usize) -> &Rig {
        &self.layers[l].rig
    }

    pub fn schedule(&self) -> &FrameSchedule {
        &self.schedule
    }

    pub fn settings(&self) -> &RenderSettings {
        &self.settings
    }

    pub fn document(&self) -> &ClipartDocument {
        &self.doc
    }

    /// Document with every layer deformed to the given mesh poses.
    pub fn deformed_document(&self, poses: &[&[Point2D]]) -> ClipartDocument {
        let mut pts = self.rest_points.clone();
        let mut moved_any = false;
        for (layer, pose) in self.layers.iter().zip(poses) {
            if *pose == layer.rig.mesh.vertices.as_slice() {
                continue;
            }
            moved_any = true;
            let moved = layer.binding.apply(&layer.rig.mesh, &layer.rest_points, pose);
            for (&i, p) in layer.points.iter().zip(moved) {
                pts[i] = p;
            }
        }
        let mut doc = self.doc.clone();
        if moved_any {
            doc.set_control_points(&pts);
        }
        doc
    }

    /// Deformed document of every output frame of `pass`.
    pub fn frame_documents(&self, pass: &ForwardPass) -> Result<Vec<ClipartDocument>, PipelineError> {
        if pass.scene_id != self.id {
            return Err(PipelineError::PassMismatch);
        }
        Ok(pass
            .source
            .iter()
            .map(|&s| {
                let u = &pass.unique[s];
                let poses: Vec<&[Point2D]> = u.deformations.iter().map(|d| d.pose.vertices.as_slice()).collect();
                self.deformed_document(&poses)
            })
            .collect())
    }

    fn check_sets(&self, sets: &[TrajectorySet]) -> Result<(), PipelineError> {
        if sets.len() != self.layers.len() {
            return Err(PipelineError::Invalid(format!("{} trajectory sets for {} layers", sets.len(), self.layers.len())));
        }
        for (set, layer) in sets.iter().zip(&self.layers) {
            set.validate()?;
            if set.len() != layer.rig.skeleton.keypoints.len() {
                return Err(PipelineError::Invalid(format!(
                    "layer {:?}: {} trajectories for {} keypoints",
                    layer.name,
                    set.len(),
                    layer.rig.skeleton.keypoints.len()
                )));
            }
        }
        Ok(())
    }

    /// Samples, deforms and renders every frame. Unique frames run in
    /// parallel; results are independent of thread count.
    pub fn forward(&self, sets: &[TrajectorySet]) -> Result<ForwardPass, PipelineError> {
        self.check_sets(sets)?;
        let params = self.schedule.parameters();
        let unique = params
            .par_iter()
            .map(|&u| self.forward_frame(sets, u))
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let source = (0..self.schedule.frame_count).map(|t| self.schedule.source_frame(t)).collect();
        let orders = sets.iter().map(TrajectorySet::order).collect();
        Ok(ForwardPass { scene_id: self.id, unique, source, orders })
    }

    fn forward_frame(&self, sets: &[TrajectorySet], u: f64) -> Result<UniqueFrame, PipelineError> {
        let mut keypoints = Vec::with_capacity(self.layers.len());
        let mut deformations = Vec::with_capacity(self.layers.len());
        for (set, layer) in sets.iter().zip(&self.layers) {
            let kp = set.trajectories.iter().map(|tr| tr.eval(u)).collect::<Result<Vec<_>, _>>()?;
            deformations.push(layer.deformer.deform(&kp)?);
            keypoints.push(kp);
        }
        let (frame, tape) = match &self.content {
            Content::Vector => {
                let poses: Vec<&[Point2D]> = deformations.iter().map(|d| d.pose.vertices.as_slice()).collect();
                let doc = self.deformed_document(&poses);
                let (frame, tape) = render_deformed(&doc, &self.settings)?;
                (frame, Tape::Vector(tape))
            }
            Content::Bitmap(patch) => {
                let layer = &self.layers[0];
                let (frame, tape) = render_bitmap(
                    patch,
                    &layer.rig.mesh,
                    &deformations[0].pose.vertices,
                    (self.doc.width, self.doc.height),
                    &self.settings,
                )?;
                (frame, Tape::Bitmap(tape))
            }
        };
        Ok(UniqueFrame { keypoints, deformations, frame, tape })
    }

    /// Gradients with respect to keypoint targets, `[layer][unique frame][keypoint]`,
    /// given one pixel gradient per output frame.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        pixel_grads: &[PixelGradient],
    ) -> Result<Vec<Vec<Vec<Point2D>>>, PipelineError> {
        if pass.scene_id != self.id {
            return Err(PipelineError::PassMismatch);
        }
        if pixel_grads.len() != pass.source.len() {
            return Err(PipelineError::Invalid(format!(
                "{} pixel gradients for {} frames",
                pixel_grads.len(),
                pass.source.len()
            )));
        }
        // The render adjoint is linear, so mirrored frames sum first.
        let mut upstream: Vec<Option<PixelGradient>> = vec![None; pass.unique.len()];
        for (t, g) in pixel_grads.iter().enumerate() {
            match &mut upstream[pass.source[t]] {
                slot @ None => *slot = Some(g.clone()),
                Some(acc) => {
                    if acc.shape() != g.shape() {
                        return Err(RenderError::ShapeMismatch { expected: acc.shape(), got: g.shape() }.into());
                    }
                    for (a, b) in acc.pixels.iter_mut().zip(&g.pixels) {
                        for c in 0..3 {
                            a[c] += b[c];
                        }
                    }
                }
            }
        }
        let per_frame = pass
            .unique
            .par_iter()
            .zip(upstream.par_iter())
            .map(|(uf, up)| self.backward_frame(uf, up.as_ref().expect("every unique frame is shown")))
            .collect::<Result<Vec<_>, PipelineError>>()?;
        // Transpose to [layer][frame].
        let mut out: Vec<Vec<Vec<Point2D>>> = vec![Vec::with_capacity(per_frame.len()); self.layers.len()];
        for frame in per_frame {
            for (l, g) in frame.into_iter().enumerate() {
                out[l].push(g);
            }
        }
        Ok(out)
    }

    fn backward_frame(&self, uf: &UniqueFrame, upstream: &PixelGradient) -> Result<Vec<Vec<Point2D>>, PipelineError> {
        let vertex_grads: Vec<Vec<Point2D>> = match &uf.tape {
            Tape::Vector(tape) => {
                let cp = tape.backward(upstream)?;
                self.layers
                    .iter()
                    .map(|layer| {
                        let site: Vec<Point2D> = layer.points.iter().map(|&i| cp[i]).collect();
                        layer.binding.backward(&layer.rig.mesh, &site)
                    })
                    .collect()
            }
            Tape::Bitmap(tape) => vec![tape.backward(upstream)?],
        };
        self.layers
            .iter()
            .zip(&uf.deformations)
            .zip(vertex_grads)
            .map(|((layer, d), vg)| Ok(layer.deformer.backward(d, &vg)?))
            .collect()
    }

    /// Chains keypoint gradients of every unique frame through the Bernstein
    /// weights onto layer `l`'s free parameters.
    pub fn keypoint_to_parameter_grad(&self, l: usize, order: usize, grads: &[Vec<Point2D>]) -> Vec<f64> {
        let m = self.layers[l].rig.skeleton.keypoints.len();
        let params = self.schedule.parameters();
        assert_eq!(grads.len(), params.len(), "one gradient row per unique frame");
        let k = order;
        let mut out = vec![0.0; m * k * 2];
        for (&u, row) in params.iter().zip(grads) {
            let b = bernstein(k, u).expect("schedule parameters lie in [0, 1]");
            for (i, g) in row.iter().enumerate() {
                for j in 1..=k {
                    let o = (i * k + j - 1) * 2;
                    out[o] += b[j] * g.x;
                    out[o + 1] += b[j] * g.y;
                }
            }
        }
        out
    }

}
