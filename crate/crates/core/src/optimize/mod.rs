//! Adam over free Bézier control points.
//!
//! Each step renders the animation once, asks the provider for one pixel
//! gradient, adds the λ-weighted fidelity gradient, clips to a global norm
//! and updates `c₁..c_k` of every trajectory. `c₀` is never written.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};

use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::guidance::{total_gradient, GuidanceError, GuidanceProvider, GuidanceRequest};
use crate::pipeline::{DeformModel, PipelineError, Scene};
use crate::renderer::{FrameBuffer, RenderSettings};
use crate::trajectory::{init_trajectories, FrameSchedule, TrajectoryError, TrajectorySet};

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("guidance failed at step {step}: {source}")]
    Guidance {
        step: u64,
        #[source]
        source: GuidanceError,
    },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
}

/// Optimisation hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub steps: u64,
    pub learning_rate: f64,
    /// Weight of the skeleton fidelity loss.
    pub lambda: f64,
    /// Output frames `N`.
    pub frames: usize,
    pub looping: bool,
    pub bezier_order: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient norm cap applied before Adam.
    pub clip_norm: f64,
    /// Initial control-point noise as a fraction of the canvas diagonal.
    pub init_sigma_fraction: f64,
    /// Guidance render resolution; a provider that declares one wins.
    pub width: usize,
    pub height: usize,
    pub prompt: String,
    pub deform: DeformModel,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            learning_rate: 0.5,
            lambda: 25.0,
            frames: 24,
            looping: false,
            bezier_order: 3,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 10.0,
            init_sigma_fraction: 0.01,
            width: 256,
            height: 256,
            prompt: String::new(),
            deform: DeformModel::Arap,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: String| Err(OptimizeError::Config(m));
        if self.steps == 0 {
            return bad("steps must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.bezier_order == 0 {
            return bad("bezier_order must be >= 1".into());
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) || !(self.clip_norm > 0.0) || !(self.init_sigma_fraction >= 0.0) {
            return bad("epsilon and clip_norm must be > 0, init_sigma_fraction >= 0".into());
        }
        if self.width == 0 || self.height == 0 {
            return bad("resolution must be nonzero".into());
        }
        self.schedule()?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<FrameSchedule, OptimizeError> {
        FrameSchedule::new(self.frames, self.looping).map_err(|e| OptimizeError::Config(e.to_string()))
    }

    pub fn render_settings(&self) -> RenderSettings {
        RenderSettings::new(self.width, self.height)
    }
}

/// One line of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    /// Guidance loss plus λ times fidelity loss, before the update.
    pub loss: f64,
    pub guidance_loss: f64,
    pub fidelity_loss: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
    /// Non-finite gradient; parameters left untouched.
    pub skipped: bool,
    pub elapsed_ms: f64,
}

/// Everything needed to continue a run bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub step: u64,
    pub sets: Vec<TrajectorySet>,
    /// Adam first and second moments, per layer, aligned with
    /// `TrajectorySet::free_parameters`.
    pub adam_m: Vec<Vec<f64>>,
    pub adam_v: Vec<Vec<f64>>,
    pub rng: ChaCha8Rng,
    pub history: Vec<StepRecord>,
}

impl RunState {
    /// Fresh state: `c₀` at each keypoint, later control points a Gaussian
    /// random walk drawn from the run's generator.
    pub fn initial(scene: &Scene, cfg: &OptimConfig) -> Result<Self, OptimizeError> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let doc = scene.document();
        let sigma = cfg.init_sigma_fraction * doc.width.hypot(doc.height);
        let sets = (0..scene.layer_count())
            .map(|l| init_trajectories(&scene.skeleton(l).keypoints, cfg.bezier_order, sigma, rng.next_u64()))
            .collect::<Result<Vec<_>, _>>()?;
        let adam_m: Vec<Vec<f64>> = sets.iter().map(|s| vec![0.0; s.free_parameters().len()]).collect();
        let adam_v = adam_m.clone();
        Ok(Self { step: 0, sets, adam_m, adam_v, rng, history: Vec::new() })
    }

    pub fn validate(&self, scene: &Scene) -> Result<(), OptimizeError> {
        let bad = |m: String| Err(OptimizeError::Config(m));
        if self.sets.len() != scene.layer_count() {
            return bad(format!("state has {} layers, scene has {}", self.sets.len(), scene.layer_count()));
        }
        for (l, set) in self.sets.iter().enumerate() {
            set.validate()?;
            let n = set.len() * set.order() * 2;
            if set.len() != scene.skeleton(l).keypoints.len() {
                return bad(format!("layer {l}: {} trajectories for {} keypoints", set.len(), scene.skeleton(l).keypoints.len()));
            }
            if set.anchors() != scene.skeleton(l).keypoints {
                return bad(format!("layer {l}: trajectory anchors differ from the rig keypoints"));
            }
            if self.adam_m.get(l).map(Vec::len) != Some(n) || self.adam_v.get(l).map(Vec::len) != Some(n) {
                return bad(format!("layer {l}: Adam moments do not match {n} free parameters"));
            }
        }
        Ok(())
    }
}

/// Drives one optimisation run over a fixed scene.
pub struct Optimizer<'a> {
    scene: &'a Scene,
    cfg: OptimConfig,
    state: RunState,
}

impl<'a> Optimizer<'a> {
    pub fn new(scene: &'a Scene, cfg: OptimConfig) -> Result<Self, OptimizeError> {
        cfg.validate()?;
        let state = RunState::initial(scene, &cfg)?;
        Self::resume(scene, cfg, state)
    }

    pub fn resume(scene: &'a Scene, cfg: OptimConfig, state: RunState) -> Result<Self, OptimizeError> {
        cfg.validate()?;
        if scene.schedule() != &cfg.schedule()? {
            return Err(OptimizeError::Config("scene frame schedule differs from the configuration".into()));
        }
        state.validate(scene)?;
        if state.sets.iter().any(|s| s.order() != cfg.bezier_order) {
            return Err(OptimizeError::Config("state Bézier order differs from the configuration".into()));
        }
        Ok(Self { scene, cfg, state })
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn into_state(self) -> RunState {
        self.state
    }

    pub fn config(&self) -> &OptimConfig {
        &self.cfg
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.cfg.steps
    }

    /// One forward, guidance call, backward and Adam update. On error the
    /// state is unchanged.
    pub fn step(&mut self, provider: &mut dyn GuidanceProvider) -> Result<StepRecord, OptimizeError> {
        let started = Instant::now();
        let step = self.state.step;
        let pass = self.scene.forward(&self.state.sets)?;
        let mut rng = self.state.rng.clone();
        let request =
            GuidanceRequest { frames: pass.frames(), prompt: self.cfg.prompt.clone(), step_index: step, seed: rng.next_u64() };
        let guidance = provider
            .guidance(&request)
            .and_then(|g| g.validate_against(&request.frames).map(|_| g))
            .map_err(|source| OptimizeError::Guidance { step, source })?;
        let total = total_gradient(self.scene, &pass, &guidance, self.cfg.lambda)?;

        let grad_norm = total.norm();
        let skipped = !grad_norm.is_finite();
        let clipped = !skipped && grad_norm > self.cfg.clip_norm;
        if skipped {
            log::warn!("step {step}: non-finite gradient, update skipped");
        } else {
            if clipped {
                log::info!("step {step}: gradient norm {grad_norm:.4e} clipped to {}", self.cfg.clip_norm);
            }
            let scale = if clipped { self.cfg.clip_norm / grad_norm } else { 1.0 };
            self.adam_update(&total.layers, scale);
        }
        self.state.rng = rng;
        self.state.step += 1;
        let record = StepRecord {
            step,
            loss: total.total_loss(),
            guidance_loss: total.guidance_loss,
            fidelity_loss: total.fidelity_loss,
            grad_norm,
            clipped,
            skipped,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        self.state.history.push(record.clone());
        Ok(record)
    }

    fn adam_update(&mut self, grads: &[Vec<f64>], scale: f64) {
        let c = &self.cfg;
        let t = (self.state.step + 1) as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for (l, g) in grads.iter().enumerate() {
            let set = &mut self.state.sets[l];
            let mut params = set.free_parameters();
            let (m, v) = (&mut self.state.adam_m[l], &mut self.state.adam_v[l]);
            for i in 0..params.len() {
                let gi = g[i] * scale;
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                params[i] -= c.learning_rate * mhat / (vhat.sqrt() + c.epsilon);
            }
            set.set_free_parameters(&params);
        }
    }

    /// Steps until `until` (capped at the configured total). On a guidance
    /// failure the pre-step state is written to `abort_checkpoint`, if
    /// given, before the error is returned.
    pub fn run_until(
        &mut self,
        provider: &mut dyn GuidanceProvider,
        until: u64,
        abort_checkpoint: Option<&Path>,
        mut on_step: impl FnMut(&StepRecord),
    ) -> Result<(), OptimizeError> {
        while self.state.step < until.min(self.cfg.steps) {
            match self.step(provider) {
                Ok(r) => on_step(&r),
                Err(e) => {
                    if let (Some(path), OptimizeError::Guidance { .. }) = (abort_checkpoint, &e) {
                        save_checkpoint(&self.state, path)?;
                        log::error!("aborted; state saved to {}", path.display());
                    }
                    return Err(e);
                }
            }
        }
        Ok(())
    }

    /// Renders the current trajectories.
    pub fn render(&self) -> Result<Vec<FrameBuffer>, OptimizeError> {
        Ok(self.scene.forward(&self.state.sets)?.frames())
    }
}

/// Final trajectories, frames and loss history of a completed run.
#[derive(Clone, Debug)]
pub struct OptimOutcome {
    pub sets: Vec<TrajectorySet>,
    pub frames: Vec<FrameBuffer>,
    pub history: Vec<StepRecord>,
}

/// Runs all configured steps from a fresh state. Layered scenes optimise one
/// trajectory set per layer against a single guidance call per step.
pub fn optimize(
    scene: &Scene,
    provider: &mut dyn GuidanceProvider,
    cfg: &OptimConfig,
) -> Result<OptimOutcome, OptimizeError> {
    if let Some(res) = provider.resolution() {
        let s = scene.settings();
        if (s.width, s.height) != res {
            return Err(OptimizeError::Config(format!(
                "scene renders {}x{} but the provider expects {}x{}",
                s.width, s.height, res.0, res.1
            )));
        }
    }
    let mut opt = Optimizer::new(scene, cfg.clone())?;
    opt.run_until(provider, cfg.steps, None, |_| {})?;
    let frames = opt.render()?;
    let state = opt.into_state();
    Ok(OptimOutcome { sets: state.sets, frames, history: state.history })
}
