use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clipmotion::config::{ProviderKind, RunConfig};
use clipmotion::guidance::{GuidanceProvider, MockTargetGuidance, RemoteGuidance};
use clipmotion::optimize::{save_checkpoint, Optimizer, StepRecord};
use clipmotion::pipeline::Scene;
use clipmotion::renderer::{export_frames, ExportOptions};
use clipmotion::trajectory::TrajectorySet;

use crate::artifacts::{
    copy_rig_dir, create_dir, file_record, inventory, load_rig_dir, prepare_out_dir, write_json, RunManifest,
    RunStatus, Timings, TrajectoryDump, FORMAT, FRAMES_DIR, RUN_CONFIG, RUN_MANIFEST, SVG_DIR, TOOL_VERSION,
    TRAJECTORIES,
};
use crate::error::{CliError, Result};

const RIG_COPY: &str = "rig";
const TARGET_COPY: &str = "target.json";
const CHECKPOINT: &str = "checkpoint.json";
const RUN_LOG: &str = "run.jsonl";

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Builds the scene from a rig directory at the configured resolution.
pub fn build_scene(rig_dir: &Path, cfg: &RunConfig) -> Result<Scene> {
    let rig = load_rig_dir(rig_dir)?;
    let o = &cfg.optimize;
    Ok(Scene::layered(rig.document, rig.groups, o.render_settings(), o.schedule()?, o.deform)?)
}

fn check_target(scene: &Scene, sets: &[TrajectorySet], path: &Path) -> Result<()> {
    if sets.len() != scene.layer_count() {
        return Err(CliError::config(format!(
            "{}: {} layers, the rig has {}",
            path.display(),
            sets.len(),
            scene.layer_count()
        )));
    }
    for (l, set) in sets.iter().enumerate() {
        if set.len() != scene.skeleton(l).keypoints.len() {
            return Err(CliError::config(format!(
                "{}: layer {} has {} trajectories for {} keypoints",
                path.display(),
                scene.layer_name(l),
                set.len(),
                scene.skeleton(l).keypoints.len()
            )));
        }
    }
    Ok(())
}

/// Mock guidance toward the target dump's frames, or toward the rest pose.
fn mock_provider(scene: &Scene, cfg: &RunConfig) -> Result<MockTargetGuidance> {
    let sets = match &cfg.mock.target {
        Some(path) => {
            let sets = TrajectoryDump::load(path)?.sets();
            check_target(scene, &sets, path)?;
            sets
        }
        None => (0..scene.layer_count())
            .map(|l| TrajectorySet::static_at(&scene.skeleton(l).keypoints, cfg.optimize.bezier_order))
            .collect(),
    };
    Ok(MockTargetGuidance::new(scene.forward(&sets)?.frames())?)
}

pub fn run(rig_dir: &Path, out: &Path, mut cfg: RunConfig, force: bool, command: Vec<String>) -> Result<()> {
    let total = Instant::now();
    cfg.validate()?;

    // Remote mode checks the service before anything is written.
    let remote = match cfg.provider {
        ProviderKind::Remote => {
            let client = RemoteGuidance::connect(cfg.remote.clone())?;
            let [w, h] = client.health().resolution;
            if (w, h) != (cfg.optimize.width, cfg.optimize.height) {
                log::info!("rendering at the service resolution {w}x{h}");
                cfg.optimize.width = w;
                cfg.optimize.height = h;
            }
            Some(client)
        }
        ProviderKind::Mock => None,
    };
    let scene = build_scene(rig_dir, &cfg)?;
    let mut provider: Box<dyn GuidanceProvider> = match remote {
        Some(client) => Box::new(client),
        None => Box::new(mock_provider(&scene, &cfg)?),
    };
    let mut optimizer = Optimizer::new(&scene, cfg.optimize.clone())?;

    prepare_out_dir(out, force)?;
    copy_rig_dir(rig_dir, &out.join(RIG_COPY))?;
    let mut snapshot = cfg.clone();
    if let Some(target) = &cfg.mock.target {
        let copy = out.join(TARGET_COPY);
        fs::copy(target, &copy).map_err(|e| CliError::io(&copy, e))?;
        snapshot.mock.target = Some(PathBuf::from(TARGET_COPY));
    }
    // Rigging settings already live in the copied rig.
    snapshot.keypoints = None;
    snapshot.groups.clear();
    let config_path = out.join(RUN_CONFIG);
    fs::write(&config_path, snapshot.to_toml()).map_err(|e| CliError::io(&config_path, e))?;
    let mut inputs = inventory(&out.join(RIG_COPY))?;
    for rec in &mut inputs {
        rec.path = format!("{RIG_COPY}/{}", rec.path);
    }
    if snapshot.mock.target.is_some() {
        inputs.push(file_record(out, &out.join(TARGET_COPY))?);
    }
    let setup_ms = ms(total);

    let log_path = out.join(RUN_LOG);
    let mut log_file = BufWriter::new(File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?);
    let mut log_error = None;
    let steps = cfg.optimize.steps;
    let every = (steps / 10).max(1);
    let started = Instant::now();
    let outcome = optimizer.run_until(provider.as_mut(), steps, Some(&out.join(CHECKPOINT)), |r: &StepRecord| {
        if let Err(e) = serde_json::to_writer(&mut log_file, r).map_err(std::io::Error::from).and_then(|_| writeln!(log_file)) {
            log_error.get_or_insert(e);
        }
        if r.step % every == 0 || r.step + 1 == steps {
            log::info!(
                "step {}/{steps}  loss {:.4e}  |g| {:.3e}{}",
                r.step + 1,
                r.loss,
                r.grad_norm,
                if r.clipped { "  clipped" } else { "" }
            );
        }
    });
    log_file.flush().map_err(|e| CliError::io(&log_path, e))?;
    if let Some(e) = log_error {
        return Err(CliError::io(&log_path, e));
    }
    let optimize_ms = ms(started);
    let state = optimizer.into_state();
    let mut manifest = RunManifest {
        format: FORMAT,
        tool_version: TOOL_VERSION.into(),
        status: RunStatus::Complete,
        error: None,
        command,
        seed: cfg.optimize.seed,
        provider: provider.describe(),
        config: snapshot,
        inputs,
        outputs: Vec::new(),
        steps_completed: state.step,
        initial_loss: state.history.first().map(|r| r.loss),
        final_loss: state.history.last().map(|r| r.loss),
        timings: Timings { setup_ms, optimize_ms, ..Timings::default() },
    };
    if let Err(e) = outcome {
        manifest.status = RunStatus::Aborted;
        manifest.error = Some(e.to_string());
        finish_manifest(out, &mut manifest, total)?;
        return Err(e.into());
    }

    let started = Instant::now();
    save_checkpoint(&state, &out.join(CHECKPOINT))?;
    let pass = scene.forward(&state.sets)?;
    let export = ExportOptions { frame_delay_ms: cfg.export.frame_delay_ms, write_pngs: true };
    export_frames(&pass.frames(), &out.join(FRAMES_DIR), &export)?;
    write_frame_svgs(&scene, &pass, out, cfg.export.svg_frames)?;
    let names = (0..scene.layer_count()).map(|l| scene.layer_name(l).to_string());
    let dump = TrajectoryDump::new(cfg.optimize.frames, cfg.optimize.looping, names, &state.sets);
    write_json(&out.join(TRAJECTORIES), &dump)?;
    manifest.timings.export_ms = ms(started);
    finish_manifest(out, &mut manifest, total)?;
    println!(
        "{} steps, loss {:.4e} -> {:.4e}; run written to {}",
        state.step,
        manifest.initial_loss.unwrap_or(f64::NAN),
        manifest.final_loss.unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

/// Per-frame SVGs; skipped for bitmap input, which has no path geometry.
pub fn write_frame_svgs(scene: &Scene, pass: &clipmotion::pipeline::ForwardPass, out: &Path, enabled: bool) -> Result<()> {
    if !enabled || scene.document().control_point_count() == 0 {
        return Ok(());
    }
    let dir = out.join(SVG_DIR);
    create_dir(&dir)?;
    for (t, doc) in scene.frame_documents(pass)?.iter().enumerate() {
        let path = dir.join(format!("frame_{t:04}.svg"));
        fs::write(&path, clipmotion::document::serialize_svg(doc)).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

fn finish_manifest(out: &Path, manifest: &mut RunManifest, total: Instant) -> Result<()> {
    let skip = |p: &str| p.starts_with(&format!("{RIG_COPY}/")) || p == TARGET_COPY || p == RUN_MANIFEST;
    manifest.outputs = inventory(out)?.into_iter().filter(|r| !skip(&r.path)).collect();
    manifest.timings.total_ms = ms(total);
    write_json(&out.join(RUN_MANIFEST), manifest)
}
