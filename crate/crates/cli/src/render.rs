use std::path::Path;

use clipmotion::config::RunConfig;
use clipmotion::renderer::{export_frames, ExportOptions};

use crate::animate::{build_scene, write_frame_svgs};
use crate::artifacts::{prepare_out_dir, TrajectoryDump, FRAMES_DIR, RUN_CONFIG, TRAJECTORIES};
use crate::error::{CliError, Result};

/// Re-renders a finished run's trajectories, optionally at another size.
pub fn run(run_dir: &Path, out: &Path, width: Option<usize>, height: Option<usize>, force: bool) -> Result<()> {
    let mut cfg = RunConfig::load(&run_dir.join(RUN_CONFIG))?;
    let dump = TrajectoryDump::load(&run_dir.join(TRAJECTORIES))?;
    if (dump.frames, dump.looping) != (cfg.optimize.frames, cfg.optimize.looping) {
        return Err(CliError::config("trajectory dump and run config disagree on the frame schedule"));
    }
    if let Some(w) = width {
        cfg.optimize.width = w;
    }
    if let Some(h) = height {
        cfg.optimize.height = h;
    }
    cfg.validate()?;
    let scene = build_scene(&run_dir.join("rig"), &cfg)?;
    let pass = scene.forward(&dump.sets())?;
    prepare_out_dir(out, force)?;
    std::fs::write(out.join(RUN_CONFIG), cfg.to_toml()).map_err(|e| CliError::io(out, e))?;
    let opts = ExportOptions { frame_delay_ms: cfg.export.frame_delay_ms, write_pngs: true };
    let files = export_frames(&pass.frames(), &out.join(FRAMES_DIR), &opts)?;
    write_frame_svgs(&scene, &pass, out, cfg.export.svg_frames)?;
    println!(
        "{} frames at {}x{} written to {}",
        files.pngs.len(),
        cfg.optimize.width,
        cfg.optimize.height,
        out.display()
    );
    Ok(())
}
