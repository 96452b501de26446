use std::path::Path;

use clipmotion::document::{parse_svg, ClipartDocument};
use clipmotion::metrics::{evaluate, path_adjacency, report_csv, report_text, AnimationRecord, MetricsRow};

use crate::artifacts::{read_text, svg_frames, TrajectoryDump, SVG_DIR, TRAJECTORIES};
use crate::error::{CliError, Failure, Result};

fn run_name(dir: &Path) -> String {
    dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Reads one run directory into a metrics record.
pub fn load_record(dir: &Path) -> Result<AnimationRecord> {
    let traj = dir.join(TRAJECTORIES);
    if !traj.is_file() {
        return Err(CliError::config(format!("no {TRAJECTORIES}")));
    }
    let dump = TrajectoryDump::load(&traj)?;
    if !dir.join(SVG_DIR).is_dir() {
        return Err(CliError::config(format!("no {SVG_DIR}/ frame geometry (bitmap run?)")));
    }
    let docs: Vec<ClipartDocument> =
        svg_frames(dir)?.iter().map(|p| Ok(parse_svg(&read_text(p)?)?)).collect::<Result<_>>()?;
    let first = docs.first().ok_or_else(|| CliError::config(format!("{SVG_DIR}/ is empty")))?;
    if docs.len() != dump.frames {
        return Err(CliError::config(format!("{} SVG frames but the dump has {}", docs.len(), dump.frames)));
    }
    Ok(AnimationRecord {
        name: run_name(dir),
        trajectories: Some(dump.sets()),
        keypoints: Vec::new(),
        adjacency: path_adjacency(first),
        control_points: docs.iter().map(ClipartDocument::control_points).collect(),
    })
}

/// Prints the metrics table; runs with missing artifacts are skipped with a
/// message. Fails only when no run could be evaluated.
pub fn run(dirs: &[impl AsRef<Path>], csv: Option<&Path>) -> Result<()> {
    let mut rows: Vec<MetricsRow> = Vec::new();
    for dir in dirs {
        let dir = dir.as_ref();
        match load_record(dir).and_then(|r| evaluate(&r).map_err(|e| CliError::config(e))) {
            Ok(row) => rows.push(row),
            Err(e) => eprintln!("skipping {}: {e}", dir.display()),
        }
    }
    if rows.is_empty() {
        return Err(CliError::new(Failure::Other, "no run could be evaluated"));
    }
    print!("{}", report_text(&rows));
    if let Some(path) = csv {
        std::fs::write(path, report_csv(&rows)).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}
