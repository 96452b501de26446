//! On-disk layout of rig directories, run directories and trajectory dumps.
//!
//! A rig directory holds `rig.json`, a byte copy of the input artwork, and
//! one subdirectory per layer group with `skeleton.toml`, `mesh.json` and
//! (for vector input) `binding.json`.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use clipmotion::config::ContourConfig;
use clipmotion::document::{parse_svg, ClipartDocument, RasterImage};
use clipmotion::pipeline::LayerGroup;
use clipmotion::rigging::{Rig, RigOptions, Skeleton, TriangleMesh};
use clipmotion::trajectory::TrajectorySet;

use crate::error::{CliError, Result};

pub const FORMAT: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const RIG_MANIFEST: &str = "rig.json";
pub const RUN_MANIFEST: &str = "manifest.json";
pub const TRAJECTORIES: &str = "trajectories.json";
pub const RUN_CONFIG: &str = "config.toml";
pub const SVG_DIR: &str = "svg";
pub const FRAMES_DIR: &str = "frames";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the directory that owns the record.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeypointSource {
    StraightSkeleton,
    Override,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigGroupRecord {
    pub name: String,
    pub layers: Vec<String>,
    pub keypoint_source: KeypointSource,
    pub keypoints: usize,
    pub bones: usize,
    pub triangles: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigManifest {
    pub format: u32,
    pub tool_version: String,
    pub input: FileRecord,
    pub options: RigOptions,
    pub contour: ContourConfig,
    pub groups: Vec<RigGroupRecord>,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let mut f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), total))
}

pub fn file_record(root: &Path, path: &Path) -> Result<FileRecord> {
    let (sha256, bytes) = sha256_file(path)?;
    let rel = path.strip_prefix(root).unwrap_or(path);
    Ok(FileRecord { path: rel.to_string_lossy().replace('\\', "/"), sha256, bytes })
}

/// Records every regular file under `root`, sorted by path.
pub fn inventory(root: &Path) -> Result<Vec<FileRecord>> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))? {
            let path = entry.map_err(|e| CliError::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    files.iter().map(|p| file_record(root, p)).collect()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("artifacts serialise");
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Makes `dir` ready for new output. A non-empty directory is only
/// replaced with `force`, and only if it carries one of our manifests.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    let occupied = dir.exists() && fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?.next().is_some();
    if occupied {
        if !force {
            return Err(CliError::config(format!(
                "{} already exists and is not empty; pass --force to replace it",
                dir.display()
            )));
        }
        let ours = [RIG_MANIFEST, RUN_MANIFEST, RUN_CONFIG].iter().any(|m| dir.join(m).is_file());
        if !ours {
            return Err(CliError::config(format!(
                "refusing to replace {}: it is not a rig or run directory",
                dir.display()
            )));
        }
        fs::remove_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    create_dir(dir)
}

/// Loads SVG or PNG artwork by extension.
pub fn load_document(path: &Path) -> Result<ClipartDocument> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("svg") => Ok(parse_svg(&read_text(path)?)?),
        Some("png") => Ok(ClipartDocument::from_raster(RasterImage::load_png(path)?)),
        _ => Err(CliError::rig(format!("{}: expected an .svg or .png file", path.display()))),
    }
}

pub fn load_skeleton(path: &Path) -> Result<Skeleton> {
    let text = read_text(path).map_err(|e| CliError::rig(format!("keypoint file {e}")))?;
    Skeleton::from_toml(&text).map_err(|e| CliError::rig(format!("{}: {e}", path.display())))
}

/// A rig directory read back into memory.
pub struct LoadedRig {
    pub document: ClipartDocument,
    pub groups: Vec<LayerGroup>,
}

pub fn load_rig_dir(dir: &Path) -> Result<LoadedRig> {
    let manifest_path = dir.join(RIG_MANIFEST);
    if !manifest_path.is_file() {
        return Err(CliError::rig(format!("{} is not a rig directory (no {RIG_MANIFEST})", dir.display())));
    }
    let manifest: RigManifest = read_json(&manifest_path).map_err(|e| CliError::rig(e))?;
    if manifest.format != FORMAT {
        return Err(CliError::rig(format!("rig format {} is not supported", manifest.format)));
    }
    let input = dir.join(&manifest.input.path);
    let (digest, _) = sha256_file(&input)?;
    if digest != manifest.input.sha256 {
        return Err(CliError::rig(format!("{} does not match the hash in {RIG_MANIFEST}", input.display())));
    }
    let document = load_document(&input)?;
    let groups = manifest
        .groups
        .iter()
        .map(|g| {
            let gdir = dir.join(&g.name);
            let skeleton = load_skeleton(&gdir.join("skeleton.toml"))?;
            let mesh: TriangleMesh = read_json(&gdir.join("mesh.json")).map_err(|e| CliError::rig(e))?;
            Ok(LayerGroup { name: g.name.clone(), layers: g.layers.clone(), rig: Rig { skeleton, mesh } })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedRig { document, groups })
}

/// Copies every file of a rig directory into `dest`.
pub fn copy_rig_dir(src: &Path, dest: &Path) -> Result<()> {
    for rec in inventory(src)? {
        let to = dest.join(&rec.path);
        if let Some(parent) = to.parent() {
            create_dir(parent)?;
        }
        fs::copy(src.join(&rec.path), &to).map_err(|e| CliError::io(&to, e))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerTrajectories {
    pub name: String,
    pub trajectories: TrajectorySet,
}

/// Per-layer trajectories with the schedule they were optimised for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDump {
    pub format: u32,
    pub frames: usize,
    pub looping: bool,
    pub layers: Vec<LayerTrajectories>,
}

impl TrajectoryDump {
    pub fn new(frames: usize, looping: bool, names: impl IntoIterator<Item = String>, sets: &[TrajectorySet]) -> Self {
        let layers = names
            .into_iter()
            .zip(sets)
            .map(|(name, s)| LayerTrajectories { name, trajectories: s.clone() })
            .collect();
        Self { format: FORMAT, frames, looping, layers }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let dump: Self = read_json(path)?;
        if dump.format != FORMAT {
            return Err(CliError::config(format!("{}: trajectory format {} is not supported", path.display(), dump.format)));
        }
        Ok(dump)
    }

    pub fn sets(&self) -> Vec<TrajectorySet> {
        self.layers.iter().map(|l| l.trajectories.clone()).collect()
    }
}

/// Per-frame SVG files of a run, in frame order.
pub fn svg_frames(run: &Path) -> Result<Vec<PathBuf>> {
    let dir = run.join(SVG_DIR);
    let mut out: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| CliError::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "svg"))
        .collect();
    out.sort();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    /// Stopped by a provider failure; `checkpoint.json` holds the state.
    Aborted,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_ms: f64,
    pub optimize_ms: f64,
    pub export_ms: f64,
    pub total_ms: f64,
}

/// Everything needed to replay a run: the resolved configuration, hashes of
/// every input, and the outputs it produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub tool_version: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub command: Vec<String>,
    pub seed: u64,
    pub provider: serde_json::Value,
    pub config: clipmotion::config::RunConfig,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub steps_completed: u64,
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub timings: Timings,
}
