//! The run configuration file: every optimisation, rigging and provider
//! setting in one TOML document.
//!
//! ```toml
//! provider = "mock"
//!
//! [rig]
//! rho = 0.7
//!
//! [optimize]
//! steps = 500
//! lambda = 25.0
//!
//! [remote]
//! endpoint = "http://127.0.0.1:8000"
//!
//! [[group]]
//! name = "arms"
//! layers = ["left-arm", "right-arm"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::guidance::RemoteConfig;
use crate::optimize::OptimConfig;
use crate::rigging::RigOptions;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("config: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Pixel MSE against target frames rendered from a reference animation.
    #[default]
    Mock,
    /// The score-distillation gradient service.
    Remote,
}

/// How silhouettes are extracted before rigging.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    /// Curve flattening tolerance in canvas units.
    pub flatten_tolerance: f64,
    /// Bitmap pixels with alpha at or above this are inside.
    pub alpha_threshold: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self { flatten_tolerance: 0.1, alpha_threshold: 0.5 }
    }
}

/// One rigged layer group. Layer names refer to SVG `<g id>` layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub name: String,
    #[serde(default)]
    pub layers: Vec<String>,
    /// Skeleton override for this group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    /// Trajectory dump whose rendering is the target. Without one the
    /// target is the rest pose.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub frame_delay_ms: u32,
    /// Also write every frame as SVG (vector input only).
    pub svg_frames: bool,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self { frame_delay_ms: 1000 / 12, svg_frames: true }
    }
}

/// Plain values precede tables so the struct serialises as valid TOML.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub provider: ProviderKind,
    /// Whole-document skeleton override, used when no groups are given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<PathBuf>,
    pub rig: RigOptions,
    pub contour: ContourConfig,
    pub optimize: OptimConfig,
    pub remote: RemoteConfig,
    pub mock: MockConfig,
    pub export: ExportConfig,
    #[serde(rename = "group", skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupConfig>,
}

/// A standalone layer-group file: `[[group]]` tables only.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupFile {
    #[serde(rename = "group", default)]
    pub groups: Vec<GroupConfig>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })
}

/// Resolves `p` against `base` unless it is absolute.
fn rebase(p: &mut Option<PathBuf>, base: &Path) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a config file; relative paths inside resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::from_toml_str(&read(path)?)?;
        cfg.rebase_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn rebase_paths(&mut self, base: &Path) {
        rebase(&mut self.keypoints, base);
        rebase(&mut self.mock.target, base);
        for g in &mut self.groups {
            rebase(&mut g.keypoints, base);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.optimize.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let r = &self.rig;
        if !(r.rho > 0.0) || !(0.0..=35.0).contains(&r.quality) || r.max_area_fraction < 0.0 {
            return Err(ConfigError::Invalid(format!(
                "rig needs rho > 0, quality in [0, 35] degrees, max_area_fraction >= 0 (got {}, {}, {})",
                r.rho, r.quality, r.max_area_fraction
            )));
        }
        if !(self.contour.flatten_tolerance > 0.0) || !(0.0..=1.0).contains(&self.contour.alpha_threshold) {
            return Err(ConfigError::Invalid("contour needs flatten_tolerance > 0 and alpha_threshold in [0, 1]".into()));
        }
        if self.remote.attempts == 0 || !(self.remote.timeout_secs > 0.0) {
            return Err(ConfigError::Invalid("remote needs attempts >= 1 and timeout_secs > 0".into()));
        }
        let mut names = std::collections::HashSet::new();
        for g in &self.groups {
            let safe = !g.name.is_empty() && g.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            if !safe {
                return Err(ConfigError::Invalid(format!("group name {:?} must be [A-Za-z0-9_-]+", g.name)));
            }
            if !names.insert(&g.name) {
                return Err(ConfigError::Invalid(format!("duplicate group {:?}", g.name)));
            }
        }
        if !self.groups.is_empty() && self.keypoints.is_some() {
            return Err(ConfigError::Invalid("with layer groups, set keypoints per group".into()));
        }
        Ok(())
    }
}

impl GroupFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut f: Self = toml::from_str(&read(path)?).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for g in &mut f.groups {
            rebase(&mut g.keypoints, base);
        }
        Ok(f)
    }
}
