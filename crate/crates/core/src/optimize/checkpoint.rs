use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use super::{OptimizeError, RunState};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a> {
    version: u32,
    sha256: String,
    state: &'a RawValue,
}

#[derive(Deserialize)]
struct LoadedEnvelope<'a> {
    version: u32,
    sha256: String,
    #[serde(borrow)]
    state: &'a RawValue,
}

fn err(path: &Path, message: impl ToString) -> OptimizeError {
    OptimizeError::Checkpoint { path: path.display().to_string(), message: message.to_string() }
}

/// Writes `{version, sha256, state}` atomically. Floats round-trip exactly.
pub fn save_checkpoint(state: &RunState, path: &Path) -> Result<(), OptimizeError> {
    let body = serde_json::to_string(state).map_err(|e| err(path, e))?;
    let raw = RawValue::from_string(body).map_err(|e| err(path, e))?;
    let sha256 = hex::encode(Sha256::digest(raw.get().as_bytes()));
    let text = serde_json::to_string(&Envelope { version: CHECKPOINT_VERSION, sha256, state: &raw })
        .map_err(|e| err(path, e))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| err(path, e))
}

/// Reads a checkpoint; any version, digest or parse mismatch is an error
/// and nothing is returned.
pub fn load_checkpoint(path: &Path) -> Result<RunState, OptimizeError> {
    let text = std::fs::read_to_string(path).map_err(|e| err(path, e))?;
    let env: LoadedEnvelope = serde_json::from_str(&text).map_err(|e| err(path, e))?;
    if env.version != CHECKPOINT_VERSION {
        return Err(err(path, format!("version {} but this build reads {CHECKPOINT_VERSION}", env.version)));
    }
    let digest = hex::encode(Sha256::digest(env.state.get().as_bytes()));
    if digest != env.sha256 {
        return Err(err(path, "checksum mismatch"));
    }
    serde_json::from_str(env.state.get()).map_err(|e| err(path, e))
}
