use std::fmt;
use std::path::Path;

use clipmotion::config::ConfigError;
use clipmotion::document::DocumentError;
use clipmotion::guidance::GuidanceError;
use clipmotion::optimize::OptimizeError;
use clipmotion::pipeline::PipelineError;
use clipmotion::renderer::RenderError;
use clipmotion::rigging::RigError;

/// Process exit status of a failed command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Failure {
    Other = 1,
    Config = 2,
    Provider = 3,
    Rig = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Failure,
    pub message: String,
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn new(kind: Failure, message: impl fmt::Display) -> Self {
        Self { kind, message: message.to_string() }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        Self::new(Failure::Config, message)
    }

    pub fn rig(message: impl fmt::Display) -> Self {
        Self::new(Failure::Rig, message)
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::new(Failure::Other, format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::config(e)
    }
}

impl From<RigError> for CliError {
    fn from(e: RigError) -> Self {
        Self::rig(format!("rigging: {e}"))
    }
}

impl From<DocumentError> for CliError {
    fn from(e: DocumentError) -> Self {
        Self::rig(format!("document: {e}"))
    }
}

impl From<GuidanceError> for CliError {
    fn from(e: GuidanceError) -> Self {
        Self::new(Failure::Provider, format!("guidance provider: {e}"))
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Rig(_) | PipelineError::Deform(_) | PipelineError::Invalid(_) => {
                Self::rig(format!("scene: {e}"))
            }
            _ => Self::new(Failure::Other, e),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::Config(_) => Self::config(e),
            OptimizeError::Guidance { .. } => Self::new(Failure::Provider, e),
            OptimizeError::Pipeline(p) => p.into(),
            _ => Self::new(Failure::Other, e),
        }
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        Self::new(Failure::Other, format!("render: {e}"))
    }
}
