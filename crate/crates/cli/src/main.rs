//! `clipmotion`: rig clipart, animate it, re-render runs and score them.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 when the
//! guidance provider fails, 4 for rigging errors, 1 otherwise.

mod animate;
mod artifacts;
mod error;
mod metrics;
mod render;
mod rig;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clipmotion::config::{GroupFile, ProviderKind, RunConfig};
use clipmotion::pipeline::DeformModel;

use crate::error::Result;

#[derive(Parser)]
#[command(name = "clipmotion", version, about = "Animate clipart along optimised keypoint trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build skeleton, mesh and binding for an SVG or PNG clipart.
    Rig(RigArgs),
    /// Optimise trajectories for a rig and write a run directory.
    Animate(AnimateArgs),
    /// Re-render a run directory, optionally at another resolution.
    Render(RenderArgs),
    /// Motion vibrancy, temporal consistency and geometric deviation per run.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct RigArgs {
    input: PathBuf,
    /// Output rig directory [default: <input stem>.rig next to the input].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skeleton simplification ratio.
    #[arg(long)]
    rho: Option<f64>,
    /// Minimum mesh angle in degrees.
    #[arg(long)]
    quality: Option<f64>,
    /// Skeleton TOML used verbatim instead of the straight skeleton.
    #[arg(long)]
    keypoints: Option<PathBuf>,
    /// Layer group file (`[[group]]` tables).
    #[arg(long)]
    layers: Option<PathBuf>,
    #[command(flatten)]
    common: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Mock,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeformArg {
    Arap,
    Lbs,
}

#[derive(Args)]
struct AnimateArgs {
    rig_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    prompt: Option<String>,
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    /// Guidance service URL.
    #[arg(long, env = "CLIPMOTION_ENDPOINT")]
    endpoint: Option<String>,
    /// Trajectory dump rendered as the mock provider's target.
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    /// Skeleton fidelity weight.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    frames: Option<usize>,
    /// Bézier order of the trajectories.
    #[arg(long)]
    order: Option<usize>,
    /// Palindromic looping animation.
    #[arg(long = "loop")]
    looping: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    deform: Option<DeformArg>,
    #[command(flatten)]
    common: ConfigArgs,
}

#[derive(Args)]
struct RenderArgs {
    run_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(required = true)]
    run_dirs: Vec<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn base_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn rig_config(a: &RigArgs) -> Result<RunConfig> {
    let mut cfg = base_config(a.common.config.as_deref())?;
    set(&mut cfg.rig.rho, a.rho);
    set(&mut cfg.rig.quality, a.quality);
    if let Some(path) = &a.layers {
        cfg.groups = GroupFile::load(path)?.groups;
    }
    if a.keypoints.is_some() {
        cfg.keypoints = a.keypoints.clone();
    }
    Ok(cfg)
}

fn animate_config(a: &AnimateArgs) -> Result<RunConfig> {
    let mut cfg = base_config(a.common.config.as_deref())?;
    let o = &mut cfg.optimize;
    set(&mut o.prompt, a.prompt.clone());
    set(&mut o.steps, a.steps);
    set(&mut o.learning_rate, a.lr);
    set(&mut o.lambda, a.lambda);
    set(&mut o.frames, a.frames);
    set(&mut o.bezier_order, a.order);
    set(&mut o.seed, a.seed);
    o.looping |= a.looping;
    set(
        &mut o.deform,
        a.deform.map(|d| match d {
            DeformArg::Arap => DeformModel::Arap,
            DeformArg::Lbs => DeformModel::Lbs,
        }),
    );
    set(
        &mut cfg.provider,
        a.provider.map(|p| match p {
            ProviderArg::Mock => ProviderKind::Mock,
            ProviderArg::Remote => ProviderKind::Remote,
        }),
    );
    set(&mut cfg.remote.endpoint, a.endpoint.clone());
    if a.target.is_some() {
        cfg.mock.target = a.target.clone();
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Rig(a) => {
            let cfg = rig_config(&a)?;
            let out = a.out.clone().unwrap_or_else(|| rig::default_out(&a.input));
            rig::run(&a.input, &out, &cfg, a.common.force)
        }
        Command::Animate(a) => {
            let cfg = animate_config(&a)?;
            animate::run(&a.rig_dir, &a.out, cfg, a.common.force, std::env::args().collect())
        }
        Command::Render(a) => render::run(&a.run_dir, &a.out, a.width, a.height, a.force),
        Command::Metrics(a) => metrics::run(&a.run_dirs, a.csv.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
