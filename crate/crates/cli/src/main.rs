//! `mvsdf` command-line front end.
//!
//! Exit status: 0 on success, 1 on runtime failure, 2 on usage errors.
//! Failures print one line `error[<category>]: <detail>` to stderr.

mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BoundCheckArgs, DepthArgs, EvalArgs, FuseArgs, MeshArgs, SdfGtArgs, SynthArgs};

/// Worker-count override for the thread pool.
const THREADS_ENV: &str = "MVSDF_THREADS";

#[derive(Parser)]
#[command(name = "mvsdf", version, about = "Region-aware multi-view stereo toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic scene directory with ground-truth depths.
    Synth(SynthArgs),
    /// Cascade depth and confidence maps (PFM) per reference view.
    Depth(DepthArgs),
    /// Signed-distance ground truth volumes from ground-truth depths.
    SdfGt(SdfGtArgs),
    /// Filter depth maps across views and fuse them into a PLY point cloud.
    Fuse(FuseArgs),
    /// Extract a PLY mesh from one view's distance volume.
    Mesh(MeshArgs),
    /// Accuracy / completeness / F-score of a point cloud.
    Eval(EvalArgs),
    /// Nearest-vertex error bounds on triangulated depth maps or random triangles.
    BoundCheck(BoundCheckArgs),
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error[usage]: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = match v.trim().parse() {
            Ok(n) if n > 0 => n,
            _ => return usage_error(&format!("{THREADS_ENV} must be a positive integer, got '{v}'")),
        };
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[threads]: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Depth(a) => commands::depth(a),
        Command::SdfGt(a) => commands::sdf_gt(a),
        Command::Fuse(a) => commands::fuse(a),
        Command::Mesh(a) => commands::mesh(a),
        Command::Eval(a) => commands::eval(a),
        Command::BoundCheck(a) => commands::bound_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(1)
        }
    }
}
