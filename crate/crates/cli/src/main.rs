//! Batch front-end for the kinenv environment kit.
//!
//! Every subcommand is seed-deterministic end to end: rerunning with the same
//! flags and inputs reproduces bit-identical numerical outputs (the manifest
//! carries the only timestamp). Exit codes: 0 success, 1 validation error,
//! 2 runtime/numerical failure.

mod cmds;
mod manifest;
mod output;
mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use kinenv_core::terrain::TerrainKind;
use kinenv_core::Error as CoreError;

const OUT_DIR_ENV: &str = "KINENV_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "kinenv",
    version,
    about = "Terrain, workspace, command, reward, curriculum and tracking pipelines \
             for whole-body end-effector pose tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a procedural terrain and its coarse height envelope.
    GenTerrain {
        /// flat | rough | discrete_obstacles | stairs
        #[arg(long)]
        kind: String,
        /// Difficulty in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        difficulty: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Side length of the square terrain, meters.
        #[arg(long, default_value_t = 8.0)]
        extent: f64,
        /// Output directory (default: $KINENV_OUT_DIR/gen-terrain).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pre-sample the fixed-base collision-free end-effector pose dataset.
    SampleWorkspace {
        /// Robot description JSON (default: the bundled model).
        #[arg(long)]
        robot: Option<PathBuf>,
        /// Grid resolution per arm joint.
        #[arg(long, default_value_t = 7)]
        steps: usize,
        /// Number of poses to retain.
        #[arg(long, default_value_t = 10000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw terrain-feasible pose commands around a base placement.
    SampleCommands {
        /// workspace.json from sample-workspace.
        #[arg(long)]
        workspace: PathBuf,
        /// terrain.json from gen-terrain.
        #[arg(long)]
        terrain: PathBuf,
        /// Robot description (used when --base-pose is omitted).
        #[arg(long)]
        robot: Option<PathBuf>,
        /// "x,y,z" or "x,y,z,qw,qx,qy,qz"; default: a seeded stance on the terrain.
        #[arg(long)]
        base_pose: Option<String>,
        /// Number of commands to draw.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Resampling bound per command.
        #[arg(long, default_value_t = 100)]
        max_attempts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Track a command batch with the damped-least-squares oracle.
    EvalTracking {
        #[arg(long)]
        robot: Option<PathBuf>,
        #[arg(long)]
        terrain: PathBuf,
        /// commands.json from sample-commands.
        #[arg(long)]
        commands: PathBuf,
        /// Tracker configuration JSON (partial overrides allowed).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Stance seed; match the sample-commands seed to reuse its stance.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one trajectory JSON per command, optionally into the given
        /// directory (default: `<out>/trajectories`).
        #[arg(long, num_args = 0..=1, default_missing_value = "trajectories")]
        trajectories: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a scripted episode-error trace through the curriculum.
    CurriculumSim {
        /// CSV of `position_error,orientation_error` rows.
        #[arg(long)]
        error_trace: PathBuf,
        /// Number of episodes to replay (default: all rows).
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 10)]
        max_level: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pose-representation continuity audit.
    ReprAudit {
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        /// Samples per path (dt = 1/steps).
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a trajectory file through the reward engine.
    RewardTrace {
        #[arg(long)]
        robot: Option<PathBuf>,
        /// Trajectory JSON (schedule, commands, frames).
        #[arg(long)]
        trajectory: PathBuf,
        /// Reward weight overrides JSON (keys w1..w8, sigma_t, sigma_q, sigma_t_alt).
        #[arg(long)]
        rewards: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve_out(out: Option<PathBuf>, subcommand: &str) -> anyhow::Result<PathBuf> {
    if let Some(p) = out {
        return Ok(p);
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(root) => Ok(PathBuf::from(root).join(subcommand)),
        None => Err(CoreError::InvalidArgument(format!(
            "no output directory: pass --out or set {OUT_DIR_ENV}"
        ))
        .into()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenTerrain {
            kind,
            difficulty,
            seed,
            extent,
            out,
        } => {
            let kind: TerrainKind = kind.parse()?;
            let out = resolve_out(out, "gen-terrain")?;
            cmds::gen_terrain(kind, difficulty, seed, extent, &out)
        }
        Command::SampleWorkspace {
            robot,
            steps,
            count,
            seed,
            out,
        } => {
            let out = resolve_out(out, "sample-workspace")?;
            cmds::sample_workspace(robot, steps, count, seed, &out)
        }
        Command::SampleCommands {
            workspace,
            terrain,
            robot,
            base_pose,
            n,
            seed,
            max_attempts,
            out,
        } => {
            let out = resolve_out(out, "sample-commands")?;
            cmds::sample_commands(
                workspace,
                terrain,
                robot,
                base_pose,
                n,
                seed,
                max_attempts,
                &out,
            )
        }
        Command::EvalTracking {
            robot,
            terrain,
            commands,
            config,
            seed,
            trajectories,
            out,
        } => {
            let out = resolve_out(out, "eval-tracking")?;
            cmds::eval_tracking(robot, terrain, commands, config, seed, trajectories, &out)
        }
        Command::CurriculumSim {
            error_trace,
            episodes,
            max_level,
            seed,
            out,
        } => {
            let out = resolve_out(out, "curriculum-sim")?;
            cmds::curriculum_sim(error_trace, episodes, max_level, seed, &out)
        }
        Command::ReprAudit {
            paths,
            steps,
            seed,
            out,
        } => {
            let out = resolve_out(out, "repr-audit")?;
            cmds::repr_audit(paths, steps, seed, &out)
        }
        Command::RewardTrace {
            robot,
            trajectory,
            rewards,
            out,
        } => {
            let out = resolve_out(out, "reward-trace")?;
            cmds::reward_trace(robot, trajectory, rewards, &out)
        }
    }
}

/// 1 for validation problems (bad flags, malformed inputs), 2 for runtime or
/// numerical failures.
fn classify(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Validation { .. }
                | CoreError::Parse { .. }
                | CoreError::InvalidArgument(_) => 1,
                _ => 2,
            };
        }
    }
    2
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(classify(&e));
    }
}
