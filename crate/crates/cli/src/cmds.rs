//! Subcommand implementations. Every run resolves its configuration, seeds
//! its module streams from the one root seed, writes outputs plus exactly one
//! manifest into the output directory, and removes partial outputs on failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use kinenv_core::command_sampler::{next_command, CommandSample, EpisodeSchedule};
use kinenv_core::curriculum::{
    curriculum_update, generate_initial_configuration, CurriculumState, InitialConfiguration,
};
use kinenv_core::dls_tracker::{evaluate_batch, TrackerConfig};
use kinenv_core::pose_repr::audit::continuity_audit;
use kinenv_core::reward_engine::replay::{replay_trajectory, TrajectoryFile};
use kinenv_core::reward_engine::RewardWeights;
use kinenv_core::rng::seed_stream;
use kinenv_core::robot_model::RobotModel;
use kinenv_core::se3::SE3Pose;
use kinenv_core::terrain::{build_coarse_map, generate_terrain, TerrainField, TerrainKind};
use kinenv_core::workspace::{presample_workspace, WorkspaceDataset};
use kinenv_core::Error as CoreError;

use crate::manifest::RunManifest;
use crate::output::OutputStage;
use crate::plot;

const CSV_SCHEMA_PREFIX: &str = "# kinenv-csv schema_version=1 kind=";

fn load_robot(path: Option<&PathBuf>, manifest: &mut RunManifest) -> Result<RobotModel> {
    match path {
        Some(p) => {
            manifest.record_input(p)?;
            Ok(RobotModel::load(p)?)
        }
        None => Ok(RobotModel::bundled()),
    }
}

fn load_terrain(path: &Path, manifest: &mut RunManifest) -> Result<TerrainField> {
    manifest.record_input(path)?;
    Ok(TerrainField::load(path)?)
}

/// `x,y,z` or `x,y,z,qw,qx,qy,qz`.
pub fn parse_base_pose(text: &str) -> Result<SE3Pose> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CoreError::InvalidArgument(format!("base pose `{text}`: {e}")))?;
    match parts.len() {
        3 => Ok(SE3Pose::from_translation(parts[0], parts[1], parts[2])),
        7 => Ok(SE3Pose::from_parts(
            [parts[0], parts[1], parts[2]],
            [parts[3], parts[4], parts[5], parts[6]],
        )),
        n => Err(CoreError::InvalidArgument(format!(
            "base pose needs 3 or 7 comma-separated values, got {n}"
        ))
        .into()),
    }
}

/// Deterministic stance for (robot, terrain, seed); shared by sample-commands
/// and eval-tracking so the same seed pairs their frames. Prefers placements
/// at least 1.5 m from the border so expanded commands stay on the map.
fn stance_from_seed(
    model: &RobotModel,
    terrain: &TerrainField,
    seed: u64,
) -> Result<InitialConfiguration> {
    let mut rng = seed_stream(seed, "stance");
    let margin = 1.5;
    let mut last = None;
    for _ in 0..100 {
        let stance = generate_initial_configuration(model, terrain, &mut rng, 500)?;
        let p = stance.base_pose.position();
        let border = (p.x - terrain.origin[0])
            .min(terrain.x_max() - p.x)
            .min(p.y - terrain.origin[1])
            .min(terrain.y_max() - p.y);
        if border >= margin {
            return Ok(stance);
        }
        last = Some(stance);
    }
    Ok(last.expect("at least one stance was generated"))
}

// ---------------------------------------------------------------------------
// gen-terrain
// ---------------------------------------------------------------------------

pub fn gen_terrain(
    kind: TerrainKind,
    difficulty: f64,
    seed: u64,
    extent: f64,
    out: &Path,
) -> Result<()> {
    let mut stage = OutputStage::create(out)?;
    let run = (|| -> Result<()> {
        let manifest = RunManifest::new(
            "gen-terrain",
            serde_json::json!({
                "kind": kind, "difficulty": difficulty, "extent": extent,
            }),
            seed,
        );
        let field = generate_terrain(kind, difficulty, seed, extent, None)?;
        let coarse = build_coarse_map(&field);
        stage.write_json("terrain.json", &field)?;
        stage.write_json("coarse_map.json", &coarse)?;
        stage.write_string(
            "heights_histogram.svg",
            &plot::histogram(
                &format!("terrain heights ({kind:?}, difficulty {difficulty})"),
                "height [m]",
                &field.heights,
                40,
            ),
        )?;
        manifest.write(stage.dir())?;
        println!(
            "gen-terrain: {:?} {}x{} samples -> {}",
            kind,
            field.dims[0],
            field.dims[1],
            stage.dir().display()
        );
        Ok(())
    })();
    finish(stage, run)
}

// ---------------------------------------------------------------------------
// sample-workspace
// ---------------------------------------------------------------------------

pub fn sample_workspace(
    robot: Option<PathBuf>,
    steps: usize,
    count: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let mut stage = OutputStage::create(out)?;
    let run = (|| -> Result<()> {
        let mut manifest = RunManifest::new(
            "sample-workspace",
            serde_json::json!({
                "robot": robot.as_ref().map(|p| p.display().to_string()),
                "steps": steps, "count": count,
            }),
            seed,
        );
        let model = load_robot(robot.as_ref(), &mut manifest)?;
        let dataset = presample_workspace(&model, steps, count, seed)?;
        stage.write_json("workspace.json", &dataset)?;
        let radii: Vec<f64> = dataset
            .poses
            .iter()
            .map(|p| p.position().xy().norm())
            .collect();
        stage.write_string(
            "radius_histogram.svg",
            &plot::histogram("end-effector xy radius", "radius [m]", &radii, 40),
        )?;
        manifest.write(stage.dir())?;
        let fr = dataset.bin_fractions().map(|f| format!("{:.1}%", 100.0 * f));
        println!(
            "sample-workspace: {} poses, r_max {:.3} m -> {}",
            dataset.poses.len(),
            dataset.r_max,
            stage.dir().display()
        );
        println!("  bin fractions (inner to outer): {fr:?}");
        println!("  reference distribution:         51% 21% 13% 6% 2%");
        Ok(())
    })();
    finish(stage, run)
}

// ---------------------------------------------------------------------------
// sample-commands
// ---------------------------------------------------------------------------

/// Envelope written by sample-commands and read back by eval-tracking.
#[derive(Debug, Serialize, Deserialize)]
pub struct CommandsFile {
    pub schema_version: u32,
    pub seed: u64,
    pub base_pose: SE3Pose,
    pub commands: Vec<CommandSample>,
}

#[allow(clippy::too_many_arguments)]
pub fn sample_commands(
    workspace: PathBuf,
    terrain: PathBuf,
    robot: Option<PathBuf>,
    base_pose: Option<String>,
    n: usize,
    seed: u64,
    max_attempts: usize,
    out: &Path,
) -> Result<()> {
    let mut stage = OutputStage::create(out)?;
    let run = (|| -> Result<()> {
        let mut manifest = RunManifest::new(
            "sample-commands",
            serde_json::json!({
                "workspace": workspace.display().to_string(),
                "terrain": terrain.display().to_string(),
                "robot": robot.as_ref().map(|p| p.display().to_string()),
                "base_pose": base_pose,
                "n": n, "max_attempts": max_attempts,
            }),
            seed,
        );
        manifest.record_input(&workspace)?;
        let dataset = WorkspaceDataset::load(&workspace)?;
        let field = load_terrain(&terrain, &mut manifest)?;
        let coarse = build_coarse_map(&field);
        let base = match &base_pose {
            Some(text) => parse_base_pose(text)?,
            None => {
                let model = load_robot(robot.as_ref(), &mut manifest)?;
                stance_from_seed(&model, &field, seed)?.base_pose
            }
        };
        let schedule = EpisodeSchedule::default();
        let mut rng = seed_stream(seed, "commands");
        let mut commands = Vec::with_capacity(n);
        for i in 0..n {
            let mut cmd = next_command(&dataset, &coarse, &base, &mut rng, max_attempts)?;
            cmd.issue_time = (i % schedule.commands_per_episode()) as f64
                * schedule.command_period;
            commands.push(cmd);
        }
        let zs: Vec<f64> = commands.iter().map(|c| c.target.position().z).collect();
        let attempts: usize = commands.iter().map(|c| c.resample_attempts).sum();
        stage.write_json(
            "commands.json",
            &CommandsFile {
                schema_version: 1,
                seed,
                base_pose: base,
                commands,
            },
        )?;
        stage.write_string(
            "command_z_histogram.svg",
            &plot::histogram("accepted command height", "z [m]", &zs, 40),
        )?;
        manifest.write(stage.dir())?;
        println!(
            "sample-commands: {n} commands ({attempts} resamples) -> {}",
            stage.dir().display()
        );
        Ok(())
    })();
    finish(stage, run)
}

// ---------------------------------------------------------------------------
// eval-tracking
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn eval_tracking(
    robot: Option<PathBuf>,
    terrain: PathBuf,
    commands: PathBuf,
    config: Option<PathBuf>,
    seed: u64,
    trajectories: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    let mut stage = OutputStage::create(out)?;
    let run = (|| -> Result<()> {
        let mut manifest = RunManifest::new(
            "eval-tracking",
            serde_json::json!({
                "robot": robot.as_ref().map(|p| p.display().to_string()),
                "terrain": terrain.display().to_string(),
                "commands": commands.display().to_string(),
                "config": config.as_ref().map(|p| p.display().to_string()),
                "trajectories": trajectories.as_ref().map(|p| p.display().to_string()),
            }),
            seed,
        );
        let model = load_robot(robot.as_ref(), &mut manifest)?;
        let field = load_terrain(&terrain, &mut manifest)?;
        manifest.record_input(&commands)?;
        let text = std::fs::read_to_string(&commands)
            .with_context(|| format!("reading {}", commands.display()))?;
        let commands_file: CommandsFile = serde_json::from_str(&text)
            .map_err(|source| CoreError::Parse {
                path: commands.display().to_string(),
                source,
            })?;
        let tracker_config = match &config {
            Some(p) => {
                manifest.record_input(p)?;
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                let cfg: TrackerConfig =
                    serde_json::from_str(&text).map_err(|source| CoreError::Parse {
                        path: p.display().to_string(),
                        source,
                    })?;
                cfg.validate()?;
                cfg
            }
            None => TrackerConfig::default(),
        };
        let stance = stance_from_seed(&model, &field, seed)?;
        let batch = evaluate_batch(&model, &stance, &commands_file.commands, &tracker_config)?;

        let mut csv = String::new();
        let _ = writeln!(csv, "{CSV_SCHEMA_PREFIX}tracking-results");
        let _ = writeln!(
            csv,
            "index,converged,iterations,position_error_m,orientation_error_deg,\
             max_foot_displacement_m,self_colliding,error"
        );
        let mut pos_errors = Vec::new();
        let mut rot_errors = Vec::new();
        for outcome in &batch.outcomes {
            match &outcome.result {
                Ok(r) => {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{},",
                        outcome.index,
                        r.converged,
                        r.iterations,
                        r.final_position_error,
                        r.final_orientation_error_deg,
                        r.max_foot_displacement,
                        r.self_colliding
                    );
                    if r.converged {
                        pos_errors.push(r.final_position_error);
                        rot_errors.push(r.final_orientation_error_deg);
                    }
                }
                Err(e) => {
                    let _ = writeln!(
                        csv,
                        "{},false,,,,,,\"{}\"",
                        outcome.index,
                        e.replace('"', "'")
                    );
                }
            }
        }
        stage.write_string("results.csv", &csv)?;
        stage.write_json(
            "summary.json",
            &serde_json::json!({"schema_version": 1, "summary": batch.summary}),
        )?;
        if !pos_errors.is_empty() {
            stage.write_string(
                "position_error_histogram.svg",
                &plot::histogram("converged position errors", "error [m]", &pos_errors, 40),
            )?;
            stage.write_string(
                "orientation_error_histogram.svg",
                &plot::histogram(
                    "converged orientation errors",
                    "error [deg]",
                    &rot_errors,
                    40,
                ),
            )?;
        }
        if let Some(traj_dir) = &trajectories {
            // Relative paths land inside the output directory; absolute paths
            // are honored as given (PathBuf::join keeps absolutes intact).
            for outcome in &batch.outcomes {
                if let Ok(r) = &outcome.result {
                    let name = traj_dir.join(format!("cmd_{:05}.json", outcome.index));
                    stage.write_json(&name.to_string_lossy(), r)?;
                }
            }
        }
        manifest.write(stage.dir())?;
        println!(
            "eval-tracking: {}/{} converged (rate {:.3}) -> {}",
            batch.summary.converged,
            batch.summary.commands,
            batch.summary.convergence_rate,
            stage.dir().display()
        );
        Ok(())
    })();
    finish(stage, run)
}

// ---------------------------------------------------------------------------
// curriculum-sim
// ---------------------------------------------------------------------------

pub fn curriculum_sim(
    error_trace: PathBuf,
    episodes: Option<usize>,
    max_level: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let mut stage = OutputStage::create(out)?;
    let run = (|| -> Result<()> {
        let mut manifest = RunManifest::new(
            "curriculum-sim",
            serde_json::json!({
                "error_trace": error_trace.display().to_string(),
                "episodes": episodes, "max_level": max_level,
            }),
            seed,
        );
        manifest.record_input(&error_trace)?;
        let trace = read_error_trace(&error_trace)?;
        let n = episodes.unwrap_or(trace.len()).min(trace.len());
        let mut rng = seed_stream(seed, "curriculum");
        let mut state = CurriculumState::new(max_level);
        let mut csv = String::new();
        let _ = writeln!(csv, "{CSV_SCHEMA_PREFIX}curriculum-levels");
        let _ = writeln!(csv, "episode,position_error_m,orientation_error_deg,level");
        let mut points = Vec::with_capacity(n);
        for (i, (pos, rot)) in trace.iter().take(n).enumerate() {
            state = curriculum_update(&state, *pos, *rot, &mut rng);
            let _ = writeln!(csv, "{},{},{},{}", i, pos, rot, state.level);
            points.push((i as f64, state.level as f64));
        }
        stage.write_string("levels.csv", &csv)?;
        stage.write_string(
            "level_trajectory.svg",
            &plot::line_chart(
                "curriculum level trajectory",
                "episode",
                "level",
                &[("level", &points)],
            ),
        )?;
        manifest.write(stage.dir())?;
        println!(
            "curriculum-sim: {n} episodes, final level {} -> {}",
            state.level,
            stage.dir().display()
        );
        Ok(())
    })();
    finish(stage, run)
}

/// Rows of `position_error,orientation_error`; `#` comments and an optional
/// header row are accepted.
fn read_error_trace(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(CoreError::validation(
                format!("{}:{}", path.display(), i + 1),
                "expected two columns: position error, orientation error",
            )
            .into());
        }
        let parse = |field: &str| field.trim().parse::<f64>();
        match (parse(&record[0]), parse(&record[1])) {
            (Ok(p), Ok(r)) => {
                if p < 0.0 || r < 0.0 {
                    return Err(CoreError::validation(
                        format!("{}:{}", path.display(), i + 1),
                        "errors must be non-negative",
                    )
                    .into());
                }
                out.push((p, r));
            }
            _ if i == 0 => continue, // header row
            _ => {
                return Err(CoreError::validation(
                    format!("{}:{}", path.display(), i + 1),
                    "could not parse error values",
                )
                .into())
            }
        }
    }
    if out.is_empty() {
        return Err(CoreError::validation(
            path.display().to_string(),
            "error trace holds no episodes",
        )
        .into());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// repr-audit
// ---------------------------------------------------------------------------

pub fn repr_audit(paths: usize, steps: usize, seed: u64, out: &Path) -> Result<()> {
    let mut stage = OutputStage::create(out)?;
    let run = (|| -> Result<()> {
        if paths == 0 || steps < 2 {
            return Err(CoreError::InvalidArgument(
                "repr-audit needs paths >= 1 and steps >= 2".into(),
            )
            .into());
        }
        let manifest = RunManifest::new(
            "repr-audit",
            serde_json::json!({"paths": paths, "steps": steps}),
            seed,
        );
        let audit = continuity_audit(paths, steps, seed);
        let mut csv = String::new();
        let _ = writeln!(csv, "{CSV_SCHEMA_PREFIX}repr-audit");
        let _ = writeln!(
            csv,
            "path,total_angle_rad,step_angle_rad,max_step_keypoint,max_step_quaternion,\
             max_step_quaternion_raw,max_step_euler,max_step_six_d,lipschitz_keypoint,\
             lipschitz_six_d,min_pitch_margin_rad,crosses_gimbal_band,crosses_hemisphere"
        );
        for p in &audit.paths {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                p.path_index,
                p.total_angle,
                p.step_angle,
                p.max_step_keypoint,
                p.max_step_quaternion,
                p.max_step_quaternion_raw,
                p.max_step_euler,
                p.max_step_six_d,
                p.lipschitz_keypoint,
                p.lipschitz_six_d,
                p.min_pitch_margin,
                p.crosses_gimbal_band,
                p.crosses_hemisphere
            );
        }
        stage.write_string("audit.csv", &csv)?;

        let max_of = |f: &dyn Fn(&kinenv_core::pose_repr::audit::PathAudit) -> f64| {
            audit.paths.iter().map(|p| f(p)).fold(0.0, f64::max)
        };
        let euler_jumps = audit.paths_with_euler_jump();
        let summary = serde_json::json!({
            "schema_version": 1,
            "paths": paths,
            "steps_per_path": steps,
            "fitted_lipschitz": audit.fitted_lipschitz(),
            "max_step": {
                "keypoint": max_of(&|p| p.max_step_keypoint),
                "quaternion": max_of(&|p| p.max_step_quaternion),
                "quaternion_raw_extraction": max_of(&|p| p.max_step_quaternion_raw),
                "euler": max_of(&|p| p.max_step_euler),
                "six_d": max_of(&|p| p.max_step_six_d),
            },
            "paths_with_euler_jump_over_pi_2": euler_jumps,
            "gimbal_band_crossing_paths": audit.gimbal_crossing_paths(),
            "hemisphere_crossing_paths":
                audit.paths.iter().filter(|p| p.crosses_hemisphere).count(),
        });
        stage.write_json("summary.json", &summary)?;

        // Exceedance curves: sorted per-path max step, one series per encoding.
        let curve = |f: &dyn Fn(&kinenv_core::pose_repr::audit::PathAudit) -> f64| {
            let mut v: Vec<f64> = audit.paths.iter().map(|p| f(p)).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.iter()
                .enumerate()
                .map(|(i, y)| (i as f64 / v.len().max(1) as f64, *y))
                .collect::<Vec<(f64, f64)>>()
        };
        let kp = curve(&|p| p.max_step_keypoint);
        let qt = curve(&|p| p.max_step_quaternion);
        let eu = curve(&|p| p.max_step_euler);
        let sd = curve(&|p| p.max_step_six_d);
        stage.write_string(
            "max_step_curves.svg",
            &plot::line_chart(
                "per-path max payload step (sorted)",
                "path quantile",
                "max step",
                &[
                    ("keypoint", &kp),
                    ("euler", &eu),
                    ("quaternion", &qt),
                    ("six_d", &sd),
                ],
            ),
        )?;
        manifest.write(stage.dir())?;
        println!(
            "repr-audit: {paths} paths, fitted Lipschitz {:.3}, {euler_jumps} paths with \
             Euler steps > pi/2 -> {}",
            audit.fitted_lipschitz(),
            stage.dir().display()
        );
        Ok(())
    })();
    finish(stage, run)
}

// ---------------------------------------------------------------------------
// reward-trace
// ---------------------------------------------------------------------------

pub fn reward_trace(
    robot: Option<PathBuf>,
    trajectory: PathBuf,
    rewards: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    let mut stage = OutputStage::create(out)?;
    let run = (|| -> Result<()> {
        let mut manifest = RunManifest::new(
            "reward-trace",
            serde_json::json!({
                "robot": robot.as_ref().map(|p| p.display().to_string()),
                "trajectory": trajectory.display().to_string(),
                "rewards": rewards.as_ref().map(|p| p.display().to_string()),
            }),
            0,
        );
        let model = load_robot(robot.as_ref(), &mut manifest)?;
        manifest.record_input(&trajectory)?;
        let traj = TrajectoryFile::load(&trajectory)?;
        let weights = match &rewards {
            Some(p) => {
                manifest.record_input(p)?;
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                RewardWeights::from_json_str(&text, &p.display().to_string())?
            }
            None => RewardWeights::default(),
        };
        let rows = replay_trajectory(&model, &traj, &weights)?;

        let mut csv = String::new();
        let _ = writeln!(csv, "{CSV_SCHEMA_PREFIX}reward-trace");
        let _ = writeln!(
            csv,
            "t,tracking,progress,feet_contact,initial_joint,weighted_tracking,\
             weighted_progress,weighted_feet_contact,weighted_initial_joint,penalty_torque,\
             penalty_acceleration,penalty_action_rate,penalty_joint_limit,task_total,\
             penalty_total,total"
        );
        for (t, b) in &rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                t,
                b.tracking,
                b.progress,
                b.feet_contact,
                b.initial_joint,
                b.weighted_tracking,
                b.weighted_progress,
                b.weighted_feet_contact,
                b.weighted_initial_joint,
                b.penalty_torque,
                b.penalty_acceleration,
                b.penalty_action_rate,
                b.penalty_joint_limit,
                b.task_total,
                b.penalty_total,
                b.total
            );
        }
        stage.write_string("rewards.csv", &csv)?;

        let series = |f: &dyn Fn(&kinenv_core::reward_engine::RewardBreakdown) -> f64| {
            rows.iter().map(|(t, b)| (*t, f(b))).collect::<Vec<_>>()
        };
        let tracking = series(&|b| b.tracking);
        let progress = series(&|b| b.progress);
        let feet = series(&|b| b.feet_contact);
        let init = series(&|b| b.initial_joint);
        let total = series(&|b| b.total);
        stage.write_string(
            "reward_terms.svg",
            &plot::line_chart(
                "reward terms over the episode",
                "t [s]",
                "reward",
                &[
                    ("tracking", &tracking),
                    ("progress", &progress),
                    ("feet_contact", &feet),
                    ("initial_joint", &init),
                    ("total", &total),
                ],
            ),
        )?;
        manifest.write(stage.dir())?;
        println!(
            "reward-trace: {} steps -> {}",
            rows.len(),
            stage.dir().display()
        );
        Ok(())
    })();
    finish(stage, run)
}

fn finish(stage: OutputStage, run: Result<()>) -> Result<()> {
    match run {
        Ok(()) => Ok(()),
        Err(e) => {
            stage.discard();
            Err(e)
        }
    }
}
