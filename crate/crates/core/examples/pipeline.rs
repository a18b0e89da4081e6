//! End-to-end library walkthrough: build the workspace, generate a stair
//! terrain and a stance, draw feasible commands, and track them with the
//! whole-body oracle.

use kinenv_core::command_sampler::{command_stream, EpisodeSchedule};
use kinenv_core::curriculum::generate_initial_configuration;
use kinenv_core::dls_tracker::{evaluate_batch, TrackerConfig};
use kinenv_core::rng::seed_stream;
use kinenv_core::robot_model::RobotModel;
use kinenv_core::terrain::{build_coarse_map, generate_terrain, TerrainKind};
use kinenv_core::workspace::presample_workspace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = RobotModel::bundled();
    println!("robot: {} ({} links)", model.name(), model.links().len());

    let dataset = presample_workspace(&model, 5, 3000, 1)?;
    let fractions = dataset.bin_fractions().map(|f| format!("{:.1}%", 100.0 * f));
    println!(
        "workspace: {} poses, r_max {:.3} m, bins {:?}",
        dataset.poses.len(),
        dataset.r_max,
        fractions
    );

    let field = generate_terrain(TerrainKind::Stairs, 0.8, 11, 8.0, None)?;
    let coarse = build_coarse_map(&field);
    let mut rng = seed_stream(11, "stance");
    let stance = generate_initial_configuration(&model, &field, &mut rng, 200)?;
    println!(
        "stance at ({:.2}, {:.2}, {:.2}), tilt {:.1} deg",
        stance.base_pose.position().x,
        stance.base_pose.position().y,
        stance.base_pose.position().z,
        stance.tilt_angle_deg
    );

    let schedule = EpisodeSchedule::default();
    let mut rng = seed_stream(11, "commands");
    let commands = command_stream(&schedule, &dataset, &coarse, &stance.base_pose, &mut rng, 100)?;
    for c in &commands {
        println!(
            "command @ t={:.0}s: z={:.2} m after {} resamples",
            c.issue_time,
            c.target.position().z,
            c.resample_attempts
        );
    }

    let batch = evaluate_batch(&model, &stance, &commands, &TrackerConfig::default())?;
    println!(
        "tracking: {}/{} converged, mean position error {:.2e} m",
        batch.summary.converged, batch.summary.commands, batch.summary.mean_position_error
    );
    Ok(())
}
