//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantity. Criterion 11 (CLI determinism) lives in the CLI
//! crate's integration tests, next to the binary it exercises.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use kinenv_core::command_sampler::{next_command, CommandSample, EpisodeSchedule, TERRAIN_MARGIN};
use kinenv_core::curriculum::{
    curriculum_update, generate_initial_configuration, stance_is_stable, CurriculumState,
    InitialConfiguration, STABILITY_TILT_LIMIT_DEG,
};
use kinenv_core::dls_tracker::{evaluate_batch, TrackerConfig};
use kinenv_core::pose_repr::audit::{audit_path, continuity_audit, near_gimbal_path, random_rotation};
use kinenv_core::pose_repr::{keypoints_of, pose_from_keypoints};
use kinenv_core::reward_engine::{
    progress_reward, total_reward, tracking_reward, RewardWeights, StepState,
};
use kinenv_core::rng::seed_stream;
use kinenv_core::robot_model::{JointVector, RobotModel, NUM_JOINTS};
use kinenv_core::se3::SE3Pose;
use kinenv_core::terrain::{build_coarse_map, generate_terrain, TerrainKind};
use kinenv_core::workspace::{presample_workspace, WorkspaceDataset};
use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;

fn pass(criterion: u32, detail: &str) {
    println!("ACCEPTANCE CRITERION {criterion:02} PASS - {detail}");
}

fn model() -> &'static RobotModel {
    static MODEL: OnceLock<RobotModel> = OnceLock::new();
    MODEL.get_or_init(RobotModel::bundled)
}

/// Canonical build shared by criteria 1, 2 and 9; the build time is recorded
/// for criterion 1's wall-clock bound.
fn canonical() -> &'static (WorkspaceDataset, Duration) {
    static DATASET: OnceLock<(WorkspaceDataset, Duration)> = OnceLock::new();
    DATASET.get_or_init(|| {
        let t0 = Instant::now();
        let ds = presample_workspace(model(), 7, 10_000, 1).expect("canonical presample");
        (ds, t0.elapsed())
    })
}

fn random_pose(rng: &mut impl Rng) -> SE3Pose {
    SE3Pose::new(
        Vector3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ),
        random_rotation(rng),
    )
}

/// Stance whose base sits within `radius` of the terrain center, so command
/// sampling cannot leave the map.
fn central_stance(
    terrain: &kinenv_core::terrain::TerrainField,
    seed: u64,
    radius: f64,
) -> InitialConfiguration {
    let mut rng = seed_stream(seed, "acceptance-stance");
    loop {
        let stance = generate_initial_configuration(model(), terrain, &mut rng, 500)
            .expect("stance generation");
        if stance.base_pose.position().xy().norm() <= radius {
            return stance;
        }
    }
}

#[test]
fn criterion_01_workspace_integrity() {
    let (ds, build_time) = canonical();
    assert_eq!(ds.poses.len(), 10_000, "canonical presample must yield 10000 poses");

    // Independent second collision pass over the stored configurations.
    let mut violations = 0usize;
    let mut pose_mismatches = 0usize;
    for (arm, pose) in ds.arm_configs.iter().zip(&ds.poses) {
        let mut q = model().default_config();
        for (j, v) in arm.iter().enumerate() {
            q[12 + j] = *v;
        }
        if kinenv_core::collision::self_collision(model(), &SE3Pose::identity(), &q).colliding {
            violations += 1;
        }
        let ee = model().ee_pose_in_base(&q);
        if (ee.position() - pose.position()).norm() > 1e-12
            || ee.rotation_angle_to(pose) > 1e-12
        {
            pose_mismatches += 1;
        }
    }
    assert_eq!(violations, 0, "second collision pass found violations");
    assert_eq!(pose_mismatches, 0, "stored poses disagree with their configs");
    assert!(
        *build_time < Duration::from_secs(300),
        "build took {build_time:?}, bound is 5 min"
    );
    let fr = ds.bin_fractions().map(|f| (100.0 * f * 10.0).round() / 10.0);
    println!(
        "  note: bin fractions {:?}% vs reference 51/21/13/6/2% (informational; geometry is approximate)",
        fr
    );
    pass(
        1,
        &format!(
            "10000 poses, 0 second-pass violations, built in {:.2?}",
            build_time
        ),
    );
}

#[test]
fn criterion_02_bin_uniform_sampling() {
    let (ds, _) = canonical();
    let mut rng = seed_stream(12, "acceptance-bins");
    let mut counts = [0usize; 5];
    let draws = 100_000;
    for _ in 0..draws {
        let (idx, _) = ds.sample_binned(&mut rng).expect("all bins populated");
        counts[ds.bin_index[idx]] += 1;
    }
    for (bin, count) in counts.iter().enumerate() {
        assert!(
            (19_550..=20_450).contains(count),
            "bin {bin} drawn {count} times, outside 20000 +- 450"
        );
    }
    pass(2, &format!("bin draw counts {counts:?} within 20000 +- 450"));
}

#[test]
fn criterion_03_terrain_margin_safety_on_stairs() {
    let (ds, _) = canonical();
    let field = generate_terrain(TerrainKind::Stairs, 1.0, 4, 8.0, None).unwrap();
    let map = build_coarse_map(&field);
    let stance = central_stance(&field, 40, 2.0);
    let mut rng = seed_stream(41, "acceptance-margin");
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let cmd = next_command(ds, &map, &stance.base_pose, &mut rng, 200).unwrap();
        // Exhaustive post-check with inline arithmetic.
        let p = cmd.target.position();
        let clearance = p.z - (map.height_at(p.x, p.y).unwrap() + TERRAIN_MARGIN);
        worst = worst.min(clearance);
        assert!(
            clearance >= 0.0,
            "accepted command violates the 8 cm margin by {clearance}"
        );
    }
    pass(3, &format!("10000 accepted stair commands, worst clearance {worst:.4} m"));
}

#[test]
fn criterion_04_coarse_map_dominates_exhaustively() {
    let field = generate_terrain(TerrainKind::Stairs, 1.0, 7, 3.15, None).unwrap();
    assert_eq!(field.dims, [64, 64], "test grid must be 64x64");
    let map = build_coarse_map(&field);
    let half = map.window / 2.0 + 1e-9;
    let mut checked = 0usize;
    for cy in 0..map.dims[1] {
        for cx in 0..map.dims[0] {
            let x = map.origin[0] + cx as f64 * map.cell_size;
            let y = map.origin[1] + cy as f64 * map.cell_size;
            let v = map.heights[cy * map.dims[0] + cx];
            for fy in 0..field.dims[1] {
                for fx in 0..field.dims[0] {
                    let (sx, sy) = field.sample_position(fx, fy);
                    if (sx - x).abs() <= half && (sy - y).abs() <= half {
                        checked += 1;
                        assert!(
                            v >= field.height_at_index(fx, fy),
                            "cell ({cx},{cy}) below sample ({fx},{fy})"
                        );
                    }
                }
            }
        }
    }
    pass(4, &format!("{checked} window samples dominated on a 64x64 grid"));
}

#[test]
fn criterion_05_keypoint_geometry() {
    let mut rng = seed_stream(50, "acceptance-keypoints");
    // Chord-length law for 1000 random (axis, theta) rotations about the center.
    for _ in 0..1000 {
        let pose = random_pose(&mut rng);
        let axis = nalgebra::Unit::new_normalize(Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0f64),
        ));
        let theta: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let rot = UnitQuaternion::from_axis_angle(&axis, theta);
        let rotated = SE3Pose::new(pose.position(), rot * pose.orientation());
        let before = keypoints_of(&pose).points();
        let after = keypoints_of(&rotated).points();
        for k in 0..3 {
            let w = before[k] - pose.position();
            let r_axis = (w - axis.into_inner() * w.dot(&axis)).norm();
            let expected = 2.0 * r_axis * (theta / 2.0).sin().abs();
            let observed = (after[k] - before[k]).norm();
            assert!(
                (observed - expected).abs() < 1e-9,
                "chord law violated: {observed} vs {expected}"
            );
        }
    }
    // Round-trip reconstruction over 10^4 random poses.
    let mut worst_pos: f64 = 0.0;
    let mut worst_rot: f64 = 0.0;
    for _ in 0..10_000 {
        let pose = random_pose(&mut rng);
        let back = pose_from_keypoints(&keypoints_of(&pose)).unwrap();
        worst_pos = worst_pos.max((back.position() - pose.position()).norm());
        worst_rot = worst_rot.max(back.rotation_angle_to(&pose));
    }
    assert!(worst_pos < 1e-9, "worst reconstruction position error {worst_pos}");
    assert!(worst_rot < 1e-9, "worst reconstruction rotation error {worst_rot}");
    pass(
        5,
        &format!("chord law to 1e-9; round-trip worst {worst_pos:.2e} m / {worst_rot:.2e} rad"),
    );
}

#[test]
fn criterion_06_reward_arithmetic() {
    let schedule = EpisodeSchedule::default();
    let weights = RewardWeights::default();
    let kp = keypoints_of(&SE3Pose::identity());
    let mut state = StepState {
        time_in_command: 1.0,
        measured: kp,
        command: kp,
        best_distances: [0.0; 3],
        foot_forces: [50.0; 4],
        q: model().default_config(),
        qd: JointVector::zeros(),
        qdd: JointVector::zeros(),
        torques: JointVector::zeros(),
        action: [0.0; NUM_JOINTS],
        previous_action: [0.0; NUM_JOINTS],
        q_init: model().default_config(),
    };
    // Delayed gate: zero for any t <= T - T_r.
    for t in [0.0, 0.5, 1.0, 1.5, 2.0] {
        state.time_in_command = t;
        assert_eq!(tracking_reward(&state, &weights, &schedule), 0.0);
    }
    state.time_in_command = 3.0;
    assert!((tracking_reward(&state, &weights, &schedule) - 1.5).abs() < 1e-12);
    // Composite worked example.
    let breakdown = total_reward(&state, model(), &weights, &schedule).unwrap();
    let delta = (breakdown.total - 27.24).abs();
    assert!(delta < 1e-12, "composite total off by {delta}");
    // Telescoping identity over 100 random monotone trajectories.
    let mut rng = seed_stream(60, "acceptance-telescope");
    for _ in 0..100 {
        let d0: f64 = rng.gen_range(0.2..1.2);
        let mut cmd = kp;
        cmd.k0[0] += d0;
        cmd.k1[0] += d0;
        cmd.k2[0] += d0;
        let mut s = state.clone();
        s.command = cmd;
        s.best_distances = s.measured.distances_to(&cmd);
        let initial = s.best_distances;
        let mut cumulative = 0.0;
        let mut remaining = d0;
        for _ in 0..rng.gen_range(5..50) {
            remaining *= rng.gen_range(0.3..0.95);
            let mut cmd_step = kp;
            cmd_step.k0[0] += remaining;
            cmd_step.k1[0] += remaining;
            cmd_step.k2[0] += remaining;
            let mut t = state.clone();
            t.command = cmd_step;
            t.best_distances = s.best_distances;
            let (r, best) = progress_reward(&t, &weights);
            cumulative += r;
            s.best_distances = best;
        }
        let expected: f64 =
            (0..3).map(|k| initial[k] - s.best_distances[k]).sum::<f64>() / 3.0;
        assert!(
            (cumulative - expected).abs() < 1e-12,
            "telescoping broke: {cumulative} vs {expected}"
        );
    }
    pass(6, "gate, 1.5 peak, 27.24 composite, telescoping all exact");
}

#[test]
fn criterion_07_curriculum_table() {
    // Scripted 8-episode trace on max_level = 3 exercising promotion,
    // hysteresis, top-level reassignment, and demotion.
    let trace = [
        (0.10, 10.0), // promote 0 -> 1
        (0.19, 19.9), // promote 1 -> 2 (just under both thresholds)
        (0.50, 15.0), // hysteresis band: stay
        (0.10, 5.0),  // promote 2 -> 3 (top)
        (0.10, 5.0),  // promotion at top: random reassignment
        (0.90, 130.0),
        (0.85, 121.0),
        (0.15, 10.0),
    ];
    let run = || {
        let mut rng = seed_stream(71, "acceptance-curriculum");
        let mut state = CurriculumState::new(3);
        let mut levels = Vec::new();
        for (p, r) in trace {
            state = curriculum_update(&state, p, r, &mut rng);
            levels.push(state.level);
        }
        levels
    };
    let levels = run();
    // Frozen expected sequence for seed 71: promote to the top, reassignment
    // lands on 2, two demotions ride down to the floor, then recovery.
    let expected = vec![1, 2, 2, 3, 2, 1, 0, 1];
    assert_eq!(levels, expected, "level sequence diverged");
    assert_eq!(run(), levels, "replay must be deterministic");
    pass(7, &format!("8-episode level sequence {levels:?} reproduced exactly"));
}

#[test]
fn criterion_08_initial_configurations_on_stairs() {
    let field = generate_terrain(TerrainKind::Stairs, 1.0, 4, 8.0, None).unwrap();
    let mut rng = seed_stream(80, "acceptance-stance");
    let mut worst_tilt: f64 = 0.0;
    for i in 0..1000 {
        let stance = generate_initial_configuration(model(), &field, &mut rng, 500)
            .unwrap_or_else(|e| panic!("stance {i} failed: {e}"));
        assert!(stance.tilt_angle_deg < STABILITY_TILT_LIMIT_DEG);
        assert!(
            stance_is_stable(model(), &field, &stance).unwrap(),
            "stance {i} failed the independent re-check"
        );
        worst_tilt = worst_tilt.max(stance.tilt_angle_deg);
    }
    pass(8, &format!("1000 stair stances stable; worst tilt {worst_tilt:.1} deg < 55 deg"));
}

#[test]
fn criterion_09_tracker_oracle_on_workspace_commands() {
    let (ds, _) = canonical();
    let field = generate_terrain(TerrainKind::Flat, 0.0, 1, 8.0, None).unwrap();
    let stance = central_stance(&field, 90, 2.0);
    let commands: Vec<CommandSample> = ds.poses[..1000]
        .iter()
        .enumerate()
        .map(|(i, pose)| CommandSample {
            target: stance.base_pose.compose(pose),
            target_in_base: *pose,
            source_index: i,
            body_offset: SE3Pose::identity(),
            resample_attempts: 0,
            issue_time: 0.0,
        })
        .collect();
    let config = TrackerConfig::default();
    let t0 = Instant::now();
    let batch = evaluate_batch(model(), &stance, &commands, &config).unwrap();
    let elapsed = t0.elapsed();
    assert!(
        elapsed < Duration::from_secs(120),
        "batch took {elapsed:?}, bound is 2 min"
    );
    assert!(
        batch.summary.convergence_rate >= 0.95,
        "convergence rate {:.3} below 0.95",
        batch.summary.convergence_rate
    );
    for outcome in &batch.outcomes {
        if let Ok(r) = &outcome.result {
            if r.converged {
                assert!(r.iterations <= config.max_iterations);
                assert!(
                    *r.keypoint_errors.last().unwrap() <= config.keypoint_tolerance,
                    "converged result above tolerance"
                );
                assert!(
                    r.max_foot_displacement <= 5e-3,
                    "foot slid {} m",
                    r.max_foot_displacement
                );
            }
        }
    }
    pass(
        9,
        &format!(
            "{}/{} converged (rate {:.3}) in {:.2?}, mean iterations {:.1}",
            batch.summary.converged,
            batch.summary.commands,
            batch.summary.convergence_rate,
            elapsed,
            batch.summary.mean_iterations
        ),
    );
}

#[test]
fn criterion_10_representation_continuity_audit() {
    let steps = 1000;
    let audit = continuity_audit(1000, steps, 2);
    // Single fitted Lipschitz constant across keypoint and 6D payloads; the
    // geometric bound is sqrt(2) for 6D and 0.45 for the 0.3 m cube.
    let fitted_c = audit.fitted_lipschitz();
    assert!(fitted_c <= 1.5, "fitted Lipschitz constant {fitted_c}");
    for p in &audit.paths {
        assert!(p.max_step_keypoint <= fitted_c * p.step_angle + 1e-12);
        assert!(p.max_step_six_d <= fitted_c * p.step_angle + 1e-12);
        if p.crosses_gimbal_band {
            assert!(
                p.max_step_euler > std::f64::consts::FRAC_PI_2,
                "path {} crosses the gimbal band without an Euler jump",
                p.path_index
            );
        }
    }
    let random_crossings = audit.gimbal_crossing_paths();

    // Random paths rarely thread the singular cone, so force twenty
    // crossings to keep the clause non-vacuous.
    let mut rng = seed_stream(3, "acceptance-gimbal");
    let mut forced_jumps = 0;
    for i in 0..20 {
        let step_angle = 2.4 / steps as f64;
        let offset = (0.05 + 0.9 * (i as f64 / 20.0)) * 0.5 * step_angle;
        let (a, b) = near_gimbal_path(offset);
        let c = random_rotation(&mut rng);
        let p = audit_path(i, &a, &b, &c, steps);
        assert!(p.crosses_gimbal_band);
        assert!(
            p.max_step_euler > std::f64::consts::FRAC_PI_2,
            "forced crossing {i} produced no Euler jump (offset {offset})"
        );
        assert!(p.max_step_keypoint <= 1.5 * p.step_angle);
        assert!(p.max_step_six_d <= 1.5 * p.step_angle);
        forced_jumps += 1;
    }
    pass(
        10,
        &format!(
            "fitted C = {fitted_c:.3}; {random_crossings} random + {forced_jumps} forced gimbal \
             crossings all show Euler steps > pi/2; keypoint/6D stay Lipschitz"
        ),
    );
}
