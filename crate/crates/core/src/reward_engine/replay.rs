//! Replays a recorded joint trajectory through the reward engine.
//!
//! The trajectory file stores frames of joint positions, actions and foot
//! forces plus the command cycle; velocities, accelerations and torques are
//! reconstructed with the kinematic proxies, and measured keypoints come from
//! forward kinematics in the base frame.

use serde::{Deserialize, Serialize};

use super::proxies::{acceleration_proxy, pd_torque_proxy, velocity_proxy, PdGains};
use super::{action_to_targets, total_reward, RewardBreakdown, RewardWeights, StepState};
use crate::command_sampler::EpisodeSchedule;
use crate::error::{Error, Result};
use crate::pose_repr::keypoints_of;
use crate::robot_model::{JointVector, RobotModel, NUM_JOINTS};
use crate::se3::SE3Pose;

/// One command cycle of a recorded trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryCommand {
    pub issue_time: f64,
    /// Commanded end-effector pose in the base frame.
    pub target_in_base: SE3Pose,
}

/// One control step of a recorded trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryFrame {
    pub t: f64,
    pub q: JointVector,
    pub action: [f64; NUM_JOINTS],
    pub foot_forces: [f64; 4],
}

/// A replayable trajectory: schedule, command cycle, and frames at control rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub schema_version: u32,
    pub schedule: EpisodeSchedule,
    pub q_init: JointVector,
    pub commands: Vec<TrajectoryCommand>,
    pub frames: Vec<TrajectoryFrame>,
}

impl TrajectoryFile {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.commands.is_empty() {
            return Err(Error::validation("commands", "at least one command required"));
        }
        if self.commands[0].issue_time != 0.0 {
            return Err(Error::validation(
                "commands[0].issue_time",
                "first command must be issued at t = 0",
            ));
        }
        for w in self.commands.windows(2) {
            if w[1].issue_time <= w[0].issue_time {
                return Err(Error::validation(
                    "commands",
                    "issue times must be strictly increasing",
                ));
            }
        }
        if self.frames.len() < 2 {
            return Err(Error::validation("frames", "need at least two frames"));
        }
        for w in self.frames.windows(2) {
            let dt = w[1].t - w[0].t;
            if (dt - self.schedule.control_dt).abs() > 1e-9 {
                return Err(Error::validation(
                    "frames",
                    format!(
                        "frame spacing {dt} != control_dt {}",
                        self.schedule.control_dt
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<TrajectoryFile> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let traj: TrajectoryFile = serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.display().to_string(),
            source,
        })?;
        traj.validate()?;
        Ok(traj)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|source| Error::Parse {
            path: path.display().to_string(),
            source,
        })?;
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Index of the command owning episode time `t` (cycles are half-open from
    /// above, so the frame at an issue boundary still belongs to the previous
    /// command).
    fn command_at(&self, t: f64) -> usize {
        let mut active = 0;
        for (i, c) in self.commands.iter().enumerate() {
            if c.issue_time < t {
                active = i;
            }
        }
        active
    }
}

/// Reward terms for every frame of a trajectory.
pub fn replay_trajectory(
    model: &RobotModel,
    traj: &TrajectoryFile,
    weights: &RewardWeights,
) -> Result<Vec<(f64, RewardBreakdown)>> {
    traj.validate()?;
    weights.validate()?;
    let dt = traj.schedule.control_dt;
    let gains = PdGains::default();

    let measured_kp: Vec<_> = traj
        .frames
        .iter()
        .map(|f| keypoints_of(&model.ee_pose_in_base(&f.q)))
        .collect();
    let command_kp: Vec<_> = traj
        .commands
        .iter()
        .map(|c| keypoints_of(&c.target_in_base))
        .collect();

    let mut out = Vec::with_capacity(traj.frames.len());
    let mut active_cmd = usize::MAX;
    let mut best = [0.0; 3];
    for (i, frame) in traj.frames.iter().enumerate() {
        let cmd = traj.command_at(frame.t);
        if cmd != active_cmd {
            // Best distances reset to the distances at command issue.
            active_cmd = cmd;
            best = measured_kp[i].distances_to(&command_kp[cmd]);
        }
        let prev = if i > 0 { i - 1 } else { i };
        let next = if i + 1 < traj.frames.len() { i + 1 } else { i };
        let qd = velocity_proxy(&traj.frames[prev].q, &frame.q, dt);
        let qdd = if i > 0 && i + 1 < traj.frames.len() {
            acceleration_proxy(&traj.frames[prev].q, &frame.q, &traj.frames[next].q, dt)
        } else {
            JointVector::zeros()
        };
        let torques = pd_torque_proxy(&action_to_targets(&frame.action, model), &frame.q, &qd, &gains);
        let state = StepState {
            time_in_command: frame.t - traj.commands[cmd].issue_time,
            measured: measured_kp[i],
            command: command_kp[cmd],
            best_distances: best,
            foot_forces: frame.foot_forces,
            q: frame.q,
            qd,
            qdd,
            torques,
            action: frame.action,
            previous_action: traj.frames[prev].action,
            q_init: traj.q_init,
        };
        let breakdown = total_reward(&state, model, weights, &traj.schedule)?;
        best = breakdown.updated_best_distances;
        out.push((frame.t, breakdown));
    }
    Ok(out)
}

/// Builds a stationary trajectory that tracks `target_in_base` perfectly with
/// the robot frozen at `q`: useful as a closed-form harness input.
pub fn stationary_trajectory(
    model: &RobotModel,
    schedule: &EpisodeSchedule,
    q: &JointVector,
    foot_forces: [f64; 4],
) -> TrajectoryFile {
    let target_in_base = model.ee_pose_in_base(q);
    // An action that makes the PD target equal the held configuration.
    let q_def = model.default_config();
    let mut action = [0.0; NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        action[i] = (q[i] - q_def[i]) / super::ACTION_SCALE;
    }
    let steps = (schedule.episode_length / schedule.control_dt).round() as usize;
    let frames = (0..=steps)
        .map(|i| TrajectoryFrame {
            t: i as f64 * schedule.control_dt,
            q: *q,
            action,
            foot_forces,
        })
        .collect();
    let commands = (0..schedule.commands_per_episode())
        .map(|i| TrajectoryCommand {
            issue_time: i as f64 * schedule.command_period,
            target_in_base,
        })
        .collect();
    TrajectoryFile {
        schema_version: 1,
        schedule: *schedule,
        q_init: *q,
        commands,
        frames,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stationary_perfect_tracking_hits_the_worked_example() {
        let model = RobotModel::bundled();
        let schedule = EpisodeSchedule::default();
        let traj =
            stationary_trajectory(&model, &schedule, &model.default_config(), [50.0; 4]);
        let rows = replay_trajectory(&model, &traj, &RewardWeights::default()).unwrap();
        assert_eq!(rows.len(), 601);
        for (t, b) in &rows {
            if schedule.reward_active(*t) {
                assert_relative_eq!(b.tracking, 1.5, epsilon = 1e-12);
                assert_relative_eq!(b.total, 27.24, epsilon = 1e-9);
            } else {
                assert_eq!(b.tracking, 0.0);
            }
            assert_eq!(b.progress, 0.0);
            assert_relative_eq!(b.feet_contact, 196.0, epsilon = 1e-12);
            assert_relative_eq!(b.initial_joint, 12.0, epsilon = 1e-12);
            assert_relative_eq!(b.penalty_total, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn replay_rejects_misaligned_frames() {
        let model = RobotModel::bundled();
        let schedule = EpisodeSchedule::default();
        let mut traj =
            stationary_trajectory(&model, &schedule, &model.default_config(), [50.0; 4]);
        traj.frames[5].t += 0.001;
        assert!(replay_trajectory(&model, &traj, &RewardWeights::default()).is_err());
    }

    #[test]
    fn trajectory_file_round_trips() {
        let model = RobotModel::bundled();
        let schedule = EpisodeSchedule::default();
        let traj =
            stationary_trajectory(&model, &schedule, &model.default_config(), [50.0; 4]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.json");
        traj.save(&path).unwrap();
        let back = TrajectoryFile::load(&path).unwrap();
        assert_eq!(back.frames.len(), traj.frames.len());
        assert_eq!(back.commands.len(), 3);
    }
}
