//! Task rewards, penalties, observation/action transforms, and the
//! alternate-representation reward variant.
//!
//! Reward exponentials take the form `exp(-error / sigma)`: bounded and
//! maximal at zero error. The initial-joint term covers the 12 leg joints;
//! the joint-limit penalty charges the one-sided violation distances of the
//! commanded targets, not the distance to the limits.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::command_sampler::{CommandSample, EpisodeSchedule};
use crate::error::{Error, Result};
use crate::pose_repr::{encode_delta, pose_errors, pose_from_keypoints, KeypointTriple, ReprKind};
use crate::robot_model::{JointVector, RobotModel, NUM_JOINTS, NUM_LEG_JOINTS};
use crate::rng::StreamRng;
use crate::se3::SE3Pose;

pub mod proxies;
pub mod replay;

/// Action-to-target scaling factor.
pub const ACTION_SCALE: f64 = 0.5;
/// Proprioceptive observation size.
pub const PROPRIO_DIM: usize = 45;
/// Full policy input size: proprioception plus the 9-dim keypoint command.
pub const OBS_DIM: usize = 54;
/// Force below which a foot does not count as firmly in contact, newtons.
pub const CONTACT_FORCE_FLOOR: f64 = 1.0;

/// How the progress-reward improvement condition treats the three keypoint
/// distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProgressCondition {
    /// Every keypoint distance must shrink (the implemented default reading).
    #[default]
    Componentwise,
    /// The summed distance must shrink.
    Sum,
}

/// Reward weights and kernel widths. Deserialization accepts partial JSON:
/// omitted keys keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub w5: f64,
    pub w6: f64,
    pub w7: f64,
    pub w8: f64,
    pub sigma_t: f64,
    pub sigma_q: f64,
    pub sigma_t_alt: f64,
    pub progress_condition: ProgressCondition,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w1: 13.0,
            w2: 80.0,
            w3: 0.015,
            w4: 0.4,
            w5: -3e-5,
            w6: -3e-6,
            w7: -5e-2,
            w8: -1.3,
            sigma_t: 0.05,
            sigma_q: 0.05,
            sigma_t_alt: 0.15,
            progress_condition: ProgressCondition::Componentwise,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("w1", self.w1), ("w2", self.w2), ("w3", self.w3), ("w4", self.w4)] {
            if !(v > 0.0) {
                return Err(Error::validation(name, "task weight must be positive"));
            }
        }
        for (name, v) in [("w5", self.w5), ("w6", self.w6), ("w7", self.w7), ("w8", self.w8)] {
            if !(v < 0.0) {
                return Err(Error::validation(name, "penalty weight must be negative"));
            }
        }
        for (name, v) in [
            ("sigma_t", self.sigma_t),
            ("sigma_q", self.sigma_q),
            ("sigma_t_alt", self.sigma_t_alt),
        ] {
            if !(v > 0.0) {
                return Err(Error::validation(name, "kernel width must be positive"));
            }
        }
        Ok(())
    }

    /// Parses a (possibly partial) weight override file.
    pub fn from_json_str(text: &str, origin: &str) -> Result<RewardWeights> {
        let w: RewardWeights = serde_json::from_str(text).map_err(|source| Error::Parse {
            path: origin.to_string(),
            source,
        })?;
        w.validate()?;
        Ok(w)
    }
}

/// Everything the reward stack consumes for one control step.
#[derive(Debug, Clone)]
pub struct StepState {
    /// Seconds since the active command was issued, in [0, T].
    pub time_in_command: f64,
    pub measured: KeypointTriple,
    pub command: KeypointTriple,
    /// Smallest previously recorded per-keypoint distances, meters.
    pub best_distances: [f64; 3],
    /// Vertical contact force per foot, newtons.
    pub foot_forces: [f64; 4],
    pub q: JointVector,
    pub qd: JointVector,
    pub qdd: JointVector,
    pub torques: JointVector,
    pub action: [f64; NUM_JOINTS],
    pub previous_action: [f64; NUM_JOINTS],
    /// Episode-initial configuration the leg posture is rewarded against.
    pub q_init: JointVector,
}

impl StepState {
    /// Current per-keypoint distances between measured and commanded triples.
    pub fn keypoint_distances(&self) -> [f64; 3] {
        self.measured.distances_to(&self.command)
    }
}

/// Delayed keypoint tracking reward: zero until the last `T_r` seconds of the
/// cycle, then `(1/T_r) * sum_k exp(-||k_meas - k_cmd|| / sigma_t)`.
pub fn tracking_reward(state: &StepState, w: &RewardWeights, schedule: &EpisodeSchedule) -> f64 {
    if state.time_in_command <= schedule.command_period - schedule.reward_window {
        return 0.0;
    }
    let sum: f64 = state
        .keypoint_distances()
        .iter()
        .map(|d| (-d / w.sigma_t).exp())
        .sum();
    sum / schedule.reward_window
}

/// Progress reward: pays the mean per-keypoint improvement over the best
/// distances recorded so far, when the improvement condition holds. Returns
/// the reward and the updated best distances.
pub fn progress_reward(state: &StepState, w: &RewardWeights) -> (f64, [f64; 3]) {
    let current = state.keypoint_distances();
    let best = state.best_distances;
    let improved = match w.progress_condition {
        ProgressCondition::Componentwise => (0..3).all(|k| current[k] < best[k]),
        ProgressCondition::Sum => current.iter().sum::<f64>() < best.iter().sum::<f64>(),
    };
    if !improved {
        return (0.0, best);
    }
    let reward = (0..3).map(|k| best[k] - current[k]).sum::<f64>() / 3.0;
    (reward, current)
}

/// Feet contact force reward: non-zero only when all four feet push with more
/// than 1 N; then the sum of the 1 N-adjusted forces.
pub fn feet_contact_reward(state: &StepState) -> Result<f64> {
    for (i, f) in state.foot_forces.iter().enumerate() {
        if *f < 0.0 || !f.is_finite() {
            return Err(Error::validation(
                format!("foot_forces[{i}]"),
                format!("contact force must be non-negative, got {f}"),
            ));
        }
    }
    if state.foot_forces.iter().any(|f| *f <= CONTACT_FORCE_FLOOR) {
        return Ok(0.0);
    }
    Ok(state
        .foot_forces
        .iter()
        .map(|f| (f - CONTACT_FORCE_FLOOR).max(0.0))
        .sum())
}

/// Initial leg joint reward: `sum_i exp(-|q_init_i - q_i| / sigma_q)` over the
/// 12 leg joints; the arm is free.
pub fn initial_joint_reward(state: &StepState, w: &RewardWeights) -> f64 {
    (0..NUM_LEG_JOINTS)
        .map(|i| (-(state.q_init[i] - state.q[i]).abs() / w.sigma_q).exp())
        .sum()
}

/// The four penalty terms, each already weighted (non-positive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenaltyBreakdown {
    pub torque: f64,
    pub acceleration: f64,
    pub action_rate: f64,
    pub joint_limit: f64,
}

impl PenaltyBreakdown {
    pub fn total(&self) -> f64 {
        self.torque + self.acceleration + self.action_rate + self.joint_limit
    }
}

/// Weighted penalties on torques, accelerations, action rate and commanded
/// targets beyond the joint limits (one-sided violation distances of
/// `sigma_a * a + q_def`).
pub fn penalties(state: &StepState, model: &RobotModel, w: &RewardWeights) -> PenaltyBreakdown {
    let sq = |xs: &[f64]| xs.iter().map(|x| x * x).sum::<f64>();
    let torque = w.w5 * sq(state.torques.values());
    let acceleration = w.w6 * sq(state.qdd.values());
    let rate: f64 = state
        .action
        .iter()
        .zip(state.previous_action.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let action_rate = w.w7 * rate;
    let targets = action_to_targets(&state.action, model);
    let mut violation = 0.0;
    for i in 0..NUM_JOINTS {
        let (lo, hi) = model.joint_limits()[i];
        violation += (targets[i] - hi).max(0.0) + (lo - targets[i]).max(0.0);
    }
    let joint_limit = w.w8 * violation;
    PenaltyBreakdown {
        torque,
        acceleration,
        action_rate,
        joint_limit,
    }
}

/// Per-term reward values for one step: raw terms, weighted terms, and totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub tracking: f64,
    pub progress: f64,
    pub feet_contact: f64,
    pub initial_joint: f64,
    pub weighted_tracking: f64,
    pub weighted_progress: f64,
    pub weighted_feet_contact: f64,
    pub weighted_initial_joint: f64,
    pub penalty_torque: f64,
    pub penalty_acceleration: f64,
    pub penalty_action_rate: f64,
    pub penalty_joint_limit: f64,
    pub task_total: f64,
    pub penalty_total: f64,
    pub total: f64,
    /// Best distances after this step's progress update.
    pub updated_best_distances: [f64; 3],
}

/// Computes every term and the weighted total `R = R_T + R_P`.
pub fn total_reward(
    state: &StepState,
    model: &RobotModel,
    w: &RewardWeights,
    schedule: &EpisodeSchedule,
) -> Result<RewardBreakdown> {
    let tracking = tracking_reward(state, w, schedule);
    let (progress, updated_best) = progress_reward(state, w);
    let feet_contact = feet_contact_reward(state)?;
    let initial_joint = initial_joint_reward(state, w);
    let pens = penalties(state, model, w);
    let weighted_tracking = w.w1 * tracking;
    let weighted_progress = w.w2 * progress;
    let weighted_feet_contact = w.w3 * feet_contact;
    let weighted_initial_joint = w.w4 * initial_joint;
    let task_total =
        weighted_tracking + weighted_progress + weighted_feet_contact + weighted_initial_joint;
    let penalty_total = pens.total();
    Ok(RewardBreakdown {
        tracking,
        progress,
        feet_contact,
        initial_joint,
        weighted_tracking,
        weighted_progress,
        weighted_feet_contact,
        weighted_initial_joint,
        penalty_torque: pens.torque,
        penalty_acceleration: pens.acceleration,
        penalty_action_rate: pens.action_rate,
        penalty_joint_limit: pens.joint_limit,
        task_total,
        penalty_total,
        total: task_total + penalty_total,
        updated_best_distances: updated_best,
    })
}

/// Adapted tracking reward for the separated position/orientation
/// representations: `(1/T_r) * exp(-(dpos + drot) / sigma_t_alt)` in the
/// delayed window. The error metric is representation-independent (all kinds
/// convert back to quaternions for the rotation error), so `kind` only labels
/// the variant; `drot` is the axis-angle magnitude in radians.
pub fn alt_tracking_reward(
    kind: ReprKind,
    state: &StepState,
    w: &RewardWeights,
    schedule: &EpisodeSchedule,
) -> Result<f64> {
    let _ = kind;
    if state.time_in_command <= schedule.command_period - schedule.reward_window {
        return Ok(0.0);
    }
    let measured = pose_from_keypoints(&state.measured)?;
    let command = pose_from_keypoints(&state.command)?;
    let (dpos, drot_deg) = pose_errors(&measured, &command);
    let drot = drot_deg.to_radians();
    Ok(((-(dpos + drot) / w.sigma_t_alt).exp()) / schedule.reward_window)
}

/// Adapted progress reward: pays `(dpos_best - dpos) + (drot_best - drot)`
/// when both errors improved. Errors are (meters, radians); returns the reward
/// and the updated best pair.
pub fn alt_progress_reward(best: (f64, f64), current: (f64, f64)) -> (f64, (f64, f64)) {
    if current.0 < best.0 && current.1 < best.1 {
        ((best.0 - current.0) + (best.1 - current.1), current)
    } else {
        (0.0, best)
    }
}

/// Additive uniform noise scales per observation block; zero means noiseless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ObservationNoise {
    pub gravity: f64,
    pub base_velocity: f64,
    pub joint_position: f64,
    pub previous_action: f64,
    pub command: f64,
}

/// Domain-randomization ranges. Stored and validated here; applying them
/// requires a physics engine and is outside this kit's scope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomizationConfig {
    /// Extra end-effector payload, kg.
    pub ee_mass_range: [f64; 2],
    /// End-effector impulse force, newtons.
    pub ee_impulse_range: [f64; 2],
    /// Seconds between impulses.
    pub ee_impulse_interval: [f64; 2],
    /// Base push velocity along x-y, m/s.
    pub base_push_range: [f64; 2],
    pub observation_noise: ObservationNoise,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            ee_mass_range: [0.0, 1.8],
            ee_impulse_range: [-10.0, 10.0],
            ee_impulse_interval: [3.0, 4.0],
            base_push_range: [-0.5, 0.5],
            observation_noise: ObservationNoise::default(),
        }
    }
}

impl RandomizationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("ee_mass_range", self.ee_mass_range),
            ("ee_impulse_range", self.ee_impulse_range),
            ("ee_impulse_interval", self.ee_impulse_interval),
            ("base_push_range", self.base_push_range),
        ] {
            if !(r[0] <= r[1]) {
                return Err(Error::validation(name, format!("range {:?} not ordered", r)));
            }
        }
        Ok(())
    }
}

/// The policy input: 45 proprioceptive values plus the 9-dim keypoint command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationVector {
    /// World gravity direction expressed in the base frame; unit before noise.
    pub gravity: [f64; 3],
    pub base_velocity: [f64; 6],
    pub joint_positions: [f64; NUM_JOINTS],
    pub previous_action: [f64; NUM_JOINTS],
    /// Keypoint delta between the measured and commanded end-effector pose,
    /// both in the base frame.
    pub command_delta: [f64; 9],
}

impl ObservationVector {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(OBS_DIM);
        out.extend_from_slice(&self.gravity);
        out.extend_from_slice(&self.base_velocity);
        out.extend_from_slice(&self.joint_positions);
        out.extend_from_slice(&self.previous_action);
        out.extend_from_slice(&self.command_delta);
        debug_assert_eq!(out.len(), OBS_DIM);
        out
    }
}

/// Assembles the observation for one step. Noise draws happen only for blocks
/// with a positive scale, so a zero config is bit-reproducible regardless of
/// the RNG state.
#[allow(clippy::too_many_arguments)]
pub fn build_observation(
    model: &RobotModel,
    base_pose: &SE3Pose,
    base_velocity: &[f64; 6],
    q: &JointVector,
    previous_action: &[f64; NUM_JOINTS],
    command: &CommandSample,
    noise: &ObservationNoise,
    rng: &mut StreamRng,
) -> ObservationVector {
    use rand::Rng;
    let g = base_pose.orientation().inverse() * Vector3::new(0.0, 0.0, -1.0);
    let measured = model.ee_pose_in_base(q);
    let delta = encode_delta(ReprKind::Keypoint, &measured, &command.target_in_base);
    let mut obs = ObservationVector {
        gravity: [g.x, g.y, g.z],
        base_velocity: *base_velocity,
        joint_positions: *q.values(),
        previous_action: *previous_action,
        command_delta: delta.payload.try_into().expect("keypoint payload is 9 values"),
    };
    let mut perturb = |xs: &mut [f64], scale: f64| {
        if scale > 0.0 {
            for x in xs {
                *x += rng.gen_range(-scale..=scale);
            }
        }
    };
    perturb(&mut obs.gravity, noise.gravity);
    perturb(&mut obs.base_velocity, noise.base_velocity);
    perturb(&mut obs.joint_positions, noise.joint_position);
    perturb(&mut obs.previous_action, noise.previous_action);
    perturb(&mut obs.command_delta, noise.command);
    obs
}

/// Joint position targets for the PD controller: `sigma_a * a + q_def`,
/// unclamped (limit violations are penalized, not clipped).
pub fn action_to_targets(action: &[f64; NUM_JOINTS], model: &RobotModel) -> JointVector {
    let mut q = model.default_config();
    for i in 0..NUM_JOINTS {
        q[i] += ACTION_SCALE * action[i];
    }
    q
}
