//! Terrain-feasible end-effector pose commands on the episode schedule.
//!
//! Each command is drawn bin-uniformly from the workspace dataset, expanded by
//! a random virtual body displacement, transformed to the world through the
//! base pose, and accepted only if its position clears the coarse terrain
//! envelope by the 8 cm margin. Rejected candidates are resampled up to an
//! attempt bound so that pathological base placements surface as errors
//! instead of spinning forever.

use serde::{Deserialize, Serialize};

use crate::collision::clearance_deficit;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::se3::SE3Pose;
use crate::terrain::CoarseHeightMap;
use crate::workspace::{expand_command, WorkspaceDataset};

/// Clearance margin above the coarse terrain envelope, meters.
pub const TERRAIN_MARGIN: f64 = 0.08;
/// Default resampling bound.
pub const DEFAULT_MAX_ATTEMPTS: usize = 100;

/// Episode timing: three 4-second command cycles per 12-second episode, with
/// the task reward active in the last 2 seconds of each cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSchedule {
    pub episode_length: f64,
    pub command_period: f64,
    pub reward_window: f64,
    pub control_dt: f64,
}

impl Default for EpisodeSchedule {
    fn default() -> Self {
        Self {
            episode_length: 12.0,
            command_period: 4.0,
            reward_window: 2.0,
            control_dt: 0.02,
        }
    }
}

impl EpisodeSchedule {
    pub fn validate(&self) -> Result<()> {
        let t = self.command_period;
        if !(t > 0.0 && self.episode_length > 0.0) {
            return Err(Error::InvalidArgument("schedule periods must be positive".into()));
        }
        if (self.episode_length - 3.0 * t).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "episode_length {} must equal 3 * command_period {}",
                self.episode_length, t
            )));
        }
        if !(self.reward_window > 0.0 && self.reward_window < t) {
            return Err(Error::InvalidArgument(format!(
                "reward_window {} must lie in (0, {t})",
                self.reward_window
            )));
        }
        let ratio = t / self.control_dt;
        if !(self.control_dt > 0.0 && (ratio - ratio.round()).abs() < 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "control_dt {} must divide command_period {t} exactly",
                self.control_dt
            )));
        }
        Ok(())
    }

    pub fn commands_per_episode(&self) -> usize {
        (self.episode_length / self.command_period).round() as usize
    }

    /// Time since the active command was issued. Cycles are attributed
    /// half-open from above: at t = k*T the k-th boundary belongs to the
    /// previous command (time_in_command = T), matching the reward windows
    /// (2, 4], (6, 8], (10, 12].
    pub fn time_in_command(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let tic = t % self.command_period;
        if tic == 0.0 {
            self.command_period
        } else {
            tic
        }
    }

    /// True when the delayed task reward is active at episode time `t`.
    pub fn reward_active(&self, t: f64) -> bool {
        self.time_in_command(t) > self.command_period - self.reward_window
    }
}

/// One accepted end-effector pose command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandSample {
    /// Commanded pose in the world frame.
    pub target: SE3Pose,
    /// The same command in the base frame (offset applied to the dataset pose).
    pub target_in_base: SE3Pose,
    /// Index of the pre-sampled pose the command came from.
    pub source_index: usize,
    /// The virtual body displacement that expanded the pose.
    pub body_offset: SE3Pose,
    /// Rejected candidates before this one was accepted.
    pub resample_attempts: usize,
    /// Episode time the command was issued, seconds.
    pub issue_time: f64,
}

fn next_command_inner(
    dataset: &WorkspaceDataset,
    coarse_map: &CoarseHeightMap,
    base_pose: &SE3Pose,
    rng: &mut StreamRng,
    max_attempts: usize,
    context: &str,
) -> Result<CommandSample> {
    if max_attempts == 0 {
        return Err(Error::InvalidArgument("max_attempts must be >= 1".into()));
    }
    let mut last = None;
    for attempt in 1..=max_attempts {
        let (source_index, pose) = dataset.sample_binned(rng)?;
        let (target_in_base, body_offset) = expand_command(&pose, rng);
        let target = base_pose.compose(&target_in_base);
        let deficit = clearance_deficit(&target, coarse_map, TERRAIN_MARGIN)?;
        if deficit >= 0.0 {
            return Ok(CommandSample {
                target,
                target_in_base,
                source_index,
                body_offset,
                resample_attempts: attempt - 1,
                issue_time: 0.0,
            });
        }
        last = Some(target);
    }
    let last = last.expect("at least one attempt was made");
    let p = last.position();
    let required = p.z - clearance_deficit(&last, coarse_map, TERRAIN_MARGIN)?;
    Err(Error::ResampleExhausted {
        attempts: max_attempts,
        last_candidate: [p.x, p.y, p.z],
        required_z: required,
        context: context.to_string(),
    })
}

/// Draws one terrain-feasible command for the given base pose.
pub fn next_command(
    dataset: &WorkspaceDataset,
    coarse_map: &CoarseHeightMap,
    base_pose: &SE3Pose,
    rng: &mut StreamRng,
    max_attempts: usize,
) -> Result<CommandSample> {
    next_command_inner(dataset, coarse_map, base_pose, rng, max_attempts, "")
}

/// Draws the episode's three commands with issue times {0, T, 2T}.
pub fn command_stream(
    schedule: &EpisodeSchedule,
    dataset: &WorkspaceDataset,
    coarse_map: &CoarseHeightMap,
    base_pose: &SE3Pose,
    rng: &mut StreamRng,
    max_attempts: usize,
) -> Result<Vec<CommandSample>> {
    schedule.validate()?;
    let n = schedule.commands_per_episode();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let issue_time = i as f64 * schedule.command_period;
        let context = format!(" (episode command {i} at t={issue_time}s)");
        let mut sample =
            next_command_inner(dataset, coarse_map, base_pose, rng, max_attempts, &context)?;
        sample.issue_time = issue_time;
        out.push(sample);
    }
    Ok(out)
}
