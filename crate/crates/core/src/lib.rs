//! Kinematic environment kit for whole-body end-effector pose tracking with a
//! legged mobile manipulator.
//!
//! The crate bundles every non-learned component of such a system:
//!
//! - [`robot_model`]: an 18-DoF quadruped-plus-arm kinematic tree with forward
//!   kinematics and analytic point Jacobians,
//! - [`collision`]: capsule/sphere self-collision and terrain clearance checks,
//! - [`terrain`]: procedural height fields (flat, rough, discrete obstacles,
//!   stairs) and the conservative coarse max-pool envelope,
//! - [`workspace`]: fixed-base collision-free end-effector pose pre-sampling
//!   with cylinder-bin spatial balancing,
//! - [`command_sampler`]: terrain-feasible pose command generation on the
//!   episode schedule,
//! - [`pose_repr`]: the keypoint-cube pose representation, three competitor
//!   encodings, and a continuity audit,
//! - [`reward_engine`]: the full reward stack, observation/action transforms,
//!   and a kinematic replay harness,
//! - [`curriculum`]: the terrain-difficulty state machine and procedural
//!   initial-stance generation,
//! - [`dls_tracker`]: a damped-least-squares whole-body tracking oracle for
//!   batch reachability and error statistics.
//!
//! Everything is deterministic for a fixed seed. The joint-grid workspace
//! sweep and the batch tracker run data-parallel through rayon when the
//! default `parallel` feature is enabled, and fall back to sequential
//! iteration when it is not.

pub mod collision;
pub mod command_sampler;
pub mod curriculum;
pub mod dls_tracker;
mod error;
pub mod pose_repr;
pub mod reward_engine;
pub mod rng;
pub mod robot_model;
pub mod se3;
pub mod terrain;
pub mod workspace;

pub use error::{Error, Result};
pub use se3::SE3Pose;

/// True when the crate was compiled with the rayon-backed `parallel` feature.
pub fn parallelism_enabled() -> bool {
    cfg!(feature = "parallel")
}
