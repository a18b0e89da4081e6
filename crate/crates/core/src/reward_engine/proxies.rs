//! Kinematic stand-ins for the dynamic quantities the reward engine consumes.
//!
//! The engine itself is pure in its inputs; these proxies let a physics-free
//! harness supply torques (PD law on the commanded targets), accelerations
//! (central differences) and foot contact forces (weight shared equally among
//! feet near the terrain surface).

use crate::error::{Error, Result};
use crate::robot_model::{JointVector, PrimitiveShape, RobotModel, NUM_JOINTS, NUM_LEG_JOINTS};
use crate::se3::SE3Pose;
use crate::terrain::TerrainField;

/// Nominal robot weight used by the contact proxy, newtons (about 60 kg).
pub const DEFAULT_TOTAL_WEIGHT: f64 = 588.6;
/// A foot within this distance of the terrain surface counts as in contact, meters.
pub const CONTACT_DISTANCE: f64 = 0.01;

/// PD gains of the desk-scale torque proxy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains {
    pub kp_leg: f64,
    pub kd_leg: f64,
    pub kp_arm: f64,
    pub kd_arm: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp_leg: 80.0,
            kd_leg: 2.0,
            kp_arm: 40.0,
            kd_arm: 1.0,
        }
    }
}

/// `tau = Kp (q_target - q) - Kd qd`, with leg/arm gain split.
pub fn pd_torque_proxy(
    q_target: &JointVector,
    q: &JointVector,
    qd: &JointVector,
    gains: &PdGains,
) -> JointVector {
    let mut tau = JointVector::zeros();
    for i in 0..NUM_JOINTS {
        let (kp, kd) = if i < NUM_LEG_JOINTS {
            (gains.kp_leg, gains.kd_leg)
        } else {
            (gains.kp_arm, gains.kd_arm)
        };
        tau[i] = kp * (q_target[i] - q[i]) - kd * qd[i];
    }
    tau
}

/// Central-difference acceleration from three consecutive configurations.
pub fn acceleration_proxy(
    q_prev: &JointVector,
    q: &JointVector,
    q_next: &JointVector,
    dt: f64,
) -> JointVector {
    let mut qdd = JointVector::zeros();
    for i in 0..NUM_JOINTS {
        qdd[i] = (q_next[i] - 2.0 * q[i] + q_prev[i]) / (dt * dt);
    }
    qdd
}

/// Backward-difference velocity between two consecutive configurations.
pub fn velocity_proxy(q_prev: &JointVector, q: &JointVector, dt: f64) -> JointVector {
    let mut qd = JointVector::zeros();
    for i in 0..NUM_JOINTS {
        qd[i] = (q[i] - q_prev[i]) / dt;
    }
    qd
}

/// Contact force proxy: a foot whose sphere bottom is within 1 cm of the
/// terrain carries an equal share of `total_weight`; others carry zero.
pub fn contact_force_proxy(
    model: &RobotModel,
    terrain: &TerrainField,
    base: &SE3Pose,
    q: &JointVector,
    total_weight: f64,
) -> Result<[f64; 4]> {
    let poses = model.forward_kinematics(base, q);
    let mut gaps = [0.0f64; 4];
    for (k, link) in model.foot_link_ids().iter().enumerate() {
        let radius = foot_radius(model, *link)?;
        let p = poses[*link].position();
        let ground = terrain.height_at_nearest(p.x, p.y)?;
        gaps[k] = (p.z - radius) - ground;
    }
    let contacts = gaps.iter().filter(|g| g.abs() <= CONTACT_DISTANCE).count();
    let mut forces = [0.0; 4];
    if contacts > 0 {
        let share = total_weight / contacts as f64;
        for k in 0..4 {
            if gaps[k].abs() <= CONTACT_DISTANCE {
                forces[k] = share;
            }
        }
    }
    Ok(forces)
}

fn foot_radius(model: &RobotModel, link: usize) -> Result<f64> {
    model
        .collision_primitives()
        .iter()
        .find(|p| p.link == link)
        .map(|p| match &p.shape {
            PrimitiveShape::Sphere { radius } => *radius,
            PrimitiveShape::Capsule { radius, .. } => *radius,
        })
        .ok_or_else(|| {
            Error::validation(
                "foot_links",
                format!("foot link {link} carries no collision primitive"),
            )
        })
}
