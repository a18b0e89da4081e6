//! Terrain-difficulty curriculum and procedural initial stances.
//!
//! The curriculum promotes a robot one difficulty level when its episode-mean
//! tracking errors beat 20 cm and 20 degrees, demotes it when both errors
//! blow past 80 cm and 120 degrees, and reassigns robots that clear the top
//! level to a random level. Initial stances are produced procedurally: sample
//! a base placement, put the feet on the terrain with per-leg analytic IK,
//! and keep the stance only if the base tilt stays under 55 degrees with all
//! four feet in contact.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose_repr::wrap_angle;
use crate::rng::StreamRng;
use crate::robot_model::{JointKind, JointVector, RobotModel, NUM_JOINTS, NUM_LEG_JOINTS};
use crate::se3::SE3Pose;
use crate::terrain::{TerrainField, TerrainKind};

/// Promotion thresholds: both errors must be under these.
pub const PROMOTE_POS_ERR: f64 = 0.20;
pub const PROMOTE_ROT_ERR_DEG: f64 = 20.0;
/// Demotion thresholds: both errors must exceed these.
pub const DEMOTE_POS_ERR: f64 = 0.80;
pub const DEMOTE_ROT_ERR_DEG: f64 = 120.0;
/// Stability filter: base tilt must stay below this angle.
pub const STABILITY_TILT_LIMIT_DEG: f64 = 55.0;
/// A foot counts as on the terrain within this tolerance, meters.
pub const FOOT_CONTACT_TOLERANCE: f64 = 0.01;
/// Default number of difficulty levels.
pub const DEFAULT_MAX_LEVEL: usize = 10;

/// Locomotion-policy rollout parameters for a physics-backed initializer.
/// Stored as configuration only: the procedural stance sampler below needs no
/// trained policy while enforcing the same stability predicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocomotionRolloutConfig {
    pub heading_rate_range: [f64; 2],
    pub velocity_range: [f64; 2],
    pub duration: f64,
}

impl Default for LocomotionRolloutConfig {
    fn default() -> Self {
        Self {
            heading_rate_range: [-1.0, 1.0],
            velocity_range: [-1.0, 1.0],
            duration: 4.0,
        }
    }
}

/// Per-robot curriculum position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub level: usize,
    pub max_level: usize,
    /// Episode-mean (position, orientation) errors seen so far.
    pub history: Vec<(f64, f64)>,
}

impl CurriculumState {
    pub fn new(max_level: usize) -> Self {
        Self {
            level: 0,
            max_level,
            history: Vec::new(),
        }
    }
}

/// Applies one episode's mean errors (meters, degrees, over the reward-active
/// windows) to the curriculum. Promotion past the top level lands on a random
/// level drawn from `rng`.
pub fn curriculum_update(
    state: &CurriculumState,
    episode_mean_pos_err: f64,
    episode_mean_rot_err: f64,
    rng: &mut StreamRng,
) -> CurriculumState {
    assert!(
        episode_mean_pos_err >= 0.0 && episode_mean_rot_err >= 0.0,
        "tracking errors must be non-negative"
    );
    let mut next = state.clone();
    next.history.push((episode_mean_pos_err, episode_mean_rot_err));
    let promote =
        episode_mean_pos_err < PROMOTE_POS_ERR && episode_mean_rot_err < PROMOTE_ROT_ERR_DEG;
    let demote =
        episode_mean_pos_err > DEMOTE_POS_ERR && episode_mean_rot_err > DEMOTE_ROT_ERR_DEG;
    if promote {
        if state.level >= state.max_level {
            next.level = rng.gen_range(0..=state.max_level);
        } else {
            next.level = state.level + 1;
        }
    } else if demote {
        next.level = state.level.saturating_sub(1);
    }
    next
}

/// Identifies the terrain a stance was generated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainRef {
    pub kind: TerrainKind,
    pub seed: u64,
    pub difficulty: f64,
}

/// A stable standing configuration on a terrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConfiguration {
    pub base_pose: SE3Pose,
    pub joints: JointVector,
    pub terrain: TerrainRef,
    pub tilt_angle_deg: f64,
}

/// Base tilt: angle between the world gravity direction and the base-frame
/// down axis, degrees.
pub fn base_tilt_deg(base: &SE3Pose) -> f64 {
    let down_world = base.rotate_vector(&Vector3::new(0.0, 0.0, -1.0));
    down_world
        .dot(&Vector3::new(0.0, 0.0, -1.0))
        .clamp(-1.0, 1.0)
        .acos()
        .to_degrees()
}

/// Re-evaluates both stability predicates from scratch.
pub fn stance_is_stable(
    model: &RobotModel,
    terrain: &TerrainField,
    config: &InitialConfiguration,
) -> Result<bool> {
    if base_tilt_deg(&config.base_pose) >= STABILITY_TILT_LIMIT_DEG {
        return Ok(false);
    }
    let poses = model.forward_kinematics(&config.base_pose, &config.joints);
    for link in model.foot_link_ids() {
        let p = poses[link].position();
        let radius = foot_sphere_radius(model, link)?;
        let ground = terrain.height_at_nearest(p.x, p.y)?;
        if ((p.z - radius) - ground).abs() > FOOT_CONTACT_TOLERANCE {
            return Ok(false);
        }
    }
    Ok(true)
}

fn foot_sphere_radius(model: &RobotModel, link: usize) -> Result<f64> {
    model
        .collision_primitives()
        .iter()
        .find(|p| p.link == link)
        .map(|p| p.shape.radius())
        .ok_or_else(|| {
            Error::validation("foot_links", format!("foot link {link} has no primitive"))
        })
}

/// Geometry of one leg for the analytic 3-DoF IK: hip-AA about x, then a
/// lateral offset to the sagittal plane, then a 2R chain hanging along -z.
struct LegGeometry {
    hip_origin: Vector3<f64>,
    lateral_offset: f64,
    thigh_len: f64,
    calf_len: f64,
    joint_indices: [usize; 3],
    knee_sign: f64,
    foot_link: usize,
}

fn leg_geometry(model: &RobotModel, foot_link: usize) -> Result<LegGeometry> {
    let links = model.links();
    let calf = links[foot_link].parent.ok_or_else(|| bad_leg("foot has no parent"))?;
    let thigh = links[calf].parent.ok_or_else(|| bad_leg("calf has no parent"))?;
    let hip = links[thigh].parent.ok_or_else(|| bad_leg("thigh has no parent"))?;

    let idx = |link: usize| -> Result<usize> {
        match &links[link].joint {
            JointKind::Revolute { index, .. } => Ok(*index),
            JointKind::Fixed => Err(bad_leg("expected a revolute leg joint")),
        }
    };
    let geometry = LegGeometry {
        hip_origin: links[hip].local_transform.position(),
        lateral_offset: links[thigh].local_transform.position().y,
        thigh_len: -links[calf].local_transform.position().z,
        calf_len: -links[foot_link].local_transform.position().z,
        joint_indices: [idx(hip)?, idx(thigh)?, idx(calf)?],
        knee_sign: model.default_config()[idx(calf)?].signum(),
        foot_link,
    };
    if geometry.thigh_len <= 0.0 || geometry.calf_len <= 0.0 {
        return Err(bad_leg("leg segments must extend along -z"));
    }
    Ok(geometry)
}

fn bad_leg(msg: &str) -> Error {
    Error::validation(
        "foot_links",
        format!("stance generator requires hip/thigh/calf/foot leg chains: {msg}"),
    )
}

impl LegGeometry {
    /// Joint angles placing the foot center at `target` (base frame), or None
    /// when out of reach or outside the joint limits. Solves the standing
    /// branch (foot below the hip in the leg plane, knee bent toward its
    /// default side); targets above the hip plane report as unreachable.
    fn solve(&self, target: &Vector3<f64>, limits: &[(f64, f64); NUM_JOINTS]) -> Option<[f64; 3]> {
        let v = target - self.hip_origin;
        let rho = (v.y * v.y + v.z * v.z).sqrt();
        if rho < self.lateral_offset.abs() {
            return None;
        }
        let phi = v.z.atan2(v.y);
        let gamma = (self.lateral_offset / rho).clamp(-1.0, 1.0).acos();
        let alpha = wrap_angle(phi + gamma);
        // In-plane coordinates after undoing the hip roll.
        let z_plane = -alpha.sin() * v.y + alpha.cos() * v.z;
        let u = -v.x;
        let w = -z_plane;
        let (l1, l2) = (self.thigh_len, self.calf_len);
        let r2 = u * u + w * w;
        let cos_knee = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
        if cos_knee.abs() > 1.0 {
            return None;
        }
        let knee = self.knee_sign * cos_knee.acos();
        let hip_pitch = u.atan2(w) - (l2 * knee.sin()).atan2(l1 + l2 * knee.cos());
        let angles = [alpha, wrap_angle(hip_pitch), knee];
        for (k, angle) in angles.iter().enumerate() {
            let (lo, hi) = limits[self.joint_indices[k]];
            if *angle < lo || *angle > hi {
                return None;
            }
        }
        Some(angles)
    }
}

/// Samples a stable initial configuration on the terrain. Legs are solved so
/// every foot sits on the surface; joint-space diversity enters through a
/// +-0.1 rad perturbation that is re-projected onto the terrain, and the arm
/// takes the default configuration perturbed by +-0.2 rad within limits.
pub fn generate_initial_configuration(
    model: &RobotModel,
    terrain: &TerrainField,
    rng: &mut StreamRng,
    max_attempts: usize,
) -> Result<InitialConfiguration> {
    if max_attempts == 0 {
        return Err(Error::InvalidArgument("max_attempts must be >= 1".into()));
    }
    let legs: Vec<LegGeometry> = model
        .foot_link_ids()
        .iter()
        .map(|f| leg_geometry(model, *f))
        .collect::<Result<_>>()?;
    let limits = model.joint_limits();
    let default_q = model.default_config();
    let default_poses = model.forward_kinematics(&SE3Pose::identity(), &default_q);
    let nominal_feet: Vec<Vector3<f64>> = legs
        .iter()
        .map(|l| default_poses[l.foot_link].position())
        .collect();
    // Default base height above the foot centers.
    let stand_height = -nominal_feet.iter().map(|p| p.z).sum::<f64>() / 4.0;

    let margin = 0.6;
    let x_range = (terrain.origin[0] + margin, terrain.x_max() - margin);
    let y_range = (terrain.origin[1] + margin, terrain.y_max() - margin);

    for _ in 0..max_attempts {
        let (bx, by) = if x_range.0 < x_range.1 && y_range.0 < y_range.1 {
            (
                rng.gen_range(x_range.0..x_range.1),
                rng.gen_range(y_range.0..y_range.1),
            )
        } else {
            (
                terrain.origin[0] + (terrain.x_max() - terrain.origin[0]) / 2.0,
                terrain.origin[1] + (terrain.y_max() - terrain.origin[1]) / 2.0,
            )
        };
        let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let spin = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);

        // Feet targets: nominal stance footprint rotated into the world, with
        // heights read off the terrain.
        let mut feet_world = Vec::with_capacity(4);
        let mut feasible = true;
        for (leg, nominal) in legs.iter().zip(&nominal_feet) {
            let xy = spin * Vector3::new(nominal.x, nominal.y, 0.0);
            let (fx, fy) = (bx + xy.x, by + xy.y);
            let radius = foot_sphere_radius(model, leg.foot_link)?;
            match terrain.height_at_nearest(fx, fy) {
                Ok(h) => feet_world.push(Vector3::new(fx, fy, h + radius)),
                Err(_) => {
                    feasible = false;
                    break;
                }
            }
        }
        if !feasible {
            continue;
        }

        // Base attitude from the least-squares foot plane, yaw preserved.
        let normal = fit_plane_normal(&feet_world);
        let tilt = normal.dot(&Vector3::z()).clamp(-1.0, 1.0).acos().to_degrees();
        if tilt >= STABILITY_TILT_LIMIT_DEG {
            continue;
        }
        let heading = spin * Vector3::x();
        let x_axis = (heading - normal * normal.dot(&heading)).normalize();
        let y_axis = normal.cross(&x_axis);
        let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            Matrix3::from_columns(&[x_axis, y_axis, normal]),
        ));
        let centroid = feet_world.iter().sum::<Vector3<f64>>() / 4.0;
        let base = SE3Pose::new(centroid + normal * stand_height, rot);
        let base_inv = base.inverse();

        // Exact IK, joint-space perturbation, re-projection onto the terrain.
        let mut q = default_q;
        let mut solved = true;
        for (leg, foot) in legs.iter().zip(&feet_world) {
            let Some(angles) = leg.solve(&base_inv.transform_point(foot), limits) else {
                solved = false;
                break;
            };
            let mut perturbed = angles;
            for a in perturbed.iter_mut() {
                *a += rng.gen_range(-0.1..=0.1);
            }
            for (k, idx) in leg.joint_indices.iter().enumerate() {
                q[*idx] = perturbed[k];
            }
            // Where did the perturbed leg put the foot? Re-project that point
            // onto the surface and solve again so contact is exact.
            let poses = model.forward_kinematics(&base, &q);
            let p = poses[leg.foot_link].position();
            let radius = foot_sphere_radius(model, leg.foot_link)?;
            let Ok(h) = terrain.height_at_nearest(p.x, p.y) else {
                solved = false;
                break;
            };
            let reprojected = Vector3::new(p.x, p.y, h + radius);
            let Some(final_angles) = leg.solve(&base_inv.transform_point(&reprojected), limits)
            else {
                solved = false;
                break;
            };
            for (k, idx) in leg.joint_indices.iter().enumerate() {
                q[*idx] = final_angles[k];
            }
        }
        if !solved {
            continue;
        }

        for i in NUM_LEG_JOINTS..NUM_JOINTS {
            let (lo, hi) = limits[i];
            q[i] = (default_q[i] + rng.gen_range(-0.2..=0.2)).clamp(lo, hi);
        }

        let config = InitialConfiguration {
            base_pose: base,
            joints: q,
            terrain: TerrainRef {
                kind: terrain.kind,
                seed: terrain.seed,
                difficulty: terrain.difficulty,
            },
            tilt_angle_deg: base_tilt_deg(&base),
        };
        if stance_is_stable(model, terrain, &config)? {
            return Ok(config);
        }
    }
    Err(Error::StanceExhausted {
        attempts: max_attempts,
        terrain: format!("{:?} (difficulty {})", terrain.kind, terrain.difficulty),
    })
}

/// Unit normal (positive z) of the least-squares plane through the points.
fn fit_plane_normal(points: &[Vector3<f64>]) -> Vector3<f64> {
    // Solve [x y 1] * [a b c]^T = z in the least-squares sense.
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for p in points {
        let row = Vector3::new(p.x, p.y, 1.0);
        ata += row * row.transpose();
        atb += row * p.z;
    }
    match ata.try_inverse() {
        Some(inv) => {
            let coeffs = inv * atb;
            Vector3::new(-coeffs.x, -coeffs.y, 1.0).normalize()
        }
        // Degenerate footprint: fall back to level.
        None => Vector3::z(),
    }
}
