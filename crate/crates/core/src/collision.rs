//! Self-collision between link primitives and clearance against terrain.
//!
//! Capsules and spheres reduce every pairwise test to a segment-segment or
//! point-segment distance, so the checks are exact and cheap enough for the
//! joint-grid workspace sweep.

use nalgebra::Vector3;

use crate::error::Result;
use crate::robot_model::{CollisionPrimitive, JointVector, PrimitiveShape, RobotModel};
use crate::se3::SE3Pose;
use crate::terrain::CoarseHeightMap;

/// Outcome of a self-collision query.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport {
    pub colliding: bool,
    /// Link-index pairs in contact with their penetration depth in meters.
    pub pairs: Vec<CollidingPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollidingPair {
    pub link_a: usize,
    pub link_b: usize,
    pub penetration: f64,
}

/// A primitive placed in the world: a segment (degenerate for spheres) plus a radius.
struct PlacedPrimitive {
    link: usize,
    seg_a: Vector3<f64>,
    seg_b: Vector3<f64>,
    radius: f64,
}

fn place(primitive: &CollisionPrimitive, link_pose: &SE3Pose) -> PlacedPrimitive {
    let center = link_pose.transform_point(&primitive.offset);
    match &primitive.shape {
        PrimitiveShape::Sphere { radius } => PlacedPrimitive {
            link: primitive.link,
            seg_a: center,
            seg_b: center,
            radius: *radius,
        },
        PrimitiveShape::Capsule {
            axis,
            radius,
            half_length,
        } => {
            let dir = link_pose.rotate_vector(axis) * *half_length;
            PlacedPrimitive {
                link: primitive.link,
                seg_a: center - dir,
                seg_b: center + dir,
                radius: *radius,
            }
        }
    }
}

/// Closest distance between two segments [a0,a1] and [b0,b1].
/// Clamped quadratic minimization (Ericson, Real-Time Collision Detection §5.1.9).
pub fn segment_segment_distance(
    a0: &Vector3<f64>,
    a1: &Vector3<f64>,
    b0: &Vector3<f64>,
    b1: &Vector3<f64>,
) -> f64 {
    let d1 = a1 - a0;
    let d2 = b1 - b0;
    let r = a0 - b0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    const EPS: f64 = 1e-12;

    let (s, t);
    if a <= EPS && e <= EPS {
        return r.norm();
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s_tmp = if denom > EPS {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let t_tmp = b * s_tmp + f;
            if t_tmp < 0.0 {
                s_tmp = (-c / a).clamp(0.0, 1.0);
                t = 0.0;
            } else if t_tmp > e {
                s_tmp = ((b - c) / a).clamp(0.0, 1.0);
                t = 1.0;
            } else {
                t = t_tmp / e;
            }
            s = s_tmp;
        }
    }
    let pa = a0 + d1 * s;
    let pb = b0 + d2 * t;
    (pa - pb).norm()
}

/// Checks every non-excluded primitive pair at the given configuration.
/// A pair is reported iff the primitive distance is strictly below the sum of
/// radii; parent-child links and the model's exclusion list are skipped.
pub fn self_collision(model: &RobotModel, base: &SE3Pose, q: &JointVector) -> CollisionReport {
    let poses = model.forward_kinematics(base, q);
    let placed: Vec<PlacedPrimitive> = model
        .collision_primitives()
        .iter()
        .map(|p| place(p, &poses[p.link]))
        .collect();

    // Worst penetration per link pair, so multi-primitive links report once.
    let mut worst: Vec<((usize, usize), f64)> = Vec::new();
    for i in 0..placed.len() {
        for j in (i + 1)..placed.len() {
            let (pi, pj) = (&placed[i], &placed[j]);
            if pi.link == pj.link || model.is_excluded_pair(pi.link, pj.link) {
                continue;
            }
            let dist = segment_segment_distance(&pi.seg_a, &pi.seg_b, &pj.seg_a, &pj.seg_b);
            let penetration = pi.radius + pj.radius - dist;
            if penetration > 0.0 {
                let key = if pi.link < pj.link {
                    (pi.link, pj.link)
                } else {
                    (pj.link, pi.link)
                };
                match worst.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, depth)) => *depth = depth.max(penetration),
                    None => worst.push((key, penetration)),
                }
            }
        }
    }
    worst.sort_by_key(|(k, _)| *k);
    let pairs: Vec<CollidingPair> = worst
        .into_iter()
        .map(|((link_a, link_b), penetration)| CollidingPair {
            link_a,
            link_b,
            penetration,
        })
        .collect();
    CollisionReport {
        colliding: !pairs.is_empty(),
        pairs,
    }
}

/// True iff the pose clears the coarse terrain envelope by `margin`:
/// `z >= coarse(x, y) + margin` (inclusive boundary).
pub fn terrain_clearance(pose: &SE3Pose, coarse_map: &CoarseHeightMap, margin: f64) -> Result<bool> {
    let p = pose.position();
    let h = coarse_map.height_at(p.x, p.y)?;
    Ok(p.z >= h + margin)
}

/// Convenience wrapper shared with the command sampler so both use one code path.
pub fn clearance_deficit(pose: &SE3Pose, coarse_map: &CoarseHeightMap, margin: f64) -> Result<f64> {
    let p = pose.position();
    let h = coarse_map.height_at(p.x, p.y)?;
    Ok(p.z - (h + margin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot_model::RobotModel;
    use crate::terrain::{build_coarse_map, generate_terrain, TerrainKind};
    use approx::assert_relative_eq;
    use nalgebra::{Unit, UnitQuaternion};
    use rand::Rng;

    #[test]
    fn segment_distance_parallel_and_crossing() {
        let d = segment_segment_distance(
            &Vector3::new(0.0, 0.0, 0.0),
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::new(0.0, 1.0, 0.0),
            &Vector3::new(1.0, 1.0, 0.0),
        );
        assert_relative_eq!(d, 1.0, epsilon = 1e-12);
        let d = segment_segment_distance(
            &Vector3::new(-1.0, 0.0, 0.5),
            &Vector3::new(1.0, 0.0, 0.5),
            &Vector3::new(0.0, -1.0, 0.0),
            &Vector3::new(0.0, 1.0, 0.0),
        );
        assert_relative_eq!(d, 0.5, epsilon = 1e-12);
        // Point vs point (two spheres).
        let d = segment_segment_distance(
            &Vector3::new(0.0, 0.0, 0.0),
            &Vector3::new(0.0, 0.0, 0.0),
            &Vector3::new(3.0, 4.0, 0.0),
            &Vector3::new(3.0, 4.0, 0.0),
        );
        assert_relative_eq!(d, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn default_config_is_collision_free() {
        let model = RobotModel::bundled();
        let report = self_collision(&model, &SE3Pose::identity(), &model.default_config());
        assert!(!report.colliding, "pairs: {:?}", report.pairs);
    }

    #[test]
    fn folded_arm_collides_with_torso() {
        let model = RobotModel::bundled();
        let mut q = model.default_config();
        // Pitch the shoulder backward so the upper arm sweeps through the torso.
        q[13] = -2.2;
        q[14] = 0.0;
        q[16] = 0.0;
        let report = self_collision(&model, &SE3Pose::identity(), &q);
        assert!(report.colliding);
        let base_idx = model.link_index("base").unwrap();
        assert!(
            report.pairs.iter().any(|p| p.link_a == base_idx || p.link_b == base_idx),
            "expected a torso contact, got {:?}",
            report.pairs
        );
        for pair in &report.pairs {
            assert!(pair.penetration > 0.0);
        }
    }

    #[test]
    fn report_is_invariant_under_rigid_base_change() {
        let model = RobotModel::bundled();
        let mut rng = crate::rng::seed_stream(3, "collision-invariance");
        for _ in 0..100 {
            let mut q = model.default_config();
            for i in 0..18 {
                let (lo, hi) = model.joint_limits()[i];
                q[i] = rng.gen_range(lo..hi);
            }
            let identity_report = self_collision(&model, &SE3Pose::identity(), &q);
            let axis = Unit::new_normalize(Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0f64),
            ));
            let base = SE3Pose::new(
                Vector3::new(
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                ),
                UnitQuaternion::from_axis_angle(&axis, rng.gen_range(-3.0..3.0)),
            );
            let moved_report = self_collision(&model, &base, &q);
            assert_eq!(identity_report.colliding, moved_report.colliding);
            let keys = |r: &CollisionReport| -> Vec<(usize, usize)> {
                r.pairs.iter().map(|p| (p.link_a, p.link_b)).collect()
            };
            assert_eq!(keys(&identity_report), keys(&moved_report));
        }
    }

    #[test]
    fn clearance_boundary_is_inclusive() {
        let field = generate_terrain(TerrainKind::Flat, 0.0, 1, 4.0, None).unwrap();
        let map = build_coarse_map(&field);
        let at = |z: f64| SE3Pose::from_translation(0.0, 0.0, z);
        assert!(terrain_clearance(&at(0.081), &map, 0.08).unwrap());
        assert!(terrain_clearance(&at(0.08), &map, 0.08).unwrap());
        assert!(!terrain_clearance(&at(0.0799), &map, 0.08).unwrap());
    }

    #[test]
    fn clearance_rejects_out_of_bounds_queries() {
        let field = generate_terrain(TerrainKind::Flat, 0.0, 1, 4.0, None).unwrap();
        let map = build_coarse_map(&field);
        let pose = SE3Pose::from_translation(99.0, 0.0, 1.0);
        let err = terrain_clearance(&pose, &map, 0.08).unwrap_err();
        assert!(err.to_string().contains("99.000"), "{err}");
    }
}
