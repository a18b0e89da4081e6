//! Pose representations for end-effector commands.
//!
//! The primary encoding attaches three vertices of a 0.3 m cube rigidly to the
//! pose; a pose delta is then just the 9-vector of keypoint differences.
//! Three competitor encodings (quaternion, ZYX Euler, 6D rotation) are
//! implemented with the same delta interface, plus a continuity audit that
//! quantifies how each payload behaves along smooth orientation paths.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::se3::SE3Pose;

/// Side length of the keypoint cube, meters.
pub const CUBE_SIDE: f64 = 0.3;

/// Canonical local cube vertices (unit cube corners, before the s/2 scale).
/// The triple is mutually equidistant, which conditions the reconstruction.
pub const CANONICAL_VERTICES: [[f64; 3]; 3] =
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0]];

fn local_vertices() -> [Vector3<f64>; 3] {
    CANONICAL_VERTICES.map(|v| Vector3::new(v[0], v[1], v[2]) * (CUBE_SIDE / 2.0))
}

/// Three cube-vertex positions rigidly attached to a pose, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointTriple {
    pub k0: [f64; 3],
    pub k1: [f64; 3],
    pub k2: [f64; 3],
}

impl KeypointTriple {
    pub fn points(&self) -> [Vector3<f64>; 3] {
        [self.k0, self.k1, self.k2].map(|k| Vector3::new(k[0], k[1], k[2]))
    }

    /// Per-keypoint Euclidean distances to another triple.
    pub fn distances_to(&self, other: &KeypointTriple) -> [f64; 3] {
        let a = self.points();
        let b = other.points();
        [0, 1, 2].map(|i| (a[i] - b[i]).norm())
    }

    /// Flattened `other - self` differences, k0 first.
    pub fn delta_to(&self, other: &KeypointTriple) -> [f64; 9] {
        let a = self.points();
        let b = other.points();
        let mut out = [0.0; 9];
        for i in 0..3 {
            let d = b[i] - a[i];
            out[3 * i] = d.x;
            out[3 * i + 1] = d.y;
            out[3 * i + 2] = d.z;
        }
        out
    }
}

/// Cube keypoints of a pose: `k_i = p + R * (s/2) * v_i`.
pub fn keypoints_of(pose: &SE3Pose) -> KeypointTriple {
    let vs = local_vertices();
    let k = vs.map(|v| pose.transform_point(&v));
    KeypointTriple {
        k0: [k[0].x, k[0].y, k[0].z],
        k1: [k[1].x, k[1].y, k[1].z],
        k2: [k[2].x, k[2].y, k[2].z],
    }
}

/// Rigidity tolerance for reconstruction, meters.
pub const RIGIDITY_TOLERANCE: f64 = 1e-6;

/// Recovers the pose from its keypoint triple (orthogonal Procrustes on the
/// three correspondences). Fails if the pairwise distances deviate from the
/// canonical cube geometry by more than [`RIGIDITY_TOLERANCE`].
pub fn pose_from_keypoints(kp: &KeypointTriple) -> Result<SE3Pose> {
    let locals = local_vertices();
    let world = kp.points();

    let canon = (locals[0] - locals[1]).norm();
    let mut max_deviation: f64 = 0.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        max_deviation = max_deviation.max(((world[i] - world[j]).norm() - canon).abs());
    }
    if max_deviation > RIGIDITY_TOLERANCE {
        return Err(Error::Rigidity {
            max_deviation,
            tolerance: RIGIDITY_TOLERANCE,
        });
    }

    let l_bar = (locals[0] + locals[1] + locals[2]) / 3.0;
    let w_bar = (world[0] + world[1] + world[2]) / 3.0;
    let mut h = Matrix3::zeros();
    for i in 0..3 {
        h += (locals[i] - l_bar) * (world[i] - w_bar).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd of 3x3 produces u");
    let v = svd.v_t.expect("svd of 3x3 produces v_t").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let translation = w_bar - rotation * l_bar;
    Ok(SE3Pose::new(translation, rotation))
}

/// Which delta encoding a payload uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReprKind {
    Keypoint,
    Quaternion,
    Euler,
    SixD,
}

impl ReprKind {
    pub const ALL: [ReprKind; 4] = [
        ReprKind::Keypoint,
        ReprKind::Quaternion,
        ReprKind::Euler,
        ReprKind::SixD,
    ];

    pub fn payload_len(&self) -> usize {
        match self {
            ReprKind::Keypoint => 9,
            ReprKind::Quaternion => 7,
            ReprKind::Euler => 6,
            ReprKind::SixD => 9,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReprKind::Keypoint => "keypoint",
            ReprKind::Quaternion => "quaternion",
            ReprKind::Euler => "euler",
            ReprKind::SixD => "six_d",
        }
    }
}

/// A command-minus-measured pose difference in one of the four encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseDelta {
    pub kind: ReprKind,
    pub payload: Vec<f64>,
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// First two rotation-matrix columns, stacked column-major.
pub fn six_d_of(q: &UnitQuaternion<f64>) -> [f64; 6] {
    let m = q.to_rotation_matrix();
    let m = m.matrix();
    [m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]]
}

/// Gram-Schmidt reconstruction of a rotation from its 6D encoding.
pub fn rotation_from_six_d(v: &[f64; 6]) -> UnitQuaternion<f64> {
    let a1 = Vector3::new(v[0], v[1], v[2]);
    let a2 = Vector3::new(v[3], v[4], v[5]);
    let b1 = a1.normalize();
    let b2 = (a2 - b1 * b1.dot(&a2)).normalize();
    let b3 = b1.cross(&b2);
    let m = Matrix3::from_columns(&[b1, b2, b3]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// Hemisphere-normalizes a relative quaternion to scalar >= 0.
fn hemisphere(q: UnitQuaternion<f64>) -> [f64; 4] {
    let c = q.coords;
    if c.w < 0.0 {
        [-c.w, -c.x, -c.y, -c.z]
    } else {
        [c.w, c.x, c.y, c.z]
    }
}

/// Encodes the command-minus-measured difference in the requested representation.
pub fn encode_delta(kind: ReprKind, measured: &SE3Pose, command: &SE3Pose) -> PoseDelta {
    let dp = command.position() - measured.position();
    let payload = match kind {
        ReprKind::Keypoint => keypoints_of(measured)
            .delta_to(&keypoints_of(command))
            .to_vec(),
        ReprKind::Quaternion => {
            let rel = hemisphere(command.orientation() * measured.orientation().inverse());
            vec![dp.x, dp.y, dp.z, rel[0], rel[1], rel[2], rel[3]]
        }
        ReprKind::Euler => {
            let (mr, mp, my) = measured.orientation().euler_angles();
            let (cr, cp, cy) = command.orientation().euler_angles();
            vec![
                dp.x,
                dp.y,
                dp.z,
                wrap_angle(cr - mr),
                wrap_angle(cp - mp),
                wrap_angle(cy - my),
            ]
        }
        ReprKind::SixD => {
            let m = six_d_of(&measured.orientation());
            let c = six_d_of(&command.orientation());
            let mut out = vec![dp.x, dp.y, dp.z];
            out.extend((0..6).map(|i| c[i] - m[i]));
            out
        }
    };
    debug_assert_eq!(payload.len(), kind.payload_len());
    PoseDelta { kind, payload }
}

/// Position error (meters) and orientation error (degrees, in [0, 180]).
pub fn pose_errors(measured: &SE3Pose, command: &SE3Pose) -> (f64, f64) {
    let pos = (command.position() - measured.position()).norm();
    let rot = measured.rotation_angle_to(command).to_degrees();
    (pos, rot)
}

pub mod audit;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Unit;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_pose(rng: &mut impl Rng) -> SE3Pose {
        let q = random_quaternion(rng);
        SE3Pose::new(
            Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ),
            q,
        )
    }

    pub(crate) fn random_quaternion(rng: &mut impl Rng) -> UnitQuaternion<f64> {
        // Shoemake's subgroup algorithm: uniform on SO(3).
        let u1: f64 = rng.gen_range(0.0..1.0);
        let u2: f64 = rng.gen_range(0.0..2.0 * PI);
        let u3: f64 = rng.gen_range(0.0..2.0 * PI);
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(
            a * u2.sin(),
            a * u2.cos(),
            b * u3.sin(),
            b * u3.cos(),
        ))
    }

    #[test]
    fn identity_pose_keypoints_match_definition() {
        let kp = keypoints_of(&SE3Pose::identity());
        assert_eq!(kp.k0, [0.15, 0.15, 0.15]);
        assert_eq!(kp.k1, [0.15, -0.15, -0.15]);
        assert_eq!(kp.k2, [-0.15, 0.15, -0.15]);
    }

    #[test]
    fn keypoints_shift_with_pure_translation() {
        let p = SE3Pose::from_translation(0.3, -0.1, 2.0);
        let kp = keypoints_of(&p);
        let base = keypoints_of(&SE3Pose::identity());
        for (a, b) in kp.points().iter().zip(base.points().iter()) {
            let d = a - b;
            assert_relative_eq!(d.x, 0.3, epsilon = 1e-12);
            assert_relative_eq!(d.y, -0.1, epsilon = 1e-12);
            assert_relative_eq!(d.z, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn keypoint_displacement_follows_chord_formula() {
        let mut rng = crate::rng::seed_stream(21, "chord");
        for _ in 0..200 {
            let pose = random_pose(&mut rng);
            let axis = Unit::new_normalize(Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0f64),
            ));
            let theta: f64 = rng.gen_range(-PI..PI);
            let rot = UnitQuaternion::from_axis_angle(&axis, theta);
            let rotated = SE3Pose::new(pose.position(), rot * pose.orientation());
            let a = keypoints_of(&pose).points();
            let b = keypoints_of(&rotated).points();
            for i in 0..3 {
                let w = a[i] - pose.position();
                let r_axis = (w - axis.into_inner() * w.dot(&axis)).norm();
                let expect = 2.0 * r_axis * (theta / 2.0).sin().abs();
                assert_relative_eq!((b[i] - a[i]).norm(), expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn reconstruction_round_trips_identity() {
        let pose = pose_from_keypoints(&keypoints_of(&SE3Pose::identity())).unwrap();
        assert!(pose.position().norm() < 1e-12);
        assert!(pose.rotation_angle_to(&SE3Pose::identity()) < 1e-12);
    }

    #[test]
    fn reconstruction_round_trips_random_poses() {
        let mut rng = crate::rng::seed_stream(8, "procrustes");
        for _ in 0..2000 {
            let pose = random_pose(&mut rng);
            let back = pose_from_keypoints(&keypoints_of(&pose)).unwrap();
            assert!((back.position() - pose.position()).norm() < 1e-9);
            assert!(back.rotation_angle_to(&pose) < 1e-9);
        }
    }

    #[test]
    fn collinear_points_fail_rigidity() {
        let kp = KeypointTriple {
            k0: [0.0, 0.0, 0.0],
            k1: [0.1, 0.0, 0.0],
            k2: [0.2, 0.0, 0.0],
        };
        match pose_from_keypoints(&kp) {
            Err(Error::Rigidity { max_deviation, .. }) => assert!(max_deviation > 0.01),
            other => panic!("expected rigidity error, got {other:?}"),
        }
    }

    #[test]
    fn zero_delta_iff_identical_pose() {
        let mut rng = crate::rng::seed_stream(9, "delta-zero");
        for _ in 0..500 {
            let pose = random_pose(&mut rng);
            let delta = encode_delta(ReprKind::Keypoint, &pose, &pose);
            assert!(delta.payload.iter().all(|v| v.abs() < 1e-12));
            let q = encode_delta(ReprKind::Quaternion, &pose, &pose);
            assert!(q.payload[..3].iter().all(|v| v.abs() < 1e-12));
            assert_relative_eq!(q.payload[3], 1.0, epsilon = 1e-12);
            assert!(q.payload[4..].iter().all(|v| v.abs() < 1e-9));

            // Conversely a vanishing keypoint delta forces vanishing pose error.
            let other = random_pose(&mut rng);
            let d = encode_delta(ReprKind::Keypoint, &pose, &other);
            let norm: f64 = d.payload.iter().map(|v| v * v).sum::<f64>().sqrt();
            let (ep, er) = pose_errors(&pose, &other);
            if norm < 1e-9 {
                assert!(ep < 1e-9 && er < 1e-7);
            }
            if ep < 1e-12 && er < 1e-12 {
                assert!(norm < 1e-9);
            }
        }
    }

    #[test]
    fn keypoint_delta_of_pure_translation_repeats_t() {
        let mut rng = crate::rng::seed_stream(10, "delta-translation");
        let pose = random_pose(&mut rng);
        let t = Vector3::new(0.2, -0.4, 0.05);
        let command = SE3Pose::new(pose.position() + t, pose.orientation());
        let delta = encode_delta(ReprKind::Keypoint, &pose, &command);
        for i in 0..3 {
            assert_relative_eq!(delta.payload[3 * i], t.x, epsilon = 1e-12);
            assert_relative_eq!(delta.payload[3 * i + 1], t.y, epsilon = 1e-12);
            assert_relative_eq!(delta.payload[3 * i + 2], t.z, epsilon = 1e-12);
        }
    }

    #[test]
    fn euler_delta_wraps_across_yaw_seam() {
        let measured = SE3Pose::new(
            Vector3::zeros(),
            UnitQuaternion::from_euler_angles(0.0, 0.0, PI - 0.05),
        );
        let command = SE3Pose::new(
            Vector3::zeros(),
            UnitQuaternion::from_euler_angles(0.0, 0.0, -PI + 0.05),
        );
        let delta = encode_delta(ReprKind::Euler, &measured, &command);
        assert!(delta.payload[5].abs() < PI, "wrapped yaw diff {}", delta.payload[5]);
        assert_relative_eq!(delta.payload[5].abs(), 0.1, epsilon = 1e-9);
    }

    #[test]
    fn pose_errors_basics() {
        let a = SE3Pose::identity();
        assert_eq!(pose_errors(&a, &a), (0.0, 0.0));
        let b = SE3Pose::from_translation(0.1, 0.0, 0.0);
        let (p, r) = pose_errors(&a, &b);
        assert_relative_eq!(p, 0.1, epsilon = 1e-12);
        assert_relative_eq!(r, 0.0, epsilon = 1e-12);
        let c = SE3Pose::new(
            Vector3::zeros(),
            UnitQuaternion::from_axis_angle(&Vector3::y_axis(), PI / 2.0),
        );
        let (p, r) = pose_errors(&a, &c);
        assert_relative_eq!(p, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r, 90.0, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn six_d_round_trip(u1 in 0.0f64..1.0, u2 in 0.0f64..(2.0 * PI), u3 in 0.0f64..(2.0 * PI)) {
            let a = (1.0 - u1).sqrt();
            let b = u1.sqrt();
            let q = UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(
                a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos(),
            ));
            let back = rotation_from_six_d(&six_d_of(&q));
            prop_assert!(back.angle_to(&q) < 1e-9);
        }

        #[test]
        fn wrap_angle_lands_in_half_open_interval(x in -50.0f64..50.0) {
            let w = wrap_angle(x);
            prop_assert!(w > -PI && w <= PI);
            // Same angle modulo 2 pi.
            prop_assert!(((x - w) / (2.0 * PI)).round() * 2.0 * PI - (x - w) < 1e-9);
        }
    }
}
