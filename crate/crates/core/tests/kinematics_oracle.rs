//! Forward kinematics cross-checked against an independent 4x4 homogeneous
//! matrix chain. The oracle builds its matrices from scratch (quaternion to
//! matrix, Rodrigues axis-angle) and composes them link by link, sharing no
//! code with the library's pose algebra.

use kinenv_core::robot_model::{JointKind, JointVector, RobotModel};
use kinenv_core::se3::SE3Pose;

#[derive(Clone, Copy)]
struct Mat4([[f64; 4]; 4]);

impl Mat4 {
    fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Mat4(m)
    }

    fn mul(&self, other: &Mat4) -> Mat4 {
        let mut out = [[0.0; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += self.0[r][k] * other.0[k][c];
                }
                out[r][c] = acc;
            }
        }
        Mat4(out)
    }

    fn from_quaternion_translation(wxyz: [f64; 4], t: [f64; 3]) -> Mat4 {
        let [w, x, y, z] = wxyz;
        let mut m = Mat4::identity();
        m.0[0][0] = 1.0 - 2.0 * (y * y + z * z);
        m.0[0][1] = 2.0 * (x * y - w * z);
        m.0[0][2] = 2.0 * (x * z + w * y);
        m.0[1][0] = 2.0 * (x * y + w * z);
        m.0[1][1] = 1.0 - 2.0 * (x * x + z * z);
        m.0[1][2] = 2.0 * (y * z - w * x);
        m.0[2][0] = 2.0 * (x * z - w * y);
        m.0[2][1] = 2.0 * (y * z + w * x);
        m.0[2][2] = 1.0 - 2.0 * (x * x + y * y);
        m.0[0][3] = t[0];
        m.0[1][3] = t[1];
        m.0[2][3] = t[2];
        m
    }

    /// Rodrigues rotation about a unit axis.
    fn from_axis_angle(axis: [f64; 3], angle: f64) -> Mat4 {
        let (s, c) = angle.sin_cos();
        let one_c = 1.0 - c;
        let [ux, uy, uz] = axis;
        let mut m = Mat4::identity();
        m.0[0][0] = c + ux * ux * one_c;
        m.0[0][1] = ux * uy * one_c - uz * s;
        m.0[0][2] = ux * uz * one_c + uy * s;
        m.0[1][0] = uy * ux * one_c + uz * s;
        m.0[1][1] = c + uy * uy * one_c;
        m.0[1][2] = uy * uz * one_c - ux * s;
        m.0[2][0] = uz * ux * one_c - uy * s;
        m.0[2][1] = uz * uy * one_c + ux * s;
        m.0[2][2] = c + uz * uz * one_c;
        m
    }

    fn translation(&self) -> [f64; 3] {
        [self.0[0][3], self.0[1][3], self.0[2][3]]
    }
}

/// Walks the kinematic tree with plain matrix products.
fn oracle_link_matrices(model: &RobotModel, base: &SE3Pose, q: &JointVector) -> Vec<Mat4> {
    let base_mat = Mat4::from_quaternion_translation(base.quaternion_wxyz(), {
        let p = base.position();
        [p.x, p.y, p.z]
    });
    let mut mats: Vec<Mat4> = Vec::with_capacity(model.links().len());
    for link in model.links() {
        let mat = match link.parent {
            None => base_mat,
            Some(p) => {
                let lp = link.local_transform.position();
                let local = Mat4::from_quaternion_translation(
                    link.local_transform.quaternion_wxyz(),
                    [lp.x, lp.y, lp.z],
                );
                let fixed = mats[p].mul(&local);
                match &link.joint {
                    JointKind::Fixed => fixed,
                    JointKind::Revolute { axis, index } => {
                        let a = axis.into_inner();
                        fixed.mul(&Mat4::from_axis_angle([a.x, a.y, a.z], q[*index]))
                    }
                }
            }
        };
        mats.push(mat);
    }
    mats
}

/// Frobenius distance between the oracle rotation block and the pose's
/// rotation matrix; linear in the angle error, so it resolves below 1e-9.
fn rotation_frobenius_distance(mat: &Mat4, pose: &SE3Pose) -> f64 {
    let rm = pose.orientation().to_rotation_matrix();
    let ri = rm.matrix();
    let mut acc = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            let d = mat.0[r][c] - ri[(r, c)];
            acc += d * d;
        }
    }
    acc.sqrt()
}

#[test]
fn matrix_chain_oracle_matches_fk_on_random_configs() {
    let model = RobotModel::bundled();
    let mut rng = kinenv_core::rng::seed_stream(100, "fk-oracle");
    use rand::Rng;
    for trial in 0..50 {
        let mut q = JointVector::zeros();
        for i in 0..18 {
            let (lo, hi) = model.joint_limits()[i];
            q[i] = rng.gen_range(lo..hi);
        }
        let base = SE3Pose::from_parts(
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ],
            {
                let axis: [f64; 3] = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                let n = (axis[0].powi(2) + axis[1].powi(2) + axis[2].powi(2)).sqrt();
                let half = rng.gen_range(-1.5..1.5f64);
                let (s, c) = half.sin_cos();
                [c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n]
            },
        );
        let oracle = oracle_link_matrices(&model, &base, &q);
        let fk = model.forward_kinematics(&base, &q);
        for (i, (mat, pose)) in oracle.iter().zip(&fk).enumerate() {
            let t = mat.translation();
            let p = pose.position();
            let dp = ((t[0] - p.x).powi(2) + (t[1] - p.y).powi(2) + (t[2] - p.z).powi(2)).sqrt();
            assert!(dp < 1e-9, "trial {trial} link {i}: position off by {dp}");
            let da = rotation_frobenius_distance(mat, pose);
            assert!(da < 1e-9, "trial {trial} link {i}: rotation off by {da}");
        }
    }
}

#[test]
fn default_config_ee_pose_matches_frozen_golden_value() {
    let model = RobotModel::bundled();
    let q = model.default_config();
    // Golden pose recorded from the matrix-chain oracle at first build.
    let golden = oracle_link_matrices(&model, &SE3Pose::identity(), &q)[model.ee_link_id()];
    let ee = model.ee_pose_in_base(&q);
    let t = golden.translation();
    let p = ee.position();
    assert!(
        ((t[0] - p.x).powi(2) + (t[1] - p.y).powi(2) + (t[2] - p.z).powi(2)).sqrt() < 1e-9
    );
    // The frozen numbers below pin the bundled geometry itself: any edit to
    // the description shows up here first.
    let expected = [
        0.7831939822548201,
        0.0,
        0.5273217327951377,
    ];
    for k in 0..3 {
        assert!(
            (t[k] - expected[k]).abs() < 1e-9,
            "golden EE position drifted: {:?} vs {:?}",
            t,
            expected
        );
    }
}
