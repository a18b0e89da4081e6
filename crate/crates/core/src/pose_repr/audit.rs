//! Continuity audit for the four delta encodings.
//!
//! Each audited path sweeps the measured orientation along the geodesic
//! between two random orientations while the command stays fixed, and records
//! the largest per-step change of every payload. Keypoint and 6D payloads are
//! Lipschitz in the swept angle; Euler payloads jump near the pitch = +-pi/2
//! singular cone and at +-pi wrap seams; the quaternion payload is only
//! continuous if it is hemisphere-normalized against the double cover of the
//! measured quaternion.

use nalgebra::UnitQuaternion;
use rand::Rng;
use serde::Serialize;

use super::{encode_delta, ReprKind};
use crate::rng::seed_stream;
use crate::se3::SE3Pose;

/// Worst-case step sizes observed along one orientation path.
#[derive(Debug, Clone, Serialize)]
pub struct PathAudit {
    pub path_index: usize,
    /// Geodesic length of the measured sweep, radians.
    pub total_angle: f64,
    /// Per-step geodesic increment, radians.
    pub step_angle: f64,
    pub max_step_keypoint: f64,
    pub max_step_quaternion: f64,
    /// Quaternion payload built from a canonically re-extracted (scalar >= 0)
    /// measured quaternion without payload normalization.
    pub max_step_quaternion_raw: f64,
    pub max_step_euler: f64,
    pub max_step_six_d: f64,
    /// max over steps of step_norm / step_angle, keypoint payload.
    pub lipschitz_keypoint: f64,
    /// max over steps of step_norm / step_angle, 6D payload.
    pub lipschitz_six_d: f64,
    /// Smallest distance of the pitch angle from +-pi/2 along the path.
    pub min_pitch_margin: f64,
    /// True when the path passes the singular cone closer than half a step.
    pub crosses_gimbal_band: bool,
    /// True when the measured quaternion crosses the w = 0 hemisphere seam.
    pub crosses_hemisphere: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityAudit {
    pub steps_per_path: usize,
    pub paths: Vec<PathAudit>,
}

impl ContinuityAudit {
    /// Largest Lipschitz ratio over all paths for the continuous encodings.
    pub fn fitted_lipschitz(&self) -> f64 {
        self.paths
            .iter()
            .map(|p| p.lipschitz_keypoint.max(p.lipschitz_six_d))
            .fold(0.0, f64::max)
    }

    pub fn paths_with_euler_jump(&self) -> usize {
        self.paths
            .iter()
            .filter(|p| p.max_step_euler > std::f64::consts::FRAC_PI_2)
            .count()
    }

    pub fn gimbal_crossing_paths(&self) -> usize {
        self.paths.iter().filter(|p| p.crosses_gimbal_band).count()
    }
}

/// Audits one path: measured sweeps `a -> b`, command fixed at `c`.
pub fn audit_path(
    path_index: usize,
    a: &UnitQuaternion<f64>,
    b: &UnitQuaternion<f64>,
    c: &UnitQuaternion<f64>,
    steps: usize,
) -> PathAudit {
    assert!(steps >= 2, "a path needs at least two samples");
    let rel = b * a.inverse();
    let scaled_axis = rel.scaled_axis();
    let total_angle = rel.angle();
    let step_angle = total_angle / steps as f64;
    let command = SE3Pose::new(nalgebra::Vector3::zeros(), *c);

    let measured_at = |i: usize| -> UnitQuaternion<f64> {
        let alpha = i as f64 / steps as f64;
        UnitQuaternion::from_scaled_axis(scaled_axis * alpha) * a
    };

    let mut prev: Option<[Vec<f64>; 4]> = None;
    let mut prev_raw: Option<[f64; 4]> = None;
    let mut max_step = [0.0f64; 4];
    let mut max_step_raw = 0.0f64;
    let mut min_pitch_margin = f64::INFINITY;
    let mut crosses_hemisphere = false;
    let mut prev_w_sign = 0.0f64;

    for i in 0..=steps {
        let q = measured_at(i);
        let measured = SE3Pose::new(nalgebra::Vector3::zeros(), q);
        let payloads = [
            encode_delta(ReprKind::Keypoint, &measured, &command).payload,
            encode_delta(ReprKind::Quaternion, &measured, &command).payload,
            encode_delta(ReprKind::Euler, &measured, &command).payload,
            encode_delta(ReprKind::SixD, &measured, &command).payload,
        ];

        // Raw variant: measured quaternion re-extracted from its rotation
        // matrix (canonical scalar >= 0 sign), relative product left unnormalized.
        let q_meas_canon = canonical_extraction(&q);
        let rel_raw = c.into_inner() * q_meas_canon.conjugate();
        let raw = [rel_raw.w, rel_raw.i, rel_raw.j, rel_raw.k];

        let (_, pitch, _) = q.euler_angles();
        min_pitch_margin = min_pitch_margin.min(std::f64::consts::FRAC_PI_2 - pitch.abs());
        let w = q.coords.w;
        if i > 0 && w.signum() != prev_w_sign && w != 0.0 {
            crosses_hemisphere = true;
        }
        prev_w_sign = w.signum();

        if let Some(prev_payloads) = &prev {
            for k in 0..4 {
                let step: f64 = payloads[k]
                    .iter()
                    .zip(prev_payloads[k].iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                max_step[k] = max_step[k].max(step);
            }
        }
        if let Some(pr) = &prev_raw {
            let step: f64 = raw
                .iter()
                .zip(pr.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            max_step_raw = max_step_raw.max(step);
        }
        prev = Some(payloads);
        prev_raw = Some(raw);
    }

    // Below half a per-step increment from the singular cone, azimuth sweeps
    // faster than pi/2 per sample and the Euler payload must jump.
    let gimbal_band = 0.5 * step_angle;
    PathAudit {
        path_index,
        total_angle,
        step_angle,
        max_step_keypoint: max_step[0],
        max_step_quaternion: max_step[1],
        max_step_quaternion_raw: max_step_raw,
        max_step_euler: max_step[2],
        max_step_six_d: max_step[3],
        lipschitz_keypoint: if step_angle > 0.0 { max_step[0] / step_angle } else { 0.0 },
        lipschitz_six_d: if step_angle > 0.0 { max_step[3] / step_angle } else { 0.0 },
        min_pitch_margin,
        crosses_gimbal_band: min_pitch_margin < gimbal_band,
        crosses_hemisphere,
    }
}

fn canonical_extraction(q: &UnitQuaternion<f64>) -> nalgebra::Quaternion<f64> {
    let m = q.to_rotation_matrix();
    let back = UnitQuaternion::from_rotation_matrix(&m).into_inner();
    if back.w < 0.0 {
        -back
    } else {
        back
    }
}

/// Uniform random rotation (Shoemake's method).
pub fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    use std::f64::consts::PI;
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

/// Runs the audit over `n_paths` random (start, end, command) orientation
/// triples with `steps` samples per path (dt = 1/steps).
pub fn continuity_audit(n_paths: usize, steps: usize, seed: u64) -> ContinuityAudit {
    let mut rng = seed_stream(seed, "repr-audit");
    let triples: Vec<[UnitQuaternion<f64>; 3]> = (0..n_paths)
        .map(|_| {
            [
                random_rotation(&mut rng),
                random_rotation(&mut rng),
                random_rotation(&mut rng),
            ]
        })
        .collect();

    #[cfg(feature = "parallel")]
    let paths: Vec<PathAudit> = {
        use rayon::prelude::*;
        triples
            .par_iter()
            .enumerate()
            .map(|(i, t)| audit_path(i, &t[0], &t[1], &t[2], steps))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let paths: Vec<PathAudit> = triples
        .iter()
        .enumerate()
        .map(|(i, t)| audit_path(i, &t[0], &t[1], &t[2], steps))
        .collect();

    ContinuityAudit {
        steps_per_path: steps,
        paths,
    }
}

/// Builds a path whose body-x axis passes within `offset` radians of the
/// vertical, i.e. a forced near-gimbal-lock sweep for tests and demos.
pub fn near_gimbal_path(offset: f64) -> (UnitQuaternion<f64>, UnitQuaternion<f64>) {
    use std::f64::consts::FRAC_PI_2;
    let tilt = UnitQuaternion::from_axis_angle(&nalgebra::Vector3::z_axis(), offset);
    let a = UnitQuaternion::from_axis_angle(&nalgebra::Vector3::y_axis(), -FRAC_PI_2 - 1.2) * tilt;
    let b = UnitQuaternion::from_axis_angle(&nalgebra::Vector3::y_axis(), -FRAC_PI_2 + 1.2) * tilt;
    (a, b)
}
