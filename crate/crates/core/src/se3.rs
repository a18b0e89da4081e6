//! Rigid poses in SE(3).
//!
//! Quaternions are stored scalar-first and hemisphere-normalized: after any
//! construction the scalar component is non-negative, which removes the
//! double-cover ambiguity from serialized data and from tests.

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// A rigid pose: position in meters plus a unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SE3Pose {
    position: Vector3<f64>,
    orientation: UnitQuaternion<f64>,
}

/// Forces the scalar component non-negative. For the w == 0 boundary the sign
/// of the first nonzero vector component decides, so canonicalization is total.
fn canonicalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let c = q.coords; // [x, y, z, w]
    let flip = if c.w != 0.0 {
        c.w < 0.0
    } else if c.x != 0.0 {
        c.x < 0.0
    } else if c.y != 0.0 {
        c.y < 0.0
    } else {
        c.z < 0.0
    };
    if flip {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

impl SE3Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation: canonicalize(orientation),
        }
    }

    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    /// Builds a pose from position and scalar-first quaternion components.
    /// The quaternion is normalized, so slightly denormal inputs are accepted.
    pub fn from_parts(position: [f64; 3], wxyz: [f64; 4]) -> Self {
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            wxyz[0], wxyz[1], wxyz[2], wxyz[3],
        ));
        Self::new(Vector3::new(position[0], position[1], position[2]), q)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn position(&self) -> Vector3<f64> {
        self.position
    }

    pub fn orientation(&self) -> UnitQuaternion<f64> {
        self.orientation
    }

    /// Scalar-first quaternion components [w, x, y, z].
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let c = self.orientation.coords;
        [c.w, c.x, c.y, c.z]
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &SE3Pose) -> SE3Pose {
        SE3Pose::new(
            self.position + self.orientation * other.position,
            self.orientation * other.orientation,
        )
    }

    pub fn inverse(&self) -> SE3Pose {
        let inv_rot = self.orientation.inverse();
        SE3Pose::new(-(inv_rot * self.position), inv_rot)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    pub fn rotate_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * v
    }

    /// Geodesic rotation angle to `other`, radians in [0, pi].
    pub fn rotation_angle_to(&self, other: &SE3Pose) -> f64 {
        self.orientation.angle_to(&other.orientation)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
    }
}

impl Default for SE3Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Serialized form: `{"position": [x,y,z], "orientation": [w,x,y,z]}`.
#[derive(Serialize, Deserialize)]
struct SE3PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl Serialize for SE3Pose {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SE3PoseRepr {
            position: [self.position.x, self.position.y, self.position.z],
            orientation: self.quaternion_wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SE3Pose {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = SE3PoseRepr::deserialize(deserializer)?;
        let q = nalgebra::Quaternion::new(
            repr.orientation[0],
            repr.orientation[1],
            repr.orientation[2],
            repr.orientation[3],
        );
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            return Err(serde::de::Error::custom(format!(
                "quaternion norm {norm} too far from 1"
            )));
        }
        Ok(SE3Pose::from_parts(repr.position, repr.orientation))
    }
}
