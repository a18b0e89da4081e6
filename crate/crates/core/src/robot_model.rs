//! Kinematic model of a quadruped with a 6-DoF arm.
//!
//! The robot is described by a single JSON document (see `data/default_robot.json`
//! and the schema notes in the repository README): `links[]` names the rigid
//! links, `joints[]` connects them parent-first with fixed origins and revolute
//! axes, `limits[]` and `default_config[]` are aligned with the actuated-joint
//! order, and `collision[]` attaches capsule/sphere primitives to links.
//!
//! Actuated order is canonical: LF, RF, LH, RH legs (hip-AA, hip-FE, knee),
//! then the six arm joints base-to-wrist. All lengths are meters, all angles
//! radians.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::{Matrix3xX, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::se3::SE3Pose;

/// Number of actuated joints: 12 leg + 6 arm.
pub const NUM_JOINTS: usize = 18;
/// Leg joints occupy indices `0..NUM_LEG_JOINTS` of a [`JointVector`].
pub const NUM_LEG_JOINTS: usize = 12;

/// 18 joint angles in canonical legs-then-arm order, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointVector([f64; NUM_JOINTS]);

impl JointVector {
    pub fn new(values: [f64; NUM_JOINTS]) -> Self {
        Self(values)
    }

    pub fn zeros() -> Self {
        Self([0.0; NUM_JOINTS])
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; NUM_JOINTS] = values.try_into().map_err(|_| {
            Error::InvalidArgument(format!(
                "joint vector needs exactly {NUM_JOINTS} values, got {}",
                values.len()
            ))
        })?;
        Ok(Self(arr))
    }

    pub fn values(&self) -> &[f64; NUM_JOINTS] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64; NUM_JOINTS] {
        &mut self.0
    }

    /// The 12 leg joint angles.
    pub fn leg_joints(&self) -> &[f64] {
        &self.0[..NUM_LEG_JOINTS]
    }

    /// The 6 arm joint angles.
    pub fn arm_joints(&self) -> &[f64] {
        &self.0[NUM_LEG_JOINTS..]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for JointVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for JointVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// How a link is attached to its parent.
#[derive(Debug, Clone)]
pub enum JointKind {
    Fixed,
    /// Revolute joint about `axis` (link frame), driven by actuated joint `index`.
    Revolute {
        axis: Unit<Vector3<f64>>,
        index: usize,
    },
}

/// One rigid link of the kinematic tree.
#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    /// Parent link index; `None` only for the floating-base root.
    pub parent: Option<usize>,
    /// Fixed transform from the parent frame to this link's joint frame.
    pub local_transform: SE3Pose,
    pub joint: JointKind,
}

/// Collision geometry attached to a link, expressed in the link frame.
#[derive(Debug, Clone)]
pub struct CollisionPrimitive {
    pub link: usize,
    pub offset: Vector3<f64>,
    pub shape: PrimitiveShape,
}

#[derive(Debug, Clone)]
pub enum PrimitiveShape {
    Sphere {
        radius: f64,
    },
    Capsule {
        axis: Unit<Vector3<f64>>,
        radius: f64,
        half_length: f64,
    },
}

impl PrimitiveShape {
    pub fn radius(&self) -> f64 {
        match self {
            PrimitiveShape::Sphere { radius } => *radius,
            PrimitiveShape::Capsule { radius, .. } => *radius,
        }
    }
}

/// Immutable kinematic model; shareable across worker threads.
#[derive(Debug, Clone)]
pub struct RobotModel {
    name: String,
    links: Vec<Link>,
    joint_names: Vec<String>,
    joint_limits: [(f64, f64); NUM_JOINTS],
    default_config: JointVector,
    collision_primitives: Vec<CollisionPrimitive>,
    excluded_pairs: HashSet<(usize, usize)>,
    foot_link_ids: [usize; 4],
    ee_link_id: usize,
    content_hash: String,
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct JointSpec {
    name: String,
    parent: String,
    child: String,
    origin_xyz: [f64; 3],
    #[serde(default)]
    origin_rpy: [f64; 3],
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    axis: Option<[f64; 3]>,
}

#[derive(Deserialize)]
struct CollisionSpec {
    link: String,
    shape: String,
    offset: [f64; 3],
    radius: f64,
    #[serde(default)]
    axis: Option<[f64; 3]>,
    #[serde(default)]
    half_length: Option<f64>,
}

#[derive(Deserialize)]
struct RobotSpec {
    name: String,
    links: Vec<String>,
    joints: Vec<JointSpec>,
    limits: Vec<[f64; 2]>,
    default_config: Vec<f64>,
    collision: Vec<CollisionSpec>,
    #[serde(default)]
    collision_exclude: Vec<[String; 2]>,
    foot_links: Vec<String>,
    ee_link: String,
}

fn unit_axis(path: &str, axis: [f64; 3]) -> Result<Unit<Vector3<f64>>> {
    let v = Vector3::new(axis[0], axis[1], axis[2]);
    let n = v.norm();
    if !(n.is_finite() && n > 1e-9) {
        return Err(Error::validation(path, "axis must be a nonzero vector"));
    }
    Ok(Unit::new_normalize(v))
}

impl RobotModel {
    /// Loads and validates a robot description file.
    pub fn load(path: impl AsRef<Path>) -> Result<RobotModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// The approximate quadruped-plus-arm model shipped with the crate.
    pub fn bundled() -> RobotModel {
        Self::from_json(DEFAULT_ROBOT_JSON, "<bundled>")
            .expect("bundled robot description must validate")
    }

    /// Parses a robot description from a JSON string. `origin` names the
    /// source in error messages.
    pub fn from_json(text: &str, origin: &str) -> Result<RobotModel> {
        let spec: RobotSpec = serde_json::from_str(text).map_err(|source| Error::Parse {
            path: origin.to_string(),
            source,
        })?;
        let content_hash = format!("{:x}", Sha256::digest(text.as_bytes()));
        Self::build(spec, content_hash)
    }

    fn build(spec: RobotSpec, content_hash: String) -> Result<RobotModel> {
        let link_names: HashSet<&str> = spec.links.iter().map(String::as_str).collect();
        if link_names.len() != spec.links.len() {
            return Err(Error::validation("links", "duplicate link name"));
        }

        // The root is the unique link that is never a joint child.
        let children: HashSet<&str> = spec.joints.iter().map(|j| j.child.as_str()).collect();
        for (i, j) in spec.joints.iter().enumerate() {
            for (field, name) in [("parent", &j.parent), ("child", &j.child)] {
                if !link_names.contains(name.as_str()) {
                    return Err(Error::validation(
                        format!("joints[{i}].{field}"),
                        format!("unknown link `{name}`"),
                    ));
                }
            }
        }
        let roots: Vec<&String> = spec
            .links
            .iter()
            .filter(|l| !children.contains(l.as_str()))
            .collect();
        if roots.len() != 1 {
            return Err(Error::validation(
                "links",
                format!(
                    "kinematic tree must have exactly one root, found {:?}",
                    roots
                ),
            ));
        }
        if spec.joints.len() + 1 != spec.links.len() {
            return Err(Error::validation(
                "joints",
                format!(
                    "{} joints cannot connect {} links as a tree",
                    spec.joints.len(),
                    spec.links.len()
                ),
            ));
        }

        let mut links = vec![Link {
            name: roots[0].clone(),
            parent: None,
            local_transform: SE3Pose::identity(),
            joint: JointKind::Fixed,
        }];
        let mut index_of: HashMap<String, usize> = HashMap::new();
        index_of.insert(roots[0].clone(), 0);

        let mut joint_names = Vec::new();
        let mut actuated = 0usize;
        for (i, j) in spec.joints.iter().enumerate() {
            let parent = *index_of.get(&j.parent).ok_or_else(|| {
                Error::validation(
                    format!("joints[{i}].parent"),
                    format!(
                        "link `{}` not defined before its child; joints must be ordered \
                         parent-first (cyclic or dangling structure)",
                        j.parent
                    ),
                )
            })?;
            if index_of.contains_key(&j.child) {
                return Err(Error::validation(
                    format!("joints[{i}].child"),
                    format!("link `{}` already has a parent", j.child),
                ));
            }
            let rot = UnitQuaternion::from_euler_angles(
                j.origin_rpy[0],
                j.origin_rpy[1],
                j.origin_rpy[2],
            );
            let local = SE3Pose::new(
                Vector3::new(j.origin_xyz[0], j.origin_xyz[1], j.origin_xyz[2]),
                rot,
            );
            let joint = match j.kind.as_str() {
                "fixed" => JointKind::Fixed,
                "revolute" => {
                    let axis = j.axis.ok_or_else(|| {
                        Error::validation(
                            format!("joints[{i}].axis"),
                            "revolute joint requires an axis",
                        )
                    })?;
                    let kind = JointKind::Revolute {
                        axis: unit_axis(&format!("joints[{i}].axis"), axis)?,
                        index: actuated,
                    };
                    joint_names.push(j.name.clone());
                    actuated += 1;
                    kind
                }
                other => {
                    return Err(Error::validation(
                        format!("joints[{i}].type"),
                        format!("unknown joint type `{other}`"),
                    ))
                }
            };
            index_of.insert(j.child.clone(), links.len());
            links.push(Link {
                name: j.child.clone(),
                parent: Some(parent),
                local_transform: local,
                joint,
            });
        }

        if actuated != NUM_JOINTS {
            return Err(Error::validation(
                "joints",
                format!("expected {NUM_JOINTS} revolute joints, found {actuated}"),
            ));
        }
        if spec.limits.len() != NUM_JOINTS {
            return Err(Error::validation(
                "limits",
                format!("expected {NUM_JOINTS} limit pairs, found {}", spec.limits.len()),
            ));
        }
        let mut joint_limits = [(0.0, 0.0); NUM_JOINTS];
        for (i, pair) in spec.limits.iter().enumerate() {
            if !(pair[0] < pair[1]) {
                return Err(Error::validation(
                    format!("limits[{i}]"),
                    format!("lower {} must be < upper {}", pair[0], pair[1]),
                ));
            }
            joint_limits[i] = (pair[0], pair[1]);
        }
        let default_config = JointVector::from_slice(&spec.default_config).map_err(|_| {
            Error::validation(
                "default_config",
                format!(
                    "expected {NUM_JOINTS} values, found {}",
                    spec.default_config.len()
                ),
            )
        })?;
        for i in 0..NUM_JOINTS {
            let (lo, hi) = joint_limits[i];
            let q = default_config[i];
            if !(q > lo && q < hi) {
                return Err(Error::validation(
                    format!("default_config[{i}]"),
                    format!("value {q} not strictly inside limits [{lo}, {hi}]"),
                ));
            }
        }

        let mut collision_primitives = Vec::new();
        for (i, c) in spec.collision.iter().enumerate() {
            let link = *index_of.get(&c.link).ok_or_else(|| {
                Error::validation(
                    format!("collision[{i}].link"),
                    format!("unknown link `{}`", c.link),
                )
            })?;
            if !(c.radius.is_finite() && c.radius > 0.0) {
                return Err(Error::validation(
                    format!("collision[{i}].radius"),
                    "radius must be positive",
                ));
            }
            let shape = match c.shape.as_str() {
                "sphere" => PrimitiveShape::Sphere { radius: c.radius },
                "capsule" => {
                    let axis = c.axis.ok_or_else(|| {
                        Error::validation(
                            format!("collision[{i}].axis"),
                            "capsule requires an axis",
                        )
                    })?;
                    let half_length = c.half_length.ok_or_else(|| {
                        Error::validation(
                            format!("collision[{i}].half_length"),
                            "capsule requires half_length",
                        )
                    })?;
                    if !(half_length.is_finite() && half_length > 0.0) {
                        return Err(Error::validation(
                            format!("collision[{i}].half_length"),
                            "half_length must be positive",
                        ));
                    }
                    PrimitiveShape::Capsule {
                        axis: unit_axis(&format!("collision[{i}].axis"), axis)?,
                        radius: c.radius,
                        half_length,
                    }
                }
                other => {
                    return Err(Error::validation(
                        format!("collision[{i}].shape"),
                        format!("unknown shape `{other}`"),
                    ))
                }
            };
            collision_primitives.push(CollisionPrimitive {
                link,
                offset: Vector3::new(c.offset[0], c.offset[1], c.offset[2]),
                shape,
            });
        }

        // Parent-child pairs are always excluded; the file adds the rest.
        let mut excluded_pairs = HashSet::new();
        for (i, link) in links.iter().enumerate() {
            if let Some(p) = link.parent {
                excluded_pairs.insert(ordered_pair(p, i));
            }
        }
        for (i, pair) in spec.collision_exclude.iter().enumerate() {
            let a = *index_of.get(&pair[0]).ok_or_else(|| {
                Error::validation(
                    format!("collision_exclude[{i}]"),
                    format!("unknown link `{}`", pair[0]),
                )
            })?;
            let b = *index_of.get(&pair[1]).ok_or_else(|| {
                Error::validation(
                    format!("collision_exclude[{i}]"),
                    format!("unknown link `{}`", pair[1]),
                )
            })?;
            excluded_pairs.insert(ordered_pair(a, b));
        }

        if spec.foot_links.len() != 4 {
            return Err(Error::validation(
                "foot_links",
                format!("expected 4 foot links, found {}", spec.foot_links.len()),
            ));
        }
        let mut foot_link_ids = [0usize; 4];
        for (i, name) in spec.foot_links.iter().enumerate() {
            foot_link_ids[i] = *index_of.get(name).ok_or_else(|| {
                Error::validation(format!("foot_links[{i}]"), format!("unknown link `{name}`"))
            })?;
        }
        let ee_link_id = *index_of.get(&spec.ee_link).ok_or_else(|| {
            Error::validation("ee_link", format!("unknown link `{}`", spec.ee_link))
        })?;

        Ok(RobotModel {
            name: spec.name,
            links,
            joint_names,
            joint_limits,
            default_config,
            collision_primitives,
            excluded_pairs,
            foot_link_ids,
            ee_link_id,
            content_hash,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_limits(&self) -> &[(f64, f64); NUM_JOINTS] {
        &self.joint_limits
    }

    pub fn default_config(&self) -> JointVector {
        self.default_config
    }

    pub fn collision_primitives(&self) -> &[CollisionPrimitive] {
        &self.collision_primitives
    }

    pub fn is_excluded_pair(&self, a: usize, b: usize) -> bool {
        self.excluded_pairs.contains(&ordered_pair(a, b))
    }

    pub fn foot_link_ids(&self) -> [usize; 4] {
        self.foot_link_ids
    }

    pub fn ee_link_id(&self) -> usize {
        self.ee_link_id
    }

    /// SHA-256 of the description file this model was parsed from.
    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    /// Clamps a configuration to the joint limits.
    pub fn clamp_to_limits(&self, q: &JointVector) -> JointVector {
        let mut out = *q;
        for i in 0..NUM_JOINTS {
            let (lo, hi) = self.joint_limits[i];
            out[i] = out[i].clamp(lo, hi);
        }
        out
    }

    /// World pose of every link for the given base pose and configuration.
    /// FK is total: `q` is not required to respect the limits.
    pub fn forward_kinematics(&self, base: &SE3Pose, q: &JointVector) -> Vec<SE3Pose> {
        let mut poses: Vec<SE3Pose> = Vec::with_capacity(self.links.len());
        for link in &self.links {
            let pose = match link.parent {
                None => *base,
                Some(p) => {
                    let at_joint = poses[p].compose(&link.local_transform);
                    match &link.joint {
                        JointKind::Fixed => at_joint,
                        JointKind::Revolute { axis, index } => {
                            let rot = UnitQuaternion::from_axis_angle(axis, q[*index]);
                            at_joint.compose(&SE3Pose::new(Vector3::zeros(), rot))
                        }
                    }
                }
            };
            poses.push(pose);
        }
        poses
    }

    /// End-effector pose in the base frame; independent of any base pose.
    pub fn ee_pose_in_base(&self, q: &JointVector) -> SE3Pose {
        let poses = self.forward_kinematics(&SE3Pose::identity(), q);
        poses[self.ee_link_id]
    }

    /// Analytic Jacobian of a world point rigidly attached to `link`,
    /// w.r.t. the 24-dim decision vector [base translation (3), base rotation
    /// as a world-frame angular increment (3), 18 joints]. `poses` must come
    /// from `forward_kinematics` with the same configuration.
    pub fn point_jacobian(
        &self,
        poses: &[SE3Pose],
        base_position: &Vector3<f64>,
        link: usize,
        point_world: &Vector3<f64>,
    ) -> Matrix3xX<f64> {
        let mut jac = Matrix3xX::zeros(6 + NUM_JOINTS);
        jac.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&nalgebra::Matrix3::identity());
        let r = point_world - base_position;
        // d(point) = dw x r  =>  column block -skew(r)
        let skew = nalgebra::Matrix3::new(0.0, -r.z, r.y, r.z, 0.0, -r.x, -r.y, r.x, 0.0);
        jac.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew));

        let mut cursor = Some(link);
        while let Some(i) = cursor {
            let l = &self.links[i];
            if let JointKind::Revolute { axis, index } = &l.joint {
                let axis_world = poses[i].rotate_vector(axis);
                let arm = point_world - poses[i].position();
                let col = axis_world.cross(&arm);
                jac.set_column(6 + index, &col);
            }
            cursor = l.parent;
        }
        jac
    }
}

fn ordered_pair(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Approximate ANYmal-class quadruped with a 6-DoF arm; link lengths are
/// deliberately round numbers, so every downstream quantity is model-relative.
pub const DEFAULT_ROBOT_JSON: &str = include_str!("../data/default_robot.json");
