//! Joints-only parametric hand model.
//!
//! The model maps 45 articulation parameters, 10 shape coefficients and a
//! 3-vector global orientation to the 21 MediaPipe hand keypoints:
//!
//! ```text
//!            8   12  16  20        tips
//!            7   11  15  19        DIP
//!      4     6   10  14  18        PIP
//!      3     5    9  13  17        MCP
//!       2
//!        1                         thumb CMC
//!              0                   wrist
//! ```
//!
//! Each articulated joint owns three DoF: the components of a local
//! axis-angle vector expressed in the frame handed down by its ancestors.
//! With the default skeleton (palm facing +z, fingers along +y) the three
//! components act as flexion, twist and abduction respectively.

mod file;
pub(crate) mod kinematics;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use file::{format_model, parse_model};
pub use kinematics::{
    axis_angle_to_matrix, fk_jacobian, fk_jacobian_with_shape, forward_kinematics, left_jacobian,
    skew,
};

/// Number of keypoints in the MediaPipe hand topology.
pub const NUM_JOINTS: usize = 21;
/// Number of bones (one per non-root joint).
pub const NUM_BONES: usize = NUM_JOINTS - 1;
/// Number of articulation parameters.
pub const NUM_POSE: usize = 45;
/// Number of shape coefficients.
pub const NUM_SHAPE: usize = 10;

/// Joints that carry three rotational DoF, in DoF order.
pub const ARTICULATED: [usize; 15] = [1, 2, 3, 5, 6, 7, 9, 10, 11, 13, 14, 15, 17, 18, 19];
pub const FINGERTIPS: [usize; 5] = [4, 8, 12, 16, 20];
/// Palm joints used as rigid alignment anchors.
pub const PALM: [usize; 6] = [0, 1, 5, 9, 13, 17];
pub const WRIST: usize = 0;
pub const INDEX_MCP: usize = 5;

/// 21 keypoint positions.
pub type Joints = [Vector3<f64>; NUM_JOINTS];

/// Slot of `joint` in [`ARTICULATED`], i.e. its DoF block `3*slot..3*slot+3`.
pub fn dof_slot(joint: usize) -> Option<usize> {
    ARTICULATED.iter().position(|&j| j == joint)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    #[default]
    Right,
}

impl Handedness {
    pub fn as_str(self) -> &'static str {
        match self {
            Handedness::Left => "left",
            Handedness::Right => "right",
        }
    }
}

/// Reflects a point across the x = 0 plane (left/right hand conversion).
pub fn mirror_x(p: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-p.x, p.y, p.z)
}

/// Anatomical bounds for one DoF, in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimit {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimit {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// Rest skeleton, kinematic tree, shape basis and joint limits.
///
/// Immutable once constructed; validated on construction so every
/// downstream function can assume the tree and limit invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    rest_joints: Joints,
    parent: [i32; NUM_JOINTS],
    shape_basis: [[f64; NUM_BONES]; NUM_SHAPE],
    joint_limits: [JointLimit; NUM_POSE],
    handedness: Handedness,
    // Derived tree data.
    order: Vec<usize>,
    subtree: Vec<Vec<usize>>,
    path: Vec<Vec<usize>>,
}

const DEFAULT_MODEL: &str = include_str!("../../data/default_hand.model");

impl HandModel {
    pub fn new(
        rest_joints: Joints,
        parent: [i32; NUM_JOINTS],
        shape_basis: [[f64; NUM_BONES]; NUM_SHAPE],
        joint_limits: [JointLimit; NUM_POSE],
        handedness: Handedness,
    ) -> Result<Self> {
        if rest_joints.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::param("rest joints must be finite"));
        }
        if parent[0] != -1 {
            return Err(Error::param("joint 0 must be the root (parent -1)"));
        }
        for (i, &p) in parent.iter().enumerate().skip(1) {
            if p < 0 || p as usize >= NUM_JOINTS || p as usize == i {
                return Err(Error::param(format!("joint {i} has invalid parent {p}")));
            }
        }
        // Every node must reach the root without revisiting a node.
        let mut path = vec![Vec::new(); NUM_JOINTS];
        for (i, chain) in path.iter_mut().enumerate() {
            let mut node = i;
            let mut steps = 0;
            while node != 0 {
                chain.push(node);
                node = parent[node] as usize;
                steps += 1;
                if steps > NUM_JOINTS {
                    return Err(Error::param(format!(
                        "cycle in kinematic tree at joint {i}"
                    )));
                }
            }
            chain.reverse();
        }
        for i in 1..NUM_JOINTS {
            let len = (rest_joints[i] - rest_joints[parent[i] as usize]).norm();
            if !(len > 0.0) {
                return Err(Error::param(format!(
                    "bone ending at joint {i} has zero length"
                )));
            }
        }
        for (k, lim) in joint_limits.iter().enumerate() {
            if !(lim.lower < lim.upper) || !lim.contains(0.0) {
                return Err(Error::param(format!(
                    "limit {k} must satisfy lower < 0 <= upper window, got [{}, {}]",
                    lim.lower, lim.upper
                )));
            }
        }
        if shape_basis.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("shape basis must be finite"));
        }

        // Breadth-first order from the root.
        let mut order = vec![0];
        let mut head = 0;
        while head < order.len() {
            let node = order[head];
            head += 1;
            for (child, &p) in parent.iter().enumerate().skip(1) {
                if p as usize == node {
                    order.push(child);
                }
            }
        }
        let mut subtree = vec![Vec::new(); NUM_JOINTS];
        for (q, chain) in path.iter().enumerate() {
            for &anc in chain {
                if anc != q {
                    subtree[anc].push(q);
                }
            }
            if q != 0 {
                subtree[0].push(q);
            }
        }

        Ok(Self {
            rest_joints,
            parent,
            shape_basis,
            joint_limits,
            handedness,
            order,
            subtree,
            path,
        })
    }

    /// The bundled right-hand skeleton.
    pub fn default_right() -> Self {
        parse_model(DEFAULT_MODEL, std::path::Path::new("<builtin>"))
            .expect("bundled model file is valid")
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_model(&text, path)
    }

    pub fn rest_joints(&self) -> &Joints {
        &self.rest_joints
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        match self.parent[joint] {
            -1 => None,
            p => Some(p as usize),
        }
    }

    pub fn parents(&self) -> &[i32; NUM_JOINTS] {
        &self.parent
    }

    pub fn shape_basis(&self) -> &[[f64; NUM_BONES]; NUM_SHAPE] {
        &self.shape_basis
    }

    pub fn joint_limits(&self) -> &[JointLimit; NUM_POSE] {
        &self.joint_limits
    }

    pub fn handedness(&self) -> Handedness {
        self.handedness
    }

    /// Joints in root-first order.
    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    /// Strict descendants of `joint`.
    pub(crate) fn subtree(&self, joint: usize) -> &[usize] {
        &self.subtree[joint]
    }

    /// Non-root joints from the root down to `joint` inclusive.
    pub(crate) fn path(&self, joint: usize) -> &[usize] {
        &self.path[joint]
    }

    pub fn rest_bone_length(&self, joint: usize) -> f64 {
        let p = self.parent(joint).expect("root has no bone");
        (self.rest_joints[joint] - self.rest_joints[p]).norm()
    }

    /// Length multiplier `1 + Σ_m basis[m][bone] β_m` for the bone ending at `joint`.
    pub fn bone_scale(&self, joint: usize, beta: &[f64]) -> f64 {
        let bone = joint - 1;
        1.0 + self
            .shape_basis
            .iter()
            .zip(beta)
            .map(|(mode, b)| mode[bone] * b)
            .sum::<f64>()
    }

    /// Indices of DoF whose value lies outside its limit.
    pub fn limit_violations(&self, theta: &[f64]) -> Vec<usize> {
        theta
            .iter()
            .zip(&self.joint_limits)
            .enumerate()
            .filter(|(_, (v, lim))| !lim.contains(**v))
            .map(|(i, _)| i)
            .collect()
    }
}

impl Default for HandModel {
    fn default() -> Self {
        Self::default_right()
    }
}

/// Optimisation variables: articulation, shape and global orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseState {
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub root: [f64; 3],
}

impl Default for PoseState {
    fn default() -> Self {
        Self::zero()
    }
}

impl PoseState {
    pub fn zero() -> Self {
        Self {
            theta: vec![0.0; NUM_POSE],
            beta: vec![0.0; NUM_SHAPE],
            root: [0.0; 3],
        }
    }

    pub fn with_theta(theta: Vec<f64>) -> Self {
        Self {
            theta,
            ..Self::zero()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.len() != NUM_POSE {
            return Err(Error::param(format!(
                "theta has {} entries, expected {NUM_POSE}",
                self.theta.len()
            )));
        }
        if self.beta.len() != NUM_SHAPE {
            return Err(Error::param(format!(
                "beta has {} entries, expected {NUM_SHAPE}",
                self.beta.len()
            )));
        }
        let finite = self
            .theta
            .iter()
            .chain(&self.beta)
            .chain(&self.root)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numeric("pose state contains NaN or Inf".into()));
        }
        Ok(())
    }

    /// Axis-angle block of an articulated joint.
    pub fn joint_rotation(&self, slot: usize) -> Vector3<f64> {
        Vector3::new(
            self.theta[3 * slot],
            self.theta[3 * slot + 1],
            self.theta[3 * slot + 2],
        )
    }
}
