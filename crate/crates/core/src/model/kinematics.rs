use nalgebra::{DMatrix, Matrix3, Vector3};

use super::{dof_slot, HandModel, Joints, PoseState, NUM_JOINTS, NUM_POSE, NUM_SHAPE};
use crate::error::Result;

/// Cross-product matrix: `skew(a) * b == a × b`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula. Total: the zero vector maps to the identity.
pub fn axis_angle_to_matrix(v: &Vector3<f64>) -> Matrix3<f64> {
    let angle_sq = v.norm_squared();
    let k = skew(v);
    let (a, b) = if angle_sq < 1e-8 {
        // Taylor expansions of sin(t)/t and (1 - cos t)/t^2.
        (1.0 - angle_sq / 6.0, 0.5 - angle_sq / 24.0)
    } else {
        let angle = angle_sq.sqrt();
        (angle.sin() / angle, (1.0 - angle.cos()) / angle_sq)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Left Jacobian of the rotation exponential: for small `d`,
/// `exp(v + d) ≈ exp(J_l(v) d) · exp(v)`.
pub fn left_jacobian(v: &Vector3<f64>) -> Matrix3<f64> {
    let angle_sq = v.norm_squared();
    let k = skew(v);
    let (a, b) = if angle_sq < 1e-8 {
        (0.5 - angle_sq / 24.0, 1.0 / 6.0 - angle_sq / 120.0)
    } else {
        let angle = angle_sq.sqrt();
        (
            (1.0 - angle.cos()) / angle_sq,
            (angle - angle.sin()) / (angle_sq * angle),
        )
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Joint positions together with the accumulated frame of every joint.
pub(crate) struct Posed {
    pub joints: Joints,
    pub frames: [Matrix3<f64>; NUM_JOINTS],
}

pub(crate) fn pose(model: &HandModel, state: &PoseState) -> Result<Posed> {
    state.validate()?;
    let rest = model.rest_joints();
    let mut joints = [Vector3::zeros(); NUM_JOINTS];
    let mut frames = [Matrix3::identity(); NUM_JOINTS];
    for &j in model.order() {
        match model.parent(j) {
            None => {
                frames[j] = axis_angle_to_matrix(&Vector3::from(state.root));
                joints[j] = frames[j] * rest[j];
            }
            Some(p) => {
                let bone = (rest[j] - rest[p]) * model.bone_scale(j, &state.beta);
                joints[j] = joints[p] + frames[p] * bone;
                frames[j] = match dof_slot(j) {
                    Some(slot) => frames[p] * axis_angle_to_matrix(&state.joint_rotation(slot)),
                    None => frames[p],
                };
            }
        }
    }
    Ok(Posed { joints, frames })
}

/// Maps (θ, β, r) to the 21 joint positions.
///
/// The root orientation rotates the whole skeleton about the origin; root
/// translation and scale belong to the alignment transform.
pub fn forward_kinematics(model: &HandModel, state: &PoseState) -> Result<Joints> {
    Ok(pose(model, state)?.joints)
}

/// Jacobian of the stacked joint coordinates (row `3*joint + axis`) with
/// respect to `(θ, r)`: 63 × 48, θ columns first.
pub fn fk_jacobian(model: &HandModel, state: &PoseState) -> Result<DMatrix<f64>> {
    let posed = pose(model, state)?;
    Ok(jacobian(model, state, &posed, false))
}

/// As [`fk_jacobian`] with the 10 shape columns appended (63 × 58).
pub fn fk_jacobian_with_shape(model: &HandModel, state: &PoseState) -> Result<DMatrix<f64>> {
    let posed = pose(model, state)?;
    Ok(jacobian(model, state, &posed, true))
}

pub(crate) fn jacobian(
    model: &HandModel,
    state: &PoseState,
    posed: &Posed,
    with_shape: bool,
) -> DMatrix<f64> {
    let cols = NUM_POSE + 3 + if with_shape { NUM_SHAPE } else { 0 };
    let mut jac = DMatrix::zeros(3 * NUM_JOINTS, cols);
    let x = &posed.joints;

    for (slot, &j) in super::ARTICULATED.iter().enumerate() {
        let p = model
            .parent(j)
            .expect("articulated joints are not the root");
        let axes = posed.frames[p] * left_jacobian(&state.joint_rotation(slot));
        for c in 0..3 {
            let omega: Vector3<f64> = axes.column(c).into();
            for &q in model.subtree(j) {
                let d = omega.cross(&(x[q] - x[j]));
                jac.fixed_view_mut::<3, 1>(3 * q, 3 * slot + c)
                    .copy_from(&d);
            }
        }
    }

    let root_axes = left_jacobian(&Vector3::from(state.root));
    for c in 0..3 {
        let omega: Vector3<f64> = root_axes.column(c).into();
        for (q, xq) in x.iter().enumerate() {
            let d = omega.cross(xq);
            jac.fixed_view_mut::<3, 1>(3 * q, NUM_POSE + c)
                .copy_from(&d);
        }
    }

    if with_shape {
        let rest = model.rest_joints();
        for q in 1..NUM_JOINTS {
            for &b in model.path(q) {
                let pb = model.parent(b).expect("path excludes the root");
                let bone = posed.frames[pb] * (rest[b] - rest[pb]);
                for (m, mode) in model.shape_basis().iter().enumerate() {
                    let w = mode[b - 1];
                    if w != 0.0 {
                        let mut col = jac.fixed_view_mut::<3, 1>(3 * q, NUM_POSE + 3 + m);
                        col += bone * w;
                    }
                }
            }
        }
    }
    jac
}
