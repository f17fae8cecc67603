use handfit::alignment::{estimate_rigid, estimate_scale, matrix_to_axis_angle, RigidTransform};
use handfit::model::{
    axis_angle_to_matrix, forward_kinematics, HandModel, PoseState, NUM_POSE, PALM,
};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use std::f64::consts::PI;

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-range..range).prop_map(Vector3::from)
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (vec3(1.0), 0.0..PI).prop_filter_map("zero axis", |(axis, angle)| {
        (axis.norm() > 1e-3).then(|| axis_angle_to_matrix(&(axis.normalize() * angle)))
    })
}

fn similarity() -> impl Strategy<Value = RigidTransform> {
    (rotation(), vec3(500.0), 0.01f64..1e3)
        .prop_map(|(r, t, s)| RigidTransform::new(r, t, s).unwrap())
}

fn feasible_state(model: &HandModel) -> impl Strategy<Value = PoseState> {
    let limits = *model.joint_limits();
    (prop::collection::vec(0.0f64..1.0, NUM_POSE), vec3(PI)).prop_map(move |(u, root)| PoseState {
        theta: u
            .iter()
            .zip(&limits)
            .map(|(u, l)| l.lower + u * (l.upper - l.lower))
            .collect(),
        root: root.into(),
        ..PoseState::zero()
    })
}

fn frobenius(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rodrigues_is_a_proper_rotation(v in vec3(10.0)) {
        let r = axis_angle_to_matrix(&v);
        prop_assert!(frobenius(&(r.transpose() * r), &Matrix3::identity()) < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_angle_round_trip(r in rotation()) {
        let v = matrix_to_axis_angle(&r).unwrap();
        prop_assert!(v.norm() <= PI + 1e-12);
        prop_assert!(frobenius(&axis_angle_to_matrix(&v), &r) < 1e-9);
    }

    #[test]
    fn half_turns_round_trip(axis in vec3(1.0)) {
        prop_assume!(axis.norm() > 1e-3);
        let r = axis_angle_to_matrix(&(axis.normalize() * PI));
        let v = matrix_to_axis_angle(&r).unwrap();
        prop_assert!(frobenius(&axis_angle_to_matrix(&v), &r) < 1e-9);
    }

    #[test]
    fn homogeneous_view_composes(a in similarity(), b in similarity()) {
        let lhs = a.as_homogeneous() * b.as_homogeneous();
        let rhs = a.compose(&b).as_homogeneous();
        prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm());
    }

    #[test]
    fn similarity_recovered_from_palm(t in similarity(), state in feasible_state(&HandModel::default_right())) {
        let model = HandModel::default_right();
        let src = forward_kinematics(&model, &PoseState { theta: vec![0.0; NUM_POSE], ..state }).unwrap();
        let dst: Vec<_> = src.iter().map(|p| t.apply_point(p)).collect();
        let s = estimate_scale(&src, &dst).unwrap();
        prop_assert!((s - t.scale).abs() <= 1e-12 * t.scale);
        let scaled: Vec<_> = PALM.iter().map(|&i| src[i] * s).collect();
        let palm: Vec<_> = PALM.iter().map(|&i| dst[i]).collect();
        let rigid = estimate_rigid(&scaled, &palm).unwrap();
        prop_assert!(frobenius(&rigid.rotation, &t.rotation) < 1e-9);
        prop_assert!((rigid.translation - t.translation).norm() <= 1e-9 * t.translation.norm().max(1.0));
    }

    #[test]
    fn rigid_estimate_is_left_invariant(
        q in rotation(),
        t in similarity(),
        noise in prop::collection::vec(vec3(0.05), 6),
    ) {
        let model = HandModel::default_right();
        let src: Vec<_> = PALM.iter().map(|&i| model.rest_joints()[i]).collect();
        let dst: Vec<_> = src.iter().zip(&noise).map(|(p, n)| t.rotation * p + t.translation + n).collect();
        let base = estimate_rigid(&src, &dst).unwrap();
        let src_q: Vec<_> = src.iter().map(|p| q * p).collect();
        let dst_q: Vec<_> = dst.iter().map(|p| q * p).collect();
        let turned = estimate_rigid(&src_q, &dst_q).unwrap();
        prop_assert!(frobenius(&turned.rotation, &(q * base.rotation * q.transpose())) < 1e-9);
        let residual = |tr: &RigidTransform, a: &[Vector3<f64>], b: &[Vector3<f64>]| -> f64 {
            a.iter().zip(b).map(|(p, d)| (tr.apply_point(p) - d).norm_squared()).sum()
        };
        let r0 = residual(&base, &src, &dst);
        let r1 = residual(&turned, &src_q, &dst_q);
        prop_assert!((r0 - r1).abs() <= 1e-9 * r0.max(1e-12));
    }

    #[test]
    fn fk_is_equivariant_under_global_rotation(state in feasible_state(&HandModel::default_right()), q in rotation()) {
        let model = HandModel::default_right();
        let joints = forward_kinematics(&model, &state).unwrap();
        let root = q * axis_angle_to_matrix(&Vector3::from(state.root));
        let turned = PoseState { root: matrix_to_axis_angle(&root).unwrap().into(), ..state };
        let moved = forward_kinematics(&model, &turned).unwrap();
        for (a, b) in joints.iter().zip(&moved) {
            prop_assert!((q * a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn fk_preserves_bone_lengths(state in feasible_state(&HandModel::default_right())) {
        let model = HandModel::default_right();
        let joints = forward_kinematics(&model, &state).unwrap();
        for child in 1..joints.len() {
            let parent = model.parent(child).unwrap();
            let len = (joints[child] - joints[parent]).norm();
            prop_assert!((len - model.rest_bone_length(child)).abs() < 1e-12);
        }
    }
}
