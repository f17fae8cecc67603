//! Recover a similarity transform from the six palm anchors.

use handfit::alignment::{estimate_rigid, estimate_scale, matrix_to_axis_angle, RigidTransform};
use handfit::model::{axis_angle_to_matrix, HandModel, PALM};
use nalgebra::Vector3;

fn main() -> handfit::Result<()> {
    let model = HandModel::default_right();
    let rest = model.rest_joints();
    let truth = RigidTransform::new(
        axis_angle_to_matrix(&Vector3::new(0.3, -1.2, 0.8)),
        Vector3::new(40.0, -25.0, 620.0),
        930.0,
    )?;
    let observed: Vec<_> = rest.iter().map(|p| truth.apply_point(p)).collect();

    let scale = estimate_scale(rest, &observed)?;
    let src: Vec<_> = PALM.iter().map(|&i| rest[i] * scale).collect();
    let dst: Vec<_> = PALM.iter().map(|&i| observed[i]).collect();
    let rigid = estimate_rigid(&src, &dst)?;

    println!("scale        {scale:.9} (true {})", truth.scale);
    println!(
        "rotation     {:.9?}",
        matrix_to_axis_angle(&rigid.rotation)?.as_slice()
    );
    println!("translation  {:.9?}", rigid.translation.as_slice());
    println!(
        "rotation error (Frobenius) {:.2e}",
        (rigid.rotation - truth.rotation).norm()
    );
    println!("homogeneous form:{}", truth.as_homogeneous());
    Ok(())
}
