//! Pose a hand by hand, check it against the joint limits and print an OBJ.

use handfit::model::{forward_kinematics, HandModel, PoseState};
use handfit::pipeline::skeleton_obj;

fn main() -> handfit::Result<()> {
    let model = HandModel::default_right();
    let mut theta = vec![0.0; 45];
    // Flex the three index-finger joints (first DoF of slots 3, 4, 5).
    for slot in [3, 4, 5] {
        theta[3 * slot] = 0.9;
    }
    // And push one little-finger DoF past its bound.
    theta[3 * 12 + 1] = 0.35;
    let state = PoseState::with_theta(theta);
    let bad = model.limit_violations(&state.theta);
    println!("# {} DoF outside their limits: {bad:?}", bad.len());
    let joints = forward_kinematics(&model, &state)?;
    print!("{}", skeleton_obj(&model, &joints));
    Ok(())
}
