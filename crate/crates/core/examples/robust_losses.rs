//! MSE, Geman-McClure and Huber fits against a target with one gross outlier.

use handfit::evalkit::{epe_single, synth_generate};
use handfit::{fit, FitOptions, HandModel, LossKind, LossSpec};
use nalgebra::Vector3;

fn main() -> handfit::Result<()> {
    let model = HandModel::default_right();
    let data = synth_generate(&model, 1, 2.0, 3)?;
    let mut target = data.targets[0].clone();
    // Detector swap: the middle fingertip lands 120 mm away.
    target.points[12] += Vector3::new(120.0, -80.0, 30.0);

    for kind in [LossKind::Mse, LossKind::GemanMcclure, LossKind::Huber] {
        let opts = FitOptions {
            loss: LossSpec {
                kind,
                ..LossSpec::default()
            },
            ..FitOptions::default()
        };
        let res = fit(&model, &target, &opts)?;
        let clean: f64 = (0..21)
            .filter(|&k| k != 12)
            .map(|k| (res.joints_target_space[k] - data.truth[0].joints[k]).norm())
            .sum::<f64>()
            / 20.0;
        println!(
            "{:<14} EPE {:6.2} mm, on the 20 clean keypoints {:6.2} mm",
            kind.as_str(),
            epe_single(&res.joints_target_space, &data.truth[0].joints),
            clean
        );
    }
    Ok(())
}
