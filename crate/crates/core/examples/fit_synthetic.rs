//! Fit noisy synthetic hands and compare against the known ground truth.
//!
//! cargo run --example fit_synthetic

use handfit::evalkit::{epe_single, synth_generate};
use handfit::model::FINGERTIPS;
use handfit::{fit, FitOptions, HandModel};

fn main() -> handfit::Result<()> {
    let model = HandModel::default_right();
    let data = synth_generate(&model, 5, 4.0, 17)?;
    let opts = FitOptions::default();

    for (i, (target, truth)) in data.targets.iter().zip(&data.truth).enumerate() {
        let res = fit(&model, target, &opts)?;
        let tips: f64 = FINGERTIPS
            .iter()
            .map(|&k| (res.joints_target_space[k] - truth.joints[k]).norm())
            .sum::<f64>()
            / FINGERTIPS.len() as f64;
        let d = &res.stage_diagnostics[0];
        println!(
            "frame {i}: EPE {:.2} mm, fingertips {:.2} mm, scale {:.0}, {} iterations ({})",
            epe_single(&res.joints_target_space, &truth.joints),
            tips,
            res.transform.scale,
            d.iterations,
            d.status.as_str(),
        );
    }
    Ok(())
}
