//! EPE, PCK and AUC with and without per-frame similarity alignment.

use handfit::evalkit::{evaluate, synth_generate, AlignMode, EvalFrame, EvalOptions};
use handfit::{fit, FitOptions, HandModel};

fn main() -> handfit::Result<()> {
    let model = HandModel::default_right();
    let data = synth_generate(&model, 12, 8.0, 21)?;
    let mut frames = Vec::new();
    for (i, (target, truth)) in data.targets.iter().zip(&data.truth).enumerate() {
        let res = fit(&model, target, &FitOptions::default())?;
        frames.push(EvalFrame {
            id: format!("{i:05}"),
            pred: res.joints_target_space,
            gt: truth.joints,
            mask: [true; 21],
        });
    }
    for align in [AlignMode::None, AlignMode::Similarity] {
        let report = evaluate(
            &frames,
            &EvalOptions {
                align,
                ..EvalOptions::default()
            },
        )?;
        println!("alignment = {}", align.as_str());
        print!("{}", report.table());
        println!();
    }
    Ok(())
}
