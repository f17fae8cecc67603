//! The A–H optimizer × loss × weighting grid on synthetic frames.

use handfit::cli::{ablation_table, cmd_ablate, AblationData, RunConfig};
use handfit::HandModel;

fn main() -> handfit::Result<()> {
    let model = HandModel::default_right();
    let data = AblationData::Synthetic {
        frames: 10,
        sigma: 5.0,
        seed: 0,
    };
    let rows = cmd_ablate(&model, &RunConfig::default(), &data)?;
    print!("{}", ablation_table(&rows));
    Ok(())
}
