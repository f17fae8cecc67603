//! Read a detector-style keypoint document (normalized units), fit every
//! hand and write the results.
//!
//! cargo run --example fit_keypoint_file -- path/to/keypoints.json out/

use std::path::PathBuf;

use handfit::pipeline::{denormalize, KeypointFile, KeypointSet, Units};
use handfit::{fit, FitOptions, HandModel};

fn demo_document(model: &HandModel) -> KeypointFile {
    // A rest hand as a detector would report it on a 640×480 image: image y
    // points down, so y and z are both flipped (a half turn about x).
    let k = 2.0;
    let pts = model
        .rest_joints()
        .map(|p| nalgebra::Vector3::new(0.5 + k * p.x, 0.6 - k * p.y * 640.0 / 480.0, -k * p.z));
    let mut kp = KeypointSet::new(pts, Units::Normalized);
    kp.image_size = Some((640, 480));
    kp.score = Some(0.98);
    KeypointFile::from_sets(&[kp], (640, 480))
}

fn main() -> handfit::Result<()> {
    let model = HandModel::default_right();
    let args: Vec<PathBuf> = std::env::args_os().skip(1).map(PathBuf::from).collect();
    let (doc, name) = match args.first() {
        Some(p) => (KeypointFile::read(p)?, p.clone()),
        None => (demo_document(&model), PathBuf::from("demo.json")),
    };
    let out_dir = args.get(1).cloned().unwrap_or_else(std::env::temp_dir);

    for (h, kp) in doc.keypoint_sets(&name)?.into_iter().enumerate() {
        let kp = if kp.units == Units::Normalized {
            denormalize(&kp)?
        } else {
            kp
        };
        let res = fit(&model, &kp, &FitOptions::default())?;
        let path = out_dir.join(format!("hand{h}.json"));
        res.write_json(&path)?;
        println!(
            "hand {h} ({}): root {:.4?}, loss {:.3e} -> {:.3e}, written to {}",
            res.handedness.as_str(),
            res.state.root,
            res.stage_diagnostics[0].loss_initial,
            res.stage_diagnostics[0].loss_final,
            path.display()
        );
    }
    Ok(())
}
