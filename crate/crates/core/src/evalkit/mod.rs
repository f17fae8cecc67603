//! EPE, PCK and AUC, ground-truth loaders and synthetic data.

mod annotations;
mod metrics;
mod report;
mod synth;

use std::collections::{BTreeMap, BTreeSet};

use crate::alignment::estimate_similarity;
use crate::error::{Error, Result};
use crate::model::{Joints, NUM_JOINTS};

pub use annotations::{
    json_files, load_annotations, stem, write_generic_json, AnnotationFormat, GroundTruthFrame,
};
pub use metrics::{
    auc, default_thresholds, epe, epe_single, joint_errors, pck_curve, pck_from_errors, Mask,
    AUC_RANGE,
};
pub use report::{AlignMode, EvalReport, PROTOCOL_NOTE};
pub use synth::{
    synth_generate, SynthDataset, SynthTruth, LIMIT_FRACTION, SCALE_RANGE, TRANSLATION_HALF_WIDTH,
};

/// Minimum valid correspondences for per-frame alignment.
pub const MIN_ALIGN_POINTS: usize = 3;

/// Similarity-aligns `pred` onto `gt` using the keypoints valid in `mask`.
///
/// Frames with fewer than three valid or only collinear points fail with a
/// degenerate-configuration error.
pub fn align_for_eval(pred: &Joints, gt: &Joints, mask: &Mask) -> Result<Joints> {
    let idx: Vec<usize> = (0..NUM_JOINTS).filter(|&k| mask[k]).collect();
    if idx.len() < MIN_ALIGN_POINTS {
        return Err(Error::Degenerate(format!(
            "{} valid points; alignment needs {MIN_ALIGN_POINTS}",
            idx.len()
        )));
    }
    let src: Vec<_> = idx.iter().map(|&k| pred[k]).collect();
    let dst: Vec<_> = idx.iter().map(|&k| gt[k]).collect();
    let t = estimate_similarity(&src, &dst)?;
    Ok(std::array::from_fn(|k| t.apply_point(&pred[k])))
}

/// One prediction paired with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalFrame {
    pub id: String,
    pub pred: Joints,
    pub gt: Joints,
    pub mask: Mask,
}

/// Pairs predictions with ground truth by id; any unmatched id is an error
/// listing all of them.
pub fn match_frames(
    preds: impl IntoIterator<Item = (String, Joints)>,
    gt: impl IntoIterator<Item = GroundTruthFrame>,
) -> Result<Vec<EvalFrame>> {
    let mut preds: BTreeMap<String, Joints> = preds.into_iter().collect();
    let mut frames = Vec::new();
    let mut missing_pred = Vec::new();
    for g in gt {
        match preds.remove(&g.id) {
            Some(pred) => frames.push(EvalFrame {
                id: g.id,
                pred,
                gt: g.points,
                mask: g.mask,
            }),
            None => missing_pred.push(g.id),
        }
    }
    if !missing_pred.is_empty() || !preds.is_empty() {
        let mut msg = String::from("unmatched frames");
        if !missing_pred.is_empty() {
            msg += &format!(
                "; ground truth without prediction: {}",
                missing_pred.join(", ")
            );
        }
        if !preds.is_empty() {
            let extra: BTreeSet<_> = preds.keys().cloned().collect();
            let extra: Vec<_> = extra.into_iter().collect();
            msg += &format!("; prediction without ground truth: {}", extra.join(", "));
        }
        return Err(Error::param(msg));
    }
    Ok(frames)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub align: AlignMode,
    pub thresholds: Vec<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            align: AlignMode::Similarity,
            thresholds: default_thresholds(),
        }
    }
}

/// Scores matched frames. The AUC is taken over the configured thresholds.
pub fn evaluate(frames: &[EvalFrame], opts: &EvalOptions) -> Result<EvalReport> {
    let mut pred = Vec::with_capacity(frames.len());
    let mut gt = Vec::with_capacity(frames.len());
    let mut masks = Vec::with_capacity(frames.len());
    let mut skipped = 0;
    for f in frames {
        let p = match opts.align {
            AlignMode::None => f.pred,
            AlignMode::Similarity => match align_for_eval(&f.pred, &f.gt, &f.mask) {
                Ok(p) => p,
                Err(Error::Degenerate(msg)) => {
                    log::warn!("frame {}: skipped ({msg})", f.id);
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            },
        };
        pred.push(p);
        gt.push(f.gt);
        masks.push(f.mask);
    }
    let errors = joint_errors(&pred, &gt, &masks)?;
    let pck = pck_from_errors(&errors, &opts.thresholds)?;
    Ok(EvalReport {
        epe_mm: metrics::rms(&errors),
        auc: auc(&pck)?,
        pck,
        frames_evaluated: pred.len(),
        frames_skipped: skipped,
        keypoints_evaluated: errors.len(),
        alignment: opts.align,
        config_echo: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::RigidTransform;
    use crate::model::{axis_angle_to_matrix, HandModel, FINGERTIPS};
    use nalgebra::Vector3;

    fn tips_mask() -> Mask {
        let mut m = [false; NUM_JOINTS];
        FINGERTIPS.iter().for_each(|&k| m[k] = true);
        m
    }

    #[test]
    fn similarity_is_absorbed() {
        let gt = *HandModel::default_right().rest_joints();
        let t = RigidTransform::new(
            axis_angle_to_matrix(&Vector3::new(0.3, 0.2, -1.0)),
            Vector3::new(4.0, 5.0, 6.0),
            0.7,
        )
        .unwrap();
        let pred: Joints = std::array::from_fn(|k| t.apply_point(&gt[k]));
        let aligned = align_for_eval(&pred, &gt, &[true; NUM_JOINTS]).unwrap();
        assert!(epe_single(&aligned, &gt) < 1e-12);
    }

    #[test]
    fn uniform_offset_is_absorbed() {
        let gt = *HandModel::default_right().rest_joints();
        let pred: Joints = std::array::from_fn(|k| gt[k] + Vector3::new(5.0, 0.0, 0.0));
        let aligned = align_for_eval(&pred, &gt, &tips_mask()).unwrap();
        let e = epe(&[aligned], &[gt], &[tips_mask()]).unwrap();
        assert!(e < 1e-9, "{e}");
    }

    #[test]
    fn too_few_points_skips_frame() {
        let gt = *HandModel::default_right().rest_joints();
        let mut two = [false; NUM_JOINTS];
        two[4] = true;
        two[8] = true;
        let frames = vec![
            EvalFrame {
                id: "a".into(),
                pred: gt,
                gt,
                mask: two,
            },
            EvalFrame {
                id: "b".into(),
                pred: gt,
                gt,
                mask: tips_mask(),
            },
        ];
        let r = evaluate(&frames, &EvalOptions::default()).unwrap();
        assert_eq!(
            (r.frames_evaluated, r.frames_skipped, r.keypoints_evaluated),
            (1, 1, 5)
        );
        assert_eq!(r.auc, 1.0);
        let none = EvalOptions {
            align: AlignMode::None,
            ..EvalOptions::default()
        };
        assert_eq!(evaluate(&frames, &none).unwrap().frames_skipped, 0);
    }

    #[test]
    fn all_frames_skipped_is_empty() {
        let gt = *HandModel::default_right().rest_joints();
        let frames = vec![EvalFrame {
            id: "a".into(),
            pred: gt,
            gt,
            mask: [false; NUM_JOINTS],
        }];
        assert!(matches!(
            evaluate(&frames, &EvalOptions::default()),
            Err(Error::EmptyEvaluation)
        ));
    }

    #[test]
    fn unmatched_stems_are_listed() {
        let z = [Vector3::zeros(); NUM_JOINTS];
        let gt = vec![
            GroundTruthFrame {
                id: "0001".into(),
                points: z,
                mask: [true; NUM_JOINTS],
            },
            GroundTruthFrame {
                id: "0002".into(),
                points: z,
                mask: [true; NUM_JOINTS],
            },
        ];
        let err = match_frames(vec![("0001".into(), z), ("0009".into(), z)], gt).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("0002") && msg.contains("0009"), "{msg}");
    }
}
