use crate::error::{Error, Result};
use crate::model::{Joints, NUM_JOINTS};

pub type Mask = [bool; NUM_JOINTS];

/// Lower and upper ends of the PCK range scored by [`auc`], in mm.
pub const AUC_RANGE: (f64, f64) = (20.0, 50.0);

/// The 31 integer thresholds 20, 21, …, 50 mm.
pub fn default_thresholds() -> Vec<f64> {
    (20..=50).map(f64::from).collect()
}

fn check_frames(pred: &[Joints], gt: &[Joints], masks: &[Mask]) -> Result<()> {
    if pred.len() != gt.len() || gt.len() != masks.len() {
        return Err(Error::param(format!(
            "frame count mismatch: {} predictions, {} ground truth, {} masks",
            pred.len(),
            gt.len(),
            masks.len()
        )));
    }
    Ok(())
}

/// Euclidean errors of every valid (frame, keypoint) pair in frame order.
pub fn joint_errors(pred: &[Joints], gt: &[Joints], masks: &[Mask]) -> Result<Vec<f64>> {
    check_frames(pred, gt, masks)?;
    let mut out = Vec::new();
    for ((p, g), m) in pred.iter().zip(gt).zip(masks) {
        for k in 0..NUM_JOINTS {
            if m[k] {
                out.push((p[k] - g[k]).norm());
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    Ok(out)
}

/// Root mean squared joint distance over valid pairs.
pub fn epe(pred: &[Joints], gt: &[Joints], masks: &[Mask]) -> Result<f64> {
    let errs = joint_errors(pred, gt, masks)?;
    Ok(rms(&errs))
}

/// [`epe`] of one frame with every keypoint valid.
pub fn epe_single(pred: &Joints, gt: &Joints) -> f64 {
    let errs: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| (p - g).norm()).collect();
    rms(&errs)
}

pub(crate) fn rms(errs: &[f64]) -> f64 {
    (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::param("no PCK thresholds"));
    }
    if thresholds.iter().any(|t| !t.is_finite()) {
        return Err(Error::param("PCK thresholds must be finite"));
    }
    if thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("PCK thresholds must be strictly increasing"));
    }
    Ok(())
}

/// PCK over precomputed errors.
pub fn pck_from_errors(errors: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_thresholds(thresholds)?;
    if errors.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let within = sorted.partition_point(|e| *e <= t);
            (t, within as f64 / n)
        })
        .collect())
}

/// Fraction of valid pairs with error ≤ each threshold.
pub fn pck_curve(
    pred: &[Joints],
    gt: &[Joints],
    masks: &[Mask],
    thresholds: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_thresholds(thresholds)?;
    pck_from_errors(&joint_errors(pred, gt, masks)?, thresholds)
}

/// Trapezoidal area under a PCK curve divided by its threshold span.
pub fn auc(curve: &[(f64, f64)]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::param(format!(
            "AUC needs at least 2 curve points, got {}",
            curve.len()
        )));
    }
    let thresholds: Vec<f64> = curve.iter().map(|c| c.0).collect();
    check_thresholds(&thresholds)?;
    let area: f64 = curve
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();
    let span = curve[curve.len() - 1].0 - curve[0].0;
    Ok(area / span)
}
