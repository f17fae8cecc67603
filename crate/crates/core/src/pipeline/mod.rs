//! Keypoints in, articulated hand out.
//!
//! 1. Left hands are mirrored onto the right-handed model.
//! 2. The rest skeleton is aligned to the target palm: scale from the
//!    wrist → index-MCP bone, rotation and translation from the six palm
//!    anchors.
//! 3. The target is pulled into model space and θ is fitted from zero
//!    (stage 1: 3D loss; optional stage 2: x,y-only loss plus joint limits).
//! 4. The alignment rotation becomes the root orientation and the fitted
//!    joints are mapped back to target space.

mod keypoints;
mod result;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::alignment::{
    estimate_rigid, estimate_scale, estimate_similarity, matrix_to_axis_angle, RigidTransform,
};
use crate::error::{Error, Result};
use crate::model::{
    axis_angle_to_matrix, forward_kinematics, mirror_x, HandModel, Handedness, PoseState,
    NUM_JOINTS, PALM,
};
use crate::objectives::{FitObjective, LossSpec, Stage, VariableLayout};
use crate::solver::{minimize, SolveOutcome, SolverConfig};

pub use keypoints::{denormalize, HandRecord, KeypointFile, KeypointSet, Units};
pub use result::{
    skeleton_obj, Diagnostics, FitResult, FitResultFile, StageDiagnostics, TransformRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stages {
    #[default]
    One,
    Two,
}

/// How the model → target scale is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// Ratio of the wrist → index-MCP distances.
    #[default]
    WristIndexMcp,
    /// Least-squares similarity over all six palm anchors.
    PalmLeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub loss: LossSpec,
    pub solver: SolverConfig,
    pub stages: Stages,
    /// Add the root orientation to the stage variables.
    pub refine_root: bool,
    /// Add β to the stage variables (with L2 shrinkage).
    pub optimize_shape: bool,
    pub scale_mode: ScaleMode,
}

/// Model → target similarity from the palm anchors of the rest skeleton.
pub fn align_rest_to_target(
    model: &HandModel,
    target: &[Vector3<f64>; NUM_JOINTS],
    mode: ScaleMode,
) -> Result<RigidTransform> {
    let rest = model.rest_joints();
    let src: Vec<_> = PALM.iter().map(|&i| rest[i]).collect();
    let dst: Vec<_> = PALM.iter().map(|&i| target[i]).collect();
    match mode {
        ScaleMode::WristIndexMcp => {
            let scale = estimate_scale(rest, target)?;
            let scaled: Vec<_> = src.iter().map(|p| p * scale).collect();
            let rigid = estimate_rigid(&scaled, &dst)?;
            Ok(RigidTransform {
                rotation: rigid.rotation,
                translation: rigid.translation,
                scale,
            })
        }
        ScaleMode::PalmLeastSquares => estimate_similarity(&src, &dst),
    }
}

fn diagnostics(stage: usize, out: &SolveOutcome) -> StageDiagnostics {
    StageDiagnostics {
        stage,
        loss_initial: out.f_initial,
        loss_final: out.f_final,
        iterations: out.iterations,
        evaluations: out.evaluations,
        grad_norm: out.grad_norm,
        status: out.status,
    }
}

/// Fits the model to one hand's keypoints.
///
/// `target` must already be in pixel or metric units (see [`denormalize`])
/// and have all six palm anchors valid.
pub fn fit(model: &HandModel, target: &KeypointSet, opts: &FitOptions) -> Result<FitResult> {
    if target.units == Units::Normalized {
        return Err(Error::param(
            "target keypoints are normalized; denormalize them first",
        ));
    }
    target.validate()?;
    if !target.palm_valid() {
        return Err(Error::Degenerate(
            "all six palm anchors must be valid for alignment".into(),
        ));
    }
    opts.loss.validate()?;
    opts.solver.validate()?;

    let left = target.handedness == Handedness::Left;
    let mut points = target.points;
    if left {
        points.iter_mut().for_each(|p| *p = mirror_x(p));
    }

    let transform = align_rest_to_target(model, &points, opts.scale_mode)?;
    let to_model = transform.inverse();
    let mut target_model = points;
    for p in target_model.iter_mut() {
        *p = to_model.apply_point(p);
    }
    let frame: Matrix3<f64> = transform.rotation * transform.scale;
    let layout = VariableLayout {
        refine_root: opts.refine_root,
        optimize_shape: opts.optimize_shape,
    };

    let mut stage_diagnostics = Vec::new();
    let stage1 = FitObjective::new(model, target_model, &target.valid, opts.loss, Stage::One)?
        .with_frame(frame)
        .with_layout(layout, PoseState::zero());
    let x0 = stage1.pack(&PoseState::zero());
    let out1 = minimize(&stage1, &x0, &opts.solver).map_err(|e| Error::Fit {
        stage: 1,
        diagnostics: Vec::new(),
        source: Box::new(e),
    })?;
    stage_diagnostics.push(diagnostics(1, &out1));
    let mut x = out1.x_final;

    if opts.stages == Stages::Two {
        let stage2 = FitObjective::new(model, target_model, &target.valid, opts.loss, Stage::Two)?
            .with_frame(frame)
            .with_layout(layout, PoseState::zero());
        let out2 = minimize(&stage2, &x, &opts.solver).map_err(|e| Error::Fit {
            stage: 2,
            diagnostics: stage_diagnostics.clone(),
            source: Box::new(e),
        })?;
        stage_diagnostics.push(diagnostics(2, &out2));
        x = out2.x_final;
    }

    let model_state = layout.unpack(&x, &PoseState::zero());
    let root_rotation = transform.rotation * axis_angle_to_matrix(&Vector3::from(model_state.root));
    let root = matrix_to_axis_angle(&root_rotation)?;
    let state = PoseState {
        root: root.into(),
        ..model_state.clone()
    };

    let fk = forward_kinematics(model, &model_state)?;
    let mut joints = [Vector3::zeros(); NUM_JOINTS];
    for (j, p) in joints.iter_mut().zip(&fk) {
        let q = transform.apply_point(p);
        *j = if left { mirror_x(&q) } else { q };
    }

    Ok(FitResult {
        state,
        transform,
        joints_target_space: joints,
        handedness: target.handedness,
        stage_diagnostics,
    })
}
