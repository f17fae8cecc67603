use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::alignment::RigidTransform;
use crate::error::{Error, Result};
use crate::model::{mirror_x, HandModel, Handedness, Joints, PoseState, NUM_JOINTS};
use crate::solver::SolveStatus;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostics {
    pub stage: usize,
    pub loss_initial: f64,
    pub loss_final: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
    pub status: SolveStatus,
}

/// Output of [`fit`](super::fit).
///
/// `transform` is the model → target similarity found by palm alignment
/// (in the mirrored frame for left hands). Its rotation is also stored in
/// `state.root`, so the target-space joints are
/// `placement().apply(FK(state))`, equivalently
/// `transform.apply(FK(state with zero root))` when the root was not refined.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub state: PoseState,
    pub transform: RigidTransform,
    pub joints_target_space: Joints,
    pub handedness: Handedness,
    pub stage_diagnostics: Vec<StageDiagnostics>,
}

impl FitResult {
    /// Scale and translation of `transform` without its rotation.
    pub fn placement(&self) -> RigidTransform {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: self.transform.translation,
            scale: self.transform.scale,
        }
    }

    /// Target-space joints recomputed from the stored parameters.
    pub fn joints_from_state(&self, model: &HandModel) -> Result<Joints> {
        let fk = crate::model::forward_kinematics(model, &self.state)?;
        let placement = self.placement();
        let mut out = [Vector3::zeros(); NUM_JOINTS];
        for (o, p) in out.iter_mut().zip(&fk) {
            let q = placement.apply_point(p);
            *o = match self.handedness {
                Handedness::Right => q,
                Handedness::Left => mirror_x(&q),
            };
        }
        Ok(out)
    }

    pub fn to_file(&self) -> FitResultFile {
        FitResultFile {
            handedness: self.handedness,
            theta: self.state.theta.clone(),
            beta: self.state.beta.clone(),
            root: self.state.root,
            transform: TransformRecord {
                rotation: {
                    let r = &self.transform.rotation;
                    [
                        r[(0, 0)],
                        r[(0, 1)],
                        r[(0, 2)],
                        r[(1, 0)],
                        r[(1, 1)],
                        r[(1, 2)],
                        r[(2, 0)],
                        r[(2, 1)],
                        r[(2, 2)],
                    ]
                },
                translation: self.transform.translation.into(),
                scale: self.transform.scale,
            },
            joints: self
                .joints_target_space
                .iter()
                .map(|p| [p.x, p.y, p.z])
                .collect(),
            diagnostics: Diagnostics {
                stages: self.stage_diagnostics.clone(),
            },
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        self.to_file().write(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    /// Row-major 3×3 rotation.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    #[serde(default)]
    pub stages: Vec<StageDiagnostics>,
}

/// On-disk form of a [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResultFile {
    #[serde(default)]
    pub handedness: Handedness,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub root: [f64; 3],
    pub transform: TransformRecord,
    pub joints: Vec<[f64; 3]>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl FitResultFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn into_result(self) -> Result<FitResult> {
        let state = PoseState {
            theta: self.theta,
            beta: self.beta,
            root: self.root,
        };
        state.validate()?;
        if self.joints.len() != NUM_JOINTS {
            return Err(Error::param(format!(
                "expected {NUM_JOINTS} joints, got {}",
                self.joints.len()
            )));
        }
        let rotation = Matrix3::from_row_slice(&self.transform.rotation);
        let transform = RigidTransform::new(
            rotation,
            Vector3::from(self.transform.translation),
            self.transform.scale,
        )?;
        let mut joints = [Vector3::zeros(); NUM_JOINTS];
        for (j, p) in joints.iter_mut().zip(&self.joints) {
            *j = Vector3::from(*p);
        }
        Ok(FitResult {
            state,
            transform,
            joints_target_space: joints,
            handedness: self.handedness,
            stage_diagnostics: self.diagnostics.stages,
        })
    }
}

/// Wavefront OBJ of the skeleton: 21 vertices and one line per bone.
pub fn skeleton_obj(model: &HandModel, joints: &Joints) -> String {
    let mut out = String::from("# hand skeleton: 21 keypoints, 20 bones\n");
    for p in joints {
        let _ = writeln!(out, "v {} {} {}", p.x, p.y, p.z);
    }
    for child in 1..NUM_JOINTS {
        if let Some(parent) = model.parent(child) {
            let _ = writeln!(out, "l {} {}", parent + 1, child + 1);
        }
    }
    out
}
