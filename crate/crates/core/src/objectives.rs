//! Loss functions and the two fitting-stage objectives.
//!
//! All data terms use a weighted mean: `Σᵢ wᵢ Σ_d ρ(r_id) / (Σᵢ wᵢ · D)` for
//! per-coordinate residuals, or `Σᵢ wᵢ ρ(‖rᵢ‖) / (Σᵢ wᵢ · D)` for per-point
//! residuals, where `ρ(r)` is `r²` (MSE), `ρ²r²/(r²+ρ²)` (Geman-McClure) or
//! the Huber function. Residuals are expressed in target units.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    self, HandModel, JointLimit, Joints, PoseState, FINGERTIPS, NUM_JOINTS, NUM_POSE, NUM_SHAPE,
};
use crate::pipeline::KeypointSet;
use crate::solver::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Mse,
    GemanMcclure,
    Huber,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::GemanMcclure => "geman_mcclure",
            LossKind::Huber => "huber",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "geman_mcclure" | "gm" => Ok(LossKind::GemanMcclure),
            "huber" => Ok(LossKind::Huber),
            other => Err(Error::param(format!("unknown loss kind {other:?}"))),
        }
    }
}

/// Whether robust penalties act on each coordinate or on each point's norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    PerCoordinate,
    PerPoint,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_coordinate" | "coordinate" => Ok(Granularity::PerCoordinate),
            "per_point" | "point" => Ok(Granularity::PerPoint),
            other => Err(Error::param(format!(
                "unknown residual granularity {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Geman-McClure scale, target units.
    pub rho: f64,
    /// Huber threshold, target units.
    pub delta: f64,
    /// Weight of the five fingertips; 1 means unweighted.
    pub fingertip_weight: f64,
    /// Weight of the joint-limit penalty in stage 2.
    pub a_limits: f64,
    pub granularity: Granularity,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            kind: LossKind::Mse,
            rho: 20.0,
            delta: 20.0,
            fingertip_weight: 5.0,
            a_limits: 1e-2,
            granularity: Granularity::PerCoordinate,
        }
    }
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kind == LossKind::GemanMcclure && !(self.rho > 0.0) {
            return Err(Error::param(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if self.kind == LossKind::Huber && !(self.delta > 0.0) {
            return Err(Error::param(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.fingertip_weight >= 1.0) || !self.fingertip_weight.is_finite() {
            return Err(Error::param(format!(
                "fingertip_weight must be >= 1, got {}",
                self.fingertip_weight
            )));
        }
        if !(self.a_limits >= 0.0) || !self.a_limits.is_finite() {
            return Err(Error::param(format!(
                "a_limits must be >= 0, got {}",
                self.a_limits
            )));
        }
        Ok(())
    }

    /// Per-residual penalty ρ(r).
    pub fn penalty(&self, r: f64) -> f64 {
        match self.kind {
            LossKind::Mse => r * r,
            LossKind::GemanMcclure => gm(r, self.rho),
            LossKind::Huber => huber(r, self.delta),
        }
    }

    /// ρ'(r) / r, finite everywhere including r = 0.
    pub fn penalty_slope_ratio(&self, r: f64) -> f64 {
        match self.kind {
            LossKind::Mse => 2.0,
            LossKind::GemanMcclure => {
                let rho2 = self.rho * self.rho;
                let d = r * r + rho2;
                2.0 * rho2 * rho2 / (d * d)
            }
            LossKind::Huber => {
                if r.abs() <= self.delta {
                    1.0
                } else {
                    self.delta / r.abs()
                }
            }
        }
    }

    /// Keypoint weights: `fingertip_weight` on fingertips, 1 elsewhere, 0 if invalid.
    pub fn keypoint_weights(&self, valid: &[bool; NUM_JOINTS]) -> [f64; NUM_JOINTS] {
        let mut w = [0.0; NUM_JOINTS];
        for (i, wi) in w.iter_mut().enumerate() {
            if valid[i] {
                *wi = if FINGERTIPS.contains(&i) {
                    self.fingertip_weight
                } else {
                    1.0
                };
            }
        }
        w
    }
}

fn gm(r: f64, rho: f64) -> f64 {
    let r2 = r * r;
    let rho2 = rho * rho;
    rho2 * r2 / (r2 + rho2)
}

fn huber(a: f64, delta: f64) -> f64 {
    if a.abs() <= delta {
        0.5 * a * a
    } else {
        delta * (a.abs() - 0.5 * delta)
    }
}

/// Weighted mean of squared coordinate errors over `N` points of dimension `D`.
pub fn loss_mse<const D: usize>(
    pred: &[[f64; D]],
    target: &[[f64; D]],
    weights: &[f64],
) -> Result<f64> {
    if pred.len() != target.len() || pred.len() != weights.len() {
        return Err(Error::param(format!(
            "shape mismatch: {} predictions, {} targets, {} weights",
            pred.len(),
            target.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::param("weights must be non-negative"));
    }
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::param("weights are all zero"));
    }
    let num: f64 = pred
        .iter()
        .zip(target)
        .zip(weights)
        .map(|((p, t), w)| w * p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok(num / (wsum * D as f64))
}

/// Mean Geman-McClure penalty over the residuals.
pub fn loss_gm(residuals: &[f64], rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::param(format!("rho must be positive, got {rho}")));
    }
    mean(residuals.iter().map(|&r| gm(r, rho)), residuals.len())
}

/// Mean Huber penalty over the residuals.
pub fn loss_huber(residuals: &[f64], delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::param(format!("delta must be positive, got {delta}")));
    }
    mean(residuals.iter().map(|&r| huber(r, delta)), residuals.len())
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("no residuals"));
    }
    Ok(values.sum::<f64>() / n as f64)
}

/// Soft joint-limit penalty `a Σᵢ (e^{lᵢ−θᵢ} + e^{θᵢ−uᵢ})`.
pub fn e_limits(theta: &[f64], limits: &[JointLimit], a_limits: f64) -> f64 {
    a_limits
        * theta
            .iter()
            .zip(limits)
            .map(|(t, l)| (l.lower - t).exp() + (t - l.upper).exp())
            .sum::<f64>()
}

pub fn e_limits_gradient(theta: &[f64], limits: &[JointLimit], a_limits: f64) -> Vec<f64> {
    theta
        .iter()
        .zip(limits)
        .map(|(t, l)| a_limits * ((t - l.upper).exp() - (l.lower - t).exp()))
        .collect()
}

/// Data term over 3D (stage 1) or x,y-only (stage 2) residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    One,
    Two,
}

impl Stage {
    fn dims(self) -> usize {
        match self {
            Stage::One => 3,
            Stage::Two => 2,
        }
    }
}

/// Value of the weighted data loss and its gradient with respect to each
/// residual vector.
pub fn weighted_loss(
    residuals: &[Vector3<f64>; NUM_JOINTS],
    weights: &[f64; NUM_JOINTS],
    spec: &LossSpec,
    dims: usize,
) -> Result<(f64, [Vector3<f64>; NUM_JOINTS])> {
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::EmptyObjective);
    }
    let norm = 1.0 / (wsum * dims as f64);
    let mut value = 0.0;
    let mut grad = [Vector3::zeros(); NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let mut r = residuals[i];
        if dims < 3 {
            r.z = 0.0;
        }
        match spec.granularity {
            Granularity::PerCoordinate => {
                for d in 0..dims {
                    value += w * spec.penalty(r[d]);
                    grad[i][d] = w * norm * spec.penalty_slope_ratio(r[d]) * r[d];
                }
            }
            Granularity::PerPoint => {
                let n = r.norm();
                value += w * spec.penalty(n);
                grad[i] = r * (w * norm * spec.penalty_slope_ratio(n));
            }
        }
    }
    Ok((value * norm, grad))
}

/// Which parameters a fit optimises besides θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VariableLayout {
    pub refine_root: bool,
    pub optimize_shape: bool,
}

impl VariableLayout {
    pub fn dim(&self) -> usize {
        NUM_POSE
            + if self.refine_root { 3 } else { 0 }
            + if self.optimize_shape { NUM_SHAPE } else { 0 }
    }

    fn root_offset(&self) -> usize {
        NUM_POSE
    }

    fn shape_offset(&self) -> usize {
        NUM_POSE + if self.refine_root { 3 } else { 0 }
    }

    /// Packs the optimised entries of `state`.
    pub fn pack(&self, state: &PoseState) -> Vec<f64> {
        let mut x = state.theta.clone();
        if self.refine_root {
            x.extend_from_slice(&state.root);
        }
        if self.optimize_shape {
            x.extend_from_slice(&state.beta);
        }
        x
    }

    /// Writes `x` over the optimised entries of `base`.
    pub fn unpack(&self, x: &[f64], base: &PoseState) -> PoseState {
        let mut s = base.clone();
        s.theta.copy_from_slice(&x[..NUM_POSE]);
        if self.refine_root {
            let o = self.root_offset();
            s.root.copy_from_slice(&x[o..o + 3]);
        }
        if self.optimize_shape {
            let o = self.shape_offset();
            s.beta.copy_from_slice(&x[o..o + NUM_SHAPE]);
        }
        s
    }
}

/// Weight of the L2 shrinkage on β when shape is optimised.
pub const SHAPE_SHRINKAGE: f64 = 1e-3;

/// Stage objective over packed variables, evaluated in model space.
///
/// Residuals are `frame · (FK(x)ᵢ − targetᵢ)`; `frame` maps model-space
/// offsets to target units (scale · rotation of the alignment), so stage 2
/// drops the target-frame depth component.
#[derive(Debug, Clone)]
pub struct FitObjective<'a> {
    model: &'a HandModel,
    target: Joints,
    weights: [f64; NUM_JOINTS],
    frame: Matrix3<f64>,
    spec: LossSpec,
    stage: Stage,
    layout: VariableLayout,
    base: PoseState,
}

impl<'a> FitObjective<'a> {
    pub fn new(
        model: &'a HandModel,
        target: Joints,
        valid: &[bool; NUM_JOINTS],
        spec: LossSpec,
        stage: Stage,
    ) -> Result<Self> {
        spec.validate()?;
        let weights = spec.keypoint_weights(valid);
        if weights.iter().all(|w| *w == 0.0) {
            return Err(Error::EmptyObjective);
        }
        Ok(Self {
            model,
            target,
            weights,
            frame: Matrix3::identity(),
            spec,
            stage,
            layout: VariableLayout::default(),
            base: PoseState::zero(),
        })
    }

    pub fn with_frame(mut self, frame: Matrix3<f64>) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_layout(mut self, layout: VariableLayout, base: PoseState) -> Self {
        self.layout = layout;
        self.base = base;
        self
    }

    pub fn layout(&self) -> VariableLayout {
        self.layout
    }

    pub fn state(&self, x: &[f64]) -> PoseState {
        self.layout.unpack(x, &self.base)
    }

    pub fn pack(&self, state: &PoseState) -> Vec<f64> {
        self.layout.pack(state)
    }

    /// Objective value at a full pose state.
    pub fn value_at(&self, state: &PoseState) -> Result<f64> {
        let joints = model::forward_kinematics(self.model, state)?;
        let (v, _) = weighted_loss(
            &self.residuals(&joints),
            &self.weights,
            &self.spec,
            self.stage.dims(),
        )?;
        Ok(v + self.regularizers(state))
    }

    fn residuals(&self, joints: &Joints) -> [Vector3<f64>; NUM_JOINTS] {
        let mut r = [Vector3::zeros(); NUM_JOINTS];
        for i in 0..NUM_JOINTS {
            r[i] = self.frame * (joints[i] - self.target[i]);
        }
        r
    }

    fn regularizers(&self, state: &PoseState) -> f64 {
        let mut v = 0.0;
        if self.stage == Stage::Two {
            v += e_limits(&state.theta, self.model.joint_limits(), self.spec.a_limits);
        }
        if self.layout.optimize_shape {
            v += SHAPE_SHRINKAGE * state.beta.iter().map(|b| b * b).sum::<f64>();
        }
        v
    }

    fn evaluate(&self, x: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
        let state = self.state(x);
        let posed = match model::kinematics::pose(self.model, &state) {
            Ok(p) => p,
            Err(_) => return (f64::NAN, vec![f64::NAN; x.len()]),
        };
        let residuals = self.residuals(&posed.joints);
        let (data, dres) =
            match weighted_loss(&residuals, &self.weights, &self.spec, self.stage.dims()) {
                Ok(v) => v,
                Err(_) => return (f64::NAN, vec![f64::NAN; x.len()]),
            };
        let value = data + self.regularizers(&state);
        if !want_grad {
            return (value, Vec::new());
        }

        let jac =
            model::kinematics::jacobian(self.model, &state, &posed, self.layout.optimize_shape);
        let ft = self.frame.transpose();
        let mut djoint = vec![0.0; 3 * NUM_JOINTS];
        for i in 0..NUM_JOINTS {
            let g = ft * dres[i];
            djoint[3 * i..3 * i + 3].copy_from_slice(g.as_slice());
        }
        let mut grad = vec![0.0; x.len()];
        let add_cols = |dst: &mut [f64], col0: usize| {
            for (k, gk) in dst.iter_mut().enumerate() {
                let col = jac.column(col0 + k);
                *gk += col.iter().zip(&djoint).map(|(a, b)| a * b).sum::<f64>();
            }
        };
        add_cols(&mut grad[..NUM_POSE], 0);
        if self.layout.refine_root {
            let o = self.layout.root_offset();
            add_cols(&mut grad[o..o + 3], NUM_POSE);
        }
        if self.layout.optimize_shape {
            let o = self.layout.shape_offset();
            add_cols(&mut grad[o..o + NUM_SHAPE], NUM_POSE + 3);
            for (g, b) in grad[o..o + NUM_SHAPE].iter_mut().zip(&state.beta) {
                *g += 2.0 * SHAPE_SHRINKAGE * b;
            }
        }
        if self.stage == Stage::Two {
            let lg = e_limits_gradient(&state.theta, self.model.joint_limits(), self.spec.a_limits);
            for (g, l) in grad[..NUM_POSE].iter_mut().zip(lg) {
                *g += l;
            }
        }
        (value, grad)
    }
}

impl Objective for FitObjective<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x, false).0
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.evaluate(x, true)
    }
}

/// Stage-1 loss of `state` against a target already in aligned model space.
pub fn stage1_objective(
    state: &PoseState,
    model: &HandModel,
    target: &KeypointSet,
    spec: &LossSpec,
) -> Result<f64> {
    FitObjective::new(model, target.points, &target.valid, *spec, Stage::One)?.value_at(state)
}

/// Stage-2 loss: x,y-only data term plus the joint-limit penalty.
pub fn stage2_objective(
    state: &PoseState,
    model: &HandModel,
    target: &KeypointSet,
    spec: &LossSpec,
) -> Result<f64> {
    FitObjective::new(model, target.points, &target.valid, *spec, Stage::Two)?.value_at(state)
}
