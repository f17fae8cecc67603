//! Camera-free 3D hand pose fitting.
//!
//! A joints-only articulated hand model is aligned to 21 detected keypoints
//! by its palm, then its pose is fitted with BFGS or L-BFGS under a choice of
//! robust losses. [`evalkit`] scores the result with EPE, PCK and AUC.
//!
//! ```
//! use handfit::{evalkit, fit, FitOptions, HandModel};
//!
//! let model = HandModel::default_right();
//! let data = evalkit::synth_generate(&model, 1, 0.0, 7).unwrap();
//! let result = fit(&model, &data.targets[0], &FitOptions::default()).unwrap();
//! let epe = evalkit::epe_single(&result.joints_target_space, &data.targets[0].points);
//! assert!(epe < 1e-3);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod cli;
pub mod error;
pub mod evalkit;
pub mod model;
pub mod objectives;
pub mod pipeline;
pub mod solver;

pub use alignment::RigidTransform;
pub use error::{Error, Result};
pub use model::{HandModel, Handedness, PoseState};
pub use objectives::{LossKind, LossSpec};
pub use pipeline::{fit, FitOptions, FitResult, KeypointSet, Stages, Units};
pub use solver::{minimize, Method, SolverConfig};
