//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! loss.kind = huber
//! loss.fingertip_weight = 5
//! solver.method = bfgs
//! fit.stages = 2
//! ```
//!
//! Layers apply in order defaults → config file → command-line flags, each
//! later layer overriding the earlier ones key by key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evalkit::{AlignMode, AnnotationFormat};
use crate::pipeline::{FitOptions, ScaleMode, Stages};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub fit: FitOptions,
    pub align: AlignMode,
    pub format: AnnotationFormat,
    /// Hand model file; the bundled model when `None`.
    pub model: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            align: AlignMode::Similarity,
            format: AnnotationFormat::GenericJson,
            model: None,
        }
    }
}

/// Every recognised key.
pub const KEYS: [&str; 20] = [
    "loss.kind",
    "loss.rho",
    "loss.delta",
    "loss.fingertip_weight",
    "loss.a_limits",
    "loss.granularity",
    "solver.method",
    "solver.memory",
    "solver.max_iters",
    "solver.grad_tol",
    "solver.f_tol",
    "solver.c1",
    "solver.c2",
    "solver.lbfgs_scaling",
    "fit.stages",
    "fit.refine_root",
    "fit.optimize_shape",
    "fit.scale_mode",
    "eval.align",
    "eval.format",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::param(format!("{key}: cannot parse {v:?}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::param(format!(
            "{key}: expected true or false, got {v:?}"
        ))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let f = &mut self.fit;
        match key.trim() {
            "loss.kind" => f.loss.kind = v.parse()?,
            "loss.rho" => f.loss.rho = num(key, v)?,
            "loss.delta" => f.loss.delta = num(key, v)?,
            "loss.fingertip_weight" => f.loss.fingertip_weight = num(key, v)?,
            "loss.a_limits" => f.loss.a_limits = num(key, v)?,
            "loss.granularity" => f.loss.granularity = v.parse()?,
            "solver.method" => f.solver.method = v.parse()?,
            "solver.memory" => f.solver.memory = num(key, v)?,
            "solver.max_iters" => f.solver.max_iters = num(key, v)?,
            "solver.grad_tol" => f.solver.grad_tol = num(key, v)?,
            "solver.f_tol" => f.solver.f_tol = num(key, v)?,
            "solver.c1" => f.solver.c1 = num(key, v)?,
            "solver.c2" => f.solver.c2 = num(key, v)?,
            "solver.lbfgs_scaling" => f.solver.lbfgs_scaling = flag(key, v)?,
            "fit.stages" => {
                f.stages = match v {
                    "1" | "one" => Stages::One,
                    "2" | "two" => Stages::Two,
                    _ => return Err(Error::param(format!("{key}: expected 1 or 2, got {v:?}"))),
                }
            }
            "fit.refine_root" => f.refine_root = flag(key, v)?,
            "fit.optimize_shape" => f.optimize_shape = flag(key, v)?,
            "fit.scale_mode" => {
                f.scale_mode = match v {
                    "wrist_index_mcp" => ScaleMode::WristIndexMcp,
                    "palm_least_squares" => ScaleMode::PalmLeastSquares,
                    _ => {
                        return Err(Error::param(format!(
                            "{key}: expected wrist_index_mcp or palm_least_squares, got {v:?}"
                        )))
                    }
                }
            }
            "eval.align" => self.align = v.parse()?,
            "eval.format" => self.format = v.parse()?,
            "model.path" => self.model = Some(PathBuf::from(v)),
            other => return Err(Error::param(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` assignment.
    pub fn assign(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::param(format!("expected key=value, got {kv:?}")))?;
        self.set(k, v)
    }

    /// Applies every assignment in a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.assign(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: match e {
                    Error::Parameter(m) => m,
                    other => other.to_string(),
                },
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, path)
    }

    /// Defaults, then `file`, then `overrides` in order.
    pub fn layered(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(p) = file {
            cfg.apply_file(p)?;
        }
        for kv in overrides {
            cfg.assign(kv)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.fit.loss.validate()?;
        self.fit.solver.validate()
    }

    /// Current value of every key, for reports.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let f = &self.fit;
        let vals = [
            f.loss.kind.as_str().to_string(),
            f.loss.rho.to_string(),
            f.loss.delta.to_string(),
            f.loss.fingertip_weight.to_string(),
            f.loss.a_limits.to_string(),
            match f.loss.granularity {
                crate::objectives::Granularity::PerCoordinate => "per_coordinate".into(),
                crate::objectives::Granularity::PerPoint => "per_point".into(),
            },
            f.solver.method.as_str().to_string(),
            f.solver.memory.to_string(),
            f.solver.max_iters.to_string(),
            f.solver.grad_tol.to_string(),
            f.solver.f_tol.to_string(),
            f.solver.c1.to_string(),
            f.solver.c2.to_string(),
            f.solver.lbfgs_scaling.to_string(),
            match f.stages {
                Stages::One => "1".into(),
                Stages::Two => "2".into(),
            },
            f.refine_root.to_string(),
            f.optimize_shape.to_string(),
            match f.scale_mode {
                ScaleMode::WristIndexMcp => "wrist_index_mcp".into(),
                ScaleMode::PalmLeastSquares => "palm_least_squares".into(),
            },
            self.align.as_str().to_string(),
            self.format.as_str().to_string(),
        ];
        let mut out: BTreeMap<String, String> =
            KEYS.iter().map(|k| k.to_string()).zip(vals).collect();
        out.insert(
            "model.path".into(),
            self.model
                .as_ref()
                .map_or("<bundled>".into(), |p| p.display().to_string()),
        );
        out
    }
}
