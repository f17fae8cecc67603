use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlignMode {
    /// Per-frame similarity alignment of predictions onto ground truth.
    #[default]
    Similarity,
    /// Predictions are already in the ground-truth frame.
    None,
}

impl AlignMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Similarity => "similarity",
            Self::None => "none",
        }
    }
}

impl std::str::FromStr for AlignMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "similarity" => Ok(Self::Similarity),
            "none" => Ok(Self::None),
            other => Err(Error::param(format!(
                "unknown alignment mode '{other}' (expected similarity or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub epe_mm: f64,
    pub auc: f64,
    pub pck: Vec<(f64, f64)>,
    pub frames_evaluated: usize,
    /// Frames dropped because fewer than three valid points could be aligned.
    pub frames_skipped: usize,
    pub keypoints_evaluated: usize,
    pub alignment: AlignMode,
    #[serde(default)]
    pub config_echo: BTreeMap<String, String>,
}

pub const PROTOCOL_NOTE: &str = "joints-only surrogate hand model; \
predictions are similarity-aligned to ground truth per frame unless alignment = none";

impl EvalReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "EPE (mm)         {:.3}", self.epe_mm);
        let _ = writeln!(out, "AUC [20, 50] mm  {:.3}", self.auc);
        let _ = writeln!(
            out,
            "frames           {} evaluated, {} skipped",
            self.frames_evaluated, self.frames_skipped
        );
        let _ = writeln!(out, "keypoints        {}", self.keypoints_evaluated);
        let _ = writeln!(out, "alignment        {}", self.alignment.as_str());
        let _ = writeln!(out, "threshold_mm  pck");
        for (t, f) in &self.pck {
            let _ = writeln!(out, "{t:>12}  {f:.4}");
        }
        let _ = writeln!(out, "note: {PROTOCOL_NOTE}");
        out
    }

    /// PCK curve as `threshold_mm,pck` rows.
    pub fn pck_csv(&self) -> String {
        let mut out = String::from("threshold_mm,pck\n");
        for (t, f) in &self.pck {
            let _ = writeln!(out, "{t},{f}");
        }
        out
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
