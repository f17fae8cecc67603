//! Keypoint sets and the per-image keypoint JSON document.
//!
//! ```json
//! {
//!   "image_width": 640,
//!   "image_height": 480,
//!   "hands": [
//!     {
//!       "handedness": "right",
//!       "score": 0.97,
//!       "units": "normalized",
//!       "keypoints": [[0.51, 0.62, 0.0], ... 21 entries],
//!       "valid": [true, ... 21 entries]
//!     }
//!   ]
//! }
//! ```
//!
//! `units` is one of `normalized`, `pixels` (pixel x,y with pseudo-depth z)
//! or `mm`; `valid` is optional and defaults to all true. A document with an
//! empty `hands` array is valid and means nothing was detected.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mirror_x, Handedness, Joints, NUM_JOINTS, PALM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    #[serde(rename = "normalized")]
    Normalized,
    #[serde(rename = "pixels")]
    PixelsPseudoZ,
    #[serde(rename = "mm")]
    Millimeters,
}

/// 21 labelled 3D keypoints of one hand.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    pub points: Joints,
    pub units: Units,
    pub handedness: Handedness,
    pub valid: [bool; NUM_JOINTS],
    /// `(width, height)` in pixels; required when `units` is normalized.
    pub image_size: Option<(u32, u32)>,
    pub score: Option<f64>,
}

impl KeypointSet {
    /// All-valid right hand without image metadata.
    pub fn new(points: Joints, units: Units) -> Self {
        Self {
            points,
            units,
            handedness: Handedness::Right,
            valid: [true; NUM_JOINTS],
            image_size: None,
            score: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if self.valid[i] && !p.iter().all(|v| v.is_finite()) {
                return Err(Error::param(format!("keypoint {i} is not finite")));
            }
        }
        if self.units == Units::Normalized {
            for (i, p) in self.points.iter().enumerate() {
                let inside = (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y);
                if self.valid[i] && !inside {
                    return Err(Error::param(format!(
                        "normalized keypoint {i} has x,y outside [0, 1]: ({}, {})",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn palm_valid(&self) -> bool {
        PALM.iter().all(|&i| self.valid[i])
    }

    /// Copy reflected across x = 0 with the opposite handedness label.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for p in out.points.iter_mut() {
            *p = mirror_x(p);
        }
        out.handedness = match self.handedness {
            Handedness::Left => Handedness::Right,
            Handedness::Right => Handedness::Left,
        };
        out
    }
}

/// Scales normalized keypoints to pixels: `x·width`, `y·height`, `z·width`.
pub fn denormalize(kp: &KeypointSet) -> Result<KeypointSet> {
    if kp.units != Units::Normalized {
        return Err(Error::param("denormalize expects normalized keypoints"));
    }
    let (w, h) = kp
        .image_size
        .ok_or_else(|| Error::param("normalized keypoints need an image size"))?;
    let (w, h) = (w as f64, h as f64);
    let mut out = kp.clone();
    for p in out.points.iter_mut() {
        *p = Vector3::new(p.x * w, p.y * h, p.z * w);
    }
    out.units = Units::PixelsPseudoZ;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandRecord {
    pub handedness: Handedness,
    #[serde(default)]
    pub score: f64,
    pub keypoints: Vec<[f64; 3]>,
    pub units: Units,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<Vec<bool>>,
}

/// One keypoint document (one image).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointFile {
    pub image_width: u32,
    pub image_height: u32,
    pub hands: Vec<HandRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl KeypointFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
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

    /// Converts every hand record to a validated [`KeypointSet`].
    pub fn keypoint_sets(&self, path: &Path) -> Result<Vec<KeypointSet>> {
        self.hands
            .iter()
            .enumerate()
            .map(|(i, h)| {
                h.to_keypoint_set((self.image_width, self.image_height))
                    .map_err(|e| Error::Parse {
                        path: PathBuf::from(path),
                        line: 0,
                        message: format!("hand {i}: {e}"),
                    })
            })
            .collect()
    }

    pub fn from_sets(sets: &[KeypointSet], image_size: (u32, u32)) -> Self {
        Self {
            image_width: image_size.0,
            image_height: image_size.1,
            hands: sets.iter().map(HandRecord::from_keypoint_set).collect(),
            source: None,
        }
    }
}

impl HandRecord {
    pub fn to_keypoint_set(&self, image_size: (u32, u32)) -> Result<KeypointSet> {
        if self.keypoints.len() != NUM_JOINTS {
            return Err(Error::param(format!(
                "expected {NUM_JOINTS} keypoints, got {}",
                self.keypoints.len()
            )));
        }
        let mut valid = [true; NUM_JOINTS];
        if let Some(v) = &self.valid {
            if v.len() != NUM_JOINTS {
                return Err(Error::param(format!(
                    "expected {NUM_JOINTS} validity flags, got {}",
                    v.len()
                )));
            }
            valid.copy_from_slice(v);
        }
        let mut points = [Vector3::zeros(); NUM_JOINTS];
        for (p, k) in points.iter_mut().zip(&self.keypoints) {
            *p = Vector3::new(k[0], k[1], k[2]);
        }
        let kp = KeypointSet {
            points,
            units: self.units,
            handedness: self.handedness,
            valid,
            image_size: Some(image_size),
            score: Some(self.score),
        };
        kp.validate()?;
        Ok(kp)
    }

    pub fn from_keypoint_set(kp: &KeypointSet) -> Self {
        Self {
            handedness: kp.handedness,
            score: kp.score.unwrap_or(1.0),
            keypoints: kp.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            units: kp.units,
            valid: if kp.valid.iter().all(|v| *v) {
                None
            } else {
                Some(kp.valid.to_vec())
            },
        }
    }
}
