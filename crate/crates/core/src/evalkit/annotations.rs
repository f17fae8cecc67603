//! Ground-truth loaders.
//!
//! * `egodexter`: one text line per frame holding five `x, y, z` fingertip
//!   triplets (thumb → little) separated by `;`. An all-zero triplet marks a
//!   fingertip that was not annotated.
//! * `dexterobject`: one line per frame of whitespace- or comma-separated
//!   numbers; the first 15 are the five fingertips (trailing object corners
//!   are ignored). All-zero triplets are missing.
//! * `generic_json`: a keypoint document or a directory of them; the first
//!   hand of each document is the frame, keyed by file stem.
//!
//! Text formats key frames by their zero-padded data line index (`00000`).

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::metrics::Mask;
use crate::error::{Error, Result};
use crate::model::{Handedness, Joints, FINGERTIPS, NUM_JOINTS};
use crate::pipeline::{HandRecord, KeypointFile, Units};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationFormat {
    Egodexter,
    Dexterobject,
    GenericJson,
}

impl AnnotationFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Egodexter => "egodexter",
            Self::Dexterobject => "dexterobject",
            Self::GenericJson => "generic_json",
        }
    }
}

impl FromStr for AnnotationFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "egodexter" => Ok(Self::Egodexter),
            "dexterobject" => Ok(Self::Dexterobject),
            "generic_json" => Ok(Self::GenericJson),
            other => Err(Error::param(format!(
                "unknown annotation format '{other}' (expected egodexter, dexterobject or generic_json)"
            ))),
        }
    }
}

/// One annotated frame in mm; `mask` marks which keypoints carry data.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    pub id: String,
    pub points: Joints,
    pub mask: Mask,
}

pub fn load_annotations(path: &Path, format: AnnotationFormat) -> Result<Vec<GroundTruthFrame>> {
    match format {
        AnnotationFormat::Egodexter => {
            let text = read(path)?;
            parse_fingertip_lines(&text, path, split_egodexter)
        }
        AnnotationFormat::Dexterobject => {
            let text = read(path)?;
            parse_fingertip_lines(&text, path, split_dexterobject)
        }
        AnnotationFormat::GenericJson => load_generic_json(path),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn split_egodexter(line: &str) -> std::result::Result<Vec<f64>, String> {
    let triplets: Vec<&str> = line
        .split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect();
    if triplets.len() != 5 {
        return Err(format!(
            "expected 5 fingertip triplets, found {}",
            triplets.len()
        ));
    }
    let mut out = Vec::with_capacity(15);
    for t in triplets {
        let vals = numbers(t.split(',').map(str::trim))?;
        if vals.len() != 3 {
            return Err(format!("triplet '{t}' has {} values", vals.len()));
        }
        out.extend(vals);
    }
    Ok(out)
}

fn split_dexterobject(line: &str) -> std::result::Result<Vec<f64>, String> {
    let vals = numbers(
        line.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty()),
    )?;
    if vals.len() < 15 {
        return Err(format!("expected at least 15 values, found {}", vals.len()));
    }
    Ok(vals[..15].to_vec())
}

fn numbers<'a>(tokens: impl Iterator<Item = &'a str>) -> std::result::Result<Vec<f64>, String> {
    tokens
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("'{t}' is not a finite number"))
        })
        .collect()
}

fn parse_fingertip_lines(
    text: &str,
    path: &Path,
    split: fn(&str) -> std::result::Result<Vec<f64>, String>,
) -> Result<Vec<GroundTruthFrame>> {
    let mut frames = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = split(line).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        let mut points = [Vector3::zeros(); NUM_JOINTS];
        let mut mask = [false; NUM_JOINTS];
        for (f, &k) in FINGERTIPS.iter().enumerate() {
            let p = Vector3::new(vals[3 * f], vals[3 * f + 1], vals[3 * f + 2]);
            if p != Vector3::zeros() {
                points[k] = p;
                mask[k] = true;
            }
        }
        frames.push(GroundTruthFrame {
            id: format!("{:05}", frames.len()),
            points,
            mask,
        });
    }
    Ok(frames)
}

fn load_generic_json(path: &Path) -> Result<Vec<GroundTruthFrame>> {
    let files = if path.is_dir() {
        json_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    let mut frames = Vec::with_capacity(files.len());
    for file in files {
        let doc = KeypointFile::read(&file)?;
        let set = doc
            .keypoint_sets(&file)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::Parse {
                path: file.clone(),
                line: 0,
                message: "ground-truth document has no hands".into(),
            })?;
        if set.units == Units::Normalized {
            return Err(Error::Parse {
                path: file.clone(),
                line: 0,
                message: "ground truth must be metric, not normalized".into(),
            });
        }
        frames.push(GroundTruthFrame {
            id: stem(&file),
            points: set.points,
            mask: set.valid,
        });
    }
    Ok(frames)
}

/// Sorted `*.json` files directly inside `dir`.
pub fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Writes one frame as a single-hand keypoint document in mm.
pub fn write_generic_json(path: &Path, frame: &GroundTruthFrame) -> Result<()> {
    let doc = KeypointFile {
        image_width: 0,
        image_height: 0,
        hands: vec![HandRecord {
            handedness: Handedness::Right,
            score: 1.0,
            keypoints: frame.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            units: Units::Millimeters,
            valid: (!frame.mask.iter().all(|v| *v)).then(|| frame.mask.to_vec()),
        }],
        source: None,
    };
    doc.write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn format_tags() {
        for f in [
            AnnotationFormat::Egodexter,
            AnnotationFormat::Dexterobject,
            AnnotationFormat::GenericJson,
        ] {
            assert_eq!(f.as_str().parse::<AnnotationFormat>().unwrap(), f);
        }
        assert!(matches!(
            "freihand".parse::<AnnotationFormat>(),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn egodexter_missing_tips_masked() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.txt",
            "1, 2, 3; 0, 0, 0; 4, 5, 6; 7, 8, 9; 0, 0, 0\n\n10,11,12;13,14,15;16,17,18;19,20,21;22,23,24;\n",
        );
        let frames = load_annotations(&p, AnnotationFormat::Egodexter).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].mask.iter().filter(|v| **v).count(), 3);
        assert!(frames[0].mask[4] && !frames[0].mask[8] && frames[0].mask[12]);
        assert_eq!(frames[0].points[16], Vector3::new(7.0, 8.0, 9.0));
        assert_eq!(frames[1].id, "00001");
        assert_eq!(frames[1].mask.iter().filter(|v| **v).count(), 5);
    }

    #[test]
    fn egodexter_bad_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.txt",
            "1,2,3;1,2,3;1,2,3;1,2,3;1,2,3\n1,2,3;x,2,3;1,2,3;1,2,3;1,2,3\n",
        );
        match load_annotations(&p, AnnotationFormat::Egodexter).unwrap_err() {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 2);
                assert_eq!(path, p);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn dexterobject_ignores_object_corners() {
        let dir = tempfile::tempdir().unwrap();
        let mut vals: Vec<String> = (1..=24).map(|v| v.to_string()).collect();
        vals[3] = "0".into();
        vals[4] = "0".into();
        vals[5] = "0".into();
        let p = write(dir.path(), "d.txt", &(vals.join(" ") + "\n"));
        let f = &load_annotations(&p, AnnotationFormat::Dexterobject).unwrap()[0];
        assert!(!f.mask[8]);
        assert_eq!(f.points[20], Vector3::new(13.0, 14.0, 15.0));
        assert_eq!(f.mask.iter().filter(|v| **v).count(), 4);
    }

    #[test]
    fn generic_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let frame = GroundTruthFrame {
            id: "f7".into(),
            points: std::array::from_fn(|i| Vector3::new(0.1 * i as f64, -3.25, 1e-3 * i as f64)),
            mask: [true; NUM_JOINTS],
        };
        let p = dir.path().join("f7.json");
        write_generic_json(&p, &frame).unwrap();
        assert_eq!(
            load_annotations(&p, AnnotationFormat::GenericJson).unwrap(),
            vec![frame.clone()]
        );
        let from_dir = load_annotations(dir.path(), AnnotationFormat::GenericJson).unwrap();
        assert_eq!(from_dir, vec![frame]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let r = load_annotations(
            Path::new("/nonexistent/gt.txt"),
            AnnotationFormat::Egodexter,
        );
        assert!(matches!(r, Err(Error::Io { .. })));
    }
}
