use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::ablation::{AblationRow, ABLATION_GRID};
use super::config::RunConfig;
use crate::alignment::matrix_to_axis_angle;
use crate::error::{Error, Result};
use crate::evalkit::{
    evaluate, json_files, load_annotations, match_frames, stem, synth_generate, write_generic_json,
    AnnotationFormat, EvalFrame, EvalOptions, EvalReport, GroundTruthFrame,
};
use crate::model::{dof_slot, HandModel, Joints, ARTICULATED, NUM_JOINTS};
use crate::pipeline::{
    denormalize, fit, skeleton_obj, Diagnostics, FitResult, FitResultFile, KeypointFile,
    KeypointSet, TransformRecord, Units,
};

pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "wrist",
    "thumb_cmc",
    "thumb_mcp",
    "thumb_ip",
    "thumb_tip",
    "index_mcp",
    "index_pip",
    "index_dip",
    "index_tip",
    "middle_mcp",
    "middle_pip",
    "middle_dip",
    "middle_tip",
    "ring_mcp",
    "ring_pip",
    "ring_dip",
    "ring_tip",
    "pinky_mcp",
    "pinky_pip",
    "pinky_dip",
    "pinky_tip",
];

const DOF_NAMES: [&str; 3] = ["flex", "twist", "abd"];

pub fn load_model(cfg: &RunConfig) -> Result<HandModel> {
    match &cfg.model {
        Some(p) => HandModel::from_file(p),
        None => Ok(HandModel::default_right()),
    }
}

/// Keypoint documents named directly or found inside directories.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(json_files(p)?);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::param("no inputs: no keypoint files found"));
    }
    Ok(out)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub files: usize,
    pub hands: usize,
    pub fitted: usize,
    pub failed: usize,
    /// EPE of the fitted joints against `--truth`, without alignment.
    pub epe_vs_truth: Option<f64>,
}

impl std::fmt::Display for FitSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "fit: {} files, {} hands, {} fitted, {} failed",
            self.files, self.hands, self.fitted, self.failed
        )?;
        if let Some(e) = self.epe_vs_truth {
            write!(f, ", EPE vs truth {e:.6e}")?;
        }
        Ok(())
    }
}

struct FileOutcome {
    hands: usize,
    fitted: Vec<(String, Joints)>,
    failed: usize,
}

fn prepare(kp: &KeypointSet) -> Result<KeypointSet> {
    if kp.units == Units::Normalized {
        denormalize(kp)
    } else {
        Ok(kp.clone())
    }
}

fn fit_file(model: &HandModel, cfg: &RunConfig, path: &Path, out: &Path) -> FileOutcome {
    let mut outcome = FileOutcome {
        hands: 0,
        fitted: Vec::new(),
        failed: 0,
    };
    let sets = match KeypointFile::read(path).and_then(|d| d.keypoint_sets(path)) {
        Ok(s) => s,
        Err(e) => {
            log::error!("{e}");
            outcome.failed += 1;
            return outcome;
        }
    };
    let base = stem(path);
    outcome.hands = sets.len();
    for (h, kp) in sets.iter().enumerate() {
        let id = if h == 0 {
            base.clone()
        } else {
            format!("{base}.hand{h}")
        };
        let written = prepare(kp)
            .and_then(|kp| fit(model, &kp, &cfg.fit))
            .and_then(|r| {
                r.write_json(&out.join(format!("{id}.json")))?;
                Ok(r)
            });
        match written {
            Ok(r) => outcome.fitted.push((id, r.joints_target_space)),
            Err(e) => {
                log::error!("{}: hand {h}: {e}", path.display());
                outcome.failed += 1;
            }
        }
    }
    outcome
}

/// Fits every hand of every input document and writes one result per hand.
pub fn cmd_fit(
    model: &HandModel,
    cfg: &RunConfig,
    inputs: &[PathBuf],
    out: &Path,
    truth: Option<&Path>,
) -> Result<FitSummary> {
    let files = collect_inputs(inputs)?;
    ensure_dir(out)?;
    let outcomes: Vec<FileOutcome> = files
        .par_iter()
        .map(|p| fit_file(model, cfg, p, out))
        .collect();
    let mut summary = FitSummary {
        files: files.len(),
        hands: outcomes.iter().map(|o| o.hands).sum(),
        fitted: outcomes.iter().map(|o| o.fitted.len()).sum(),
        failed: outcomes.iter().map(|o| o.failed).sum(),
        epe_vs_truth: None,
    };
    if let Some(truth) = truth {
        let gt = load_annotations(truth, AnnotationFormat::GenericJson)?;
        let preds: Vec<(String, Joints)> = outcomes.into_iter().flat_map(|o| o.fitted).collect();
        let gt: Vec<GroundTruthFrame> = gt
            .into_iter()
            .filter(|g| preds.iter().any(|(id, _)| *id == g.id))
            .collect();
        let frames = match_frames(preds, gt)?;
        let opts = EvalOptions {
            align: crate::evalkit::AlignMode::None,
            ..EvalOptions::default()
        };
        summary.epe_vs_truth = Some(evaluate(&frames, &opts)?.epe_mm);
    }
    Ok(summary)
}

fn truth_file(t: &crate::evalkit::SynthTruth) -> Result<FitResultFile> {
    let r = &t.transform.rotation;
    Ok(FitResultFile {
        handedness: crate::model::Handedness::Right,
        theta: t.state.theta.clone(),
        beta: t.state.beta.clone(),
        root: matrix_to_axis_angle(r)?.into(),
        transform: TransformRecord {
            rotation: std::array::from_fn(|i| r[(i / 3, i % 3)]),
            translation: t.transform.translation.into(),
            scale: t.transform.scale,
        },
        joints: t.joints.iter().map(|p| [p.x, p.y, p.z]).collect(),
        diagnostics: Diagnostics::default(),
    })
}

/// Writes a synthetic dataset:
///
/// * `keypoints/frame_NNNNN.json`: noisy keypoints in mm (fit input)
/// * `gt/frame_NNNNN.json`: noise-free joints (`generic_json` ground truth)
/// * `truth/frame_NNNNN.json`: generating parameters in the fit-result layout
pub fn cmd_synth(model: &HandModel, n: usize, sigma: f64, seed: u64, out: &Path) -> Result<()> {
    let data = synth_generate(model, n, sigma, seed)?;
    let (kp_dir, gt_dir, truth_dir) = (out.join("keypoints"), out.join("gt"), out.join("truth"));
    for d in [&kp_dir, &gt_dir, &truth_dir] {
        ensure_dir(d)?;
    }
    for (i, (target, truth)) in data.targets.iter().zip(&data.truth).enumerate() {
        let name = format!("frame_{i:05}.json");
        KeypointFile {
            image_width: 0,
            image_height: 0,
            hands: vec![crate::pipeline::HandRecord::from_keypoint_set(target)],
            source: Some(format!("synth seed={seed} sigma={sigma} frame={i}")),
        }
        .write(&kp_dir.join(&name))?;
        write_generic_json(
            &gt_dir.join(&name),
            &GroundTruthFrame {
                id: stem(Path::new(&name)),
                points: truth.joints,
                mask: [true; NUM_JOINTS],
            },
        )?;
        truth_file(truth)?.write(&truth_dir.join(&name))?;
    }
    Ok(())
}

/// Reads every fit-result file in `dir`, keyed by file stem.
pub fn read_predictions(dir: &Path) -> Result<Vec<(String, Joints)>> {
    json_files(dir)?
        .into_iter()
        .map(|p| {
            let r = FitResultFile::read(&p)?.into_result()?;
            Ok((stem(&p), r.joints_target_space))
        })
        .collect()
}

pub fn cmd_eval(cfg: &RunConfig, pred_dir: &Path, gt: &Path) -> Result<EvalReport> {
    let preds = read_predictions(pred_dir)?;
    let gt = load_annotations(gt, cfg.format)?;
    let frames = match_frames(preds, gt)?;
    let mut report = evaluate(
        &frames,
        &EvalOptions {
            align: cfg.align,
            ..EvalOptions::default()
        },
    )?;
    report.config_echo = cfg.echo();
    Ok(report)
}

/// Human-readable dump of a fit result; writes the OBJ skeleton to `obj`.
pub fn cmd_inspect(model: &HandModel, result: &Path, obj: Option<&Path>) -> Result<String> {
    let r: FitResult = FitResultFile::read(result)?.into_result()?;
    let limits = model.joint_limits();
    let mut out = String::new();
    let _ = writeln!(out, "handedness {}", r.handedness.as_str());
    let _ = writeln!(
        out,
        "root (axis-angle) {:.6} {:.6} {:.6}",
        r.state.root[0], r.state.root[1], r.state.root[2]
    );
    let t = &r.transform;
    let _ = writeln!(
        out,
        "scale {:.6}  translation {:.6} {:.6} {:.6}",
        t.scale, t.translation.x, t.translation.y, t.translation.z
    );
    let _ = writeln!(out, "pose (rad):");
    let mut violations = 0;
    for &j in &ARTICULATED {
        let slot = dof_slot(j).expect("articulated joint has a slot");
        for (c, name) in DOF_NAMES.iter().enumerate() {
            let i = 3 * slot + c;
            let v = r.state.theta[i];
            let l = limits[i];
            let ok = l.contains(v);
            violations += usize::from(!ok);
            let _ = writeln!(
                out,
                "  {:>2} {:<11} {:<5} {:>9.5}  [{:>6.3}, {:>6.3}]  {}",
                i,
                JOINT_NAMES[j],
                name,
                v,
                l.lower,
                l.upper,
                if ok { "ok" } else { "OUT OF RANGE" }
            );
        }
    }
    let beta: Vec<String> = r.state.beta.iter().map(|b| format!("{b:.5}")).collect();
    let _ = writeln!(out, "shape {}", beta.join(" "));
    let _ = writeln!(
        out,
        "limit violations: {violations} of {}",
        r.state.theta.len()
    );
    for d in &r.stage_diagnostics {
        let _ = writeln!(
            out,
            "stage {}: loss {:.6e} -> {:.6e}, {} iterations, {}",
            d.stage,
            d.loss_initial,
            d.loss_final,
            d.iterations,
            d.status.as_str()
        );
    }
    if let Some(p) = obj {
        std::fs::write(p, skeleton_obj(model, &r.joints_target_space))
            .map_err(|e| Error::io(p, e))?;
        let _ = writeln!(out, "skeleton written to {}", p.display());
    }
    Ok(out)
}

/// Where the ablation grid gets its frames.
pub enum AblationData {
    /// Keypoint documents plus ground truth in `cfg.format`.
    Files { inputs: Vec<PathBuf>, gt: PathBuf },
    Synthetic {
        frames: usize,
        sigma: f64,
        seed: u64,
    },
}

struct Problem {
    id: String,
    target: KeypointSet,
}

/// Runs every grid configuration over the same frames.
pub fn cmd_ablate(
    model: &HandModel,
    cfg: &RunConfig,
    data: &AblationData,
) -> Result<Vec<AblationRow>> {
    let (problems, gt) = match data {
        AblationData::Synthetic {
            frames,
            sigma,
            seed,
        } => {
            let d = synth_generate(model, *frames, *sigma, *seed)?;
            let mut problems = Vec::new();
            let mut gt = Vec::new();
            for (i, (t, truth)) in d.targets.into_iter().zip(d.truth).enumerate() {
                let id = format!("frame_{i:05}");
                gt.push(GroundTruthFrame {
                    id: id.clone(),
                    points: truth.joints,
                    mask: [true; NUM_JOINTS],
                });
                problems.push(Problem { id, target: t });
            }
            (problems, gt)
        }
        AblationData::Files { inputs, gt } => {
            let mut problems = Vec::new();
            for p in collect_inputs(inputs)? {
                let doc = KeypointFile::read(&p)?;
                if let Some(kp) = doc.keypoint_sets(&p)?.into_iter().next() {
                    problems.push(Problem {
                        id: stem(&p),
                        target: prepare(&kp)?,
                    });
                }
            }
            (problems, load_annotations(gt, cfg.format)?)
        }
    };
    let eval_opts = EvalOptions {
        align: cfg.align,
        ..EvalOptions::default()
    };
    ABLATION_GRID
        .iter()
        .map(|row| {
            let opts = row.apply(&cfg.fit);
            let fits: Vec<Option<(String, Joints)>> = problems
                .par_iter()
                .map(|p| match fit(model, &p.target, &opts) {
                    Ok(r) => Some((p.id.clone(), r.joints_target_space)),
                    Err(e) => {
                        log::warn!("{} {}: {e}", row.id, p.id);
                        None
                    }
                })
                .collect();
            let failures = fits.iter().filter(|f| f.is_none()).count();
            let preds: Vec<(String, Joints)> = fits.into_iter().flatten().collect();
            let frames: Vec<EvalFrame> = gt
                .iter()
                .filter_map(|g| {
                    preds
                        .iter()
                        .find(|(id, _)| *id == g.id)
                        .map(|(_, p)| EvalFrame {
                            id: g.id.clone(),
                            pred: *p,
                            gt: g.points,
                            mask: g.mask,
                        })
                })
                .collect();
            let report = evaluate(&frames, &eval_opts)?;
            Ok(AblationRow {
                config: *row,
                epe_mm: report.epe_mm,
                auc: report.auc,
                frames: report.frames_evaluated,
                failures,
            })
        })
        .collect()
}
