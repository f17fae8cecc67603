//! `handfit` command line: `fit`, `eval`, `synth`, `inspect` and `ablate`.
//!
//! Exit codes: 0 success, 1 some frames or files failed, 2 usage or
//! configuration error.

mod ablation;
mod commands;
mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};

pub use ablation::{ablation_csv, ablation_table, AblationConfig, AblationRow, ABLATION_GRID};
pub use commands::{
    cmd_ablate, cmd_eval, cmd_fit, cmd_inspect, cmd_synth, collect_inputs, load_model,
    read_predictions, AblationData, FitSummary, JOINT_NAMES,
};
pub use config::{RunConfig, KEYS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "handfit",
    version,
    about = "Fit an articulated hand model to 21 keypoints"
)]
pub struct Cli {
    /// Flat key=value config file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one config key; repeatable. Applied after --config.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Hand model file (default: bundled right-hand skeleton).
    #[arg(long, global = true, value_name = "FILE")]
    pub model: Option<PathBuf>,

    /// Worker threads; 0 uses every processor.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

/// Shorthands for the most used config keys.
#[derive(Debug, Args, Default)]
pub struct FitFlags {
    /// loss.kind: mse, geman_mcclure or huber.
    #[arg(long)]
    pub loss: Option<String>,
    /// solver.method: bfgs or lbfgs.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// fit.stages: 1 or 2.
    #[arg(long)]
    pub stages: Option<String>,
    /// loss.fingertip_weight.
    #[arg(long)]
    pub fingertip_weight: Option<String>,
}

impl FitFlags {
    fn assignments(&self) -> Vec<String> {
        [
            ("loss.kind", &self.loss),
            ("solver.method", &self.optimizer),
            ("fit.stages", &self.stages),
            ("loss.fingertip_weight", &self.fingertip_weight),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| format!("{k}={v}")))
        .collect()
    }
}

#[derive(Debug, Args, Default)]
pub struct EvalFlags {
    /// eval.format: egodexter, dexterobject or generic_json.
    #[arg(long)]
    pub format: Option<String>,
    /// eval.align: similarity or none.
    #[arg(long)]
    pub align: Option<String>,
}

impl EvalFlags {
    fn assignments(&self) -> Vec<String> {
        [("eval.format", &self.format), ("eval.align", &self.align)]
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| format!("{k}={v}")))
            .collect()
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit every hand in keypoint JSON files or directories.
    Fit {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output directory for one result JSON per hand.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth directory (generic_json) to report EPE against.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        flags: FitFlags,
    },
    /// Score fit results against ground truth.
    Eval {
        /// Directory of fit-result JSON files.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth file or directory.
        #[arg(long)]
        gt: PathBuf,
        #[command(flatten)]
        flags: EvalFlags,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the PCK curve as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate a synthetic dataset with known parameters.
    Synth {
        #[arg(short = 'n', long, default_value_t = 10)]
        frames: usize,
        /// Gaussian noise standard deviation, mm.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the parameters of a fit result and export its skeleton.
    Inspect {
        result: PathBuf,
        /// Write the skeleton as a Wavefront OBJ here.
        #[arg(long)]
        obj: Option<PathBuf>,
    },
    /// Run the A–H configuration grid and print one row per configuration.
    Ablate {
        /// Keypoint files or directories; synthetic frames when omitted.
        #[arg(long = "input", requires = "gt")]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        frames: usize,
        #[arg(long, default_value_t = 5.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        flags: EvalFlags,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_text(path, &(text + "\n"))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) => EXIT_USAGE,
        _ => EXIT_PARTIAL,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut overrides = cli.set.clone();
    match &cli.command {
        Command::Fit { flags, .. } => overrides.extend(flags.assignments()),
        Command::Eval { flags, .. } | Command::Ablate { flags, .. } => {
            overrides.extend(flags.assignments())
        }
        _ => {}
    }
    if let Some(m) = &cli.model {
        overrides.push(format!("model.path={}", m.display()));
    }
    let setup = RunConfig::layered(cli.config.as_deref(), &overrides).and_then(|cfg| {
        let model = load_model(&cfg)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build()
            .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
        Ok((cfg, model, pool))
    });
    let (cfg, model, pool) = match setup {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(&cli.command, &cfg, &model)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: &Command, cfg: &RunConfig, model: &crate::model::HandModel) -> Result<i32> {
    match command {
        Command::Fit {
            inputs, out, truth, ..
        } => {
            let summary = cmd_fit(model, cfg, inputs, out, truth.as_deref())?;
            println!("{summary}");
            Ok(if summary.failed == 0 {
                EXIT_OK
            } else {
                EXIT_PARTIAL
            })
        }
        Command::Eval {
            pred,
            gt,
            json,
            csv,
            ..
        } => {
            let report = cmd_eval(cfg, pred, gt)?;
            print!("{}", report.table());
            if let Some(p) = json {
                report.write_json(p)?;
            }
            if let Some(p) = csv {
                write_text(p, &report.pck_csv())?;
            }
            Ok(EXIT_OK)
        }
        Command::Synth {
            frames,
            sigma,
            seed,
            out,
        } => {
            cmd_synth(model, *frames, *sigma, *seed, out)?;
            println!(
                "synth: {frames} frames, sigma {sigma} mm, seed {seed} -> {}",
                out.display()
            );
            Ok(EXIT_OK)
        }
        Command::Inspect { result, obj } => {
            print!("{}", cmd_inspect(model, result, obj.as_deref())?);
            Ok(EXIT_OK)
        }
        Command::Ablate {
            inputs,
            gt,
            frames,
            sigma,
            seed,
            json,
            csv,
            ..
        } => {
            let data = match gt {
                Some(gt) => AblationData::Files {
                    inputs: inputs.clone(),
                    gt: gt.clone(),
                },
                None => AblationData::Synthetic {
                    frames: *frames,
                    sigma: *sigma,
                    seed: *seed,
                },
            };
            let rows = cmd_ablate(model, cfg, &data)?;
            print!("{}", ablation_table(&rows));
            if let Some(p) = json {
                write_json(p, &rows)?;
            }
            if let Some(p) = csv {
                write_text(p, &ablation_csv(&rows))?;
            }
            let failed = rows.iter().any(|r| r.failures > 0);
            Ok(if failed { EXIT_PARTIAL } else { EXIT_OK })
        }
    }
}
