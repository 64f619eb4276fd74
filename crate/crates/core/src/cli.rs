//! Command-line front end. [`run`] is the whole program minus process exit,
//! so tests can drive it in-process.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corrections::{apply_pipeline, ApplyOptions, CorrectionPipeline, MANIFEST_FILE};
use crate::error::{exit, Error, Result};
use crate::eval::{AggregateWeighting, EvalConfig, FlipProtocol};
use crate::matching::AssignmentStrategy;
use crate::metrics::ApInterpolation;
use crate::mot::{ObjectId, ScoreNormalization};
use crate::report::{compare, evaluate_batch, EvalRun, ManifestEcho};
use crate::synth::{generate_scenario, worked_pair_fixture, write_scenario, MissModel};

/// Default config file location when `--config` is absent.
pub const CONFIG_ENV: &str = "DETCONS_CONFIG";

#[derive(Debug, Parser)]
#[command(
    name = "detcons",
    version,
    about = "Detection consistency and mAP evaluation for video sequences"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// `key = value` config file; falls back to $DETCONS_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub iou: Option<f64>,
    /// Confidence threshold.
    #[arg(long, global = true)]
    pub conf: Option<f64>,
    #[arg(long = "nms-iou", global = true)]
    pub nms_iou: Option<f64>,
    /// identity | minmax | logistic
    #[arg(long, global = true)]
    pub normalization: Option<ScoreNormalization>,
    /// greedy | optimal
    #[arg(long, global = true)]
    pub assignment: Option<AssignmentStrategy>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one or more sequence roots.
    Eval {
        #[arg(required = true)]
        roots: Vec<PathBuf>,
        /// Write the JSON report here.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Correction manifest the detections were produced under.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Reuse the evaluation config recorded in an earlier report.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// all-points | 11-point
        #[arg(long = "ap-interpolation")]
        ap_interpolation: Option<ApInterpolation>,
        /// unweighted | pair-weighted
        #[arg(long)]
        weighting: Option<AggregateWeighting>,
        /// mirror-back | as-is
        #[arg(long = "flip-protocol")]
        flip_protocol: Option<FlipProtocol>,
    },
    /// Apply a correction pipeline to a directory of frames.
    Preprocess {
        frames: PathBuf,
        /// e.g. `wc:quality=30,um:sigma=1.0:amount=1.0`, or `none`.
        #[arg(long)]
        pipeline: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Diff a treatment report against a baseline report.
    Compare {
        baseline: PathBuf,
        treatment: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a seeded synthetic scenario in MOT layout.
    Synth {
        /// e.g. `alternating:ids=A,B:frames=10`, `bernoulli:p=0.2`, `pair`.
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write placeholder PNG frames.
        #[arg(long)]
        frames: bool,
    },
}

/// Parses `args` (including argv[0]) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Defaults, then the replayed report's config or the config file, then
/// command-line overrides.
pub fn resolve_config(global: &GlobalOpts, replay: Option<&Path>) -> Result<EvalConfig> {
    let mut cfg = EvalConfig::default();
    if let Some(path) = replay {
        cfg = EvalRun::read(path)?.config;
    } else {
        let file = global
            .config
            .clone()
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        if let Some(path) = file {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            cfg.apply_kv(&text, &path)?;
        }
    }
    if let Some(v) = global.iou {
        cfg.matching.iou_threshold = v;
    }
    if let Some(v) = global.conf {
        cfg.matching.confidence_threshold = v;
    }
    if let Some(v) = global.nms_iou {
        cfg.matching.nms_iou_threshold = v;
    }
    if let Some(v) = global.normalization {
        cfg.score_normalization = v;
    }
    if let Some(v) = global.assignment {
        cfg.matching.assignment = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Eval {
            roots,
            output,
            manifest,
            replay,
            ap_interpolation,
            weighting,
            flip_protocol,
        } => {
            let mut cfg = resolve_config(&cli.global, replay.as_deref())?;
            if let Some(v) = ap_interpolation {
                cfg.ap_interpolation = *v;
            }
            if let Some(v) = weighting {
                cfg.aggregate = *v;
            }
            if let Some(v) = flip_protocol {
                cfg.flip_protocol = *v;
            }
            let echo = manifest
                .as_deref()
                .map(|p| ManifestEcho::read(p, cfg.flip_protocol))
                .transpose()?;
            let run = evaluate_batch(roots, &cfg, echo.as_ref())?;
            if let Some(path) = output {
                write_file(path, &run.to_json()?)?;
            }
            let _ = write!(out, "{}", run.render_table());
            if run.failures.is_empty() {
                Ok(exit::OK)
            } else if run.sequences.is_empty() {
                Ok(run.failures[0].exit_code)
            } else {
                Ok(exit::PARTIAL_FAILURE)
            }
        }
        Command::Preprocess {
            frames,
            pipeline,
            out: out_dir,
            overwrite,
            threads,
        } => {
            let pipeline = CorrectionPipeline::parse(pipeline)?;
            let opts = ApplyOptions {
                overwrite: *overwrite,
                threads: *threads,
            };
            let manifest = apply_pipeline(frames, &pipeline, out_dir, &opts)?;
            let _ = writeln!(
                out,
                "{} frames, {} failed, pipeline {}, manifest {}",
                manifest.frame_count,
                manifest.failed_count,
                manifest.pipeline_spec,
                out_dir.join(MANIFEST_FILE).display()
            );
            for e in manifest.entries.iter().filter(|e| e.error.is_some()) {
                let _ = writeln!(out, "FAILED {}: {}", e.input, e.error.as_deref().unwrap_or_default());
            }
            Ok(if manifest.failed_count > 0 {
                exit::PARTIAL_FAILURE
            } else {
                exit::OK
            })
        }
        Command::Compare {
            baseline,
            treatment,
            output,
            csv,
        } => {
            let report = compare(&EvalRun::read(baseline)?, &EvalRun::read(treatment)?)?;
            if let Some(path) = output {
                write_file(path, &report.to_json()?)?;
            }
            if let Some(path) = csv {
                write_file(path, &report.to_csv()?)?;
            }
            let _ = write!(out, "{}", report.render_table());
            Ok(exit::OK)
        }
        Command::Synth {
            spec,
            seed,
            out: root,
            frames,
        } => {
            let scenario = SynthSpec::parse(spec)?;
            let seq = match &scenario.model {
                None => worked_pair_fixture(),
                Some(model) => generate_scenario(scenario.frames, &scenario.id_set(), model, *seed)?,
            };
            write_scenario(&seq, root, *frames)?;
            let labels: Vec<String> = scenario.labels.iter().map(|(l, id)| format!("{l}={id}")).collect();
            let _ = writeln!(
                out,
                "wrote {} ({} frames, {} detections) to {}{}",
                seq.meta.name,
                seq.frame_count(),
                seq.all_detections().count(),
                root.display(),
                if labels.is_empty() {
                    String::new()
                } else {
                    format!(", ids {}", labels.join(", "))
                }
            );
            Ok(exit::OK)
        }
    }
}

/// Parsed `synth` spec: `kind[:key=value]...`.
///
/// Kinds: `perfect`, `consistent` (`miss=`), `alternating` (`odd=`, `even=`),
/// `bernoulli` (`p=`), `none`, `pair`. Shared keys: `ids=` (comma list,
/// default `A,B`) and `frames=` (default 10). Labels are numbered 1.. in
/// listing order unless every label is already an integer.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// `None` selects the fixed two-frame fixture.
    pub model: Option<MissModel>,
    pub frames: u32,
    pub labels: Vec<(String, ObjectId)>,
}

impl SynthSpec {
    pub fn id_set(&self) -> BTreeSet<ObjectId> {
        self.labels.iter().map(|(_, id)| *id).collect()
    }

    pub fn parse(spec: &str) -> Result<Self> {
        let mut parts = spec.split(':').map(str::trim);
        let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
        let mut frames = 10u32;
        let mut ids: Vec<String> = vec!["A".into(), "B".into()];
        let mut params = Vec::new();
        for part in parts.filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("synth spec: expected key=value, got {part:?}")))?;
            match k.trim() {
                "frames" => {
                    frames = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Usage(format!("synth spec: bad frame count {v:?}")))?
                }
                "ids" => ids = split_labels(v),
                key => params.push((key.to_string(), v.trim().to_string())),
            }
        }
        if ids.is_empty() {
            return Err(Error::Usage("synth spec: ids must not be empty".into()));
        }
        let labels = number_labels(&ids)?;
        let lookup = |list: &str| -> Result<BTreeSet<ObjectId>> {
            split_labels(list)
                .iter()
                .map(|l| {
                    labels
                        .iter()
                        .find(|(name, _)| name == l)
                        .map(|(_, id)| *id)
                        .ok_or_else(|| Error::Usage(format!("synth spec: unknown id label {l:?}")))
                })
                .collect()
        };
        let take = |params: &mut Vec<(String, String)>, key: &str| {
            params.iter().position(|(k, _)| k == key).map(|i| params.remove(i).1)
        };
        let model = match kind.as_str() {
            "perfect" => Some(MissModel::Perfect),
            "none" => Some(MissModel::NoneDetected),
            "consistent" => {
                let missed = match take(&mut params, "miss") {
                    Some(list) => lookup(&list)?,
                    None => BTreeSet::from([labels.last().expect("ids non-empty").1]),
                };
                Some(MissModel::ConsistentMisser { missed })
            }
            "alternating" => {
                let half = labels.len().div_ceil(2);
                let odd = match take(&mut params, "odd") {
                    Some(list) => lookup(&list)?,
                    None => labels[..half].iter().map(|(_, id)| *id).collect(),
                };
                let even = match take(&mut params, "even") {
                    Some(list) => lookup(&list)?,
                    None => labels[half..].iter().map(|(_, id)| *id).collect(),
                };
                Some(MissModel::AlternatingMisser { odd, even })
            }
            "bernoulli" => {
                let p = take(&mut params, "p").ok_or_else(|| Error::Usage("synth spec: bernoulli needs p=".into()))?;
                let p = p
                    .parse()
                    .map_err(|_| Error::Usage(format!("synth spec: bad probability {p:?}")))?;
                Some(MissModel::Bernoulli { p })
            }
            "pair" | "worked-pair" => None,
            other => return Err(Error::Usage(format!("synth spec: unknown scenario kind {other:?}"))),
        };
        if let Some((k, _)) = params.first() {
            return Err(Error::Usage(format!("synth spec: unknown key {k:?} for {kind}")));
        }
        if model.is_none() {
            return Ok(Self {
                model,
                frames: 2,
                labels: Vec::new(),
            });
        }
        Ok(Self { model, frames, labels })
    }
}

fn split_labels(list: &str) -> Vec<String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn number_labels(ids: &[String]) -> Result<Vec<(String, ObjectId)>> {
    let numeric: Option<Vec<ObjectId>> = ids.iter().map(|l| l.parse().ok()).collect();
    let labels: Vec<(String, ObjectId)> = match numeric {
        Some(nums) => ids.iter().cloned().zip(nums).collect(),
        None => ids.iter().cloned().zip(1..).collect(),
    };
    let ids_seen: BTreeSet<ObjectId> = labels.iter().map(|(_, id)| *id).collect();
    let names_seen: BTreeSet<&str> = labels.iter().map(|(l, _)| l.as_str()).collect();
    if ids_seen.len() != labels.len() || names_seen.len() != labels.len() {
        return Err(Error::Usage(format!("synth spec: duplicate ids in {ids:?}")));
    }
    Ok(labels)
}
