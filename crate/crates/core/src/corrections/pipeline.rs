use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{gamma_correction, gaussian_denoise, horizontal_flip, unsharp_mask, webp_compress, Image};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_DENOISE_SIGMA: f64 = 1.0;
pub const DEFAULT_DENOISE_RADIUS: usize = 2;
pub const DEFAULT_WEBP_QUALITY: u8 = 30;
pub const DEFAULT_UNSHARP_SIGMA: f64 = 1.0;
pub const DEFAULT_UNSHARP_AMOUNT: f64 = 1.0;
pub const DEFAULT_GAMMA: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    GaussianDenoise { sigma: f64, kernel_radius: usize },
    HorizontalFlip,
    WebpCompress { quality: u8 },
    UnsharpMask { sigma: f64, amount: f64 },
    GammaCorrection { gamma: f64 },
}

impl Stage {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match *self {
            Stage::GaussianDenoise { sigma, kernel_radius } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("gd: sigma must be > 0, got {sigma}"));
                }
                if kernel_radius < 1 {
                    return bad("gd: radius must be >= 1".into());
                }
            }
            Stage::HorizontalFlip => {}
            Stage::WebpCompress { quality } => {
                if !(1..=100).contains(&quality) {
                    return bad(format!("wc: quality must be in 1..=100, got {quality}"));
                }
            }
            Stage::UnsharpMask { sigma, amount } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("um: sigma must be > 0, got {sigma}"));
                }
                if !(amount >= 0.0 && amount.is_finite()) {
                    return bad(format!("um: amount must be >= 0, got {amount}"));
                }
            }
            Stage::GammaCorrection { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return bad(format!("gc: gamma must be > 0, got {gamma}"));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, img: &Image) -> Result<Image> {
        Ok(match *self {
            Stage::GaussianDenoise { sigma, kernel_radius } => gaussian_denoise(img, sigma, kernel_radius),
            Stage::HorizontalFlip => horizontal_flip(img),
            Stage::WebpCompress { quality } => webp_compress(img, quality)?,
            Stage::UnsharpMask { sigma, amount } => unsharp_mask(img, sigma, amount),
            Stage::GammaCorrection { gamma } => gamma_correction(img, gamma),
        })
    }

    fn parse(token: &str) -> Result<Self> {
        let mut parts = token.split(':').map(str::trim);
        let name = parts.next().unwrap_or_default().to_ascii_lowercase();
        let mut params = BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("stage {name}: expected key=value, got {p:?}")))?;
            params.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        let mut take_f64 = |key: &str, default: f64| -> Result<f64> {
            params.remove(key).map_or(Ok(default), |v| {
                v.parse()
                    .map_err(|_| Error::Usage(format!("stage {name}: {key}={v} is not a number")))
            })
        };
        let stage = match name.as_str() {
            "gd" | "gaussian_denoise" => {
                let sigma = take_f64("sigma", DEFAULT_DENOISE_SIGMA)?;
                let radius = take_f64("radius", DEFAULT_DENOISE_RADIUS as f64)?;
                if radius.fract() != 0.0 || radius < 0.0 {
                    return Err(Error::Usage(format!(
                        "stage gd: radius {radius} is not a non-negative integer"
                    )));
                }
                Stage::GaussianDenoise {
                    sigma,
                    kernel_radius: radius as usize,
                }
            }
            "hf" | "horizontal_flip" => Stage::HorizontalFlip,
            "wc" | "webp" | "webp_compress" => {
                let q = take_f64("quality", f64::from(DEFAULT_WEBP_QUALITY))?;
                if q.fract() != 0.0 || !(1.0..=100.0).contains(&q) {
                    return Err(Error::Usage(format!(
                        "stage wc: quality {q} must be an integer in 1..=100"
                    )));
                }
                Stage::WebpCompress { quality: q as u8 }
            }
            "um" | "unsharp" | "unsharp_mask" => Stage::UnsharpMask {
                sigma: take_f64("sigma", DEFAULT_UNSHARP_SIGMA)?,
                amount: take_f64("amount", DEFAULT_UNSHARP_AMOUNT)?,
            },
            "gc" | "gamma" | "gamma_correction" => Stage::GammaCorrection {
                gamma: take_f64("gamma", DEFAULT_GAMMA)?,
            },
            other => return Err(Error::Usage(format!("unknown correction stage {other:?}"))),
        };
        if let Some(k) = params.keys().next() {
            return Err(Error::Usage(format!("stage {name}: unknown parameter {k:?}")));
        }
        stage.validate()?;
        Ok(stage)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::GaussianDenoise { sigma, kernel_radius } => write!(f, "gd:sigma={sigma}:radius={kernel_radius}"),
            Stage::HorizontalFlip => write!(f, "hf"),
            Stage::WebpCompress { quality } => write!(f, "wc:quality={quality}"),
            Stage::UnsharpMask { sigma, amount } => write!(f, "um:sigma={sigma}:amount={amount}"),
            Stage::GammaCorrection { gamma } => write!(f, "gc:gamma={gamma}"),
        }
    }
}

/// Ordered list of corrections.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectionPipeline {
    pub stages: Vec<Stage>,
}

impl CorrectionPipeline {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        stages.iter().try_for_each(Stage::validate)?;
        Ok(Self { stages })
    }

    /// Parses `stage[:key=value]*` tokens joined by commas, e.g.
    /// `wc:quality=30,um:sigma=1.0:amount=1.0`. Stage names: `gd`, `hf`,
    /// `wc`, `um`, `gc`. The literal `none` is the empty pipeline.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.is_empty() {
            return Err(Error::Usage("empty pipeline".into()));
        }
        if spec.eq_ignore_ascii_case("none") {
            return Ok(Self::default());
        }
        let stages = spec
            .split(',')
            .map(|t| {
                let t = t.trim();
                if t.is_empty() {
                    Err(Error::Usage(format!("empty stage in pipeline {spec:?}")))
                } else {
                    Stage::parse(t)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { stages })
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Whether boxes detected on the output must be mirrored back: true iff
    /// the pipeline flips an odd number of times.
    pub fn requires_mirroring(&self) -> bool {
        self.stages
            .iter()
            .filter(|s| matches!(s, Stage::HorizontalFlip))
            .count()
            % 2
            == 1
    }

    pub fn apply(&self, img: &Image) -> Result<Image> {
        self.stages.iter().try_fold(img.clone(), |acc, stage| stage.apply(&acc))
    }
}

impl fmt::Display for CorrectionPipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.stages.is_empty() {
            return write!(f, "none");
        }
        for (i, s) in self.stages.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub input: String,
    pub output: Option<String>,
    pub input_sha256: Option<String>,
    pub output_sha256: Option<String>,
    pub error: Option<String>,
}

/// Record of one pipeline run over a frame directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub pipeline_spec: String,
    pub pipeline: CorrectionPipeline,
    pub mirror_boxes: bool,
    pub frame_count: usize,
    pub failed_count: usize,
    /// Sorted by input file name.
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ApplyOptions {
    pub overwrite: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn is_frame_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

/// Runs `pipeline` over every PNG/JPEG in `frames_dir`, writing results and
/// `manifest.json` to `out_dir`.
///
/// Non-empty pipelines write PNG. The empty pipeline copies input bytes
/// verbatim under the same file name. A frame that cannot be read or
/// decoded is recorded in the manifest and skipped. Existing outputs are
/// only replaced when `opts.overwrite` is set.
pub fn apply_pipeline(
    frames_dir: &Path,
    pipeline: &CorrectionPipeline,
    out_dir: &Path,
    opts: &ApplyOptions,
) -> Result<Manifest> {
    pipeline.stages.iter().try_for_each(Stage::validate)?;
    let listing = std::fs::read_dir(frames_dir).map_err(|e| Error::io(frames_dir, e))?;
    let mut inputs: Vec<PathBuf> = Vec::new();
    for entry in listing {
        let path = entry.map_err(|e| Error::io(frames_dir, e))?.path();
        if is_frame_file(&path) {
            inputs.push(path);
        }
    }
    inputs.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let out_name = |input: &Path| -> String {
        let name = input.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if pipeline.is_empty() {
            name
        } else {
            let stem = input.file_stem().unwrap_or_default().to_string_lossy();
            format!("{stem}.png")
        }
    };
    let mut targets: BTreeMap<String, &Path> = BTreeMap::new();
    for input in &inputs {
        if let Some(prev) = targets.insert(out_name(input), input) {
            return Err(Error::Usage(format!(
                "{} and {} map to the same output name",
                prev.display(),
                input.display()
            )));
        }
    }
    if !opts.overwrite {
        let clash = targets
            .keys()
            .map(String::as_str)
            .chain(std::iter::once(MANIFEST_FILE))
            .map(|n| out_dir.join(n))
            .find(|p| p.exists());
        if let Some(p) = clash {
            return Err(Error::Usage(format!(
                "{} already exists; pass --overwrite to replace",
                p.display()
            )));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let process = |input: &PathBuf| -> ManifestEntry {
        let name = input.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let mut entry = ManifestEntry {
            input: name,
            output: None,
            input_sha256: None,
            output_sha256: None,
            error: None,
        };
        let result = (|| -> Result<(String, String, String)> {
            let bytes = std::fs::read(input).map_err(|e| Error::io(input, e))?;
            let in_digest = sha256_hex(&bytes);
            let output = if pipeline.is_empty() {
                bytes
            } else {
                pipeline.apply(&Image::decode(&bytes, input)?)?.encode_png()?
            };
            let name = out_name(input);
            let dest = out_dir.join(&name);
            std::fs::write(&dest, &output).map_err(|e| Error::io(&dest, e))?;
            Ok((in_digest, name, sha256_hex(&output)))
        })();
        match result {
            Ok((i, o, od)) => {
                entry.input_sha256 = Some(i);
                entry.output = Some(o);
                entry.output_sha256 = Some(od);
            }
            Err(e) => entry.error = Some(e.to_string()),
        }
        entry
    };

    let entries: Vec<ManifestEntry> = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| inputs.par_iter().map(process).collect()),
        None => inputs.par_iter().map(process).collect(),
    };

    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        pipeline_spec: pipeline.to_string(),
        pipeline: pipeline.clone(),
        mirror_boxes: pipeline.requires_mirroring(),
        frame_count: entries.len(),
        failed_count: entries.iter().filter(|e| e.error.is_some()).count(),
        entries,
    };
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_json()?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
