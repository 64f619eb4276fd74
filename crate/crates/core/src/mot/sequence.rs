use std::path::{Path, PathBuf};

use super::{
    format_detections, format_ground_truth, parse_detections, parse_ground_truth, ScoreNormalization, Sequence,
    SequenceMeta,
};
use crate::error::{Error, Result};
use crate::kv::parse_kv;

pub const SEQINFO_FILE: &str = "seqinfo.ini";
pub const GT_FILE: &str = "gt/gt.txt";
pub const DET_FILE: &str = "det/det.txt";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub require_detections: bool,
    pub normalization: ScoreNormalization,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            require_detections: true,
            normalization: ScoreNormalization::Identity,
        }
    }
}

/// Loads `root/seqinfo.ini`, `root/gt/gt.txt` and `root/det/det.txt` with
/// default options (detections required, identity score normalization).
pub fn load_sequence(root: &Path) -> Result<Sequence> {
    load_sequence_with(root, &LoadOptions::default())
}

pub fn load_sequence_with(root: &Path, opts: &LoadOptions) -> Result<Sequence> {
    let info_path = root.join(SEQINFO_FILE);
    if !info_path.is_file() {
        return Err(Error::Config(format!(
            "missing sequence metadata {}",
            info_path.display()
        )));
    }
    let text = std::fs::read_to_string(&info_path).map_err(|e| Error::io(&info_path, e))?;
    let meta = parse_seqinfo(&text, &info_path)?;

    let gt_path = root.join(GT_FILE);
    if !gt_path.is_file() {
        return Err(Error::Config(format!("missing ground truth {}", gt_path.display())));
    }
    let ground_truth = parse_ground_truth(&gt_path)?;

    let det_path = root.join(DET_FILE);
    let detections = if det_path.is_file() {
        parse_detections(&det_path, opts.normalization)?
    } else if opts.require_detections {
        return Err(Error::Config(format!("missing detections {}", det_path.display())));
    } else {
        Vec::new()
    };
    Sequence::from_entries(meta, ground_truth, detections)
}

/// Parses `seqinfo.ini`. `name`, `seqLength`, `frameRate`, `imWidth`,
/// `imHeight` and `imDir` are required; `imExt` is optional.
pub fn parse_seqinfo(text: &str, origin: &Path) -> Result<SequenceMeta> {
    let kv = parse_kv(origin, text)?;
    let get = |key: &str| {
        kv.iter()
            .find(|l| l.key == key)
            .ok_or_else(|| Error::Config(format!("{}: missing key {key}", origin.display())))
    };
    let int = |key: &str| -> Result<u32> {
        let l = get(key)?;
        l.value
            .parse::<u32>()
            .map_err(|_| Error::parse(origin, l.line, format!("{key}: expected a non-negative integer")))
    };
    let frame_rate = {
        let l = get("frameRate")?;
        l.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v > 0.0)
            .ok_or_else(|| Error::parse(origin, l.line, "frameRate: expected a positive number"))?
    };
    let meta = SequenceMeta {
        name: get("name")?.value.to_string(),
        frame_count: int("seqLength")?,
        frame_rate,
        image_width: int("imWidth")?,
        image_height: int("imHeight")?,
        image_dir: PathBuf::from(get("imDir")?.value),
        image_ext: kv.iter().find(|l| l.key == "imExt").map(|l| l.value.to_string()),
    };
    if meta.frame_count < 1 {
        return Err(Error::Config(format!("{}: seqLength must be >= 1", origin.display())));
    }
    if meta.image_width < 1 || meta.image_height < 1 {
        return Err(Error::Config(format!(
            "{}: image dimensions must be >= 1",
            origin.display()
        )));
    }
    Ok(meta)
}

pub(crate) fn format_seqinfo(meta: &SequenceMeta) -> String {
    let mut s = format!(
        "[Sequence]\nname={}\nimDir={}\nframeRate={}\nseqLength={}\nimWidth={}\nimHeight={}\n",
        meta.name,
        meta.image_dir.display(),
        meta.frame_rate,
        meta.frame_count,
        meta.image_width,
        meta.image_height
    );
    if let Some(ext) = &meta.image_ext {
        s.push_str(&format!("imExt={ext}\n"));
    }
    s
}

/// Writes a sequence in the standard MOT directory layout under `root`.
pub fn write_sequence(seq: &Sequence, root: &Path) -> Result<()> {
    for dir in [root.to_path_buf(), root.join("gt"), root.join("det")] {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let gt: Vec<_> = seq.all_ground_truth().cloned().collect();
    let det: Vec<_> = seq.all_detections().cloned().collect();
    let files = [
        (root.join(SEQINFO_FILE), format_seqinfo(&seq.meta)),
        (root.join(GT_FILE), format_ground_truth(&gt)),
        (root.join(DET_FILE), format_detections(&det)),
    ];
    for (path, body) in files {
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
