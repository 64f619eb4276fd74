//! MOT-Challenge sequence model: boxes, ground truth, detections and the
//! per-frame bucketed [`Sequence`].

mod parse;
mod sequence;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use parse::{
    format_detections, format_ground_truth, parse_detections, parse_detections_str, parse_ground_truth,
    parse_ground_truth_str,
};
pub use sequence::{
    load_sequence, load_sequence_with, parse_seqinfo, write_sequence, LoadOptions, DET_FILE, GT_FILE, SEQINFO_FILE,
};

use crate::error::{Error, Result};

/// MOT class id for pedestrians; the default class for detections read from
/// det files, which carry no class column.
pub const PEDESTRIAN_CLASS: i32 = 1;

/// Persistent ground-truth object identifier.
pub type ObjectId = i64;

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid box ({left}, {top}, {width}, {height}): {reason}")]
pub struct InvalidBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub reason: &'static str,
}

impl From<InvalidBox> for Error {
    fn from(e: InvalidBox) -> Self {
        Error::Input(e.to_string())
    }
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self, InvalidBox> {
        let invalid = |reason| InvalidBox {
            left,
            top,
            width,
            height,
            reason,
        };
        if ![left, top, width, height].iter().all(|v| v.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        if width <= 0.0 {
            return Err(invalid("non-positive width"));
        }
        if height <= 0.0 {
            return Err(invalid("non-positive height"));
        }
        Ok(Self {
            left,
            top,
            width,
            height,
        })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Lexicographic `(left, top, width, height)` ordering, used wherever a
    /// deterministic tie-break between boxes is needed.
    pub fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.left
            .total_cmp(&other.left)
            .then(self.top.total_cmp(&other.top))
            .then(self.width.total_cmp(&other.width))
            .then(self.height.total_cmp(&other.height))
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "box({}, {}, {}, {})", self.left, self.top, self.width, self.height)
    }
}

/// One annotated object in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub frame: u32,
    pub object_id: ObjectId,
    pub bbox: BoundingBox,
    /// MOT "consider" flag; entries with `false` are kept but filtered by the
    /// evaluator.
    pub consider: bool,
    pub class_id: i32,
    pub visibility: f64,
}

/// One predicted box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BoundingBox,
    /// Score in `[0, 1]` after ingestion.
    pub confidence: f64,
    pub class_id: i32,
}

/// How raw detection scores are mapped into `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreNormalization {
    /// Scores are used as-is, clamped to `[0, 1]`.
    #[default]
    Identity,
    /// `(s - min) / (max - min)` over all scores in the file.
    MinMax,
    /// `1 / (1 + e^-s)`.
    Logistic,
}

impl ScoreNormalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreNormalization::Identity => "identity",
            ScoreNormalization::MinMax => "min_max",
            ScoreNormalization::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for ScoreNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "identity" => Ok(Self::Identity),
            "min_max" | "minmax" => Ok(Self::MinMax),
            "logistic" => Ok(Self::Logistic),
            other => Err(Error::Config(format!("unknown score normalization {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub name: String,
    pub frame_count: u32,
    pub frame_rate: f64,
    pub image_width: u32,
    pub image_height: u32,
    /// Frame directory, relative to the sequence root.
    pub image_dir: PathBuf,
    pub image_ext: Option<String>,
}

/// A video sequence with ground truth and detections bucketed per frame.
/// Index `k` of each list holds frame `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub meta: SequenceMeta,
    ground_truth: Vec<Vec<GroundTruthEntry>>,
    detections: Vec<Vec<Detection>>,
}

impl Sequence {
    /// Buckets flat entry lists by frame, checking every frame index against
    /// `meta.frame_count`.
    pub fn from_entries(
        meta: SequenceMeta,
        ground_truth: Vec<GroundTruthEntry>,
        detections: Vec<Detection>,
    ) -> Result<Self> {
        if meta.frame_count == 0 {
            return Err(Error::Config("sequence length must be at least 1".into()));
        }
        if meta.image_width == 0 || meta.image_height == 0 {
            return Err(Error::Config("image dimensions must be at least 1".into()));
        }
        let n = meta.frame_count as usize;
        let mut gt_buckets = vec![Vec::new(); n];
        let mut det_buckets = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::new();
        for entry in ground_truth {
            check_frame(entry.frame, meta.frame_count, "ground-truth")?;
            if !seen.insert((entry.frame, entry.object_id)) {
                return Err(Error::Integrity(format!(
                    "duplicate object id {} in frame {}",
                    entry.object_id, entry.frame
                )));
            }
            gt_buckets[entry.frame as usize - 1].push(entry);
        }
        for det in detections {
            check_frame(det.frame, meta.frame_count, "detection")?;
            det_buckets[det.frame as usize - 1].push(det);
        }
        for bucket in &mut gt_buckets {
            bucket.sort_by_key(|e| e.object_id);
        }
        for bucket in &mut det_buckets {
            bucket.sort_by(parse::detection_order);
        }
        Ok(Self {
            meta,
            ground_truth: gt_buckets,
            detections: det_buckets,
        })
    }

    pub fn frame_count(&self) -> u32 {
        self.meta.frame_count
    }

    /// Ground truth of 1-based `frame`. Panics when out of range.
    pub fn ground_truth(&self, frame: u32) -> &[GroundTruthEntry] {
        &self.ground_truth[frame as usize - 1]
    }

    pub fn detections(&self, frame: u32) -> &[Detection] {
        &self.detections[frame as usize - 1]
    }

    pub fn frames(&self) -> impl Iterator<Item = (u32, &[GroundTruthEntry], &[Detection])> + '_ {
        self.ground_truth
            .iter()
            .zip(&self.detections)
            .enumerate()
            .map(|(k, (g, d))| (k as u32 + 1, g.as_slice(), d.as_slice()))
    }

    pub fn all_ground_truth(&self) -> impl Iterator<Item = &GroundTruthEntry> + '_ {
        self.ground_truth.iter().flatten()
    }

    pub fn all_detections(&self) -> impl Iterator<Item = &Detection> + '_ {
        self.detections.iter().flatten()
    }

    /// Replaces every detection, e.g. after mirroring boxes back from a
    /// flipped frame.
    pub fn map_detections(&mut self, mut f: impl FnMut(&Detection) -> Result<Detection>) -> Result<()> {
        for bucket in &mut self.detections {
            for det in bucket.iter_mut() {
                *det = f(det)?;
            }
            bucket.sort_by(parse::detection_order);
        }
        Ok(())
    }

    /// The same sequence with frame order reversed (frame `k` becomes
    /// `N + 1 - k`).
    pub fn reversed(&self) -> Self {
        let n = self.meta.frame_count;
        let flip = |f: u32| n + 1 - f;
        let ground_truth = self
            .ground_truth
            .iter()
            .rev()
            .map(|b| {
                b.iter()
                    .map(|e| GroundTruthEntry {
                        frame: flip(e.frame),
                        ..e.clone()
                    })
                    .collect()
            })
            .collect();
        let detections = self
            .detections
            .iter()
            .rev()
            .map(|b| {
                b.iter()
                    .map(|d| Detection {
                        frame: flip(d.frame),
                        ..d.clone()
                    })
                    .collect()
            })
            .collect();
        Self {
            meta: self.meta.clone(),
            ground_truth,
            detections,
        }
    }
}

fn check_frame(frame: u32, frame_count: u32, what: &str) -> Result<()> {
    if frame == 0 || frame > frame_count {
        return Err(Error::Integrity(format!(
            "{what} frame {frame} outside 1..={frame_count}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(n: u32) -> SequenceMeta {
        SequenceMeta {
            name: "t".into(),
            frame_count: n,
            frame_rate: 30.0,
            image_width: 100,
            image_height: 100,
            image_dir: "img1".into(),
            image_ext: None,
        }
    }

    fn gt(frame: u32, id: ObjectId) -> GroundTruthEntry {
        GroundTruthEntry {
            frame,
            object_id: id,
            bbox: BoundingBox::new(1.0, 1.0, 5.0, 5.0).unwrap(),
            consider: true,
            class_id: 1,
            visibility: 1.0,
        }
    }

    #[test]
    fn box_rejects_degenerate() {
        assert_eq!(
            BoundingBox::new(10.0, 10.0, 0.0, 5.0).unwrap_err().reason,
            "non-positive width"
        );
        assert_eq!(
            BoundingBox::new(10.0, 10.0, 5.0, -1.0).unwrap_err().reason,
            "non-positive height"
        );
        assert!(BoundingBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn buckets_by_frame() {
        let entries = vec![gt(1, 1), gt(1, 2), gt(2, 1), gt(3, 1), gt(3, 2)];
        let seq = Sequence::from_entries(meta(3), entries, vec![]).unwrap();
        assert_eq!(seq.frames().count(), 3);
        assert_eq!(seq.ground_truth(1).len(), 2);
        assert_eq!(seq.ground_truth(2).len(), 1);
        assert_eq!(seq.ground_truth(3).len(), 2);
        assert_eq!(seq.all_ground_truth().count(), 5);
    }

    #[test]
    fn frame_beyond_length_is_integrity_error() {
        let err = Sequence::from_entries(meta(3), vec![gt(9, 1)], vec![]).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Sequence::from_entries(meta(3), vec![gt(1, 1), gt(1, 1)], vec![]).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn reversal_maps_frames() {
        let seq = Sequence::from_entries(meta(3), vec![gt(1, 7), gt(3, 8)], vec![]).unwrap();
        let rev = seq.reversed();
        assert_eq!(rev.ground_truth(3)[0].object_id, 7);
        assert_eq!(rev.ground_truth(3)[0].frame, 3);
        assert_eq!(rev.ground_truth(1)[0].object_id, 8);
        assert_eq!(rev.reversed(), seq);
    }
}
