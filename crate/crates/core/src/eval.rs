//! Runs ground-truth filtering, detection filtering, matching and both metric
//! families over one sequence with a single detector configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corrections::mirror_box;
use crate::error::{Error, Result};
use crate::kv::parse_kv;
use crate::matching::{filter_by_confidence, match_frame, nms, FrameMatchResult, MatchConfig};
use crate::metrics::{
    average_precision, mean_average_precision, video_consistency_from_matches, ApInterpolation, PrCurve,
    RankedDetection, VideoConsistency,
};
use crate::mot::{Detection, GroundTruthEntry, ScoreNormalization, Sequence, PEDESTRIAN_CLASS};

/// What to do with detections produced on horizontally flipped frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipProtocol {
    /// Mirror detection boxes back into the original frame before scoring.
    #[default]
    MirrorBack,
    /// Score detections as produced.
    AsIs,
}

impl std::str::FromStr for FlipProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mirror_back" | "mirror" => Ok(Self::MirrorBack),
            "as_is" | "none" => Ok(Self::AsIs),
            other => Err(Error::Config(format!("unknown flip protocol {other:?}"))),
        }
    }
}

/// How per-sequence values are combined into the batch aggregate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateWeighting {
    #[default]
    Unweighted,
    /// Consistency weighted by each sequence's defined pair count. mAP stays
    /// an unweighted mean.
    PairWeighted,
}

impl std::str::FromStr for AggregateWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "unweighted" => Ok(Self::Unweighted),
            "pair_weighted" | "pairs" => Ok(Self::PairWeighted),
            other => Err(Error::Config(format!("unknown aggregate weighting {other:?}"))),
        }
    }
}

/// Every knob that influences an evaluation. Echoed verbatim into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub matching: MatchConfig,
    pub score_normalization: ScoreNormalization,
    pub ap_interpolation: ApInterpolation,
    /// Ground-truth classes that count as objects.
    pub gt_classes: BTreeSet<i32>,
    /// Drop ground truth whose consider flag is 0.
    pub consider_only: bool,
    /// Minimum ground-truth visibility (inclusive).
    pub min_visibility: f64,
    /// Detector class -> ground-truth class. Unlisted detector classes are
    /// used unchanged.
    pub class_map: BTreeMap<i32, i32>,
    pub flip_protocol: FlipProtocol,
    pub aggregate: AggregateWeighting,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            matching: MatchConfig::default(),
            score_normalization: ScoreNormalization::Identity,
            ap_interpolation: ApInterpolation::AllPoints,
            gt_classes: BTreeSet::from([PEDESTRIAN_CLASS]),
            consider_only: true,
            min_visibility: 0.0,
            class_map: BTreeMap::from([(PEDESTRIAN_CLASS, PEDESTRIAN_CLASS)]),
            flip_protocol: FlipProtocol::MirrorBack,
            aggregate: AggregateWeighting::Unweighted,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.matching.validate()?;
        if !(0.0..=1.0).contains(&self.min_visibility) {
            return Err(Error::Config(format!(
                "min_visibility {} outside [0, 1]",
                self.min_visibility
            )));
        }
        if self.gt_classes.is_empty() {
            return Err(Error::Config("gt_classes must not be empty".into()));
        }
        Ok(())
    }

    /// Applies a `key = value` config file on top of `self`.
    ///
    /// Keys: `iou`, `conf`, `nms_iou`, `assignment`, `normalization`,
    /// `ap_interpolation`, `gt_classes` (comma list), `consider_only`,
    /// `min_visibility`, `class_map` (`det:gt` pairs, comma separated),
    /// `flip_protocol`, `aggregate`.
    pub fn apply_kv(&mut self, text: &str, origin: &Path) -> Result<()> {
        for l in parse_kv(origin, text)? {
            let bad = |what: &str| Error::parse(origin, l.line, format!("{}: {what}", l.key));
            let real = || l.value.parse::<f64>().map_err(|_| bad("expected a number"));
            match l.key {
                "iou" | "iou_threshold" => self.matching.iou_threshold = real()?,
                "conf" | "confidence_threshold" => self.matching.confidence_threshold = real()?,
                "nms_iou" | "nms_iou_threshold" => self.matching.nms_iou_threshold = real()?,
                "assignment" => self.matching.assignment = l.value.parse()?,
                "normalization" | "score_normalization" => self.score_normalization = l.value.parse()?,
                "ap_interpolation" => self.ap_interpolation = l.value.parse()?,
                "gt_classes" => {
                    self.gt_classes = l
                        .value
                        .split(',')
                        .map(|s| s.trim().parse::<i32>().map_err(|_| bad("expected integers")))
                        .collect::<Result<_>>()?;
                }
                "consider_only" => {
                    self.consider_only = l.value.parse::<bool>().map_err(|_| bad("expected true/false"))?
                }
                "min_visibility" => self.min_visibility = real()?,
                "class_map" => {
                    let mut map = BTreeMap::new();
                    for pair in l.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        let (d, g) = pair.split_once(':').ok_or_else(|| bad("expected det:gt pairs"))?;
                        let d = d.trim().parse().map_err(|_| bad("expected integers"))?;
                        let g = g.trim().parse().map_err(|_| bad("expected integers"))?;
                        map.insert(d, g);
                    }
                    self.class_map = map;
                }
                "flip_protocol" => self.flip_protocol = l.value.parse()?,
                "aggregate" => self.aggregate = l.value.parse()?,
                other => return Err(Error::parse(origin, l.line, format!("unknown key {other:?}"))),
            }
        }
        self.validate()
    }

    pub fn is_eligible(&self, gt: &GroundTruthEntry) -> bool {
        (!self.consider_only || gt.consider)
            && self.gt_classes.contains(&gt.class_id)
            && gt.visibility >= self.min_visibility
    }

    fn map_class(&self, class_id: i32) -> i32 {
        self.class_map.get(&class_id).copied().unwrap_or(class_id)
    }

    /// Class mapping, confidence filter and NMS, in that order. Detections
    /// whose mapped class is not an evaluated class are dropped.
    pub fn surviving_detections(&self, dets: &[Detection]) -> Vec<Detection> {
        let mapped: Vec<Detection> = dets
            .iter()
            .map(|d| Detection {
                class_id: self.map_class(d.class_id),
                ..d.clone()
            })
            .filter(|d| self.gt_classes.contains(&d.class_id))
            .collect();
        let confident = filter_by_confidence(&mapped, self.matching.confidence_threshold);
        nms(&confident, self.matching.nms_iou_threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEvaluation {
    pub frames: Vec<FrameMatchResult>,
    pub consistency: VideoConsistency,
    pub per_class: BTreeMap<i32, PrCurve>,
    /// `None` when no evaluated class has ground truth.
    pub map: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
}

impl SequenceEvaluation {
    pub fn ranked_detections(&self) -> usize {
        self.tp + self.fp
    }
}

/// Matches every frame of `seq` under `cfg`.
pub fn match_sequence(seq: &Sequence, cfg: &EvalConfig) -> Vec<FrameMatchResult> {
    seq.frames()
        .map(|(frame, gts, dets)| {
            let eligible: Vec<GroundTruthEntry> = gts.iter().filter(|g| cfg.is_eligible(g)).cloned().collect();
            let survivors = cfg.surviving_detections(dets);
            match_frame(frame, &eligible, &survivors, &cfg.matching)
        })
        .collect()
}

/// Adjacent-frame consistency of the detector on `seq`.
pub fn video_consistency(seq: &Sequence, cfg: &EvalConfig) -> Result<VideoConsistency> {
    cfg.validate()?;
    video_consistency_from_matches(&match_sequence(seq, cfg))
}

pub fn evaluate_sequence(seq: &Sequence, cfg: &EvalConfig) -> Result<SequenceEvaluation> {
    cfg.validate()?;
    let frames = match_sequence(seq, cfg);
    let consistency = video_consistency_from_matches(&frames)?;

    let mut per_class = BTreeMap::new();
    for &class in &cfg.gt_classes {
        let total_gt = seq
            .all_ground_truth()
            .filter(|g| g.class_id == class && cfg.is_eligible(g))
            .count();
        let ranked: Vec<RankedDetection> = frames
            .iter()
            .flat_map(|f| {
                let tps = f.matched.iter().map(|(d, _)| (d, true));
                let fps = f.unmatched_detections.iter().map(|d| (d, false));
                tps.chain(fps)
            })
            .filter(|(d, _)| d.class_id == class)
            .map(|(d, is_tp)| RankedDetection {
                confidence: d.confidence,
                is_tp,
            })
            .collect();
        per_class.insert(class, average_precision(&ranked, total_gt, cfg.ap_interpolation));
    }
    let map = mean_average_precision(per_class.values());
    let (tp, fp, fn_count) = frames.iter().fold((0, 0, 0), |acc, f| {
        (acc.0 + f.tp_count, acc.1 + f.fp_count, acc.2 + f.fn_count)
    });
    Ok(SequenceEvaluation {
        frames,
        consistency,
        per_class,
        map,
        tp,
        fp,
        fn_count,
    })
}

/// Mirrors every detection of `seq` across the vertical centre line of its
/// frames, undoing a horizontal flip applied before detection.
pub fn mirror_detections(seq: &mut Sequence) -> Result<()> {
    let width = f64::from(seq.meta.image_width);
    seq.map_detections(|d| {
        Ok(Detection {
            bbox: mirror_box(&d.bbox, width)?,
            ..d.clone()
        })
    })
}
