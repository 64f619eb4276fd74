//! Box geometry, prediction filtering and detection-to-ground-truth
//! assignment for a single frame.

mod assign;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use assign::max_weight_assignment;

use crate::error::{Error, Result};
use crate::mot::{BoundingBox, Detection, GroundTruthEntry, ObjectId};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.7;
pub const DEFAULT_NMS_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentStrategy {
    /// Detections in descending confidence each take the unmatched ground
    /// truth of highest IoU.
    #[default]
    GreedyByConfidence,
    /// Maximum-cardinality assignment, ties broken by total IoU.
    OptimalBipartite,
}

impl AssignmentStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssignmentStrategy::GreedyByConfidence => "greedy_by_confidence",
            AssignmentStrategy::OptimalBipartite => "optimal_bipartite",
        }
    }
}

impl std::str::FromStr for AssignmentStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "greedy" | "greedy_by_confidence" => Ok(Self::GreedyByConfidence),
            "optimal" | "optimal_bipartite" | "hungarian" => Ok(Self::OptimalBipartite),
            other => Err(Error::Config(format!("unknown assignment strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub iou_threshold: f64,
    pub confidence_threshold: f64,
    pub nms_iou_threshold: f64,
    pub assignment: AssignmentStrategy,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            nms_iou_threshold: DEFAULT_NMS_IOU_THRESHOLD,
            assignment: AssignmentStrategy::GreedyByConfidence,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        let unit_open = |v: f64| v > 0.0 && v <= 1.0;
        if !unit_open(self.iou_threshold) {
            return Err(Error::Config(format!(
                "iou threshold {} outside (0, 1]",
                self.iou_threshold
            )));
        }
        if !unit_open(self.nms_iou_threshold) {
            return Err(Error::Config(format!(
                "nms iou threshold {} outside (0, 1]",
                self.nms_iou_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::Config(format!(
                "confidence threshold {} outside [0, 1]",
                self.confidence_threshold
            )));
        }
        Ok(())
    }
}

/// Intersection over union. Boxes that only touch have IoU 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = a.right().min(b.right()) - a.left().max(b.left());
    let h = a.bottom().min(b.bottom()) - a.top().max(b.top());
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Keeps detections with `confidence >= threshold`, preserving order.
pub fn filter_by_confidence(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.confidence >= threshold).cloned().collect()
}

/// Class-aware greedy non-maximum suppression.
///
/// Candidates are visited by descending confidence; equal confidences are
/// ordered by `(left, top, width, height)`. A candidate survives unless it
/// overlaps an already kept box of the same class with IoU above
/// `iou_threshold`. Survivors are returned in visiting order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.bbox.lex_cmp(&b.bbox)));
    let mut kept: Vec<Detection> = Vec::with_capacity(order.len());
    for cand in order {
        let suppressed = kept
            .iter()
            .any(|k| k.class_id == cand.class_id && iou(&k.bbox, &cand.bbox) > iou_threshold);
        if !suppressed {
            kept.push(cand.clone());
        }
    }
    kept
}

/// Per-frame outcome of assigning detections to ground-truth object ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMatchResult {
    pub frame: u32,
    /// D_i: ids matched by some detection.
    pub detected_ids: BTreeSet<ObjectId>,
    pub missed_ids: BTreeSet<ObjectId>,
    /// Each true-positive detection with the id it was assigned to.
    pub matched: Vec<(Detection, ObjectId)>,
    /// False positives.
    pub unmatched_detections: Vec<Detection>,
    pub tp_count: usize,
    pub fp_count: usize,
    pub fn_count: usize,
}

impl FrameMatchResult {
    /// True negatives do not exist for detection: there is no enumerable set
    /// of "absent objects". Always zero.
    pub const fn tn_count(&self) -> usize {
        0
    }

    pub fn eligible_ids(&self) -> BTreeSet<ObjectId> {
        self.detected_ids.union(&self.missed_ids).copied().collect()
    }
}

/// Assigns `dets` (already confidence-filtered and NMS'd) to `gts` (already
/// eligibility-filtered). A detection may only match ground truth of the
/// same class with IoU at least `cfg.iou_threshold`; each side is used at
/// most once.
pub fn match_frame(frame: u32, gts: &[GroundTruthEntry], dets: &[Detection], cfg: &MatchConfig) -> FrameMatchResult {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .total_cmp(&dets[a].confidence)
            .then(dets[a].bbox.lex_cmp(&dets[b].bbox))
            .then(a.cmp(&b))
    });
    let overlap = |d: &Detection, g: &GroundTruthEntry| -> Option<f64> {
        if d.class_id != g.class_id {
            return None;
        }
        let v = iou(&d.bbox, &g.bbox);
        (v >= cfg.iou_threshold).then_some(v)
    };

    // assignment[k] = index into gts for the k-th detection in `order`
    let assignment: Vec<Option<usize>> = match cfg.assignment {
        AssignmentStrategy::GreedyByConfidence => {
            let mut taken = vec![false; gts.len()];
            order
                .iter()
                .map(|&di| {
                    let best = gts
                        .iter()
                        .enumerate()
                        .filter(|(gi, _)| !taken[*gi])
                        .filter_map(|(gi, g)| overlap(&dets[di], g).map(|v| (gi, v)))
                        .max_by(|a, b| a.1.total_cmp(&b.1).then(gts[b.0].object_id.cmp(&gts[a.0].object_id)))
                        .map(|(gi, _)| gi);
                    if let Some(gi) = best {
                        taken[gi] = true;
                    }
                    best
                })
                .collect()
        }
        AssignmentStrategy::OptimalBipartite => {
            // Weight n+1+IoU makes cardinality dominate IoU.
            let bonus = (dets.len().max(gts.len()) + 1) as f64;
            let weights: Vec<Vec<Option<f64>>> = order
                .iter()
                .map(|&di| gts.iter().map(|g| overlap(&dets[di], g).map(|v| bonus + v)).collect())
                .collect();
            max_weight_assignment(&weights)
        }
    };

    let mut detected_ids = BTreeSet::new();
    let mut matched = Vec::new();
    let mut unmatched_detections = Vec::new();
    for (k, &di) in order.iter().enumerate() {
        match assignment[k] {
            Some(gi) => {
                detected_ids.insert(gts[gi].object_id);
                matched.push((dets[di].clone(), gts[gi].object_id));
            }
            None => unmatched_detections.push(dets[di].clone()),
        }
    }
    let missed_ids: BTreeSet<ObjectId> = gts
        .iter()
        .map(|g| g.object_id)
        .filter(|id| !detected_ids.contains(id))
        .collect();
    FrameMatchResult {
        frame,
        tp_count: detected_ids.len(),
        fp_count: unmatched_detections.len(),
        fn_count: missed_ids.len(),
        detected_ids,
        missed_ids,
        matched,
        unmatched_detections,
    }
}
