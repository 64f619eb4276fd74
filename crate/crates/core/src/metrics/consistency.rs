use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::FrameMatchResult;
use crate::mot::ObjectId;

/// Objects present in both frames, and those among them detected in only one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InconsistencySets {
    /// G_i ∩ G_j
    pub shared: BTreeSet<ObjectId>,
    /// Shared ids detected in frame i and missed in frame j.
    pub missed_i_to_j: BTreeSet<ObjectId>,
    /// Shared ids detected in frame j and missed in frame i.
    pub missed_j_to_i: BTreeSet<ObjectId>,
}

/// Builds the shared set and the two one-sided miss sets for a frame pair.
///
/// `det_i` must be a subset of `gt_i` (and likewise for `j`); anything else
/// means the upstream matcher produced ids that are not ground truth.
pub fn inconsistency_sets(
    gt_i: &BTreeSet<ObjectId>,
    gt_j: &BTreeSet<ObjectId>,
    det_i: &BTreeSet<ObjectId>,
    det_j: &BTreeSet<ObjectId>,
) -> Result<InconsistencySets> {
    for (det, gt, name) in [(det_i, gt_i, "i"), (det_j, gt_j, "j")] {
        if let Some(stray) = det.difference(gt).next() {
            return Err(Error::Contract(format!(
                "detected id {stray} is not ground truth in frame {name}"
            )));
        }
    }
    let shared: BTreeSet<ObjectId> = gt_i.intersection(gt_j).copied().collect();
    let one_sided = |hit: &BTreeSet<ObjectId>, miss: &BTreeSet<ObjectId>| {
        shared
            .iter()
            .filter(|id| hit.contains(id) && !miss.contains(id))
            .copied()
            .collect::<BTreeSet<_>>()
    };
    Ok(InconsistencySets {
        missed_i_to_j: one_sided(det_i, det_j),
        missed_j_to_i: one_sided(det_j, det_i),
        shared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseConsistency {
    pub frame_i: u32,
    pub frame_j: u32,
    pub sets: InconsistencySets,
    /// `None` when the frames share no objects.
    pub value: Option<f64>,
}

/// `(|shared| - |M_ij| - |M_ji|) / |shared|`, undefined for an empty shared set.
pub fn pairwise_consistency(frame_i: u32, frame_j: u32, sets: InconsistencySets) -> PairwiseConsistency {
    let shared = sets.shared.len();
    let value = (shared > 0).then(|| {
        let consistent = shared - sets.missed_i_to_j.len() - sets.missed_j_to_i.len();
        consistent as f64 / shared as f64
    });
    PairwiseConsistency {
        frame_i,
        frame_j,
        sets,
        value,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoConsistency {
    /// Mean of the defined adjacent-pair values; `None` when every pair was
    /// undefined (no signal).
    pub value: Option<f64>,
    pub pair_values: Vec<PairwiseConsistency>,
    pub defined_pair_count: usize,
    pub skipped_pair_count: usize,
}

/// Averages pairwise consistency over adjacent frames. `frames` must be in
/// frame order and hold at least two entries.
pub fn video_consistency_from_matches(frames: &[FrameMatchResult]) -> Result<VideoConsistency> {
    if frames.len() < 2 {
        return Err(Error::Input(format!(
            "consistency needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    let mut pair_values = Vec::with_capacity(frames.len() - 1);
    for w in frames.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let sets = inconsistency_sets(&a.eligible_ids(), &b.eligible_ids(), &a.detected_ids, &b.detected_ids)?;
        pair_values.push(pairwise_consistency(a.frame, b.frame, sets));
    }
    let defined: Vec<f64> = pair_values.iter().filter_map(|p| p.value).collect();
    let value = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(VideoConsistency {
        value,
        defined_pair_count: defined.len(),
        skipped_pair_count: pair_values.len() - defined.len(),
        pair_values,
    })
}
