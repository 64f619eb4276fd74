//! Consistency and accuracy metrics computed from per-frame match results.

mod ap;
mod consistency;

pub use ap::{
    average_precision, mean_average_precision, precision, recall, ApInterpolation, PrCurve, PrPoint, RankedDetection,
};
pub use consistency::{
    inconsistency_sets, pairwise_consistency, video_consistency_from_matches, InconsistencySets, PairwiseConsistency,
    VideoConsistency,
};
