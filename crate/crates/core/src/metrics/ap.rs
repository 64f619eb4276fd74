use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `TP / (TP + FP)`; undefined with no predictions.
pub fn precision(tp: usize, fp: usize) -> Option<f64> {
    (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64)
}

/// `TP / (TP + FN)`; undefined with no ground truth.
pub fn recall(tp: usize, fn_count: usize) -> Option<f64> {
    (tp + fn_count > 0).then(|| tp as f64 / (tp + fn_count) as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApInterpolation {
    /// Area under the monotone precision envelope, evaluated at every
    /// recall step.
    #[default]
    AllPoints,
    /// Mean of envelope precision at recall 0.0, 0.1, ..., 1.0.
    ElevenPoint,
}

impl ApInterpolation {
    pub fn as_str(&self) -> &'static str {
        match self {
            ApInterpolation::AllPoints => "all_points",
            ApInterpolation::ElevenPoint => "eleven_point",
        }
    }
}

impl std::str::FromStr for ApInterpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "all_points" | "all" => Ok(Self::AllPoints),
            "eleven_point" | "11" | "11_point" => Ok(Self::ElevenPoint),
            other => Err(Error::Config(format!("unknown AP interpolation {other:?}"))),
        }
    }
}

/// One prediction with its match outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedDetection {
    pub confidence: f64,
    pub is_tp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
    pub tp: usize,
    pub fp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub total_gt: usize,
    /// `None` when there is no ground truth to recall.
    pub ap: Option<f64>,
}

/// Builds the precision/recall curve from pooled detections and integrates
/// it into average precision.
///
/// Detections are ranked by descending confidence; ties keep input order.
/// The number of true positives must not exceed `total_gt`.
pub fn average_precision(dets: &[RankedDetection], total_gt: usize, interpolation: ApInterpolation) -> PrCurve {
    let mut ranked: Vec<&RankedDetection> = dets.iter().collect();
    ranked.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));

    let mut points = Vec::with_capacity(ranked.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for d in ranked {
        if d.is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push(PrPoint {
            recall: if total_gt > 0 { tp as f64 / total_gt as f64 } else { 0.0 },
            precision: tp as f64 / (tp + fp) as f64,
            tp,
            fp,
        });
    }
    debug_assert!(tp <= total_gt || total_gt == 0, "more true positives than ground truth");

    let ap = (total_gt > 0).then(|| {
        // envelope[k] = max precision at rank >= k
        let mut envelope: Vec<f64> = points.iter().map(|p| p.precision).collect();
        for k in (0..envelope.len().saturating_sub(1)).rev() {
            envelope[k] = envelope[k].max(envelope[k + 1]);
        }
        match interpolation {
            ApInterpolation::AllPoints => {
                // Recall advances by exactly 1/total_gt at each true positive.
                let area: f64 = points
                    .iter()
                    .zip(&envelope)
                    .enumerate()
                    .filter(|(k, _)| points_is_tp(&points, *k))
                    .map(|(_, (_, e))| *e)
                    .sum();
                area / total_gt as f64
            }
            ApInterpolation::ElevenPoint => {
                let sum: f64 = (0..=10)
                    .map(|i| {
                        let t = i as f64 / 10.0;
                        points
                            .iter()
                            .zip(&envelope)
                            .find(|(p, _)| p.recall >= t)
                            .map_or(0.0, |(_, e)| *e)
                    })
                    .sum();
                sum / 11.0
            }
        }
    });
    PrCurve { points, total_gt, ap }
}

fn points_is_tp(points: &[PrPoint], k: usize) -> bool {
    let prev = if k == 0 { 0 } else { points[k - 1].tp };
    points[k].tp > prev
}

/// Unweighted mean of the defined per-class AP values; `None` when no class
/// has a defined AP.
pub fn mean_average_precision<'a>(curves: impl IntoIterator<Item = &'a PrCurve>) -> Option<f64> {
    let aps: Vec<f64> = curves.into_iter().filter_map(|c| c.ap).collect();
    (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64)
}
