//! Seeded synthetic scenarios with controlled miss patterns.
//!
//! Every id is present in every frame on a fixed grid with one-box gaps, and
//! detections copy ground-truth boxes exactly, so evaluation depends only on
//! which ids the miss model drops.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corrections::Image;
use crate::error::{Error, Result};
use crate::mot::{
    write_sequence, BoundingBox, Detection, GroundTruthEntry, ObjectId, Sequence, SequenceMeta, PEDESTRIAN_CLASS,
};

pub const BOX_WIDTH: f64 = 32.0;
pub const BOX_HEIGHT: f64 = 64.0;
pub const DETECTION_CONFIDENCE: f64 = 0.99;
const BACKGROUND: [u8; 3] = [96, 96, 96];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MissModel {
    Perfect,
    /// The same ids are missed in every frame.
    ConsistentMisser {
        missed: BTreeSet<ObjectId>,
    },
    /// `odd` is missed on frames 1, 3, 5, ...; `even` on frames 2, 4, ...
    AlternatingMisser {
        odd: BTreeSet<ObjectId>,
        even: BTreeSet<ObjectId>,
    },
    /// Each id is missed independently per frame with probability `p`.
    Bernoulli {
        p: f64,
    },
    NoneDetected,
}

impl MissModel {
    fn validate(&self, ids: &BTreeSet<ObjectId>) -> Result<()> {
        let subset = |s: &BTreeSet<ObjectId>, what: &str| {
            if s.is_subset(ids) {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} ids {s:?} are not all in {ids:?}")))
            }
        };
        match self {
            MissModel::ConsistentMisser { missed } => subset(missed, "missed"),
            MissModel::AlternatingMisser { odd, even } => {
                subset(odd, "odd-frame")?;
                subset(even, "even-frame")
            }
            MissModel::Bernoulli { p } if !(0.0..=1.0).contains(p) => {
                Err(Error::Config(format!("miss probability {p} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Grid position of the `index`-th id and the frame size that holds `count`
/// boxes.
fn layout(count: usize) -> (usize, u32, u32) {
    let cols = (count as f64).sqrt().ceil().max(1.0) as usize;
    let rows = count.div_ceil(cols).max(1);
    let width = ((2 * cols + 1) as f64 * BOX_WIDTH) as u32;
    let height = ((2 * rows + 1) as f64 * BOX_HEIGHT) as u32;
    (cols, width, height)
}

fn grid_box(index: usize, cols: usize) -> BoundingBox {
    let (c, r) = (index % cols, index / cols);
    BoundingBox::new(
        BOX_WIDTH * (1 + 2 * c) as f64,
        BOX_HEIGHT * (1 + 2 * r) as f64,
        BOX_WIDTH,
        BOX_HEIGHT,
    )
    .expect("grid boxes are valid")
}

/// Builds an `n_frames` sequence in which every id appears in every frame and
/// detections follow `model`.
pub fn generate_scenario(n_frames: u32, ids: &BTreeSet<ObjectId>, model: &MissModel, seed: u64) -> Result<Sequence> {
    if n_frames < 2 {
        return Err(Error::Config(format!(
            "scenario needs at least 2 frames, got {n_frames}"
        )));
    }
    if ids.is_empty() {
        return Err(Error::Config("scenario needs at least one id".into()));
    }
    model.validate(ids)?;
    let (cols, width, height) = layout(ids.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gt = Vec::new();
    let mut dets = Vec::new();
    for frame in 1..=n_frames {
        for (index, &id) in ids.iter().enumerate() {
            let bbox = grid_box(index, cols);
            gt.push(GroundTruthEntry {
                frame,
                object_id: id,
                bbox,
                consider: true,
                class_id: PEDESTRIAN_CLASS,
                visibility: 1.0,
            });
            let missed = match model {
                MissModel::Perfect => false,
                MissModel::ConsistentMisser { missed } => missed.contains(&id),
                MissModel::AlternatingMisser { odd, even } => {
                    if frame % 2 == 1 {
                        odd.contains(&id)
                    } else {
                        even.contains(&id)
                    }
                }
                MissModel::Bernoulli { p } => rng.random::<f64>() < *p,
                MissModel::NoneDetected => true,
            };
            if !missed {
                dets.push(Detection {
                    frame,
                    bbox,
                    confidence: DETECTION_CONFIDENCE,
                    class_id: PEDESTRIAN_CLASS,
                });
            }
        }
    }
    let meta = SequenceMeta {
        name: format!("synth-{}", model_name(model)),
        frame_count: n_frames,
        frame_rate: 30.0,
        image_width: width,
        image_height: height,
        image_dir: PathBuf::from("img1"),
        image_ext: Some(".png".into()),
    };
    Sequence::from_entries(meta, gt, dets)
}

fn model_name(model: &MissModel) -> &'static str {
    match model {
        MissModel::Perfect => "perfect",
        MissModel::ConsistentMisser { .. } => "consistent",
        MissModel::AlternatingMisser { .. } => "alternating",
        MissModel::Bernoulli { .. } => "bernoulli",
        MissModel::NoneDetected => "none",
    }
}

pub const ID_A: ObjectId = 1;
pub const ID_B: ObjectId = 2;
pub const ID_C: ObjectId = 3;
pub const ID_D: ObjectId = 4;

/// Two-frame pair: frame 1 holds {A, B, C}, frame 2 holds {D, A, B}. The
/// detector finds A and B in frame 1 and only A in frame 2.
pub fn worked_pair_fixture() -> Sequence {
    let cols = 2;
    let slot = |id: ObjectId| grid_box((id - 1) as usize, cols);
    let entry = |frame, id| GroundTruthEntry {
        frame,
        object_id: id,
        bbox: slot(id),
        consider: true,
        class_id: PEDESTRIAN_CLASS,
        visibility: 1.0,
    };
    let hit = |frame, id| Detection {
        frame,
        bbox: slot(id),
        confidence: DETECTION_CONFIDENCE,
        class_id: PEDESTRIAN_CLASS,
    };
    let gt = vec![
        entry(1, ID_A),
        entry(1, ID_B),
        entry(1, ID_C),
        entry(2, ID_D),
        entry(2, ID_A),
        entry(2, ID_B),
    ];
    let dets = vec![hit(1, ID_A), hit(1, ID_B), hit(2, ID_A)];
    let (_, width, height) = layout(4);
    let meta = SequenceMeta {
        name: "worked-pair".into(),
        frame_count: 2,
        frame_rate: 30.0,
        image_width: width,
        image_height: height,
        image_dir: PathBuf::from("img1"),
        image_ext: Some(".png".into()),
    };
    Sequence::from_entries(meta, gt, dets).expect("fixture is well formed")
}

/// Flat placeholder frame: uniform background with each ground-truth box
/// filled in a colour derived from its id.
pub fn render_frame(seq: &Sequence, frame: u32) -> Image {
    let (w, h) = (seq.meta.image_width, seq.meta.image_height);
    let boxes: Vec<(BoundingBox, [u8; 3])> = seq
        .ground_truth(frame)
        .iter()
        .map(|g| {
            let id = g.object_id as u64;
            let colour = [
                (id * 67 % 200 + 40) as u8,
                (id * 131 % 200 + 40) as u8,
                (id * 29 % 200 + 40) as u8,
            ];
            (g.bbox, colour)
        })
        .collect();
    Image::from_fn(w, h, |x, y| {
        let (px, py) = (f64::from(x) + 0.5, f64::from(y) + 0.5);
        boxes
            .iter()
            .find(|(b, _)| px >= b.left() && px < b.right() && py >= b.top() && py < b.bottom())
            .map_or(BACKGROUND, |(_, c)| *c)
    })
}

/// Writes the scenario in MOT layout under `root`; with `emit_frames`, also
/// writes PNG placeholders `img1/000001.png`, ...
pub fn write_scenario(seq: &Sequence, root: &Path, emit_frames: bool) -> Result<()> {
    write_sequence(seq, root)?;
    if emit_frames {
        let dir = root.join(&seq.meta.image_dir);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for frame in 1..=seq.frame_count() {
            let path = dir.join(format!("{frame:06}.png"));
            let png = render_frame(seq, frame).encode_png()?;
            std::fs::write(&path, png).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}
