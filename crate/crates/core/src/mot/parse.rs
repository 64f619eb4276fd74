use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use super::{BoundingBox, Detection, GroundTruthEntry, ScoreNormalization, PEDESTRIAN_CLASS};
use crate::error::{Error, Result};

const MIN_FIELDS: usize = 7;

/// Reads a MOT ground-truth file
/// (`frame,id,bb_left,bb_top,bb_width,bb_height,consider,class,visibility`).
///
/// Lines with only 7 or 8 fields default to class 1 and visibility 1.0.
/// Fields past the ninth are ignored.
pub fn parse_ground_truth(path: &Path) -> Result<Vec<GroundTruthEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth_str(&text, path)
}

pub fn parse_ground_truth_str(text: &str, origin: &Path) -> Result<Vec<GroundTruthEntry>> {
    let mut entries = Vec::new();
    for (line_no, fields) in records(text, origin)? {
        let err = |msg: String| Error::parse(origin, line_no, msg);
        let frame = parse_frame(fields[0]).map_err(err)?;
        let object_id = parse_int(fields[1], "object id").map_err(err)?;
        let bbox = parse_box(&fields[2..6]).map_err(err)?;
        let consider = parse_real(fields[6], "consider flag").map_err(err)? != 0.0;
        let class_id = match fields.get(7) {
            Some(f) => parse_int(f, "class").map_err(err)? as i32,
            None => PEDESTRIAN_CLASS,
        };
        let visibility = match fields.get(8) {
            Some(f) => parse_real(f, "visibility").map_err(err)?,
            None => 1.0,
        };
        if !(0.0..=1.0).contains(&visibility) {
            return Err(err(format!("visibility {visibility} outside [0, 1]")));
        }
        entries.push(GroundTruthEntry {
            frame,
            object_id,
            bbox,
            consider,
            class_id,
            visibility,
        });
    }
    entries.sort_by_key(|e| (e.frame, e.object_id));
    if let Some(w) = entries
        .windows(2)
        .find(|w| (w[0].frame, w[0].object_id) == (w[1].frame, w[1].object_id))
    {
        return Err(Error::Integrity(format!(
            "{}: duplicate object id {} in frame {}",
            origin.display(),
            w[0].object_id,
            w[0].frame
        )));
    }
    Ok(entries)
}

/// Reads a MOT detection file (`frame,-1,bb_left,bb_top,bb_width,bb_height,score,...`)
/// and maps scores into `[0, 1]` with `normalization`.
///
/// Every detection gets class [`PEDESTRIAN_CLASS`]; det files have no class
/// column. Output is sorted by frame, then descending confidence.
pub fn parse_detections(path: &Path, normalization: ScoreNormalization) -> Result<Vec<Detection>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections_str(&text, path, normalization)
}

pub fn parse_detections_str(text: &str, origin: &Path, normalization: ScoreNormalization) -> Result<Vec<Detection>> {
    let mut raw = Vec::new();
    for (line_no, fields) in records(text, origin)? {
        let err = |msg: String| Error::parse(origin, line_no, msg);
        let frame = parse_frame(fields[0]).map_err(err)?;
        let bbox = parse_box(&fields[2..6]).map_err(err)?;
        let score = parse_real(fields[6], "score").map_err(err)?;
        raw.push((frame, bbox, score));
    }
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.2), hi.max(r.2))
    });
    let mut dets: Vec<Detection> = raw
        .into_iter()
        .map(|(frame, bbox, score)| {
            let confidence = match normalization {
                ScoreNormalization::Identity => score,
                // A file whose scores are all equal maps everything to 1.
                ScoreNormalization::MinMax if hi > lo => (score - lo) / (hi - lo),
                ScoreNormalization::MinMax => 1.0,
                ScoreNormalization::Logistic => 1.0 / (1.0 + (-score).exp()),
            };
            Detection {
                frame,
                bbox,
                confidence: confidence.clamp(0.0, 1.0),
                class_id: PEDESTRIAN_CLASS,
            }
        })
        .collect();
    dets.sort_by(detection_order);
    Ok(dets)
}

/// Frame ascending, confidence descending, then box order.
pub(crate) fn detection_order(a: &Detection, b: &Detection) -> Ordering {
    a.frame
        .cmp(&b.frame)
        .then(b.confidence.total_cmp(&a.confidence))
        .then(a.bbox.lex_cmp(&b.bbox))
        .then(a.class_id.cmp(&b.class_id))
}

/// Renders entries in the 9-column ground-truth layout. Numbers use the
/// shortest round-tripping representation.
pub fn format_ground_truth(entries: &[GroundTruthEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let b = &e.bbox;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.frame,
            e.object_id,
            b.left(),
            b.top(),
            b.width(),
            b.height(),
            u8::from(e.consider),
            e.class_id,
            e.visibility
        );
    }
    out
}

/// Renders detections in the 10-column MOT det layout.
pub fn format_detections(dets: &[Detection]) -> String {
    let mut out = String::new();
    for d in dets {
        let b = &d.bbox;
        let _ = writeln!(
            out,
            "{},-1,{},{},{},{},{},-1,-1,-1",
            d.frame,
            b.left(),
            b.top(),
            b.width(),
            b.height(),
            d.confidence
        );
    }
    out
}

fn records<'a>(text: &'a str, origin: &Path) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < MIN_FIELDS {
            return Err(Error::parse(
                origin,
                idx + 1,
                format!("expected at least {MIN_FIELDS} fields, found {}", fields.len()),
            ));
        }
        out.push((idx + 1, fields));
    }
    Ok(out)
}

fn parse_real(field: &str, what: &str) -> Result<f64, String> {
    let v: f64 = field
        .parse()
        .map_err(|_| format!("{what}: cannot parse {field:?} as a number"))?;
    if !v.is_finite() {
        return Err(format!("{what}: value {field:?} is not finite"));
    }
    Ok(v)
}

/// Integers may be written as `7` or `7.000`.
fn parse_int(field: &str, what: &str) -> Result<i64, String> {
    if let Ok(v) = field.parse::<i64>() {
        return Ok(v);
    }
    let v = parse_real(field, what)?;
    if v.fract() != 0.0 || v.abs() > 9.0e15 {
        return Err(format!("{what}: {field:?} is not an integer"));
    }
    Ok(v as i64)
}

fn parse_frame(field: &str) -> Result<u32, String> {
    let v = parse_int(field, "frame")?;
    if v < 1 || v > i64::from(u32::MAX) {
        return Err(format!("frame {v} must be >= 1"));
    }
    Ok(v as u32)
}

fn parse_box(fields: &[&str]) -> Result<BoundingBox, String> {
    let left = parse_real(fields[0], "bb_left")?;
    let top = parse_real(fields[1], "bb_top")?;
    let width = parse_real(fields[2], "bb_width")?;
    let height = parse_real(fields[3], "bb_height")?;
    BoundingBox::new(left, top, width, height).map_err(|e| e.to_string())
}
