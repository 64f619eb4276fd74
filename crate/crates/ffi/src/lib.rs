//! C ABI over the `detcons` library.
//!
//! Conventions:
//! - Every fallible function returns a [`DetconsStatus`]; results go through
//!   out-pointers that are only written on success.
//! - On failure, [`detcons_last_error`] returns a message for the calling
//!   thread, valid until that thread's next failing call.
//! - Handles are opaque and owned by the caller; release them with the
//!   matching `*_free` function. Passing NULL to a `*_free` is a no-op.
//! - Strings returned by the library must be released with
//!   [`detcons_string_free`].
//! - Panics never cross the boundary; they surface as
//!   `DETCONS_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use detcons::corrections::{CorrectionPipeline, Image};
use detcons::eval::{video_consistency, EvalConfig};
use detcons::matching::{iou, AssignmentStrategy, MatchConfig};
use detcons::metrics::{inconsistency_sets, pairwise_consistency};
use detcons::mot::{load_sequence, BoundingBox, Sequence};
use detcons::report::EvaluationReport;
use detcons::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetconsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Integrity = 4,
    Config = 5,
    Io = 6,
    Codec = 7,
    Contract = 8,
    Panic = 9,
}

impl From<&Error> for DetconsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Json(_) => Self::Parse,
            Error::Integrity(_) => Self::Integrity,
            Error::Config(_) => Self::Config,
            Error::Io { .. } => Self::Io,
            Error::Codec(_) | Error::Image { .. } => Self::Codec,
            Error::Contract(_) => Self::Contract,
            _ => Self::InvalidArgument,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetconsAssignment {
    Greedy = 0,
    Optimal = 1,
}

/// Pixel box: top-left corner plus size.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetconsBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetconsMatchConfig {
    pub iou_threshold: f64,
    pub confidence_threshold: f64,
    pub nms_iou_threshold: f64,
    pub assignment: DetconsAssignment,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetconsConsistency {
    /// Meaningful only when `defined` is true.
    pub value: f64,
    pub defined: bool,
    pub defined_pairs: usize,
    pub skipped_pairs: usize,
}

/// Loaded MOT sequence.
pub struct DetconsSequence(Sequence);

/// Parsed correction pipeline.
pub struct DetconsPipeline(CorrectionPipeline);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Fail(DetconsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail((&e).into(), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DetconsStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(DetconsStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DetconsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DetconsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            DetconsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn id_set(p: *const i64, n: usize, what: &str) -> Result<BTreeSet<i64>, Fail> {
    if n == 0 {
        return Ok(BTreeSet::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n).iter().copied().collect())
}

fn to_box(b: &DetconsBox) -> Result<BoundingBox, Fail> {
    Ok(BoundingBox::new(b.left, b.top, b.width, b.height).map_err(Error::from)?)
}

unsafe fn eval_config(cfg: *const DetconsMatchConfig) -> Result<EvalConfig, Fail> {
    let mut out = EvalConfig::default();
    if let Some(c) = cfg.as_ref() {
        out.matching = MatchConfig {
            iou_threshold: c.iou_threshold,
            confidence_threshold: c.confidence_threshold,
            nms_iou_threshold: c.nms_iou_threshold,
            assignment: match c.assignment {
                DetconsAssignment::Greedy => AssignmentStrategy::GreedyByConfidence,
                DetconsAssignment::Optimal => AssignmentStrategy::OptimalBipartite,
            },
        };
    }
    out.validate()?;
    Ok(out)
}

/// Message for the last failing call on this thread, or NULL. Owned by the
/// library.
#[no_mangle]
pub extern "C" fn detcons_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn detcons_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn detcons_iou(a: *const DetconsBox, b: *const DetconsBox, out: *mut f64) -> DetconsStatus {
    guard(|| {
        let (a, b) = (a.as_ref().ok_or(null("a"))?, b.as_ref().ok_or(null("b"))?);
        let out = out.as_mut().ok_or(null("out"))?;
        *out = iou(&to_box(a)?, &to_box(b)?);
        Ok(())
    })
}

/// Consistency of one frame pair from id lists: ground truth present in each
/// frame and the subset detected. `*out_defined` is false (and `*out_value`
/// untouched) when the frames share no ids.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn detcons_pairwise_consistency(
    gt_i: *const i64,
    gt_i_len: usize,
    gt_j: *const i64,
    gt_j_len: usize,
    det_i: *const i64,
    det_i_len: usize,
    det_j: *const i64,
    det_j_len: usize,
    out_value: *mut f64,
    out_defined: *mut bool,
) -> DetconsStatus {
    guard(|| {
        let sets = inconsistency_sets(
            &id_set(gt_i, gt_i_len, "gt_i")?,
            &id_set(gt_j, gt_j_len, "gt_j")?,
            &id_set(det_i, det_i_len, "det_i")?,
            &id_set(det_j, det_j_len, "det_j")?,
        )?;
        let value = out_value.as_mut().ok_or(null("out_value"))?;
        let defined = out_defined.as_mut().ok_or(null("out_defined"))?;
        let pair = pairwise_consistency(0, 1, sets);
        *defined = pair.value.is_some();
        if let Some(v) = pair.value {
            *value = v;
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn detcons_match_config_default() -> DetconsMatchConfig {
    let m = MatchConfig::default();
    DetconsMatchConfig {
        iou_threshold: m.iou_threshold,
        confidence_threshold: m.confidence_threshold,
        nms_iou_threshold: m.nms_iou_threshold,
        assignment: match m.assignment {
            AssignmentStrategy::GreedyByConfidence => DetconsAssignment::Greedy,
            AssignmentStrategy::OptimalBipartite => DetconsAssignment::Optimal,
        },
    }
}

/// Loads a sequence root (seqinfo.ini, gt/gt.txt, det/det.txt).
#[no_mangle]
pub unsafe extern "C" fn detcons_sequence_load(root: *const c_char, out: *mut *mut DetconsSequence) -> DetconsStatus {
    guard(|| {
        let root = str_arg(root, "root")?;
        let out = out.as_mut().ok_or(null("out"))?;
        let seq = load_sequence(Path::new(root))?;
        *out = Box::into_raw(Box::new(DetconsSequence(seq)));
        Ok(())
    })
}

/// Frame count, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn detcons_sequence_frame_count(seq: *const DetconsSequence) -> u32 {
    seq.as_ref().map_or(0, |s| s.0.frame_count())
}

#[no_mangle]
pub unsafe extern "C" fn detcons_sequence_free(seq: *mut DetconsSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Video consistency of `seq`. `cfg` may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn detcons_video_consistency(
    seq: *const DetconsSequence,
    cfg: *const DetconsMatchConfig,
    out: *mut DetconsConsistency,
) -> DetconsStatus {
    guard(|| {
        let seq = seq.as_ref().ok_or(null("seq"))?;
        let out = out.as_mut().ok_or(null("out"))?;
        let vc = video_consistency(&seq.0, &eval_config(cfg)?)?;
        *out = DetconsConsistency {
            value: vc.value.unwrap_or(0.0),
            defined: vc.value.is_some(),
            defined_pairs: vc.defined_pair_count,
            skipped_pairs: vc.skipped_pair_count,
        };
        Ok(())
    })
}

/// Full evaluation report of `seq` as JSON. Free `*out_json` with
/// [`detcons_string_free`].
#[no_mangle]
pub unsafe extern "C" fn detcons_evaluate_json(
    seq: *const DetconsSequence,
    cfg: *const DetconsMatchConfig,
    out_json: *mut *mut c_char,
) -> DetconsStatus {
    guard(|| {
        let seq = seq.as_ref().ok_or(null("seq"))?;
        let out = out_json.as_mut().ok_or(null("out_json"))?;
        let cfg = eval_config(cfg)?;
        let report = EvaluationReport::from_sequence(&seq.0, "", &cfg, None)?;
        let json = serde_json::to_string(&report).map_err(Error::from)?;
        *out = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn detcons_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a pipeline spec such as `"wc:quality=30,um"`.
#[no_mangle]
pub unsafe extern "C" fn detcons_pipeline_parse(spec: *const c_char, out: *mut *mut DetconsPipeline) -> DetconsStatus {
    guard(|| {
        let spec = str_arg(spec, "spec")?;
        let out = out.as_mut().ok_or(null("out"))?;
        *out = Box::into_raw(Box::new(DetconsPipeline(CorrectionPipeline::parse(spec)?)));
        Ok(())
    })
}

/// True when detections on the corrected frames must be mirrored back.
#[no_mangle]
pub unsafe extern "C" fn detcons_pipeline_requires_mirroring(p: *const DetconsPipeline) -> bool {
    p.as_ref().is_some_and(|p| p.0.requires_mirroring())
}

/// Runs the pipeline on packed RGB8 pixels. `input` and `output` each hold
/// `width * height * 3` bytes and may not overlap.
#[no_mangle]
pub unsafe extern "C" fn detcons_pipeline_apply_rgb(
    p: *const DetconsPipeline,
    input: *const u8,
    width: u32,
    height: u32,
    output: *mut u8,
) -> DetconsStatus {
    guard(|| {
        let p = p.as_ref().ok_or(null("pipeline"))?;
        if input.is_null() {
            return Err(null("input"));
        }
        if output.is_null() {
            return Err(null("output"));
        }
        let len = (width as usize)
            .checked_mul(height as usize)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| invalid("image too large"))?;
        let pixels = std::slice::from_raw_parts(input, len).to_vec();
        let result = p.0.apply(&Image::new(width, height, pixels)?)?;
        std::slice::from_raw_parts_mut(output, len).copy_from_slice(result.pixels());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn detcons_pipeline_free(p: *mut DetconsPipeline) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}
