//! Evaluation and comparison reports: JSON documents with full-precision
//! values, plus table/CSV renderings rounded for display.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrections::Manifest;
use crate::error::{Error, Result};
use crate::eval::{evaluate_sequence, mirror_detections, AggregateWeighting, EvalConfig, FlipProtocol};
use crate::metrics::{precision, recall};
use crate::mot::{load_sequence_with, LoadOptions, Sequence};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Identifies the correction run whose frames produced the detections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEcho {
    /// SHA-256 of the manifest file bytes.
    pub digest: String,
    pub pipeline_spec: String,
    pub mirror_boxes: bool,
    /// Whether detections were mirrored back before scoring.
    pub detections_mirrored: bool,
}

impl ManifestEcho {
    pub fn from_manifest(manifest: &Manifest, digest: String, protocol: FlipProtocol) -> Self {
        Self {
            digest,
            pipeline_spec: manifest.pipeline_spec.clone(),
            mirror_boxes: manifest.mirror_boxes,
            detections_mirrored: manifest.mirror_boxes && protocol == FlipProtocol::MirrorBack,
        }
    }

    /// Reads a manifest file and digests its bytes.
    pub fn read(path: &Path, protocol: FlipProtocol) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_slice(&bytes)?;
        Ok(Self::from_manifest(
            &manifest,
            crate::corrections::sha256_hex(&bytes),
            protocol,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub sequence: String,
    pub root: String,
    pub frame_count: u32,
    /// C_V; `None` when no adjacent pair shares an object.
    pub consistency: Option<f64>,
    pub defined_pairs: usize,
    pub skipped_pairs: usize,
    /// `None` when no evaluated class has ground truth.
    pub map: Option<f64>,
    pub per_class_ap: BTreeMap<i32, Option<f64>>,
    /// Detections that survived filtering and entered the AP ranking.
    pub ranked_detections: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
    /// Always 0: true negatives are not defined for detection.
    pub tn: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub config: EvalConfig,
    pub correction_manifest: Option<ManifestEcho>,
}

impl EvaluationReport {
    pub fn from_sequence(
        seq: &Sequence,
        root: &str,
        cfg: &EvalConfig,
        manifest: Option<&ManifestEcho>,
    ) -> Result<Self> {
        let mut seq = std::borrow::Cow::Borrowed(seq);
        if manifest.is_some_and(|m| m.detections_mirrored) {
            mirror_detections(seq.to_mut())?;
        }
        let ev = evaluate_sequence(&seq, cfg)?;
        Ok(Self {
            sequence: seq.meta.name.clone(),
            root: root.to_string(),
            frame_count: seq.frame_count(),
            consistency: ev.consistency.value,
            defined_pairs: ev.consistency.defined_pair_count,
            skipped_pairs: ev.consistency.skipped_pair_count,
            map: ev.map,
            per_class_ap: ev.per_class.iter().map(|(c, curve)| (*c, curve.ap)).collect(),
            ranked_detections: ev.ranked_detections(),
            tp: ev.tp,
            fp: ev.fp,
            fn_count: ev.fn_count,
            tn: 0,
            precision: precision(ev.tp, ev.fp),
            recall: recall(ev.tp, ev.fn_count),
            config: cfg.clone(),
            correction_manifest: manifest.cloned(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFailure {
    pub root: String,
    pub error: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub consistency: Option<f64>,
    pub map: Option<f64>,
    pub weighting: AggregateWeighting,
    pub sequence_count: usize,
}

impl Aggregate {
    pub fn over(reports: &[EvaluationReport], weighting: AggregateWeighting) -> Self {
        let mean = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
        let consistency = match weighting {
            AggregateWeighting::Unweighted => mean(reports.iter().filter_map(|r| r.consistency).collect()),
            AggregateWeighting::PairWeighted => {
                let pairs: usize = reports
                    .iter()
                    .filter(|r| r.consistency.is_some())
                    .map(|r| r.defined_pairs)
                    .sum();
                (pairs > 0).then(|| {
                    reports
                        .iter()
                        .filter_map(|r| r.consistency.map(|c| c * r.defined_pairs as f64))
                        .sum::<f64>()
                        / pairs as f64
                })
            }
        };
        Self {
            consistency,
            map: mean(reports.iter().filter_map(|r| r.map).collect()),
            weighting,
            sequence_count: reports.len(),
        }
    }
}

/// One `eval` invocation over a batch of sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub schema_version: u32,
    pub config: EvalConfig,
    pub correction_manifest: Option<ManifestEcho>,
    /// Sorted by sequence name.
    pub sequences: Vec<EvaluationReport>,
    pub failures: Vec<SequenceFailure>,
    pub aggregate: Aggregate,
}

impl EvalRun {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let run: Self = serde_json::from_slice(&bytes)?;
        if run.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported report schema_version {}",
                path.display(),
                run.schema_version
            )));
        }
        Ok(run)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<24} {:>8} {:>9} {:>8} {:>7} {:>7} {:>7}",
            "sequence", "C_V", "pairs", "mAP", "TP", "FP", "FN"
        );
        for r in &self.sequences {
            let _ = writeln!(
                out,
                "{:<24} {:>8} {:>9} {:>8} {:>7} {:>7} {:>7}",
                r.sequence,
                percent(r.consistency),
                format!("{}/{}", r.defined_pairs, r.defined_pairs + r.skipped_pairs),
                percent(r.map),
                r.tp,
                r.fp,
                r.fn_count
            );
        }
        let _ = writeln!(
            out,
            "{:<24} {:>8} {:>9} {:>8}",
            "Avg.",
            percent(self.aggregate.consistency),
            "",
            percent(self.aggregate.map)
        );
        for f in &self.failures {
            let _ = writeln!(out, "FAILED {}: {}", f.root, f.error);
        }
        out
    }
}

/// Loads and evaluates every root in parallel. A root that fails to load or
/// evaluate is recorded in `failures` without stopping the others.
pub fn evaluate_batch(roots: &[PathBuf], cfg: &EvalConfig, manifest: Option<&ManifestEcho>) -> Result<EvalRun> {
    cfg.validate()?;
    let opts = LoadOptions {
        require_detections: true,
        normalization: cfg.score_normalization,
    };
    let results: Vec<std::result::Result<EvaluationReport, SequenceFailure>> = roots
        .par_iter()
        .map(|root| {
            let label = root.display().to_string();
            load_sequence_with(root, &opts)
                .and_then(|seq| EvaluationReport::from_sequence(&seq, &label, cfg, manifest))
                .map_err(|e| SequenceFailure {
                    root: label,
                    exit_code: e.exit_code(),
                    error: e.to_string(),
                })
        })
        .collect();
    let (mut sequences, mut failures) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(rep) => sequences.push(rep),
            Err(f) => failures.push(f),
        }
    }
    sequences.sort_by(|a, b| a.sequence.cmp(&b.sequence).then(a.root.cmp(&b.root)));
    failures.sort_by(|a, b| a.root.cmp(&b.root));
    Ok(EvalRun {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        correction_manifest: manifest.cloned(),
        aggregate: Aggregate::over(&sequences, cfg.aggregate),
        sequences,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub sequence: String,
    pub baseline_consistency: Option<f64>,
    pub treatment_consistency: Option<f64>,
    /// Treatment minus baseline, in percentage points.
    pub delta_consistency_pp: Option<f64>,
    pub baseline_map: Option<f64>,
    pub treatment_map: Option<f64>,
    pub delta_map_pp: Option<f64>,
}

impl DeltaRow {
    fn new(sequence: String, (bc, tc): (Option<f64>, Option<f64>), (bm, tm): (Option<f64>, Option<f64>)) -> Self {
        Self {
            sequence,
            baseline_consistency: bc,
            treatment_consistency: tc,
            delta_consistency_pp: delta_pp(bc, tc),
            baseline_map: bm,
            treatment_map: tm,
            delta_map_pp: delta_pp(bm, tm),
        }
    }
}

/// `(treatment - baseline) * 100`.
pub fn delta_pp(baseline: Option<f64>, treatment: Option<f64>) -> Option<f64> {
    Some((treatment? - baseline?) * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub rows: Vec<DeltaRow>,
    pub average: DeltaRow,
    pub baseline: EvalRun,
    pub treatment: EvalRun,
}

/// Per-sequence and average deltas of `treatment` against `baseline`.
/// Both runs must cover the same sequences under the same evaluation config;
/// only the correction manifest may differ.
pub fn compare(baseline: &EvalRun, treatment: &EvalRun) -> Result<ComparisonReport> {
    let index = |run: &EvalRun, which: &str| -> Result<BTreeMap<String, EvaluationReport>> {
        let mut map = BTreeMap::new();
        for r in &run.sequences {
            if map.insert(r.sequence.clone(), r.clone()).is_some() {
                return Err(Error::Comparison(format!(
                    "{which} lists sequence {} twice",
                    r.sequence
                )));
            }
        }
        Ok(map)
    };
    let base = index(baseline, "baseline")?;
    let treat = index(treatment, "treatment")?;
    let bk: BTreeSet<&String> = base.keys().collect();
    let tk: BTreeSet<&String> = treat.keys().collect();
    if bk != tk {
        let only_base: Vec<_> = bk.difference(&tk).collect();
        let only_treat: Vec<_> = tk.difference(&bk).collect();
        return Err(Error::Comparison(format!(
            "sequence sets differ: only in baseline {only_base:?}, only in treatment {only_treat:?}"
        )));
    }
    if baseline.config != treatment.config {
        return Err(Error::Comparison(
            "evaluation configs differ between baseline and treatment".into(),
        ));
    }
    let rows = base
        .iter()
        .map(|(name, b)| {
            let t = &treat[name];
            DeltaRow::new(name.clone(), (b.consistency, t.consistency), (b.map, t.map))
        })
        .collect();
    let (ba, ta) = (&baseline.aggregate, &treatment.aggregate);
    Ok(ComparisonReport {
        schema_version: REPORT_SCHEMA_VERSION,
        rows,
        average: DeltaRow::new("Avg.".into(), (ba.consistency, ta.consistency), (ba.map, ta.map)),
        baseline: baseline.clone(),
        treatment: treatment.clone(),
    })
}

impl ComparisonReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>10} {:>10}", "sequence", "ΔC_V", "ΔmAP");
        for r in self.rows.iter().chain(std::iter::once(&self.average)) {
            let _ = writeln!(
                out,
                "{:<24} {:>10} {:>10}",
                r.sequence,
                signed_points(r.delta_consistency_pp),
                signed_points(r.delta_map_pp)
            );
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Codec(format!("csv: {e}"));
        w.write_record([
            "sequence",
            "baseline_consistency",
            "treatment_consistency",
            "delta_consistency_pp",
            "baseline_map",
            "treatment_map",
            "delta_map_pp",
        ])
        .map_err(csv_err)?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in self.rows.iter().chain(std::iter::once(&self.average)) {
            w.write_record([
                r.sequence.clone(),
                cell(r.baseline_consistency),
                cell(r.treatment_consistency),
                cell(r.delta_consistency_pp),
                cell(r.baseline_map),
                cell(r.treatment_map),
                cell(r.delta_map_pp),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Codec(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// `0.832` -> `"83.2%"`.
pub fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.1}%", x * 100.0))
}

/// `5.1` -> `"+5.1%"`.
pub fn signed_points(v: Option<f64>) -> String {
    match v {
        // avoid printing "-0.0%"
        Some(x) if x.abs() < 0.05 => "+0.0%".to_string(),
        Some(x) => format!("{x:+.1}%"),
        None => "n/a".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(name: &str, consistency: Option<f64>, map: Option<f64>, pairs: usize) -> EvaluationReport {
        EvaluationReport {
            sequence: name.into(),
            root: name.into(),
            frame_count: pairs as u32 + 1,
            consistency,
            defined_pairs: pairs,
            skipped_pairs: 0,
            map,
            per_class_ap: BTreeMap::from([(1, map)]),
            ranked_detections: 0,
            tp: 0,
            fp: 0,
            fn_count: 0,
            tn: 0,
            precision: None,
            recall: None,
            config: EvalConfig::default(),
            correction_manifest: None,
        }
    }

    fn run(reports: Vec<EvaluationReport>) -> EvalRun {
        EvalRun {
            schema_version: REPORT_SCHEMA_VERSION,
            config: EvalConfig::default(),
            correction_manifest: None,
            aggregate: Aggregate::over(&reports, AggregateWeighting::Unweighted),
            sequences: reports,
            failures: vec![],
        }
    }

    #[test]
    fn aggregate_is_unweighted_mean() {
        let reps = vec![report("a", Some(1.0), Some(0.5), 9), report("b", Some(0.5), None, 1)];
        let agg = Aggregate::over(&reps, AggregateWeighting::Unweighted);
        assert_eq!(agg.consistency, Some(0.75));
        assert_eq!(agg.map, Some(0.5));
        let weighted = Aggregate::over(&reps, AggregateWeighting::PairWeighted);
        assert!((weighted.consistency.unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn aggregate_skips_no_signal() {
        let reps = vec![report("a", None, None, 0)];
        let agg = Aggregate::over(&reps, AggregateWeighting::Unweighted);
        assert_eq!((agg.consistency, agg.map), (None, None));
    }

    #[test]
    fn delta_in_points() {
        let d = delta_pp(Some(0.90), Some(0.951)).unwrap();
        assert!((d - 5.1).abs() < 1e-9);
        assert_eq!(signed_points(Some(d)), "+5.1%");
        assert_eq!(delta_pp(Some(0.9), None), None);
        assert_eq!(signed_points(Some(-1e-14)), "+0.0%");
        assert_eq!(signed_points(Some(-0.5)), "-0.5%");
        assert_eq!(percent(Some(0.832)), "83.2%");
    }

    #[test]
    fn compare_identical_runs_is_zero() {
        let r = run(vec![
            report("a", Some(0.9), Some(0.6), 3),
            report("b", Some(0.7), Some(0.4), 3),
        ]);
        let c = compare(&r, &r).unwrap();
        for row in c.rows.iter().chain([&c.average]) {
            assert_eq!(row.delta_consistency_pp, Some(0.0));
            assert_eq!(row.delta_map_pp, Some(0.0));
        }
    }

    #[test]
    fn compare_reports_signed_deltas() {
        let base = run(vec![report("a", Some(0.90), Some(0.60), 3)]);
        let treat = run(vec![report("a", Some(0.951), Some(0.59), 3)]);
        let c = compare(&base, &treat).unwrap();
        let row = &c.rows[0];
        assert!(row.delta_consistency_pp.unwrap() > 0.0);
        assert!(row.delta_map_pp.unwrap() < 0.0);
        let table = c.render_table();
        assert!(table.contains("+5.1%"), "{table}");
        assert!(table.contains("-1.0%"), "{table}");
        let csv = c.to_csv().unwrap();
        assert!(csv.starts_with("sequence,baseline_consistency"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn compare_rejects_mismatched_sets() {
        let base = run(vec![report("a", Some(0.9), None, 1), report("b", Some(0.9), None, 1)]);
        let treat = run(vec![report("a", Some(0.9), None, 1), report("c", Some(0.9), None, 1)]);
        match compare(&base, &treat).unwrap_err() {
            Error::Comparison(msg) => {
                assert!(msg.contains("\"b\"") && msg.contains("\"c\""), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn compare_rejects_config_mismatch() {
        let base = run(vec![report("a", Some(0.9), None, 1)]);
        let mut treat = base.clone();
        treat.config.matching.iou_threshold = 0.6;
        assert!(matches!(compare(&base, &treat), Err(Error::Comparison(_))));
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let r = run(vec![report("a", Some(1.0 / 3.0), Some(0.1 + 0.2), 2)]);
        let back: EvalRun = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
