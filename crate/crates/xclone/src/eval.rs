//! Metrics, threshold sweeps, and stratified cross-validation.
//!
//! Detection is a binary classification problem with *clone* as the
//! positive class. Reports carry per-class precision/recall/F1, their
//! unweighted (macro) averages, a per-partner-language breakdown, and the
//! undecided rate. Conventions worth knowing:
//!
//! * zero-denominator metrics are defined as 0 and flagged, never `NaN`;
//! * macro rows are plain means over the two classes;
//! * cross-validation pools test predictions across folds and computes one
//!   report, rather than averaging per-fold reports;
//! * tables print two decimals, JSON keeps full precision.

use crate::detectors::{featurize_pairs, Backend, ClassifierKind, Prediction};
use crate::ml::{svm_train, KnnBackend, KnnModel, MlError, SvmParams};
use crate::pairing::{CandidatePair, PairLabel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Errors raised while evaluating predictions.
#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    /// A prediction references a pair the ground truth doesn't contain.
    #[error("no ground-truth pair with id `{0}`")]
    MissingGroundTruth(String),
    /// Threshold sweep called with no grid points.
    #[error("threshold grid is empty")]
    EmptyGrid,
    /// Threshold grid must be strictly increasing.
    #[error("threshold grid is not strictly increasing at index {0}")]
    NonMonotoneGrid(usize),
    /// A class has fewer members than folds.
    #[error("class {label} has {have} pairs, fewer than k = {k}")]
    TooFewPerClass { label: &'static str, have: usize, k: usize },
    /// k-fold needs at least two folds.
    #[error("k must be ≥ 2, got {0}")]
    BadFoldCount(usize),
    #[error(transparent)]
    Detector(#[from] crate::detectors::DetectorError),
    #[error(transparent)]
    Ml(#[from] MlError),
}

/// Confusion counts with clone as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    /// Total evaluated pairs.
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn tally(&mut self, predicted: PairLabel, actual: PairLabel) {
        match (predicted, actual) {
            (PairLabel::Clone, PairLabel::Clone) => self.tp += 1,
            (PairLabel::Clone, PairLabel::NonClone) => self.fp += 1,
            (PairLabel::NonClone, PairLabel::Clone) => self.fn_ += 1,
            (PairLabel::NonClone, PairLabel::NonClone) => self.tn += 1,
        }
    }
}

/// Precision, recall, and F1 for one class (or their macro average).
///
/// `degenerate` is set when any contributing denominator was zero; the
/// affected metric is reported as 0 in that case.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

impl ClassMetrics {
    /// Metrics from raw counts for one class: `tp` here means "correctly
    /// predicted as this class".
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 =
            if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        let degenerate = tp + fp == 0 || tp + fn_ == 0 || precision + recall == 0.0;
        Self { precision, recall, f1, degenerate }
    }
}

/// Both classes' metrics side by side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub clone: ClassMetrics,
    pub non_clone: ClassMetrics,
}

impl PerClass {
    fn from_counts(counts: &ConfusionCounts) -> Self {
        Self {
            clone: ClassMetrics::from_counts(counts.tp, counts.fp, counts.fn_),
            non_clone: ClassMetrics::from_counts(counts.tn, counts.fn_, counts.fp),
        }
    }

    fn macro_average(&self) -> ClassMetrics {
        ClassMetrics {
            precision: (self.clone.precision + self.non_clone.precision) / 2.0,
            recall: (self.clone.recall + self.non_clone.recall) / 2.0,
            f1: (self.clone.f1 + self.non_clone.f1) / 2.0,
            degenerate: self.clone.degenerate || self.non_clone.degenerate,
        }
    }
}

/// Everything one evaluation produces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Evaluated pair count.
    pub n: usize,
    /// Fraction of predictions flagged undecided (fallback label applied).
    pub undecided_rate: f64,
    pub counts: ConfusionCounts,
    pub per_class: PerClass,
    #[serde(rename = "macro")]
    pub macro_avg: ClassMetrics,
    /// Metrics restricted to pairs whose side-B language matches the key.
    pub per_language_pair: BTreeMap<String, PerClass>,
}

/// Score predictions against their ground-truth pairs.
///
/// Every prediction must match a pair by `pair_id`; each prediction counts
/// once, so feeding the same pair twice evaluates it twice.
pub fn compute_metrics(
    predictions: &[Prediction],
    ground_truth: &[CandidatePair],
) -> Result<EvalReport, EvalError> {
    let truth: BTreeMap<&str, &CandidatePair> =
        ground_truth.iter().map(|p| (p.pair_id.as_str(), p)).collect();
    let mut counts = ConfusionCounts::default();
    let mut by_language: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    let mut undecided = 0usize;
    for prediction in predictions {
        let pair = truth
            .get(prediction.pair_id.as_str())
            .ok_or_else(|| EvalError::MissingGroundTruth(prediction.pair_id.clone()))?;
        counts.tally(prediction.predicted, pair.label);
        by_language
            .entry(pair.b.language.clone())
            .or_default()
            .tally(prediction.predicted, pair.label);
        undecided += usize::from(prediction.undecided);
    }
    let per_class = PerClass::from_counts(&counts);
    Ok(EvalReport {
        n: predictions.len(),
        undecided_rate: if predictions.is_empty() {
            0.0
        } else {
            undecided as f64 / predictions.len() as f64
        },
        counts,
        macro_avg: per_class.macro_average(),
        per_class,
        per_language_pair: by_language
            .into_iter()
            .map(|(lang, c)| (lang, PerClass::from_counts(&c)))
            .collect(),
    })
}

/// One grid point of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub report: EvalReport,
}

/// A full sweep plus its argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Grid θ with the highest macro F1; ties go to the smallest θ.
    pub best_threshold: f64,
    pub best_macro_f1: f64,
}

/// Evaluate the ≥-rule at every grid point: predicted clone iff score ≥ θ.
///
/// Only scored pairs are evaluated; every scored id must exist in the
/// ground truth.
pub fn sweep_threshold(
    scores: &BTreeMap<String, f64>,
    ground_truth: &[CandidatePair],
    grid: &[f64],
) -> Result<SweepResult, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if let Some(i) = (1..grid.len()).find(|&i| grid[i] <= grid[i - 1]) {
        return Err(EvalError::NonMonotoneGrid(i));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &threshold in grid {
        let predictions: Vec<Prediction> = scores
            .iter()
            .map(|(pair_id, &score)| Prediction {
                pair_id: pair_id.clone(),
                backend: Backend::Cosine,
                predicted: if score >= threshold { PairLabel::Clone } else { PairLabel::NonClone },
                raw_score: Some(score),
                undecided: false,
                verdict: None,
                responses: None,
                note: None,
            })
            .collect();
        let report = compute_metrics(&predictions, ground_truth)?;
        points.push(SweepPoint { threshold, report });
    }
    let best = points
        .iter()
        .max_by(|a, b| {
            a.report
                .macro_avg
                .f1
                .partial_cmp(&b.report.macro_avg.f1)
                .expect("finite F1")
                // max_by keeps the *last* maximum; prefer the earlier
                // (smaller) θ on ties by treating earlier as greater.
                .then(std::cmp::Ordering::Greater)
        })
        .expect("non-empty grid");
    Ok(SweepResult {
        best_threshold: best.threshold,
        best_macro_f1: best.report.macro_avg.f1,
        points,
    })
}

/// One cross-validation fold: indices into the pair slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split pairs into `k` stratified folds: each fold's class counts differ
/// from perfect stratification by at most one. Deterministic under `seed`.
pub fn stratified_kfold(
    pairs: &[CandidatePair],
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>, EvalError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if k < 2 {
        return Err(EvalError::BadFoldCount(k));
    }
    let mut by_class: BTreeMap<&'static str, Vec<usize>> = BTreeMap::new();
    for (index, pair) in pairs.iter().enumerate() {
        let class = match pair.label {
            PairLabel::Clone => "clone",
            PairLabel::NonClone => "non_clone",
        };
        by_class.entry(class).or_default().push(index);
    }
    for (label, members) in &by_class {
        if members.len() < k {
            return Err(EvalError::TooFewPerClass { label, have: members.len(), k });
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        // Deal round-robin so fold sizes differ by ≤ 1 per class.
        for (position, &index) in members.iter().enumerate() {
            tests[position % k].push(index);
        }
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let train: Vec<usize> =
                (0..pairs.len()).filter(|i| test.binary_search(i).is_err()).collect();
            Fold { train, test }
        })
        .collect())
}

/// Which model family cross-validation trains per fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LearnerSpec {
    Svm(SvmParams),
    Knn { k: usize, backend: KnnBackend },
}

impl LearnerSpec {
    fn kind(&self) -> ClassifierKind {
        match self {
            LearnerSpec::Svm(_) => ClassifierKind::Svm,
            LearnerSpec::Knn { .. } => ClassifierKind::Knn,
        }
    }
}

/// A trained per-fold classifier, erased to its prediction function.
type FoldPredictor = Box<dyn Fn(&[f64]) -> Result<i32, MlError>>;

/// Stratified k-fold cross-validation: train on each fold's training
/// split, predict its test split, pool every test prediction, and score
/// the pool as one report.
pub fn cross_validate(
    pairs: &[CandidatePair],
    embeddings: &crate::detectors::EmbeddingMap,
    learner: &LearnerSpec,
    k: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    let (features, labels) = featurize_pairs(pairs, embeddings)?;
    let folds = stratified_kfold(pairs, k, seed)?;
    let mut pooled: Vec<Prediction> = Vec::with_capacity(pairs.len());
    for fold in &folds {
        let train_x: Vec<Vec<f64>> = fold.train.iter().map(|&i| features[i].clone()).collect();
        let predict: FoldPredictor = match learner {
            LearnerSpec::Svm(params) => {
                let train_y: Vec<f64> = fold.train.iter().map(|&i| f64::from(labels[i])).collect();
                let model = svm_train(&train_x, &train_y, params)?;
                Box::new(move |x| model.predict(x).map(|y| y as i32))
            }
            LearnerSpec::Knn { k, backend } => {
                let train_y: Vec<i32> = fold.train.iter().map(|&i| labels[i]).collect();
                let model = KnnModel::fit(train_x, train_y, *k, *backend)?;
                Box::new(move |x| model.predict(x))
            }
        };
        for &i in &fold.test {
            let label = predict(&features[i])?;
            pooled.push(Prediction {
                pair_id: pairs[i].pair_id.clone(),
                backend: Backend::Classifier { model: learner.kind() },
                predicted: if label > 0 { PairLabel::Clone } else { PairLabel::NonClone },
                raw_score: None,
                undecided: false,
                verdict: None,
                responses: None,
                note: None,
            });
        }
    }
    compute_metrics(&pooled, pairs)
}

/// Render a report as an aligned text table: one row per class plus the
/// macro row, and — when `by_language` is set — one section per partner
/// language. Two decimals throughout.
pub fn render_report_table(report: &EvalReport, by_language: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "pairs: {}   undecided: {:.2}", report.n, report.undecided_rate);
    let _ = writeln!(
        out,
        "counts: tp={} fp={} tn={} fn={}",
        report.counts.tp, report.counts.fp, report.counts.tn, report.counts.fn_
    );
    let _ = writeln!(out, "{:<12} {:>6} {:>6} {:>6}", "class", "R", "P", "F1");
    let mut row = |name: &str, m: &ClassMetrics| {
        let flag = if m.degenerate { " *" } else { "" };
        let _ = writeln!(out, "{name:<12} {:>6.2} {:>6.2} {:>6.2}{flag}", m.recall, m.precision, m.f1);
    };
    row("clone", &report.per_class.clone);
    row("non_clone", &report.per_class.non_clone);
    row("macro", &report.macro_avg);
    if by_language {
        for (language, per_class) in &report.per_language_pair {
            let macro_avg = per_class.macro_average();
            let _ = writeln!(
                out,
                "{:<12} {:>6.2} {:>6.2} {:>6.2}  (clone F1 {:.2}, non-clone F1 {:.2})",
                format!("· {language}"),
                macro_avg.recall,
                macro_avg.precision,
                macro_avg.f1,
                per_class.clone.f1,
                per_class.non_clone.f1,
            );
        }
    }
    if report.per_class.clone.degenerate || report.per_class.non_clone.degenerate {
        let _ = writeln!(out, "* zero-denominator metric reported as 0");
    }
    out
}

/// Render a report as a markdown table (recall / precision / F1 per class,
/// macro row, optional per-language rows). Two decimals, like the text table.
pub fn render_report_markdown(report: &EvalReport, by_language: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| class | R | P | F1 |");
    let _ = writeln!(out, "|---|---|---|---|");
    let mut row = |name: &str, m: &ClassMetrics| {
        let flag = if m.degenerate { " \\*" } else { "" };
        let _ =
            writeln!(out, "| {name} | {:.2} | {:.2} | {:.2}{flag} |", m.recall, m.precision, m.f1);
    };
    row("clone", &report.per_class.clone);
    row("non_clone", &report.per_class.non_clone);
    row("macro", &report.macro_avg);
    if by_language {
        for (language, per_class) in &report.per_language_pair {
            row(&format!("· {language}"), &per_class.macro_average());
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{} pairs, undecided rate {:.2} (tp={} fp={} tn={} fn={})",
        report.n,
        report.undecided_rate,
        report.counts.tp,
        report.counts.fp,
        report.counts.tn,
        report.counts.fn_
    );
    if report.per_class.clone.degenerate || report.per_class.non_clone.degenerate {
        let _ = writeln!(out, "\n\\* zero-denominator metric reported as 0");
    }
    out
}

/// Render a sweep as a markdown table with the argmax row in bold.
pub fn render_sweep_markdown(sweep: &SweepResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| θ | clone F1 | non-clone F1 | macro F1 |");
    let _ = writeln!(out, "|---|---|---|---|");
    for point in &sweep.points {
        let (b0, b1) = if point.threshold == sweep.best_threshold { ("**", "**") } else { ("", "") };
        let _ = writeln!(
            out,
            "| {b0}{:.2}{b1} | {:.2} | {:.2} | {b0}{:.2}{b1} |",
            point.threshold,
            point.report.per_class.clone.f1,
            point.report.per_class.non_clone.f1,
            point.report.macro_avg.f1,
        );
    }
    let _ = writeln!(out, "\nbest θ = {:.2}, macro F1 = {:.2}", sweep.best_threshold, sweep.best_macro_f1);
    out
}

/// Render a sweep as a compact table with the argmax marked.
pub fn render_sweep_table(sweep: &SweepResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>9} {:>9} {:>9} {:>9}", "θ", "cloneF1", "nonF1", "macroF1");
    for point in &sweep.points {
        let marker = if point.threshold == sweep.best_threshold { "  ←" } else { "" };
        let _ = writeln!(
            out,
            "{:>9.2} {:>9.2} {:>9.2} {:>9.2}{marker}",
            point.threshold,
            point.report.per_class.clone.f1,
            point.report.per_class.non_clone.f1,
            point.report.macro_avg.f1,
        );
    }
    let _ = writeln!(out, "best θ = {:.2}, macro F1 = {:.2}", sweep.best_threshold, sweep.best_macro_f1);
    out
}

/// Per-pair predictions as CSV (header included).
pub fn predictions_to_csv(predictions: &[Prediction]) -> String {
    let mut out = String::from("pair_id,backend,predicted,raw_score,undecided\n");
    for p in predictions {
        let backend = match p.backend {
            Backend::Cosine => "cosine".to_string(),
            Backend::Llm { prompt } => format!("llm:{}", prompt.name()),
            Backend::Classifier { model } => format!(
                "classifier:{}",
                match model {
                    ClassifierKind::Svm => "svm",
                    ClassifierKind::Knn => "knn",
                }
            ),
        };
        let score = p.raw_score.map_or(String::new(), |s| format!("{s}"));
        let predicted = match p.predicted {
            PairLabel::Clone => "clone",
            PairLabel::NonClone => "non_clone",
        };
        let _ = writeln!(out, "{},{backend},{predicted},{score},{}", p.pair_id, p.undecided);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::{PairSide, Provenance};

    fn pair(id: &str, label: PairLabel, partner: &str) -> CandidatePair {
        CandidatePair {
            pair_id: id.into(),
            label,
            a: PairSide { problem_id: "a".into(), language: "java".into(), source: "x".into() },
            b: PairSide {
                problem_id: if label == PairLabel::Clone { "a" } else { "b" }.into(),
                language: partner.into(),
                source: "y".into(),
            },
            provenance: if label == PairLabel::Clone {
                Provenance::SameProblem
            } else {
                Provenance::ClusterFurthest
            },
        }
    }

    fn prediction(id: &str, predicted: PairLabel, undecided: bool) -> Prediction {
        Prediction {
            pair_id: id.into(),
            backend: Backend::Cosine,
            predicted,
            raw_score: None,
            undecided,
            verdict: None,
            responses: None,
            note: None,
        }
    }

    /// Synthesize `n` truth pairs and predictions realizing exact counts.
    fn scenario(
        tp: usize,
        fp: usize,
        tn: usize,
        fn_: usize,
    ) -> (Vec<CandidatePair>, Vec<Prediction>) {
        let mut pairs = Vec::new();
        let mut predictions = Vec::new();
        let mut add = |i: usize, actual, predicted| {
            let id = format!("p{i:05}");
            pairs.push(pair(&id, actual, "python"));
            predictions.push(prediction(&id, predicted, false));
        };
        let mut i = 0;
        for _ in 0..tp {
            add(i, PairLabel::Clone, PairLabel::Clone);
            i += 1;
        }
        for _ in 0..fp {
            add(i, PairLabel::NonClone, PairLabel::Clone);
            i += 1;
        }
        for _ in 0..tn {
            add(i, PairLabel::NonClone, PairLabel::NonClone);
            i += 1;
        }
        for _ in 0..fn_ {
            add(i, PairLabel::Clone, PairLabel::NonClone);
            i += 1;
        }
        (pairs, predictions)
    }

    #[test]
    fn metrics_match_hand_arithmetic() {
        // High precision, low recall on the clone class; the mirror image
        // for non-clone.
        let (pairs, predictions) = scenario(620, 2, 2998, 2380);
        let report = compute_metrics(&predictions, &pairs).unwrap();
        assert_eq!(report.counts, ConfusionCounts { tp: 620, fp: 2, tn: 2998, fn_: 2380 });
        assert_eq!(report.n, 6000);
        let clone = report.per_class.clone;
        assert!((clone.precision - 620.0 / 622.0).abs() < 1e-12);
        assert!((clone.recall - 620.0 / 3000.0).abs() < 1e-12);
        assert!((clone.f1 - 0.3424).abs() < 0.005);
        let non = report.per_class.non_clone;
        assert!((non.precision - 2998.0 / 5378.0).abs() < 1e-12);
        assert!((non.recall - 2998.0 / 3000.0).abs() < 1e-12);
        assert!((non.f1 - 0.7157).abs() < 0.005);
        assert!((report.macro_avg.f1 - (clone.f1 + non.f1) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_score_one_everywhere() {
        let (pairs, predictions) = scenario(5, 0, 5, 0);
        let report = compute_metrics(&predictions, &pairs).unwrap();
        for m in [report.per_class.clone, report.per_class.non_clone, report.macro_avg] {
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
            assert!(!m.degenerate);
        }
    }

    #[test]
    fn zero_denominators_are_zero_and_flagged() {
        // Everything predicted non-clone: clone precision is 0/0.
        let (pairs, predictions) = scenario(0, 0, 3, 3);
        let report = compute_metrics(&predictions, &pairs).unwrap();
        assert_eq!(report.per_class.clone.precision, 0.0);
        assert_eq!(report.per_class.clone.f1, 0.0);
        assert!(report.per_class.clone.degenerate);
        assert!(report.macro_avg.degenerate);
        assert!(!report.per_class.non_clone.degenerate);
    }

    #[test]
    fn missing_ground_truth_is_an_error() {
        let (pairs, mut predictions) = scenario(1, 0, 1, 0);
        predictions.push(prediction("ghost", PairLabel::Clone, false));
        assert!(matches!(
            compute_metrics(&predictions, &pairs),
            Err(EvalError::MissingGroundTruth(id)) if id == "ghost"
        ));
    }

    #[test]
    fn relabeling_swaps_class_rows_and_keeps_macro() {
        let (pairs, predictions) = scenario(7, 3, 9, 1);
        let report = compute_metrics(&predictions, &pairs).unwrap();
        let flip = |l: PairLabel| match l {
            PairLabel::Clone => PairLabel::NonClone,
            PairLabel::NonClone => PairLabel::Clone,
        };
        let flipped_pairs: Vec<CandidatePair> = pairs
            .iter()
            .map(|p| {
                let mut q = p.clone();
                q.label = flip(p.label);
                // Keep the structural invariant: same-problem iff clone.
                q.b.problem_id =
                    if q.label == PairLabel::Clone { q.a.problem_id.clone() } else { "other".into() };
                q
            })
            .collect();
        let flipped_predictions: Vec<Prediction> = predictions
            .iter()
            .map(|p| {
                let mut q = p.clone();
                q.predicted = flip(p.predicted);
                q
            })
            .collect();
        let flipped = compute_metrics(&flipped_predictions, &flipped_pairs).unwrap();
        assert_eq!(report.per_class.clone, flipped.per_class.non_clone);
        assert_eq!(report.per_class.non_clone, flipped.per_class.clone);
        assert_eq!(report.macro_avg, flipped.macro_avg);
    }

    #[test]
    fn per_language_breakdown_buckets_by_partner() {
        let pairs = vec![
            pair("p1", PairLabel::Clone, "python"),
            pair("p2", PairLabel::Clone, "ruby"),
            pair("p3", PairLabel::NonClone, "python"),
        ];
        let predictions = vec![
            prediction("p1", PairLabel::Clone, false),
            prediction("p2", PairLabel::NonClone, true),
            prediction("p3", PairLabel::NonClone, false),
        ];
        let report = compute_metrics(&predictions, &pairs).unwrap();
        assert_eq!(report.per_language_pair.len(), 2);
        assert_eq!(report.per_language_pair["python"].clone.f1, 1.0);
        assert_eq!(report.per_language_pair["ruby"].clone.recall, 0.0);
        assert!((report.undecided_rate - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn f1_lies_between_precision_and_recall() {
        for (tp, fp, fn_) in [(5, 3, 2), (1, 9, 4), (10, 1, 1), (2, 2, 8)] {
            let m = ClassMetrics::from_counts(tp, fp, fn_);
            assert!(m.precision > 0.0 && m.recall > 0.0);
            assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
            assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
        }
    }

    #[test]
    fn sweep_finds_the_separating_threshold() {
        // Clones score 0.9, non-clones 0.1: every θ in (0.1, 0.9] is
        // perfect; the grid's first such point wins.
        let pairs = vec![
            pair("c1", PairLabel::Clone, "python"),
            pair("c2", PairLabel::Clone, "python"),
            pair("c3", PairLabel::Clone, "python"),
            pair("n1", PairLabel::NonClone, "python"),
            pair("n2", PairLabel::NonClone, "python"),
            pair("n3", PairLabel::NonClone, "python"),
        ];
        let scores: BTreeMap<String, f64> = pairs
            .iter()
            .map(|p| {
                let s = if p.label == PairLabel::Clone { 0.9 } else { 0.1 };
                (p.pair_id.clone(), s)
            })
            .collect();
        let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let sweep = sweep_threshold(&scores, &pairs, &grid).unwrap();
        assert_eq!(sweep.points.len(), 9);
        assert!((sweep.best_macro_f1 - 1.0).abs() < 1e-12);
        assert!((sweep.best_threshold - 0.2).abs() < 1e-12);
        // θ at or below every score → everything predicted clone.
        let low = &sweep.points[0].report;
        assert_eq!(low.per_class.non_clone.recall, 0.0);
        // θ above every score would be all non-clone; 0.9 still catches
        // the clones because the rule is inclusive.
        let high = &sweep.points[8].report;
        assert_eq!(high.per_class.clone.recall, 1.0);
        let above: Vec<f64> = vec![0.95];
        let all_non = sweep_threshold(&scores, &pairs, &above).unwrap();
        assert_eq!(all_non.points[0].report.per_class.clone.recall, 0.0);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let pairs = vec![pair("c1", PairLabel::Clone, "python")];
        let scores: BTreeMap<String, f64> = [("c1".to_string(), 0.5)].into_iter().collect();
        assert!(matches!(sweep_threshold(&scores, &pairs, &[]), Err(EvalError::EmptyGrid)));
        assert!(matches!(
            sweep_threshold(&scores, &pairs, &[0.3, 0.3]),
            Err(EvalError::NonMonotoneGrid(1))
        ));
    }

    fn balanced_pairs(per_class: usize) -> Vec<CandidatePair> {
        let mut pairs = Vec::new();
        for i in 0..per_class {
            pairs.push(pair(&format!("c{i}"), PairLabel::Clone, "python"));
            pairs.push(pair(&format!("n{i}"), PairLabel::NonClone, "python"));
        }
        pairs
    }

    #[test]
    fn folds_are_stratified_disjoint_and_deterministic() {
        let pairs = balanced_pairs(20);
        let folds = stratified_kfold(&pairs, 10, 9).unwrap();
        assert_eq!(folds.len(), 10);
        let mut seen = vec![false; pairs.len()];
        for fold in &folds {
            assert_eq!(fold.test.len(), 4);
            let clones =
                fold.test.iter().filter(|&&i| pairs[i].label == PairLabel::Clone).count();
            assert_eq!(clones, 2, "each fold holds two of each class");
            for &i in &fold.test {
                assert!(!seen[i], "index {i} in two folds");
                seen[i] = true;
                assert!(!fold.train.contains(&i));
            }
            assert_eq!(fold.train.len() + fold.test.len(), pairs.len());
        }
        assert!(seen.iter().all(|&s| s), "folds must cover every index");
        assert_eq!(folds, stratified_kfold(&pairs, 10, 9).unwrap());
        assert_ne!(folds, stratified_kfold(&pairs, 10, 10).unwrap());
    }

    #[test]
    fn uneven_classes_split_within_one() {
        let mut pairs = balanced_pairs(20);
        pairs.push(pair("c-extra", PairLabel::Clone, "python"));
        let folds = stratified_kfold(&pairs, 10, 1).unwrap();
        let clone_counts: Vec<usize> = folds
            .iter()
            .map(|f| f.test.iter().filter(|&&i| pairs[i].label == PairLabel::Clone).count())
            .collect();
        assert_eq!(clone_counts.iter().sum::<usize>(), 21);
        assert!(clone_counts.iter().all(|&c| c == 2 || c == 3));
        assert_eq!(clone_counts.iter().filter(|&&c| c == 3).count(), 1);
    }

    #[test]
    fn too_few_per_class_is_rejected() {
        let pairs = balanced_pairs(5);
        assert!(matches!(
            stratified_kfold(&pairs, 10, 0),
            Err(EvalError::TooFewPerClass { have: 5, k: 10, .. })
        ));
        assert!(matches!(stratified_kfold(&pairs, 1, 0), Err(EvalError::BadFoldCount(1))));
    }

    #[test]
    fn majority_class_learner_scores_a_third_macro_f1() {
        // A constant clone predictor on balanced data: clone row gets
        // P=0.5, R=1, F1=2/3; non-clone row all zeros.
        let (pairs, _) = scenario(10, 10, 0, 0);
        let predictions: Vec<Prediction> = pairs
            .iter()
            .map(|p| prediction(&p.pair_id, PairLabel::Clone, false))
            .collect();
        let report = compute_metrics(&predictions, &pairs).unwrap();
        assert!((report.per_class.clone.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.per_class.non_clone.f1, 0.0);
        assert!((report.macro_avg.f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cross_validation_pools_folds_and_separates_easy_data() {
        use crate::detectors::EmbeddingMap;
        // Clone pairs join identical texts; non-clone pairs join orthogonal
        // ones. Abs-diff features are 0 vs √2-sized: linearly separable.
        let mut pairs = Vec::new();
        let mut embeddings = EmbeddingMap::new();
        for i in 0..10 {
            let (e, f) = (format!("e{i}"), format!("f{i}"));
            let angle = i as f64 * 0.05;
            embeddings.insert(e.clone(), vec![angle.cos(), angle.sin()]);
            embeddings.insert(f.clone(), vec![-angle.sin(), angle.cos()]);
            let mut c = pair(&format!("c{i}"), PairLabel::Clone, "python");
            (c.a.source, c.b.source) = (e.clone(), e.clone());
            pairs.push(c);
            let mut n = pair(&format!("n{i}"), PairLabel::NonClone, "python");
            (n.a.source, n.b.source) = (e, f);
            pairs.push(n);
        }
        let svm = LearnerSpec::Svm(SvmParams {
            kernel: crate::ml::KernelConfig::Linear,
            c: 10.0,
            ..SvmParams::default()
        });
        let report = cross_validate(&pairs, &embeddings, &svm, 5, 3).unwrap();
        assert_eq!(report.n, pairs.len(), "every pair predicted exactly once");
        assert_eq!(report.macro_avg.f1, 1.0);
        let knn = LearnerSpec::Knn { k: 3, backend: KnnBackend::KdTree };
        let report = cross_validate(&pairs, &embeddings, &knn, 5, 3).unwrap();
        assert_eq!(report.macro_avg.f1, 1.0);
    }

    #[test]
    fn tables_round_to_two_decimals_and_json_keeps_precision() {
        let (pairs, predictions) = scenario(620, 2, 2998, 2380);
        let report = compute_metrics(&predictions, &pairs).unwrap();
        let table = render_report_table(&report, true);
        assert!(table.contains("0.21"), "clone recall row:\n{table}");
        assert!(table.contains("0.34"), "clone F1 row:\n{table}");
        assert!(table.contains("0.72"), "non-clone F1 row:\n{table}");
        let json = serde_json::to_string(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn markdown_tables_have_header_separator_and_best_row() {
        let (pairs, predictions) = scenario(620, 2, 2998, 2380);
        let report = compute_metrics(&predictions, &pairs).unwrap();
        let md = render_report_markdown(&report, true);
        assert!(md.starts_with("| class | R | P | F1 |\n|---|---|---|---|\n"), "{md}");
        assert!(md.contains("| clone | 0.21 | 1.00 | 0.34 |"), "{md}");
        assert!(md.contains("· python"), "per-language row present:\n{md}");

        let scores: BTreeMap<String, f64> =
            pairs.iter().enumerate().map(|(i, p)| (p.pair_id.clone(), i as f64)).collect();
        let sweep = sweep_threshold(&scores, &pairs, &[0.0, 1.0]).unwrap();
        let md = render_sweep_markdown(&sweep);
        assert!(md.contains("**"), "best row is bolded:\n{md}");
    }

    #[test]
    fn csv_export_lists_every_prediction() {
        let predictions = vec![
            prediction("p1", PairLabel::Clone, false),
            prediction("p2", PairLabel::NonClone, true),
        ];
        let csv = predictions_to_csv(&predictions);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "pair_id,backend,predicted,raw_score,undecided");
        assert!(lines[1].starts_with("p1,cosine,clone,"));
        assert!(lines[2].ends_with("true"));
    }
}
