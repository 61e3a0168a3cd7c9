//! The three detection backends behind one `Prediction` shape.
//!
//! * **cosine** — embed both snippets, compare cosine similarity to a
//!   threshold;
//! * **llm** — run one of the prompt protocols and map its verdict;
//! * **classifier** — featurize the embedding pair (absolute differences)
//!   and ask a trained model.
//!
//! Every backend maps one [`CandidatePair`] to exactly one [`Prediction`];
//! none of them drops pairs. The LLM path is deliberately infallible per
//! pair: provider failures become `undecided` predictions carrying the
//! fallback label, so a long benchmark run survives individual hiccups.

use crate::ml::{abs_diff_features, cosine_similarity, FeatureVector, KnnModel, MlError, SvmModel};
use crate::pairing::{CandidatePair, PairLabel};
use crate::prompts::{run_protocol, Decision, ExplanationVariant, PromptKind, ProtocolOptions, Snippet, Verdict};
use crate::providers::{ChatMessage, ProviderError, TextEmbedder};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Errors raised by the detector layer.
#[derive(Debug, thiserror::Error)]
pub enum DetectorError {
    /// A pair side has no embedding in the lookup table.
    #[error("no embedding for pair {pair_id} side {side}")]
    MissingEmbedding { pair_id: String, side: char },
    /// Threshold outside its scale.
    #[error("threshold {got} outside [{low}, {high}]")]
    BadThreshold { got: f64, low: f64, high: f64 },
    /// A predictions JSONL line failed to parse (1-based line number).
    #[error("line {0}: malformed prediction record")]
    MalformedRecord(usize),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which trained model family a classifier prediction came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Svm,
    Knn,
}

/// The backend that produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Cosine,
    Llm { prompt: PromptKind },
    Classifier { model: ClassifierKind },
}

/// One backend's answer for one pair; one line of the predictions file.
///
/// `raw_score` is always present for the cosine backend (the similarity,
/// in [-1, 1]) and for `code_similarity` runs that produced a score (in
/// [0, 10]); the SVM records its decision value there too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub pair_id: String,
    pub backend: Backend,
    pub predicted: PairLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_score: Option<f64>,
    pub undecided: bool,
    /// Protocol verdict before the fallback label was applied (LLM only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    /// Raw model responses, one per chat call (LLM only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responses: Option<Vec<String>>,
    /// Why a run was cut short or fell back.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Embeddings keyed by the exact snippet text they embed. Identical
/// sources share one entry, which is also how the provider cache sees them.
pub type EmbeddingMap = BTreeMap<String, Vec<f64>>;

/// Embed every distinct snippet text in `pairs`, one provider round trip.
pub fn embed_pair_sides(
    pairs: &[CandidatePair],
    embedder: &dyn TextEmbedder,
) -> Result<EmbeddingMap, DetectorError> {
    let mut texts: Vec<String> = Vec::new();
    let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
    for pair in pairs {
        for source in [&pair.a.source, &pair.b.source] {
            if seen.insert(source, ()).is_none() {
                texts.push(source.clone());
            }
        }
    }
    let vectors = embedder.embed(&texts)?;
    Ok(texts.into_iter().zip(vectors).collect())
}

fn side_vectors<'m>(
    pair: &CandidatePair,
    embeddings: &'m EmbeddingMap,
) -> Result<(&'m Vec<f64>, &'m Vec<f64>), DetectorError> {
    let missing = |side: char| DetectorError::MissingEmbedding {
        pair_id: pair.pair_id.clone(),
        side,
    };
    let a = embeddings.get(&pair.a.source).ok_or_else(|| missing('a'))?;
    let b = embeddings.get(&pair.b.source).ok_or_else(|| missing('b'))?;
    Ok((a, b))
}

/// Label a pair by embedding similarity: clone iff cosine ≥ `threshold`.
pub fn cosine_detect(
    pair: &CandidatePair,
    embeddings: &EmbeddingMap,
    threshold: f64,
) -> Result<Prediction, DetectorError> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(DetectorError::BadThreshold { got: threshold, low: -1.0, high: 1.0 });
    }
    let (a, b) = side_vectors(pair, embeddings)?;
    let similarity = cosine_similarity(a, b)?;
    Ok(Prediction {
        pair_id: pair.pair_id.clone(),
        backend: Backend::Cosine,
        predicted: if similarity >= threshold { PairLabel::Clone } else { PairLabel::NonClone },
        raw_score: Some(similarity),
        undecided: false,
        verdict: None,
        responses: None,
        note: None,
    })
}

/// Run the cosine detector over a whole benchmark.
pub fn cosine_detect_all(
    pairs: &[CandidatePair],
    embedder: &dyn TextEmbedder,
    threshold: f64,
) -> Result<Vec<Prediction>, DetectorError> {
    let embeddings = embed_pair_sides(pairs, embedder)?;
    pairs.iter().map(|p| cosine_detect(p, &embeddings, threshold)).collect()
}

/// Map a 0–10 similarity score to a label: clone iff `score ≥ threshold`.
pub fn score_to_label(score: f64, threshold: f64) -> PairLabel {
    if score >= threshold {
        PairLabel::Clone
    } else {
        PairLabel::NonClone
    }
}

/// Knobs for the LLM backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlmOptions {
    /// Step-1 flavour for `separate_explanation`.
    pub variant: ExplanationVariant,
    /// Score cut for protocols that yield a 0–10 score.
    pub score_threshold: f64,
    /// Label assigned when a run ends undecided.
    pub fallback: PairLabel,
}

impl Default for LlmOptions {
    fn default() -> Self {
        Self {
            variant: ExplanationVariant::default(),
            score_threshold: 5.0,
            fallback: PairLabel::NonClone,
        }
    }
}

/// Run one prompt protocol on one pair. Never fails: provider errors and
/// unparseable answers become `undecided` predictions with the fallback
/// label and an explanatory note.
pub fn llm_detect<F>(
    pair: &CandidatePair,
    kind: PromptKind,
    options: &LlmOptions,
    chat_fn: &mut F,
) -> Prediction
where
    F: FnMut(&[ChatMessage]) -> Result<String, ProviderError>,
{
    let a = Snippet { language: &pair.a.language, source: &pair.a.source };
    let b = Snippet { language: &pair.b.language, source: &pair.b.source };
    let protocol = ProtocolOptions { variant: options.variant, score_threshold: options.score_threshold };
    let decision = match run_protocol(kind, &a, &b, &protocol, chat_fn) {
        Ok(decision) => decision,
        Err(error) => Decision {
            verdict: Verdict::Undecided,
            score: None,
            raw: Vec::new(),
            steps: 0,
            note: Some(format!("provider error: {error}")),
        },
    };
    let (predicted, undecided) = match (decision.verdict, decision.score) {
        // A retained score wins, so downstream re-thresholding stays
        // consistent with what this run records.
        (_, Some(score)) => (score_to_label(score, options.score_threshold), false),
        (Verdict::Clone, None) => (PairLabel::Clone, false),
        (Verdict::NonClone, None) => (PairLabel::NonClone, false),
        (Verdict::Undecided, None) => (options.fallback, true),
    };
    Prediction {
        pair_id: pair.pair_id.clone(),
        backend: Backend::Llm { prompt: kind },
        predicted,
        raw_score: decision.score,
        undecided,
        verdict: Some(decision.verdict),
        responses: Some(decision.raw),
        note: decision.note,
    }
}

/// Run one protocol across a whole benchmark, one prediction per pair.
pub fn llm_detect_all<F>(
    pairs: &[CandidatePair],
    kind: PromptKind,
    options: &LlmOptions,
    chat_fn: &mut F,
) -> Vec<Prediction>
where
    F: FnMut(&[ChatMessage]) -> Result<String, ProviderError>,
{
    pairs.iter().map(|pair| llm_detect(pair, kind, options, chat_fn)).collect()
}

/// A trained classifier, either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassifierModel {
    Svm(SvmModel),
    Knn(KnnModel),
}

impl ClassifierModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierModel::Svm(_) => ClassifierKind::Svm,
            ClassifierModel::Knn(_) => ClassifierKind::Knn,
        }
    }

    /// Predict ±1 for a feature vector; the SVM also reports its decision
    /// value.
    fn predict(&self, features: &FeatureVector) -> Result<(i32, Option<f64>), MlError> {
        match self {
            ClassifierModel::Svm(svm) => {
                let value = svm.decision_value(features)?;
                Ok((if value >= 0.0 { 1 } else { -1 }, Some(value)))
            }
            ClassifierModel::Knn(knn) => Ok((knn.predict(features)?, None)),
        }
    }
}

/// Featurize one pair: absolute element-wise difference of its embeddings.
pub fn pair_features(
    pair: &CandidatePair,
    embeddings: &EmbeddingMap,
) -> Result<FeatureVector, DetectorError> {
    let (a, b) = side_vectors(pair, embeddings)?;
    Ok(abs_diff_features(a, b)?)
}

/// Featurize a labelled benchmark for training: clone ↦ +1, non-clone ↦ −1.
pub fn featurize_pairs(
    pairs: &[CandidatePair],
    embeddings: &EmbeddingMap,
) -> Result<(Vec<FeatureVector>, Vec<i32>), DetectorError> {
    let mut features = Vec::with_capacity(pairs.len());
    let mut labels = Vec::with_capacity(pairs.len());
    for pair in pairs {
        features.push(pair_features(pair, embeddings)?);
        labels.push(match pair.label {
            PairLabel::Clone => 1,
            PairLabel::NonClone => -1,
        });
    }
    Ok((features, labels))
}

/// Label a pair with a trained classifier over abs-diff features.
pub fn classifier_detect(
    pair: &CandidatePair,
    embeddings: &EmbeddingMap,
    model: &ClassifierModel,
) -> Result<Prediction, DetectorError> {
    let features = pair_features(pair, embeddings)?;
    let (label, raw_score) = model.predict(&features)?;
    Ok(Prediction {
        pair_id: pair.pair_id.clone(),
        backend: Backend::Classifier { model: model.kind() },
        predicted: if label > 0 { PairLabel::Clone } else { PairLabel::NonClone },
        raw_score,
        undecided: false,
        verdict: None,
        responses: None,
        note: None,
    })
}

/// Run a trained classifier over a whole benchmark.
pub fn classifier_detect_all(
    pairs: &[CandidatePair],
    embedder: &dyn TextEmbedder,
    model: &ClassifierModel,
) -> Result<Vec<Prediction>, DetectorError> {
    let embeddings = embed_pair_sides(pairs, embedder)?;
    pairs.iter().map(|p| classifier_detect(p, &embeddings, model)).collect()
}

/// Write predictions as JSONL, one record per line, input order preserved.
pub fn write_predictions(
    predictions: &[Prediction],
    path: impl AsRef<Path>,
) -> Result<(), DetectorError> {
    let mut file = fs::File::create(path)?;
    for prediction in predictions {
        writeln!(file, "{}", serde_json::to_string(prediction).expect("prediction serializes"))?;
    }
    Ok(())
}

/// Load a predictions JSONL file.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>, DetectorError> {
    let text = fs::read_to_string(path)?;
    let mut predictions = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        predictions.push(
            serde_json::from_str(line).map_err(|_| DetectorError::MalformedRecord(idx + 1))?,
        );
    }
    Ok(predictions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{svm_train, KernelConfig, SvmParams};
    use crate::pairing::{PairSide, Provenance};

    fn pair(id: &str, a_src: &str, b_src: &str, label: PairLabel) -> CandidatePair {
        CandidatePair {
            pair_id: id.into(),
            label,
            a: PairSide { problem_id: "pa".into(), language: "java".into(), source: a_src.into() },
            b: PairSide {
                problem_id: if label == PairLabel::Clone { "pa" } else { "pb" }.into(),
                language: "python".into(),
                source: b_src.into(),
            },
            provenance: if label == PairLabel::Clone {
                Provenance::SameProblem
            } else {
                Provenance::ClusterFurthest
            },
        }
    }

    fn table(entries: &[(&str, &[f64])]) -> EmbeddingMap {
        entries.iter().map(|(text, v)| (text.to_string(), v.to_vec())).collect()
    }

    #[test]
    fn cosine_detect_applies_the_threshold_inclusively() {
        let embeddings = table(&[
            ("same a", &[1.0, 0.0]),
            ("same b", &[1.0, 0.0]),
            ("orthogonal", &[0.0, 1.0]),
        ]);
        let identical = pair("p1", "same a", "same b", PairLabel::Clone);
        let got = cosine_detect(&identical, &embeddings, 0.5).unwrap();
        assert_eq!(got.predicted, PairLabel::Clone);
        assert_eq!(got.raw_score, Some(1.0));
        assert!(!got.undecided);

        let far = pair("p2", "same a", "orthogonal", PairLabel::NonClone);
        let got = cosine_detect(&far, &embeddings, 0.5).unwrap();
        assert_eq!(got.predicted, PairLabel::NonClone);
        assert_eq!(got.raw_score, Some(0.0));

        // Exactly at the threshold counts as clone.
        let at = cosine_detect(&far, &embeddings, 0.0).unwrap();
        assert_eq!(at.predicted, PairLabel::Clone);
    }

    #[test]
    fn cosine_detect_rejects_bad_inputs() {
        let embeddings = table(&[("a", &[1.0, 0.0])]);
        let p = pair("p1", "a", "missing", PairLabel::Clone);
        assert!(matches!(
            cosine_detect(&p, &embeddings, 0.5),
            Err(DetectorError::MissingEmbedding { side: 'b', .. })
        ));
        assert!(matches!(
            cosine_detect(&p, &embeddings, 1.5),
            Err(DetectorError::BadThreshold { .. })
        ));
    }

    #[test]
    fn score_thresholding_is_inclusive() {
        assert_eq!(score_to_label(7.0, 5.0), PairLabel::Clone);
        assert_eq!(score_to_label(5.0, 5.0), PairLabel::Clone);
        assert_eq!(score_to_label(4.9, 5.0), PairLabel::NonClone);
    }

    #[test]
    fn clone_predictions_shrink_as_the_threshold_rises() {
        let scores = [0.1, 0.3, 0.5, 0.7, 0.9];
        let mut previous: Option<Vec<usize>> = None;
        for threshold in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
            let clones: Vec<usize> = scores
                .iter()
                .enumerate()
                .filter(|(_, s)| **s >= threshold)
                .map(|(i, _)| i)
                .collect();
            if let Some(prev) = &previous {
                assert!(clones.iter().all(|i| prev.contains(i)), "threshold {threshold}");
            }
            previous = Some(clones);
        }
    }

    #[test]
    fn llm_detect_maps_verdicts_and_never_fails() {
        let p = pair("p1", "// code a", "# code b", PairLabel::Clone);
        let options = LlmOptions::default();

        let mut yes = |_: &[ChatMessage]| Ok("Yes, they are clones.".to_string());
        let got = llm_detect(&p, PromptKind::Simple, &options, &mut yes);
        assert_eq!(got.predicted, PairLabel::Clone);
        assert!(!got.undecided);
        assert_eq!(got.verdict, Some(Verdict::Clone));
        assert_eq!(got.backend, Backend::Llm { prompt: PromptKind::Simple });

        let mut gibberish = |_: &[ChatMessage]| Ok("perhaps, perhaps not".to_string());
        let got = llm_detect(&p, PromptKind::Simple, &options, &mut gibberish);
        assert_eq!(got.predicted, options.fallback);
        assert!(got.undecided);

        let mut broken = |_: &[ChatMessage]| {
            Err(ProviderError::Upstream { status: 500, excerpt: "boom".into() })
        };
        let got = llm_detect(&p, PromptKind::Simple, &options, &mut broken);
        assert!(got.undecided);
        assert_eq!(got.predicted, options.fallback);
        assert!(got.note.unwrap().contains("provider error"));
    }

    #[test]
    fn llm_detect_scores_via_the_threshold() {
        let p = pair("p1", "// code a", "# code b", PairLabel::Clone);
        let options = LlmOptions::default();
        let mut low = |_: &[ChatMessage]| Ok("Similarity score: 3".to_string());
        let got = llm_detect(&p, PromptKind::CodeSimilarity, &options, &mut low);
        assert_eq!(got.predicted, PairLabel::NonClone);
        assert_eq!(got.raw_score, Some(3.0));
        assert!(!got.undecided);
    }

    fn trained_model() -> (ClassifierModel, EmbeddingMap) {
        // Clones embed close together, non-clones far apart, so abs-diff
        // features are small for +1 and large for −1: linearly separable.
        let embeddings = table(&[
            ("ca", &[1.0, 0.0]),
            ("cb", &[0.98, 0.02]),
            ("na", &[0.0, 1.0]),
            ("nb", &[1.0, 0.0]),
        ]);
        let pairs = [
            pair("t1", "ca", "cb", PairLabel::Clone),
            pair("t2", "na", "nb", PairLabel::NonClone),
        ];
        let (features, labels) = featurize_pairs(&pairs, &embeddings).unwrap();
        let labels: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let params = SvmParams { kernel: KernelConfig::Linear, c: 10.0, ..SvmParams::default() };
        let model = svm_train(&features, &labels, &params).unwrap();
        (ClassifierModel::Svm(model), embeddings)
    }

    #[test]
    fn classifier_detect_is_swap_invariant() {
        let (model, embeddings) = trained_model();
        let forward = pair("q1", "ca", "cb", PairLabel::Clone);
        let mut backward = forward.clone();
        std::mem::swap(&mut backward.a, &mut backward.b);
        let f = classifier_detect(&forward, &embeddings, &model).unwrap();
        let b = classifier_detect(&backward, &embeddings, &model).unwrap();
        assert_eq!(f.predicted, PairLabel::Clone);
        assert_eq!(f.predicted, b.predicted);
        assert_eq!(f.raw_score, b.raw_score);
        assert_eq!(f.backend, Backend::Classifier { model: ClassifierKind::Svm });
    }

    #[test]
    fn predictions_round_trip_through_jsonl() {
        let embeddings = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let pairs = [
            pair("p1", "a", "a", PairLabel::Clone),
            pair("p2", "a", "b", PairLabel::NonClone),
        ];
        let predictions = cosine_detect_all(
            &pairs,
            &ConstEmbedder(embeddings.clone()),
            0.5,
        )
        .unwrap();
        assert_eq!(predictions.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("predictions.jsonl");
        write_predictions(&predictions, &path).unwrap();
        assert_eq!(load_predictions(&path).unwrap(), predictions);
    }

    /// Embedder backed by a fixed table, for detector-level tests.
    struct ConstEmbedder(EmbeddingMap);

    impl TextEmbedder for ConstEmbedder {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
            texts
                .iter()
                .map(|t| {
                    self.0
                        .get(t)
                        .cloned()
                        .ok_or_else(|| ProviderError::InvalidRequest(format!("no vector for {t:?}")))
                })
                .collect()
        }
    }
}
