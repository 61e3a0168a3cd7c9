//! Balanced benchmark construction: clone and non-clone pairs.
//!
//! The pipeline mirrors how the bundled benchmarks were built:
//!
//! 1. embed every problem description into a sentence vector;
//! 2. cluster the vectors with DBSCAN over cosine distance, so groups of
//!    near-duplicate problems are known;
//! 3. **negatives** — take each cluster's most complex problem and pair its
//!    anchor-language sample with the most complex partner-language sample
//!    of the *furthest* problem in the whole corpus, capping how often any
//!    problem serves as a partner;
//! 4. **positives** — pair the remaining problems' most complex
//!    anchor-language sample with their most complex partner-language
//!    sample (same problem, different language).
//!
//! Both phases balance partner languages to within one pair and the final
//! benchmark is exactly label-balanced, shuffled by seed, and byte-stable
//! across reruns.

use crate::corpus::{problem_complexity, CodeSample, CorpusError, Problem};
use crate::ml::{cosine_distance, dbscan, MlError};
use crate::providers::{ProviderError, TextEmbedder};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Errors raised while building or loading a benchmark.
#[derive(Debug, thiserror::Error)]
pub enum PairingError {
    /// The target pair count cannot be met under the uniqueness caps.
    #[error("could not build {target} {label} pairs (built {built}); corpus too small for the caps")]
    InsufficientProblems { label: &'static str, built: usize, target: usize },
    /// Clone / non-clone counts differ.
    #[error("benchmark is imbalanced: {clones} clone vs {non_clones} non-clone pairs")]
    ImbalancedBenchmark { clones: usize, non_clones: usize },
    /// A benchmark JSONL line failed validation (1-based line number).
    #[error("line {0}: malformed benchmark record")]
    MalformedRecord(usize),
    /// Two records share a pair id.
    #[error("duplicate pair id `{0}`")]
    DuplicatePairId(String),
    /// Structurally invalid configuration.
    #[error("invalid pairing config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pair label: clone (same problem) or non-clone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    Clone,
    NonClone,
}

/// How a pair was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Two languages solving the same problem (positive).
    SameProblem,
    /// Cluster representative × globally furthest problem (negative).
    ClusterFurthest,
}

/// One side of a candidate pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSide {
    pub problem_id: String,
    pub language: String,
    pub source: String,
}

/// A labelled cross-lingual pair, one line of the benchmark file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub pair_id: String,
    pub label: PairLabel,
    pub a: PairSide,
    pub b: PairSide,
    pub provenance: Provenance,
}

impl CandidatePair {
    /// Check the structural invariants every emitted pair must satisfy.
    pub fn validate(&self) -> Result<(), PairingError> {
        let ok = self.a.language != self.b.language
            && match self.label {
                PairLabel::Clone => self.a.problem_id == self.b.problem_id,
                PairLabel::NonClone => self.a.problem_id != self.b.problem_id,
            }
            && !self.pair_id.is_empty()
            && !self.a.source.trim().is_empty()
            && !self.b.source.trim().is_empty();
        if ok {
            Ok(())
        } else {
            Err(PairingError::InvalidConfig(format!("pair {} violates invariants", self.pair_id)))
        }
    }
}

/// Settings for benchmark construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingConfig {
    /// Language always placed on side A (default `"java"`).
    pub anchor_language: String,
    /// Languages eligible for side B; must exclude the anchor.
    pub partner_languages: Vec<String>,
    /// Pairs to build per label.
    pub pairs_per_label: usize,
    /// DBSCAN neighbourhood radius in cosine distance, in (0, 2).
    pub dbscan_eps: f64,
    /// DBSCAN density threshold (≥ 2).
    pub dbscan_min_pts: usize,
    /// Cap on how often one problem may serve as a negative partner.
    pub max_partner_uses: usize,
    /// Shuffle seed for the emitted file.
    pub seed: u64,
}

impl Default for PairingConfig {
    fn default() -> Self {
        Self {
            anchor_language: "java".into(),
            partner_languages: vec![],
            pairs_per_label: 0,
            dbscan_eps: 0.3,
            dbscan_min_pts: 2,
            max_partner_uses: 3,
            seed: 0,
        }
    }
}

impl PairingConfig {
    fn validate(&self) -> Result<(), PairingError> {
        if self.partner_languages.is_empty() {
            return Err(PairingError::InvalidConfig("partner_languages must be non-empty".into()));
        }
        if self.partner_languages.contains(&self.anchor_language) {
            return Err(PairingError::InvalidConfig(
                "partner_languages must exclude the anchor language".into(),
            ));
        }
        if self.pairs_per_label == 0 {
            return Err(PairingError::InvalidConfig("pairs_per_label must be ≥ 1".into()));
        }
        if !(self.dbscan_eps > 0.0 && self.dbscan_eps < 2.0) {
            return Err(PairingError::InvalidConfig("dbscan_eps must be in (0, 2)".into()));
        }
        if self.dbscan_min_pts < 2 {
            return Err(PairingError::InvalidConfig("dbscan_min_pts must be ≥ 2".into()));
        }
        if self.max_partner_uses == 0 {
            return Err(PairingError::InvalidConfig("max_partner_uses must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Embed every problem description, one vector per problem.
///
/// Deduplication, batching, caching, and retry live in the provider layer;
/// this just lines results up with problem ids.
pub fn embed_descriptions(
    corpus: &[Problem],
    embedder: &dyn TextEmbedder,
) -> Result<BTreeMap<String, Vec<f64>>, PairingError> {
    let texts: Vec<String> = corpus.iter().map(|p| p.description.clone()).collect();
    let vectors = embedder.embed(&texts)?;
    let dim = vectors.first().map_or(0, Vec::len);
    for v in &vectors {
        if v.len() != dim {
            return Err(MlError::DimensionMismatch { expected: dim, got: v.len() }.into());
        }
    }
    Ok(corpus.iter().map(|p| p.problem_id.clone()).zip(vectors).collect())
}

/// Problem groups found by DBSCAN over description vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Member problem ids per cluster, in cluster-creation order.
    pub clusters: Vec<Vec<String>>,
    /// Problems dense enough for no cluster.
    pub noise: Vec<String>,
}

/// Cluster description vectors with DBSCAN over cosine distance. Problems
/// are scanned in id order, so the result is deterministic.
pub fn cluster_problems(
    vectors: &BTreeMap<String, Vec<f64>>,
    eps: f64,
    min_pts: usize,
) -> Result<Clustering, PairingError> {
    let ids: Vec<&String> = vectors.keys().collect();
    let points: Vec<Vec<f64>> = ids.iter().map(|id| vectors[*id].clone()).collect();
    let labels = dbscan(&points, eps, min_pts)?;
    let n_clusters = labels.iter().flatten().copied().max().map_or(0, |m| m + 1);
    let mut clusters = vec![Vec::new(); n_clusters];
    let mut noise = Vec::new();
    for (id, label) in ids.iter().zip(&labels) {
        match label {
            Some(c) => clusters[*c].push((*id).clone()),
            None => noise.push((*id).clone()),
        }
    }
    Ok(Clustering { clusters, noise })
}

/// The most complex sample of `problem` in `language`; complexity ties go
/// to the earliest sample in file order.
fn most_complex_sample<'a>(problem: &'a Problem, language: &'a str) -> Option<&'a CodeSample> {
    let mut best: Option<&CodeSample> = None;
    for sample in problem.samples_in(language) {
        if best.is_none_or(|b| sample.complexity > b.complexity) {
            best = Some(sample);
        }
    }
    best
}

fn side_from(sample: &CodeSample) -> PairSide {
    PairSide {
        problem_id: sample.problem_id.clone(),
        language: sample.language.clone(),
        source: sample.source.clone(),
    }
}

/// Round-robin quota over partner languages: `pairs_per_label` split as
/// evenly as config order allows (first languages get the remainder).
struct LanguageQuota<'a> {
    languages: &'a [String],
    remaining: Vec<usize>,
}

impl<'a> LanguageQuota<'a> {
    fn new(languages: &'a [String], total: usize) -> Self {
        let base = total / languages.len();
        let extra = total % languages.len();
        let remaining = (0..languages.len()).map(|i| base + usize::from(i < extra)).collect();
        Self { languages, remaining }
    }

    /// Languages with quota left, most-starved first, ties in config order.
    fn by_need(&self) -> Vec<&'a String> {
        let mut order: Vec<usize> = (0..self.languages.len()).collect();
        order.sort_by(|&i, &j| self.remaining[j].cmp(&self.remaining[i]).then(i.cmp(&j)));
        order
            .into_iter()
            .filter(|&i| self.remaining[i] > 0)
            .map(|i| &self.languages[i])
            .collect()
    }

    fn consume(&mut self, language: &str) {
        let i = self.languages.iter().position(|l| l == language).expect("known language");
        self.remaining[i] -= 1;
    }

    fn exhausted(&self) -> bool {
        self.remaining.iter().all(|&r| r == 0)
    }
}

/// Result of the negative phase: the pairs plus the problems consumed as
/// cluster representatives (excluded from the positive pool).
pub struct NegativeBuild {
    pub pairs: Vec<CandidatePair>,
    pub used_representatives: BTreeSet<String>,
    pub warnings: Vec<String>,
}

/// Build `pairs_per_label` non-clone pairs.
///
/// Clusters contribute representatives in descending complexity; each
/// representative's anchor sample is paired with the most complex sample —
/// in the language the balance quota asks for — of the furthest problem in
/// the whole corpus. No unordered problem pair repeats and no problem
/// partners more than `max_partner_uses` times. If one representative per
/// cluster is not enough, further passes promote each cluster's
/// next-most-complex member.
pub fn build_negative_pairs(
    corpus: &[Problem],
    vectors: &BTreeMap<String, Vec<f64>>,
    clustering: &Clustering,
    config: &PairingConfig,
) -> Result<NegativeBuild, PairingError> {
    config.validate()?;
    let by_id: BTreeMap<&str, &Problem> =
        corpus.iter().map(|p| (p.problem_id.as_str(), p)).collect();
    let complexity_of = |id: &str| -> usize {
        by_id.get(id).map_or(0, |p| problem_complexity(p).unwrap_or(0))
    };

    // Cluster members sorted by (complexity desc, id asc): pass p uses the
    // p-th entry of each cluster as its representative.
    let mut ranked_clusters: Vec<Vec<String>> = clustering
        .clusters
        .iter()
        .map(|members| {
            let mut m = members.clone();
            m.sort_by(|a, b| complexity_of(b).cmp(&complexity_of(a)).then(a.cmp(b)));
            m
        })
        .collect();
    ranked_clusters.retain(|m| !m.is_empty());

    let mut quota = LanguageQuota::new(&config.partner_languages, config.pairs_per_label);
    let mut pairs: Vec<CandidatePair> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut used_representatives: BTreeSet<String> = BTreeSet::new();
    let mut used_problem_pairs: BTreeSet<(String, String)> = BTreeSet::new();
    let mut partner_uses: BTreeMap<String, usize> = BTreeMap::new();

    let max_pass = ranked_clusters.iter().map(Vec::len).max().unwrap_or(0);
    'passes: for pass in 0..max_pass {
        // Representatives of this pass, most complex first.
        let mut reps: Vec<String> = ranked_clusters
            .iter()
            .filter_map(|members| members.get(pass).cloned())
            .collect();
        reps.sort_by(|a, b| complexity_of(b).cmp(&complexity_of(a)).then(a.cmp(b)));
        for rep_id in reps {
            if pairs.len() >= config.pairs_per_label {
                break 'passes;
            }
            let rep = by_id[rep_id.as_str()];
            let Some(anchor_sample) = most_complex_sample(rep, &config.anchor_language) else {
                warnings.push(format!(
                    "cluster representative {rep_id} has no {} sample; skipped",
                    config.anchor_language
                ));
                continue;
            };
            let rep_vector = &vectors[&rep_id];
            // Try the most-starved language first; fall through on failure.
            let mut made = None;
            for language in quota.by_need() {
                if let Some(partner_id) = furthest_eligible(
                    corpus,
                    vectors,
                    rep_vector,
                    &rep_id,
                    language,
                    &used_problem_pairs,
                    &partner_uses,
                    config.max_partner_uses,
                )? {
                    made = Some((language.clone(), partner_id));
                    break;
                }
            }
            let Some((language, partner_id)) = made else {
                warnings.push(format!(
                    "no eligible negative partner for cluster representative {rep_id}; skipped"
                ));
                continue;
            };
            let partner_sample = most_complex_sample(by_id[partner_id.as_str()], &language)
                .expect("eligibility checked the language");
            pairs.push(CandidatePair {
                pair_id: format!("neg-{:04}", pairs.len() + 1),
                label: PairLabel::NonClone,
                a: side_from(anchor_sample),
                b: side_from(partner_sample),
                provenance: Provenance::ClusterFurthest,
            });
            quota.consume(&language);
            used_representatives.insert(rep_id.clone());
            let key = unordered(&rep_id, &partner_id);
            used_problem_pairs.insert(key);
            *partner_uses.entry(partner_id).or_insert(0) += 1;
            if quota.exhausted() {
                break 'passes;
            }
        }
    }

    if pairs.len() < config.pairs_per_label {
        return Err(PairingError::InsufficientProblems {
            label: "non_clone",
            built: pairs.len(),
            target: config.pairs_per_label,
        });
    }
    Ok(NegativeBuild { pairs, used_representatives, warnings })
}

fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// The furthest problem from `rep_vector` (max cosine distance, ties to the
/// smaller id) that has a sample in `language`, hasn't paired with the
/// representative before, and is under the partner-use cap.
#[allow(clippy::too_many_arguments)]
fn furthest_eligible(
    corpus: &[Problem],
    vectors: &BTreeMap<String, Vec<f64>>,
    rep_vector: &[f64],
    rep_id: &str,
    language: &str,
    used_problem_pairs: &BTreeSet<(String, String)>,
    partner_uses: &BTreeMap<String, usize>,
    max_partner_uses: usize,
) -> Result<Option<String>, PairingError> {
    let mut best: Option<(f64, &str)> = None;
    for problem in corpus {
        let id = problem.problem_id.as_str();
        if id == rep_id
            || problem.samples_in(language).next().is_none()
            || used_problem_pairs.contains(&unordered(rep_id, id))
            || partner_uses.get(id).copied().unwrap_or(0) >= max_partner_uses
        {
            continue;
        }
        let d = cosine_distance(rep_vector, &vectors[id])?;
        // Strict > keeps the first (smallest id: corpus iterates load
        // order, but ties resolve below) — compare ids explicitly.
        match best {
            Some((bd, bid)) if d < bd || (d == bd && bid < id) => {}
            _ => best = Some((d, id)),
        }
    }
    Ok(best.map(|(_, id)| id.to_string()))
}

/// Build `pairs_per_label` clone pairs from problems not consumed as
/// cluster representatives, most complex problems first, balancing partner
/// languages to within one pair.
pub fn build_positive_pairs(
    corpus: &[Problem],
    used_problems: &BTreeSet<String>,
    config: &PairingConfig,
) -> Result<(Vec<CandidatePair>, Vec<String>), PairingError> {
    config.validate()?;
    let mut candidates: Vec<&Problem> = corpus
        .iter()
        .filter(|p| !used_problems.contains(&p.problem_id))
        .collect();
    candidates.sort_by(|a, b| {
        let (ca, cb) =
            (problem_complexity(a).unwrap_or(0), problem_complexity(b).unwrap_or(0));
        cb.cmp(&ca).then(a.problem_id.cmp(&b.problem_id))
    });

    let mut quota = LanguageQuota::new(&config.partner_languages, config.pairs_per_label);
    let mut pairs: Vec<CandidatePair> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    for problem in candidates {
        if pairs.len() >= config.pairs_per_label {
            break;
        }
        let Some(anchor_sample) = most_complex_sample(problem, &config.anchor_language) else {
            continue;
        };
        let Some(language) = quota
            .by_need()
            .into_iter()
            .find(|lang| problem.samples_in(lang).next().is_some())
        else {
            if problem.samples.iter().any(|s| config.partner_languages.contains(&s.language)) {
                warnings.push(format!(
                    "problem {} only has partner languages whose quota is full; skipped",
                    problem.problem_id
                ));
            }
            continue;
        };
        let partner_sample =
            most_complex_sample(problem, language).expect("language presence checked");
        pairs.push(CandidatePair {
            pair_id: format!("pos-{:04}", pairs.len() + 1),
            label: PairLabel::Clone,
            a: side_from(anchor_sample),
            b: side_from(partner_sample),
            provenance: Provenance::SameProblem,
        });
        quota.consume(language);
    }
    if pairs.len() < config.pairs_per_label {
        return Err(PairingError::InsufficientProblems {
            label: "clone",
            built: pairs.len(),
            target: config.pairs_per_label,
        });
    }
    Ok((pairs, warnings))
}

/// Everything [`build_benchmark`] produced, before writing.
pub struct BenchmarkBuild {
    pub pairs: Vec<CandidatePair>,
    pub clustering: Clustering,
    pub warnings: Vec<String>,
}

/// Run the full pipeline: embed → cluster → negatives → positives.
pub fn build_benchmark(
    corpus: &[Problem],
    embedder: &dyn TextEmbedder,
    config: &PairingConfig,
) -> Result<BenchmarkBuild, PairingError> {
    config.validate()?;
    let vectors = embed_descriptions(corpus, embedder)?;
    let clustering = cluster_problems(&vectors, config.dbscan_eps, config.dbscan_min_pts)?;
    let negatives = build_negative_pairs(corpus, &vectors, &clustering, config)?;
    let (positives, mut pos_warnings) =
        build_positive_pairs(corpus, &negatives.used_representatives, config)?;
    let mut pairs = positives;
    pairs.extend(negatives.pairs);
    let mut warnings = negatives.warnings;
    warnings.append(&mut pos_warnings);
    for pair in &pairs {
        pair.validate()?;
    }
    Ok(BenchmarkBuild { pairs, clustering, warnings })
}

/// Shuffle (seeded) and write a label-balanced benchmark as JSONL.
pub fn write_benchmark(
    pairs: &[CandidatePair],
    path: impl AsRef<Path>,
    seed: u64,
) -> Result<(), PairingError> {
    let clones = pairs.iter().filter(|p| p.label == PairLabel::Clone).count();
    let non_clones = pairs.len() - clones;
    if clones != non_clones {
        return Err(PairingError::ImbalancedBenchmark { clones, non_clones });
    }
    let mut shuffled: Vec<&CandidatePair> = pairs.iter().collect();
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let mut file = fs::File::create(path)?;
    for pair in shuffled {
        writeln!(file, "{}", serde_json::to_string(pair).expect("pair serializes"))?;
    }
    Ok(())
}

/// Load and validate a benchmark JSONL file.
pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Vec<CandidatePair>, PairingError> {
    let text = fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: CandidatePair =
            serde_json::from_str(line).map_err(|_| PairingError::MalformedRecord(idx + 1))?;
        pair.validate().map_err(|_| PairingError::MalformedRecord(idx + 1))?;
        if !seen.insert(pair.pair_id.clone()) {
            return Err(PairingError::DuplicatePairId(pair.pair_id));
        }
        pairs.push(pair);
    }
    Ok(pairs)
}
