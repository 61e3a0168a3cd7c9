//! In-process provider substitutes keyed on marker tokens.

use super::{find_markers, text_seed, SyntheticCorpus};
use crate::providers::{ChatRequest, ChatResponse, ProviderError, TextEmbedder, Usage};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeMap;

/// Deterministic embedder: texts carrying a known marker token map to that
/// problem's latent vector plus a small perturbation seeded by the exact
/// text; anything else maps to a hash-derived unit vector. The same text
/// always produces the same vector.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    latents: BTreeMap<String, Vec<f64>>,
    dim: usize,
    noise_sigma: f64,
    seed: u64,
}

impl MockEmbedder {
    pub fn new(
        latents_by_marker: BTreeMap<String, Vec<f64>>,
        dim: usize,
        noise_sigma: f64,
        seed: u64,
    ) -> Self {
        Self { latents: latents_by_marker, dim, noise_sigma, seed }
    }

    /// An embedder consistent with a generated corpus.
    pub fn for_corpus(corpus: &SyntheticCorpus) -> Self {
        Self::new(
            corpus.latents_by_marker(),
            corpus.spec.dim,
            corpus.spec.noise_sigma,
            corpus.spec.seed,
        )
    }

    /// Embed one text (see the type docs for the rule).
    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(text_seed(text, self.seed));
        let known = find_markers(text).into_iter().find_map(|m| self.latents.get(&m));
        match known {
            Some(latent) => {
                // Perturbation with total length ≈ noise_sigma, so two
                // texts for the same problem keep cosine ≈ 1 − σ².
                let scale = self.noise_sigma / (self.dim as f64).sqrt();
                latent
                    .iter()
                    .map(|v| v + scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            None => {
                let mut v: Vec<f64> =
                    (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                for x in &mut v {
                    *x /= norm;
                }
                v
            }
        }
    }
}

impl TextEmbedder for MockEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Deterministic chat responder driven by the markers inside a rendered
/// prompt: one distinct marker means the snippets solve the same problem.
///
/// `chaos_rate` injects undecidable answers (no yes, no, or score in them)
/// for that fraction of requests, chosen by a seeded hash of the request,
/// so parser fallback paths can be exercised at a controlled rate.
#[derive(Debug, Clone)]
pub struct MockChat {
    pub chaos_rate: f64,
    pub seed: u64,
}

impl Default for MockChat {
    fn default() -> Self {
        Self { chaos_rate: 0.0, seed: 0 }
    }
}

impl MockChat {
    pub fn new(chaos_rate: f64, seed: u64) -> Self {
        Self { chaos_rate: chaos_rate.clamp(0.0, 1.0), seed }
    }

    /// Answer a rendered prompt request.
    pub fn respond(&self, request: &ChatRequest) -> ChatResponse {
        let text: String = request
            .messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let content = self.content_for(&text);
        let usage = Usage {
            prompt_tokens: (text.len() / 4) as u64,
            completion_tokens: (content.len() / 4) as u64,
        };
        ChatResponse { content, finish_reason: "stop".into(), usage }
    }

    fn content_for(&self, text: &str) -> String {
        if self.chaos_rate > 0.0 {
            let roll = text_seed(text, self.seed ^ 0xC0FFEE) as f64 / u64::MAX as f64;
            if roll < self.chaos_rate {
                return "It is hard to tell whether these snippets are related \
                        without more context."
                    .into();
            }
        }
        let markers = find_markers(text);
        let same = markers.len() == 1;
        let lower = text.to_lowercase();
        if lower.contains("similarity score") {
            return format!("Similarity score: {}", if same { 9 } else { 1 });
        }
        if lower.contains("do not state whether") {
            // Analysis step: describe both snippets, carrying the markers
            // forward for the verdict step.
            return match markers.as_slice() {
                [a, b] => format!(
                    "The first snippet implements task {a} by scanning the input \
                     and accumulating values past a threshold. The second snippet \
                     implements task {b} with the same scan-and-accumulate shape. \
                     Their structures correspond branch for branch."
                ),
                [a] => format!(
                    "Both snippets implement task {a}: they scan the input and \
                     accumulate the values that pass a threshold check."
                ),
                _ => "Neither snippet carries an identifiable task.".into(),
            };
        }
        if lower.contains("explain the function of the snippet") {
            return match markers.first() {
                Some(m) => format!(
                    "The snippet implements task {m}: it walks the input values \
                     and accumulates those above a fixed threshold."
                ),
                None => "The snippet has no identifiable task.".into(),
            };
        }
        if markers.is_empty() {
            return "Neither snippet carries an identifiable task.".into();
        }
        if same {
            "Yes, the two code snippets are clones: they solve the same task.".into()
        } else {
            "No, the two code snippets are not clones; they solve different tasks.".into()
        }
    }
}
