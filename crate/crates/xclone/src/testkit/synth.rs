//! Seeded synthetic bilingual corpora with known embedding geometry.
//!
//! Problems are laid out in groups of four. Each group gets a *center*
//! direction orthogonal to every other group's center; members sit at the
//! vertices of a regular simplex tilted a fixed angle away from the center,
//! so every intra-group pair has the same cosine distance (wide enough to
//! count as distinct problems, narrow enough for DBSCAN to cluster) while
//! inter-group pairs stay far apart. Every sample and description embeds
//! the problem's marker token inside a comment, which is what the mock
//! provider layer keys on.

use super::{marker, TestkitError};
use crate::corpus::{load_corpus_from_str, LanguageRegistry, Problem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeMap;

/// Problems per latent group.
const GROUP_SIZE: usize = 4;
/// Intra-group cosine distance when the margin doesn't force it higher.
const GROUP_SPREAD: f64 = 0.18;
/// Resamples allowed while orthogonalising a direction.
const MAX_REJECTS: usize = 1000;

/// Settings for [`generate_corpus`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    /// Problems to generate.
    pub n_problems: usize,
    /// One sample per problem in each of these languages.
    pub languages: Vec<String>,
    /// Latent dimensionality.
    pub dim: usize,
    /// Scale of the perturbation the mock embedder adds per text.
    pub noise_sigma: f64,
    /// Minimum pairwise cosine distance between latent vectors. Must
    /// exceed twice the noise scale (so labels stay separable) and stay
    /// at or below 0.2 (so groups cannot collide).
    pub margin: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// A spec with the default geometry: dimension 64, noise 0.02,
    /// margin 0.08.
    pub fn new(n_problems: usize, languages: &[&str], seed: u64) -> Self {
        Self {
            n_problems,
            languages: languages.iter().map(|s| s.to_string()).collect(),
            dim: 64,
            noise_sigma: 0.02,
            margin: 0.08,
            seed,
        }
    }

    fn validate(&self) -> Result<(), TestkitError> {
        let fail = |msg: &str| Err(TestkitError::InvalidSpec(msg.into()));
        if self.n_problems == 0 {
            return fail("n_problems must be ≥ 1");
        }
        if self.languages.is_empty() {
            return fail("languages must be non-empty");
        }
        let mut seen = self.languages.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.languages.len() {
            return fail("languages must be distinct");
        }
        if self.dim < GROUP_SIZE + 1 {
            return fail("dim must be ≥ 5");
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return fail("noise_sigma must be ≥ 0");
        }
        if self.margin <= 2.0 * self.noise_sigma {
            return fail("margin must exceed 2 × noise_sigma");
        }
        if self.margin > 0.2 {
            return fail("margin must be ≤ 0.2");
        }
        Ok(())
    }
}

/// A generated corpus plus everything the mocks need to embed it.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    /// The generator settings, kept so mocks can be rebuilt from the result.
    pub spec: SyntheticSpec,
    /// Parsed problems, exactly as the corpus loader sees them.
    pub problems: Vec<Problem>,
    /// Unit latent vector per problem id.
    pub latents: BTreeMap<String, Vec<f64>>,
    /// The corpus file bytes; identical for identical specs.
    pub jsonl: String,
}

impl SyntheticCorpus {
    /// Latents keyed by marker token instead of problem id.
    pub fn latents_by_marker(&self) -> BTreeMap<String, Vec<f64>> {
        self.latents
            .iter()
            .map(|(id, v)| (marker(index_of(id)), v.clone()))
            .collect()
    }
}

fn problem_id(index: usize) -> String {
    format!("syn-{index:04}")
}

fn index_of(id: &str) -> usize {
    id.trim_start_matches("syn-").parse().expect("synthetic id")
}

/// Generate a corpus of `spec.n_problems` problems, one accepted sample per
/// language, with group-structured latent vectors. Deterministic: equal
/// specs produce identical bytes.
pub fn generate_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus, TestkitError> {
    spec.validate()?;
    let registry = LanguageRegistry::default();
    for language in &spec.languages {
        if !registry.contains(language) {
            return Err(TestkitError::InvalidSpec(format!("unknown language `{language}`")));
        }
    }
    let latent_list = latent_vectors(spec)?;

    let mut lines = Vec::with_capacity(spec.n_problems);
    for index in 0..spec.n_problems {
        let token = marker(index);
        let decisions = index % 7 + 1;
        let group = index / GROUP_SIZE;
        let description = format!(
            "Task {token} (group {group}, variant {}): read the integer \
             sequence and report the aggregate the task requires.",
            index % GROUP_SIZE
        );
        let samples: Vec<serde_json::Value> = spec
            .languages
            .iter()
            .map(|language| {
                serde_json::json!({
                    "language": language,
                    "source": sample_source(language, &token, decisions, index),
                    "status": "accepted",
                })
            })
            .collect();
        let record = serde_json::json!({
            "problem_id": problem_id(index),
            "description": description,
            "samples": samples,
        });
        lines.push(record.to_string());
    }
    let mut jsonl = lines.join("\n");
    jsonl.push('\n');

    let problems = load_corpus_from_str(&jsonl, &registry)?;
    let latents: BTreeMap<String, Vec<f64>> = latent_list
        .into_iter()
        .enumerate()
        .map(|(i, v)| (problem_id(i), v))
        .collect();
    Ok(SyntheticCorpus { spec: spec.clone(), problems, latents, jsonl })
}

/// Unit latents for every problem: orthogonal group centers, simplex
/// members tilted so intra-group cosine distance is exactly
/// `max(margin, 0.18)`.
fn latent_vectors(spec: &SyntheticSpec) -> Result<Vec<Vec<f64>>, TestkitError> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_groups = spec.n_problems.div_ceil(GROUP_SIZE);
    let overflow = || TestkitError::RejectionOverflow { needed: n_groups, dim: spec.dim };
    if n_groups > spec.dim {
        return Err(overflow());
    }
    let intra = spec.margin.max(GROUP_SPREAD);

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(n_groups);
    for _ in 0..n_groups {
        let center = sample_orthonormal(&mut rng, spec.dim, &centers).ok_or_else(overflow)?;
        centers.push(center);
    }

    let mut latents: Vec<Vec<f64>> = Vec::with_capacity(spec.n_problems);
    for (group, center) in centers.iter().enumerate() {
        let members = GROUP_SIZE.min(spec.n_problems - group * GROUP_SIZE);
        if members == 1 {
            latents.push(center.clone());
            continue;
        }
        // Orthonormal frame for the simplex, orthogonal to the center.
        let mut frame: Vec<Vec<f64>> = vec![center.clone()];
        for _ in 0..members {
            let axis = sample_orthonormal(&mut rng, spec.dim, &frame).ok_or_else(overflow)?;
            frame.push(axis);
        }
        let helpers = &frame[1..];
        // Regular simplex: vertices of the standard basis recentred on
        // their mean have pairwise cosine −1/(members−1).
        let vertex_norm = (1.0 - 1.0 / members as f64).sqrt();
        let sin2 = intra * (members - 1) as f64 / members as f64;
        let (sin_psi, cos_psi) = (sin2.sqrt(), (1.0 - sin2).sqrt());
        for j in 0..members {
            let mut v: Vec<f64> = center.iter().map(|c| cos_psi * c).collect();
            for (k, axis) in helpers.iter().enumerate() {
                let coord = (f64::from(u8::from(k == j)) - 1.0 / members as f64) / vertex_norm;
                for (vi, ai) in v.iter_mut().zip(axis) {
                    *vi += sin_psi * coord * ai;
                }
            }
            latents.push(v);
        }
    }

    // Belt and braces: the construction promises pairwise separation, so
    // verify it rather than trust the arithmetic.
    for i in 0..latents.len() {
        for j in 0..i {
            let cos: f64 = latents[i].iter().zip(&latents[j]).map(|(a, b)| a * b).sum();
            if 1.0 - cos < spec.margin - 1e-9 {
                return Err(overflow());
            }
        }
    }
    Ok(latents)
}

/// A random unit vector orthogonal to `basis`, or `None` once rejection
/// sampling gives up (the basis spans too much of the space).
fn sample_orthonormal(rng: &mut ChaCha8Rng, dim: usize, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..MAX_REJECTS {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for b in basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for vi in &mut v {
                *vi /= norm;
            }
            return Some(v);
        }
    }
    None
}

/// A small solver in `language` whose comment carries the marker token and
/// whose body has exactly `decisions` branch points. Variable names rotate
/// with the problem index so sources are not byte-identical across problems.
fn sample_source(language: &str, token: &str, decisions: usize, index: usize) -> String {
    let accs = ["acc", "total", "tally", "result"];
    let args = ["xs", "vals", "nums", "items"];
    let acc = accs[index % accs.len()];
    let arg = args[index / accs.len() % args.len()];
    let threshold = index % 5 + 1;

    let c_like = |header: &str, item: &dyn Fn(usize) -> String, footer: &str| {
        let mut body = format!("// solution for {token}\n{header}\n");
        for i in 0..decisions {
            body.push_str(&item(i));
        }
        body.push_str(footer);
        body
    };

    match language {
        "java" => c_like(
            &format!("class Solution {{\n    static int solve(int[] {arg}) {{\n        int {acc} = 0;"),
            &|i| format!("        if ({arg}[{i}] > {threshold}) {acc} += {arg}[{i}];\n"),
            &format!("        return {acc};\n    }}\n}}\n"),
        ),
        "c" => c_like(
            &format!("int solve(const int *{arg}) {{\n    int {acc} = 0;"),
            &|i| format!("    if ({arg}[{i}] > {threshold}) {acc} += {arg}[{i}];\n"),
            &format!("    return {acc};\n}}\n"),
        ),
        "cpp" => c_like(
            &format!("int solve(const std::vector<int> &{arg}) {{\n    int {acc} = 0;"),
            &|i| format!("    if ({arg}[{i}] > {threshold}) {acc} += {arg}[{i}];\n"),
            &format!("    return {acc};\n}}\n"),
        ),
        "csharp" => c_like(
            &format!("static int Solve(int[] {arg}) {{\n    int {acc} = 0;"),
            &|i| format!("    if ({arg}[{i}] > {threshold}) {acc} += {arg}[{i}];\n"),
            &format!("    return {acc};\n}}\n"),
        ),
        "javascript" => c_like(
            &format!("function solve({arg}) {{\n    let {acc} = 0;"),
            &|i| format!("    if ({arg}[{i}] > {threshold}) {acc} += {arg}[{i}];\n"),
            &format!("    return {acc};\n}}\n"),
        ),
        "go" => c_like(
            &format!("func solve({arg} []int) int {{\n    {acc} := 0"),
            &|i| format!("    if {arg}[{i}] > {threshold} {{\n        {acc} += {arg}[{i}]\n    }}\n"),
            &format!("    return {acc}\n}}\n"),
        ),
        "rust" => c_like(
            &format!("fn solve({arg}: &[i64]) -> i64 {{\n    let mut {acc} = 0;"),
            &|i| format!("    if {arg}[{i}] > {threshold} {{ {acc} += {arg}[{i}]; }}\n"),
            &format!("    {acc}\n}}\n"),
        ),
        "php" => {
            let mut body = format!(
                "<?php\n// solution for {token}\nfunction solve(${arg}) {{\n    ${acc} = 0;\n"
            );
            for i in 0..decisions {
                body.push_str(&format!(
                    "    if (${arg}[{i}] > {threshold}) {{ ${acc} += ${arg}[{i}]; }}\n"
                ));
            }
            body.push_str(&format!("    return ${acc};\n}}\n"));
            body
        }
        "python" => {
            let mut body =
                format!("# solution for {token}\ndef solve({arg}):\n    {acc} = 0\n");
            for i in 0..decisions {
                body.push_str(&format!(
                    "    if {arg}[{i}] > {threshold}:\n        {acc} += {arg}[{i}]\n"
                ));
            }
            body.push_str(&format!("    return {acc}\n"));
            body
        }
        "ruby" => {
            let mut body = format!("# solution for {token}\ndef solve({arg})\n  {acc} = 0\n");
            for i in 0..decisions {
                body.push_str(&format!(
                    "  if {arg}[{i}] > {threshold}\n    {acc} += {arg}[{i}]\n  end\n"
                ));
            }
            body.push_str(&format!("  {acc}\nend\n"));
            body
        }
        "ocaml" => {
            let mut body = format!(
                "(* solution for {token} *)\nlet solve {arg} =\n  let {acc} = ref 0 in\n"
            );
            for i in 0..decisions {
                body.push_str(&format!(
                    "  if {arg}.({i}) > {threshold} then {acc} := !{acc} + {arg}.({i});\n"
                ));
            }
            body.push_str(&format!("  !{acc}\n"));
            body
        }
        other => unreachable!("unregistered language `{other}` passed validation"),
    }
}
