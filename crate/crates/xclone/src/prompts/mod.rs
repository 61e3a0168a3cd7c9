//! The eight prompt protocols, multi-step orchestration, and response
//! parsing.
//!
//! Prompt bodies live as versioned text assets under `assets/prompts/` and
//! are interpolated byte-exactly — template text is never rewritten at
//! runtime, only `{step 1 output}` slots are filled and code snippets are
//! appended in fenced blocks. Golden-file tests pin every rendered form.
//!
//! Parsing is deliberately forgiving: models ramble, so [`parse_yes_no`]
//! and [`parse_score`] are total functions that extract a verdict where one
//! exists and report `undecided` otherwise. Undecided answers are never
//! silently coerced — downstream reporting surfaces their rate and applies
//! an explicit fallback label.

use crate::providers::{ChatMessage, ProviderError};
use serde::{Deserialize, Serialize};

/// The eight prompt protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Simple,
    ImprovedSimple,
    SimilarLine,
    Reasoning,
    Integrate,
    SeparateCode,
    SeparateExplanation,
    CodeSimilarity,
}

impl PromptKind {
    /// All kinds, in presentation order.
    pub fn all() -> [PromptKind; 8] {
        [
            PromptKind::Simple,
            PromptKind::ImprovedSimple,
            PromptKind::SimilarLine,
            PromptKind::Reasoning,
            PromptKind::Integrate,
            PromptKind::SeparateCode,
            PromptKind::SeparateExplanation,
            PromptKind::CodeSimilarity,
        ]
    }

    /// Stable identifier used in CLI flags, configs, and reports.
    pub fn name(&self) -> &'static str {
        match self {
            PromptKind::Simple => "simple",
            PromptKind::ImprovedSimple => "improved_simple",
            PromptKind::SimilarLine => "similar_line",
            PromptKind::Reasoning => "reasoning",
            PromptKind::Integrate => "integrate",
            PromptKind::SeparateCode => "separate_code",
            PromptKind::SeparateExplanation => "separate_explanation",
            PromptKind::CodeSimilarity => "code_similarity",
        }
    }

    /// Parse a kind from its stable identifier.
    pub fn from_name(name: &str) -> Option<PromptKind> {
        PromptKind::all().into_iter().find(|k| k.name() == name)
    }

    /// Chat calls one full protocol run makes.
    pub fn chat_calls(&self) -> usize {
        match self {
            PromptKind::SeparateCode => 3, // one explanation per snippet + combiner
            PromptKind::SeparateExplanation => 2, // analysis + decider
            _ => 1,
        }
    }

    /// Distinct templates (render steps) this kind uses.
    pub fn render_steps(&self) -> usize {
        match self {
            PromptKind::SeparateCode | PromptKind::SeparateExplanation => 2,
            _ => 1,
        }
    }

    /// Whether the protocol yields a 0–10 score instead of yes/no.
    pub fn yields_score(&self) -> bool {
        matches!(self, PromptKind::CodeSimilarity)
    }
}

/// Step-1 analysis flavour for the `separate_explanation` protocol.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationVariant {
    Similarity,
    Reasoning,
    Difference,
    #[default]
    Integrated,
}

impl ExplanationVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ExplanationVariant::Similarity => "similarity",
            ExplanationVariant::Reasoning => "reasoning",
            ExplanationVariant::Difference => "difference",
            ExplanationVariant::Integrated => "integrated",
        }
    }
}

/// What a protocol run concluded for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Clone,
    NonClone,
    Undecided,
}

/// Parsed outcome of one protocol run, with every raw response retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    /// Present iff the protocol yields a score (`code_similarity`).
    pub score: Option<f64>,
    /// Raw model responses, one per chat call, in call order.
    pub raw: Vec<String>,
    /// Chat calls actually made.
    pub steps: usize,
    /// Explanation when the run was cut short (e.g. oversize input).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Errors raised while rendering templates.
#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    /// A step-2 render was asked for without the step-1 outputs it needs.
    #[error("step {step} of {kind} needs {expected} prior output(s), got {got}")]
    MissingPrior { kind: &'static str, step: usize, expected: usize, got: usize },
    /// The kind has no such step.
    #[error("{kind} has no step {step}")]
    WrongStep { kind: &'static str, step: usize },
    /// Wrong number of snippets for the kind/step.
    #[error("step {step} of {kind} takes {expected} snippet(s), got {got}")]
    SnippetCount { kind: &'static str, step: usize, expected: usize, got: usize },
}

/// A code snippet to interpolate into a prompt.
#[derive(Debug, Clone, Copy)]
pub struct Snippet<'a> {
    pub language: &'a str,
    pub source: &'a str,
}

const SIMPLE: &str = include_str!("../../assets/prompts/simple.txt");
const IMPROVED_SIMPLE: &str = include_str!("../../assets/prompts/improved_simple.txt");
const SIMILAR_LINE: &str = include_str!("../../assets/prompts/similar_line.txt");
const REASONING: &str = include_str!("../../assets/prompts/reasoning.txt");
const INTEGRATE: &str = include_str!("../../assets/prompts/integrate.txt");
const SEPARATE_CODE_STEP1: &str = include_str!("../../assets/prompts/separate_code_step1.txt");
const SEPARATE_CODE_STEP2: &str = include_str!("../../assets/prompts/separate_code_step2.txt");
const SEPARATE_EXPLANATION_STEP2: &str =
    include_str!("../../assets/prompts/separate_explanation_step2.txt");
const CODE_SIMILARITY: &str = include_str!("../../assets/prompts/code_similarity.txt");
const EXPLANATION_SIMILARITY: &str =
    include_str!("../../assets/prompts/separate_explanation_step1_similarity.txt");
const EXPLANATION_REASONING: &str =
    include_str!("../../assets/prompts/separate_explanation_step1_reasoning.txt");
const EXPLANATION_DIFFERENCE: &str =
    include_str!("../../assets/prompts/separate_explanation_step1_difference.txt");
const EXPLANATION_INTEGRATED: &str =
    include_str!("../../assets/prompts/separate_explanation_step1_integrated.txt");

/// The interpolation slot filled with step-1 outputs.
const PRIOR_SLOT: &str = "{step 1 output}";

/// Raw template text for a kind/step (trailing newline trimmed).
pub fn template_text(
    kind: PromptKind,
    step: usize,
    variant: ExplanationVariant,
) -> Result<&'static str, PromptError> {
    let text = match (kind, step) {
        (PromptKind::Simple, 0) => SIMPLE,
        (PromptKind::ImprovedSimple, 0) => IMPROVED_SIMPLE,
        (PromptKind::SimilarLine, 0) => SIMILAR_LINE,
        (PromptKind::Reasoning, 0) => REASONING,
        (PromptKind::Integrate, 0) => INTEGRATE,
        (PromptKind::CodeSimilarity, 0) => CODE_SIMILARITY,
        (PromptKind::SeparateCode, 0) => SEPARATE_CODE_STEP1,
        (PromptKind::SeparateCode, 1) => SEPARATE_CODE_STEP2,
        (PromptKind::SeparateExplanation, 0) => match variant {
            ExplanationVariant::Similarity => EXPLANATION_SIMILARITY,
            ExplanationVariant::Reasoning => EXPLANATION_REASONING,
            ExplanationVariant::Difference => EXPLANATION_DIFFERENCE,
            ExplanationVariant::Integrated => EXPLANATION_INTEGRATED,
        },
        (PromptKind::SeparateExplanation, 1) => SEPARATE_EXPLANATION_STEP2,
        _ => return Err(PromptError::WrongStep { kind: kind.name(), step }),
    };
    Ok(text.trim_end_matches('\n'))
}

fn fence(snippet: &Snippet) -> String {
    format!("```{}\n{}\n```", snippet.language, snippet.source.trim_end_matches('\n'))
}

fn fill_prior(
    template: &str,
    prior: &[String],
    kind: PromptKind,
    step: usize,
) -> Result<String, PromptError> {
    let slots = template.matches(PRIOR_SLOT).count();
    if prior.len() != slots {
        return Err(PromptError::MissingPrior {
            kind: kind.name(),
            step,
            expected: slots,
            got: prior.len(),
        });
    }
    let mut out = template.to_string();
    for text in prior {
        out = out.replacen(PRIOR_SLOT, text, 1);
    }
    Ok(out)
}

/// Render the message list for one step of a protocol.
///
/// Steps are 0-based. Every kind takes two snippets except
/// `separate_code`: its step 0 explains a single snippet and its step 1
/// (the combiner) works purely on the step-1 outputs passed via `prior`.
pub fn render(
    kind: PromptKind,
    step: usize,
    snippets: &[Snippet],
    prior: &[String],
    variant: ExplanationVariant,
) -> Result<Vec<ChatMessage>, PromptError> {
    let template = template_text(kind, step, variant)?;
    let expected_snippets = match (kind, step) {
        (PromptKind::SeparateCode, 0) => 1,
        (PromptKind::SeparateCode, 1) => 0,
        _ => 2,
    };
    if snippets.len() != expected_snippets {
        return Err(PromptError::SnippetCount {
            kind: kind.name(),
            step,
            expected: expected_snippets,
            got: snippets.len(),
        });
    }
    let instruction = fill_prior(template, prior, kind, step)?;
    let mut content = instruction;
    for snippet in snippets {
        content.push_str("\n\n");
        content.push_str(&fence(snippet));
    }
    Ok(vec![ChatMessage::user(content)])
}

/// Knobs for [`run_protocol`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    /// Step-1 flavour for `separate_explanation`.
    pub variant: ExplanationVariant,
    /// Scores at or above this count as clone when a protocol yields a
    /// score; may be re-thresholded downstream from the retained score.
    pub score_threshold: f64,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self { variant: ExplanationVariant::default(), score_threshold: 5.0 }
    }
}

/// Heuristic for "this request exceeded the provider's context window":
/// a 400 whose body talks about context or token length.
fn is_oversize(error: &ProviderError) -> bool {
    match error {
        ProviderError::Upstream { status: 400, excerpt } => {
            let lower = excerpt.to_ascii_lowercase();
            lower.contains("context") || lower.contains("too long") || lower.contains("token")
        }
        _ => false,
    }
}

/// Run one protocol over a pair of snippets, driving `chat_fn` for every
/// chat call, and parse the outcome.
///
/// Oversize inputs come back as an undecided [`Decision`] with a note (the
/// pair is reported, not silently dropped); all other provider errors
/// propagate.
pub fn run_protocol<F>(
    kind: PromptKind,
    a: &Snippet,
    b: &Snippet,
    options: &ProtocolOptions,
    chat_fn: &mut F,
) -> Result<Decision, ProviderError>
where
    F: FnMut(&[ChatMessage]) -> Result<String, ProviderError>,
{
    let mut raw: Vec<String> = Vec::new();
    // One chat call; an oversize failure short-circuits to `undecided`.
    macro_rules! call {
        ($messages:expr) => {{
            let messages = $messages.map_err(|e: PromptError| {
                ProviderError::InvalidRequest(e.to_string())
            })?;
            match chat_fn(&messages) {
                Ok(text) => {
                    raw.push(text.clone());
                    text
                }
                Err(e) if is_oversize(&e) => {
                    let steps = raw.len();
                    return Ok(Decision {
                        verdict: Verdict::Undecided,
                        score: None,
                        raw,
                        steps,
                        note: Some(format!("input too large for provider: {e}")),
                    });
                }
                Err(e) => return Err(e),
            }
        }};
    }

    let variant = options.variant;
    let (verdict, score) = match kind {
        PromptKind::CodeSimilarity => {
            let text = call!(render(kind, 0, &[*a, *b], &[], variant));
            let score = parse_score(&text);
            let verdict = match score {
                Some(s) if s >= options.score_threshold => Verdict::Clone,
                Some(_) => Verdict::NonClone,
                None => Verdict::Undecided,
            };
            (verdict, score)
        }
        PromptKind::SeparateCode => {
            let first = call!(render(kind, 0, &[*a], &[], variant));
            let second = call!(render(kind, 0, &[*b], &[], variant));
            let text = call!(render(kind, 1, &[], &[first, second], variant));
            (parse_yes_no(&text), None)
        }
        PromptKind::SeparateExplanation => {
            let analysis = call!(render(kind, 0, &[*a, *b], &[], variant));
            let text = call!(render(kind, 1, &[*a, *b], &[analysis], variant));
            (parse_yes_no(&text), None)
        }
        _ => {
            let text = call!(render(kind, 0, &[*a, *b], &[], variant));
            (parse_yes_no(&text), None)
        }
    };
    let steps = raw.len();
    Ok(Decision { verdict, score, raw, steps, note: None })
}

/// Extract a yes/no verdict from free-form text.
///
/// Scans for the standalone words "yes" and "no" (case-insensitive,
/// punctuation-tolerant). Exactly one polarity → that verdict. Both → the
/// final occurrence wins, because chain-of-thought answers put their
/// conclusion last. Neither → undecided. Total: never fails.
pub fn parse_yes_no(text: &str) -> Verdict {
    let lower = text.to_ascii_lowercase();
    let mut verdict = Verdict::Undecided;
    for word in lower.split(|c: char| !c.is_ascii_alphanumeric()) {
        match word {
            "yes" => verdict = Verdict::Clone,
            "no" => verdict = Verdict::NonClone,
            _ => {}
        }
    }
    verdict
}

/// Extract a similarity score in `[0, 10]` from free-form text.
///
/// Takes the first in-range numeric literal, preferring one adjacent
/// (within 16 characters) to a "score" or "similarity" keyword.
/// Out-of-range numbers are skipped, never clamped. Total: never fails.
pub fn parse_score(text: &str) -> Option<f64> {
    let lower = text.to_ascii_lowercase();
    let literals = numeric_literals(&lower);
    let in_range: Vec<&(usize, usize, f64)> =
        literals.iter().filter(|(_, _, v)| (0.0..=10.0).contains(v)).collect();
    let keywords = keyword_spans(&lower, &["score", "similarity"]);
    let adjacent = in_range.iter().find(|(start, end, _)| {
        keywords.iter().any(|&(ks, ke)| {
            (*start >= ke && *start - ke <= 16) || (ks >= *end && ks - *end <= 16)
        })
    });
    adjacent.or(in_range.first()).map(|(_, _, v)| *v)
}

/// `(start, end, value)` for every standalone unsigned numeric literal.
fn numeric_literals(text: &str) -> Vec<(usize, usize, f64)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        let end = i;
        let bounded_before = start == 0
            || (!bytes[start - 1].is_ascii_alphanumeric() && bytes[start - 1] != b'.');
        // A trailing dot only disqualifies when another digit follows (a
        // second decimal point, as in "1.2.3"); a sentence-final "… is 10."
        // still counts.
        let dotted_digit = end + 1 < bytes.len()
            && bytes[end] == b'.'
            && bytes[end + 1].is_ascii_digit();
        let bounded_after =
            end == bytes.len() || (!bytes[end].is_ascii_alphanumeric() && !dotted_digit);
        if bounded_before && bounded_after {
            if let Ok(value) = text[start..end].parse::<f64>() {
                out.push((start, end, value));
            }
        }
    }
    out
}

/// Byte spans of whole-word keyword occurrences.
fn keyword_spans(text: &str, keywords: &[&str]) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    for keyword in keywords {
        let mut from = 0;
        while let Some(pos) = text[from..].find(keyword) {
            let start = from + pos;
            let end = start + keyword.len();
            let ok_before = start == 0 || !bytes[start - 1].is_ascii_alphanumeric();
            let ok_after = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
            if ok_before && ok_after {
                spans.push((start, end));
            }
            from = start + 1;
        }
    }
    spans.sort_unstable();
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snip_a() -> Snippet<'static> {
        Snippet { language: "java", source: "int add(int a, int b) { return a + b; }" }
    }

    fn snip_b() -> Snippet<'static> {
        Snippet { language: "python", source: "def add(a, b):\n    return a + b" }
    }

    #[test]
    fn simple_render_contains_the_instruction_and_both_fences() {
        let messages = render(
            PromptKind::Simple,
            0,
            &[snip_a(), snip_b()],
            &[],
            ExplanationVariant::default(),
        )
        .unwrap();
        assert_eq!(messages.len(), 1);
        let content = &messages[0].content;
        assert!(content
            .contains("Analyze the following two code snippets and determine whether they are clones"));
        assert!(content.contains("```java\n"));
        assert!(content.contains("```python\n"));
    }

    #[test]
    fn separate_code_step_zero_takes_one_snippet() {
        let messages =
            render(PromptKind::SeparateCode, 0, &[snip_a()], &[], ExplanationVariant::default())
                .unwrap();
        assert!(messages[0].content.contains("explain the function of the snippet"));
        assert!(render(
            PromptKind::SeparateCode,
            0,
            &[snip_a(), snip_b()],
            &[],
            ExplanationVariant::default()
        )
        .is_err());
    }

    #[test]
    fn improved_simple_mentions_similar_task() {
        let messages = render(
            PromptKind::ImprovedSimple,
            0,
            &[snip_a(), snip_b()],
            &[],
            ExplanationVariant::default(),
        )
        .unwrap();
        assert!(messages[0].content.contains("perform a similar task"));
    }

    #[test]
    fn combiner_interpolates_both_priors_in_order() {
        let prior = vec!["adds two integers".to_string(), "adds two numbers".to_string()];
        let messages =
            render(PromptKind::SeparateCode, 1, &[], &prior, ExplanationVariant::default())
                .unwrap();
        let content = &messages[0].content;
        assert!(content
            .contains("The function of the first code snippet is adds two integers"));
        assert!(content.contains("the function of the second is adds two numbers"));
        assert!(!content.contains(PRIOR_SLOT));
    }

    #[test]
    fn missing_prior_and_wrong_step_are_rejected() {
        assert!(matches!(
            render(PromptKind::SeparateCode, 1, &[], &[], ExplanationVariant::default()),
            Err(PromptError::MissingPrior { .. })
        ));
        assert!(matches!(
            render(PromptKind::Simple, 1, &[snip_a(), snip_b()], &[], ExplanationVariant::default()),
            Err(PromptError::WrongStep { .. })
        ));
    }

    #[test]
    fn protocol_step_counts() {
        for kind in PromptKind::all() {
            let expected = match kind {
                PromptKind::SeparateCode => 3,
                PromptKind::SeparateExplanation => 2,
                _ => 1,
            };
            assert_eq!(kind.chat_calls(), expected, "{}", kind.name());
        }
    }

    #[test]
    fn run_protocol_counts_calls_and_parses() {
        let mut calls = 0;
        let mut chat = |_messages: &[ChatMessage]| {
            calls += 1;
            Ok("Yes.".to_string())
        };
        let decision = run_protocol(
            PromptKind::Simple,
            &snip_a(),
            &snip_b(),
            &ProtocolOptions::default(),
            &mut chat,
        )
        .unwrap();
        assert_eq!(decision.verdict, Verdict::Clone);
        assert_eq!(decision.steps, 1);
        assert_eq!(calls, 1);
    }

    #[test]
    fn separate_code_makes_three_calls_and_reads_the_last_answer() {
        let mut responses =
            vec!["explains A".to_string(), "explains B".to_string(), "no".to_string()].into_iter();
        let mut chat = |_messages: &[ChatMessage]| Ok(responses.next().expect("scripted"));
        let decision = run_protocol(
            PromptKind::SeparateCode,
            &snip_a(),
            &snip_b(),
            &ProtocolOptions::default(),
            &mut chat,
        )
        .unwrap();
        assert_eq!(decision.verdict, Verdict::NonClone);
        assert_eq!(decision.steps, 3);
        assert_eq!(decision.raw.len(), 3);
    }

    #[test]
    fn code_similarity_thresholds_its_score() {
        let mut chat = |_m: &[ChatMessage]| Ok("I rate it 7/10".to_string());
        let decision = run_protocol(
            PromptKind::CodeSimilarity,
            &snip_a(),
            &snip_b(),
            &ProtocolOptions::default(),
            &mut chat,
        )
        .unwrap();
        assert_eq!(decision.score, Some(7.0));
        assert_eq!(decision.verdict, Verdict::Clone);
        assert_eq!(decision.steps, 1);
    }

    #[test]
    fn oversize_input_becomes_undecided_with_note() {
        let mut chat = |_m: &[ChatMessage]| {
            Err(ProviderError::Upstream {
                status: 400,
                excerpt: "maximum context length exceeded".into(),
            })
        };
        let decision = run_protocol(
            PromptKind::Simple,
            &snip_a(),
            &snip_b(),
            &ProtocolOptions::default(),
            &mut chat,
        )
        .unwrap();
        assert_eq!(decision.verdict, Verdict::Undecided);
        assert!(decision.note.unwrap().contains("too large"));
    }

    #[test]
    fn other_provider_errors_propagate() {
        let mut chat = |_m: &[ChatMessage]| Err(ProviderError::Auth);
        let result = run_protocol(
            PromptKind::Simple,
            &snip_a(),
            &snip_b(),
            &ProtocolOptions::default(),
            &mut chat,
        );
        assert!(matches!(result, Err(ProviderError::Auth)));
    }
}
