//! Fixtures shared across integration-test crates.
#![allow(dead_code)] // each test crate uses a different subset

use xclone::prompts::{render, ExplanationVariant, PromptKind, Snippet, Verdict};
use xclone::providers::ChatMessage;

/// Two functionally identical snippets in different languages, used to pin
/// the rendered prompt texts.
pub const SNIPPET_A: Snippet<'static> = Snippet {
    language: "java",
    source: "int total = 0;\nfor (int x : xs) {\n    if (x > 0) total += x;\n}\nreturn total;",
};

pub const SNIPPET_B: Snippet<'static> = Snippet {
    language: "python",
    source: "total = 0\nfor x in xs:\n    if x > 0:\n        total += x\nreturn total",
};

/// Serialize rendered messages to the stable text form the golden files use.
pub fn messages_to_text(messages: &[ChatMessage]) -> String {
    let mut out = String::new();
    for message in messages {
        out.push_str(&format!("[{}]\n{}\n", message.role.as_str(), message.content));
    }
    out
}

/// Every distinct template rendering: all 8 protocols, both steps of the
/// two-step ones, and all four `separate_explanation` analysis flavours.
pub fn golden_cases() -> Vec<(&'static str, Vec<ChatMessage>)> {
    use ExplanationVariant as V;
    use PromptKind as K;
    let a = SNIPPET_A;
    let b = SNIPPET_B;
    let two = [a, b];
    let explanations = [
        "The first snippet sums the positive integers in a list.".to_string(),
        "The second snippet sums the positive integers in a list.".to_string(),
    ];
    let analysis = ["Both snippets accumulate the positive entries of a sequence; \
         control flow and arithmetic match line for line."
        .to_string()];
    let r = |kind, step, snippets: &[Snippet], prior: &[String], variant| {
        render(kind, step, snippets, prior, variant).expect("fixture renders")
    };
    vec![
        ("simple", r(K::Simple, 0, &two, &[], V::Integrated)),
        ("improved_simple", r(K::ImprovedSimple, 0, &two, &[], V::Integrated)),
        ("similar_line", r(K::SimilarLine, 0, &two, &[], V::Integrated)),
        ("reasoning", r(K::Reasoning, 0, &two, &[], V::Integrated)),
        ("integrate", r(K::Integrate, 0, &two, &[], V::Integrated)),
        ("separate_code.step1", r(K::SeparateCode, 0, &[a], &[], V::Integrated)),
        ("separate_code.step2", r(K::SeparateCode, 1, &[], &explanations, V::Integrated)),
        (
            "separate_explanation.similarity.step1",
            r(K::SeparateExplanation, 0, &two, &[], V::Similarity),
        ),
        (
            "separate_explanation.reasoning.step1",
            r(K::SeparateExplanation, 0, &two, &[], V::Reasoning),
        ),
        (
            "separate_explanation.difference.step1",
            r(K::SeparateExplanation, 0, &two, &[], V::Difference),
        ),
        (
            "separate_explanation.integrated.step1",
            r(K::SeparateExplanation, 0, &two, &[], V::Integrated),
        ),
        (
            "separate_explanation.step2",
            r(K::SeparateExplanation, 1, &two, &analysis, V::Integrated),
        ),
        ("code_similarity", r(K::CodeSimilarity, 0, &two, &[], V::Integrated)),
    ]
}

/// Yes/no parser fixtures: decisive answers, both-polarity answers where
/// the conclusion comes last, and text with no verdict at all.
pub fn yes_no_cases() -> Vec<(&'static str, Verdict)> {
    use Verdict::{Clone, NonClone, Undecided};
    vec![
        ("Yes.", Clone),
        ("yes, they are clones", Clone),
        ("YES!", Clone),
        ("The answer is Yes.", Clone),
        ("\"Yes\" — same task.", Clone),
        ("No.", NonClone),
        ("no — different tasks entirely", NonClone),
        ("no no no", NonClone),
        ("Yes at first glance, but on closer reading: no.", NonClone),
        ("I leaned no initially; final answer: yes.", Clone),
        ("Snippet A parses input; snippet B sorts numbers.", Undecided),
        ("Nope.", Undecided),
        ("yesterday's run matched", Undecided),
        ("It is hard to tell whether these snippets are related without more context.", Undecided),
    ]
}

/// Score parser fixtures: plain scores, decimals, keyword adjacency, and
/// out-of-range numbers that must be skipped rather than clamped.
pub fn score_cases() -> Vec<(&'static str, Option<f64>)> {
    vec![
        ("Similarity score: 9", Some(9.0)),
        ("Similarity score: 9.5/10", Some(9.5)),
        ("I would give these a 3 out of 10.", Some(3.0)),
        ("score = 0", Some(0.0)),
        ("Their similarity is 10.", Some(10.0)),
        ("Score: 11 (beyond the scale)", None),
        ("The runtime is 42 ms but the similarity score is 8.", Some(8.0)),
        ("No numbers here.", None),
    ]
}
