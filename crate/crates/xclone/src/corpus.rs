//! Problem corpus: data model, JSONL ingestion, and complexity scoring.
//!
//! A corpus is a list of programming problems, each carrying a natural
//! language description and one code sample per (submission, language). Only
//! samples with `status = accepted` survive ingestion — we trust code that
//! judges have validated, nothing else.
//!
//! Every accepted sample is scored with a token-count approximation of
//! cyclomatic complexity: `1 + number of decision tokens` found after
//! stripping comments and string literals. This is deliberately not
//! AST-based; a per-language keyword table keeps it extensible to any
//! language without a parser. Nested block comments and exotic literal forms
//! are not handled (a documented limitation of the stripper).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Errors raised while loading, validating, or scoring a corpus.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    /// A JSONL line failed schema validation (1-based line number).
    #[error("line {0}: malformed corpus record")]
    MalformedRecord(usize),
    /// Two records share a `problem_id`.
    #[error("duplicate problem id `{0}`")]
    DuplicateProblemId(String),
    /// No valid problems remained after filtering.
    #[error("corpus contains no valid problems")]
    EmptyCorpus,
    /// No keyword table is registered for a sample's language.
    #[error("no keyword table registered for language `{0}`")]
    UnknownLanguage(String),
    /// A problem has no samples to aggregate over.
    #[error("problem `{0}` has no samples")]
    NoSamples(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Review status of a code sample. Only accepted samples are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleStatus {
    Accepted,
    Other,
}

/// One code snippet solving a problem in a specific language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSample {
    /// Id of the problem this sample solves.
    pub problem_id: String,
    /// Lowercase language tag, e.g. `"java"`, `"cpp"`, `"python"`.
    pub language: String,
    /// Full source text.
    pub source: String,
    /// Review status; always [`SampleStatus::Accepted`] after ingestion.
    pub status: SampleStatus,
    /// Token-count cyclomatic complexity (≥ 1), computed at load time.
    pub complexity: usize,
}

/// A programming problem with its accepted solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    /// Opaque id, unique across the corpus.
    pub problem_id: String,
    /// Natural-language problem statement (non-empty).
    pub description: String,
    /// Accepted code samples, all carrying this `problem_id`.
    pub samples: Vec<CodeSample>,
}

impl Problem {
    /// Samples written in `language`.
    pub fn samples_in<'a>(&'a self, language: &'a str) -> impl Iterator<Item = &'a CodeSample> + 'a {
        self.samples.iter().filter(move |s| s.language == language)
    }
}

/// Per-language token tables: decision tokens for complexity counting plus
/// the comment and string syntax the stripper needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageKeywordTable {
    /// Lowercase language tag this table describes.
    pub language: String,
    /// Tokens counted as branch points. Identifier-like tokens are matched
    /// on word boundaries; symbolic tokens (`&&`, `||`, `?`) as substrings.
    pub decision_tokens: Vec<String>,
    /// Markers that start a comment running to end of line.
    pub line_comments: Vec<String>,
    /// (open, close) delimiter pairs for block comments. Nesting is not
    /// handled.
    pub block_comments: Vec<(String, String)>,
    /// Quote characters that delimit string literals.
    pub string_delimiters: Vec<char>,
    /// Subset of `string_delimiters` with no backslash escapes (raw
    /// strings, e.g. Go's backtick).
    pub raw_string_delimiters: Vec<char>,
}

impl LanguageKeywordTable {
    fn new(
        language: &str,
        decision_tokens: &[&str],
        line_comments: &[&str],
        block_comments: &[(&str, &str)],
        string_delimiters: &[char],
        raw_string_delimiters: &[char],
    ) -> Self {
        Self {
            language: language.to_string(),
            decision_tokens: decision_tokens.iter().map(|t| t.to_string()).collect(),
            line_comments: line_comments.iter().map(|t| t.to_string()).collect(),
            block_comments: block_comments
                .iter()
                .map(|(o, c)| (o.to_string(), c.to_string()))
                .collect(),
            string_delimiters: string_delimiters.to_vec(),
            raw_string_delimiters: raw_string_delimiters.to_vec(),
        }
    }
}

/// Registry of all languages the toolkit understands, keyed by tag.
///
/// [`LanguageRegistry::default`] ships tables for the eleven languages used
/// by the bundled benchmarks; callers may register additional ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageRegistry {
    tables: BTreeMap<String, LanguageKeywordTable>,
}

impl LanguageRegistry {
    /// Empty registry with no languages.
    pub fn empty() -> Self {
        Self { tables: BTreeMap::new() }
    }

    /// Add or replace a language table.
    pub fn register(&mut self, table: LanguageKeywordTable) {
        self.tables.insert(table.language.clone(), table);
    }

    /// Look up the table for `language`.
    pub fn table(&self, language: &str) -> Result<&LanguageKeywordTable, CorpusError> {
        self.tables
            .get(language)
            .ok_or_else(|| CorpusError::UnknownLanguage(language.to_string()))
    }

    /// Whether `language` is registered.
    pub fn contains(&self, language: &str) -> bool {
        self.tables.contains_key(language)
    }

    /// Registered language tags, sorted.
    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }
}

impl Default for LanguageRegistry {
    fn default() -> Self {
        let c_like_comments: &[&str] = &["//"];
        let c_like_blocks: &[(&str, &str)] = &[("/*", "*/")];
        let mut reg = Self::empty();
        for table in [
            LanguageKeywordTable::new(
                "java",
                &["if", "for", "while", "case", "catch", "&&", "||", "?"],
                c_like_comments,
                c_like_blocks,
                &['"', '\''],
                &[],
            ),
            LanguageKeywordTable::new(
                "c",
                &["if", "for", "while", "case", "&&", "||", "?"],
                c_like_comments,
                c_like_blocks,
                &['"', '\''],
                &[],
            ),
            LanguageKeywordTable::new(
                "cpp",
                &["if", "for", "while", "case", "catch", "&&", "||", "?"],
                c_like_comments,
                c_like_blocks,
                &['"', '\''],
                &[],
            ),
            LanguageKeywordTable::new(
                "csharp",
                &["if", "for", "foreach", "while", "case", "catch", "&&", "||", "?"],
                c_like_comments,
                c_like_blocks,
                &['"', '\''],
                &[],
            ),
            LanguageKeywordTable::new(
                "python",
                &["if", "elif", "for", "while", "except", "and", "or"],
                &["#"],
                &[],
                &['"', '\''],
                &[],
            ),
            LanguageKeywordTable::new(
                "javascript",
                &["if", "for", "while", "case", "catch", "&&", "||", "?"],
                c_like_comments,
                c_like_blocks,
                &['"', '\'', '`'],
                &[],
            ),
            LanguageKeywordTable::new(
                "php",
                &["if", "elseif", "for", "foreach", "while", "case", "catch", "&&", "||", "and", "or", "?"],
                &["//", "#"],
                c_like_blocks,
                &['"', '\''],
                &[],
            ),
            LanguageKeywordTable::new(
                "go",
                &["if", "for", "case", "&&", "||"],
                c_like_comments,
                c_like_blocks,
                &['"', '\'', '`'],
                &['`'],
            ),
            LanguageKeywordTable::new(
                "ruby",
                &["if", "elsif", "unless", "while", "until", "for", "when", "rescue", "&&", "||", "and", "or"],
                &["#"],
                &[],
                &['"', '\''],
                &[],
            ),
            // Rust: `'` is not a string delimiter — lifetimes (`'a`) would
            // desynchronise the stripper.
            LanguageKeywordTable::new(
                "rust",
                &["if", "while", "for", "match", "&&", "||"],
                c_like_comments,
                c_like_blocks,
                &['"'],
                &[],
            ),
            LanguageKeywordTable::new(
                "ocaml",
                &["if", "match", "while", "for", "when", "&&", "||"],
                &[],
                &[("(*", "*)")],
                &['"'],
                &[],
            ),
        ] {
            reg.register(table);
        }
        reg
    }
}

/// Remove comments and string-literal contents from `source` according to
/// the language's tables. Stripped regions collapse to a single space so
/// adjacent tokens never fuse. Unterminated comments or strings consume the
/// rest of the input.
pub fn strip_comments_and_strings(source: &str, table: &LanguageKeywordTable) -> String {
    let bytes = source.as_bytes();
    let mut out: Vec<u8> = Vec::with_capacity(bytes.len());
    let mut i = 0;
    'scan: while i < bytes.len() {
        for marker in &table.line_comments {
            if bytes[i..].starts_with(marker.as_bytes()) {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue 'scan;
            }
        }
        for (open, close) in &table.block_comments {
            if bytes[i..].starts_with(open.as_bytes()) {
                i += open.len();
                while i < bytes.len() && !bytes[i..].starts_with(close.as_bytes()) {
                    i += 1;
                }
                i = (i + close.len()).min(bytes.len());
                out.push(b' ');
                continue 'scan;
            }
        }
        let c = bytes[i];
        let is_delim = c.is_ascii()
            && table.string_delimiters.contains(&(c as char));
        if is_delim {
            let raw = table.raw_string_delimiters.contains(&(c as char));
            i += 1;
            while i < bytes.len() {
                if !raw && bytes[i] == b'\\' {
                    i += 2;
                    continue;
                }
                if bytes[i] == c {
                    i += 1;
                    break;
                }
                i += 1;
            }
            out.push(b' ');
            continue;
        }
        out.push(c);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn is_word_token(token: &str) -> bool {
    !token.is_empty() && token.bytes().all(is_word_byte)
}

/// Count whole-word occurrences of `word` (boundaries: non `[A-Za-z0-9_]`).
fn count_word(text: &str, word: &str) -> usize {
    let bytes = text.as_bytes();
    let mut count = 0;
    let mut start = 0;
    while start < text.len() {
        let Some(found) = text[start..].find(word) else {
            break;
        };
        let at = start + found;
        let end = at + word.len();
        let boundary_before = at == 0 || !is_word_byte(bytes[at - 1]);
        let boundary_after = end == bytes.len() || !is_word_byte(bytes[end]);
        if boundary_before && boundary_after {
            count += 1;
            start = end;
        } else {
            start = at + 1;
        }
    }
    count
}

/// Count non-overlapping occurrences of `needle`, left to right.
fn count_substring(text: &str, needle: &str) -> usize {
    let mut count = 0;
    let mut rest = text;
    while let Some(pos) = rest.find(needle) {
        count += 1;
        rest = &rest[pos + needle.len()..];
    }
    count
}

/// Token-count cyclomatic complexity: `1 +` decision tokens remaining after
/// comment/string stripping. Deterministic for a fixed table.
pub fn compute_complexity(source: &str, table: &LanguageKeywordTable) -> usize {
    let stripped = strip_comments_and_strings(source, table);
    let mut decisions = 0;
    for token in &table.decision_tokens {
        decisions += if is_word_token(token) {
            count_word(&stripped, token)
        } else {
            count_substring(&stripped, token)
        };
    }
    1 + decisions
}

/// Problem-level complexity: the maximum over its samples.
///
/// The benchmark builder picks "the most complex" problem and code, so a
/// problem is as hard as its hardest accepted sample.
pub fn problem_complexity(problem: &Problem) -> Result<usize, CorpusError> {
    problem
        .samples
        .iter()
        .map(|s| s.complexity)
        .max()
        .ok_or_else(|| CorpusError::NoSamples(problem.problem_id.clone()))
}

// On-disk JSONL shape. Samples carry no problem_id or complexity in the
// file; both are filled in during validation.
#[derive(Serialize, Deserialize)]
struct RawRecord {
    problem_id: String,
    description: String,
    samples: Vec<RawSample>,
}

#[derive(Serialize, Deserialize)]
struct RawSample {
    language: String,
    source: String,
    status: SampleStatus,
}

/// Load and validate a JSONL corpus from `path`.
///
/// Samples with `status != accepted` are dropped; problems left with no
/// accepted samples are dropped too. Every surviving sample gets its
/// complexity computed against `registry`. Blank lines are skipped.
pub fn load_corpus(
    path: impl AsRef<Path>,
    registry: &LanguageRegistry,
) -> Result<Vec<Problem>, CorpusError> {
    let text = fs::read_to_string(path)?;
    load_corpus_from_str(&text, registry)
}

/// [`load_corpus`] over an in-memory JSONL string.
pub fn load_corpus_from_str(
    text: &str,
    registry: &LanguageRegistry,
) -> Result<Vec<Problem>, CorpusError> {
    let mut problems: Vec<Problem> = Vec::new();
    let mut seen_ids: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(line).map_err(|_| CorpusError::MalformedRecord(line_no))?;
        if raw.problem_id.trim().is_empty() || raw.description.trim().is_empty() {
            return Err(CorpusError::MalformedRecord(line_no));
        }
        if !seen_ids.insert(raw.problem_id.clone()) {
            return Err(CorpusError::DuplicateProblemId(raw.problem_id));
        }
        let mut samples = Vec::new();
        for sample in raw.samples {
            if sample.status != SampleStatus::Accepted {
                continue;
            }
            if sample.source.trim().is_empty() {
                return Err(CorpusError::MalformedRecord(line_no));
            }
            let table = registry.table(&sample.language)?;
            let complexity = compute_complexity(&sample.source, table);
            samples.push(CodeSample {
                problem_id: raw.problem_id.clone(),
                language: sample.language,
                source: sample.source,
                status: SampleStatus::Accepted,
                complexity,
            });
        }
        if samples.is_empty() {
            continue; // nothing usable for this problem
        }
        problems.push(Problem {
            problem_id: raw.problem_id,
            description: raw.description,
            samples,
        });
    }
    if problems.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(problems)
}

/// Serialize `problems` back to corpus JSONL (inverse of [`load_corpus`] on
/// the validated model, up to recomputed complexities).
pub fn save_corpus(problems: &[Problem], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut file = fs::File::create(path)?;
    for problem in problems {
        let raw = RawRecord {
            problem_id: problem.problem_id.clone(),
            description: problem.description.clone(),
            samples: problem
                .samples
                .iter()
                .map(|s| RawSample {
                    language: s.language.clone(),
                    source: s.source.clone(),
                    status: s.status,
                })
                .collect(),
        };
        let json = serde_json::to_string(&raw).expect("corpus record serializes");
        writeln!(file, "{json}")?;
    }
    Ok(())
}
