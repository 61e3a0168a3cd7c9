//! Cross-lingual code clone detection toolkit.
//!
//! `xclone` builds balanced clone-detection benchmarks from multilingual
//! programming-problem corpora and runs three families of detectors over
//! them:
//!
//! 1. **LLM detectors** — prompt an OpenAI-compatible chat model with one of
//!    eight prompt protocols and parse its verdict ([`prompts`],
//!    [`detectors`]).
//! 2. **Embedding detectors** — embed both snippets and compare with a
//!    cosine-similarity threshold ([`detectors`]).
//! 3. **Trained classifiers** — SVM and k-NN over absolute-difference
//!    embedding features, trained from scratch in [`ml`].
//!
//! The pipeline is: ingest a corpus ([`corpus`]), construct balanced
//! clone/non-clone pairs ([`pairing`]), run a detector, and score the
//! decisions ([`eval`]). Everything is driven either from the library API or
//! the `xclone` command-line binary ([`cli`]).
//!
//! Network access goes through [`providers`], which caches every embedding
//! and chat response on disk so repeated runs are free and offline runs are
//! reproducible. [`testkit`] generates synthetic bilingual corpora and serves
//! mock providers over real HTTP for hermetic end-to-end tests.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod detectors;
pub mod eval;
pub mod ml;
pub mod pairing;
pub mod prompts;
pub mod providers;
pub mod testkit;

/// The guide under `book/` is part of the test suite: every fenced Rust
/// block in its chapters compiles and runs as a doc-test here, so the
/// prose cannot drift from the API it describes.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/providers.md")]
    mod providers {}
    #[doc = include_str!("../../../book/src/prompting.md")]
    mod prompting {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    mod classifiers {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
