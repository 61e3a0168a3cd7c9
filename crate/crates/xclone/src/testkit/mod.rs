//! Deterministic offline substitutes for the provider layer.
//!
//! Everything the real pipeline needs from the network has a seeded stand-in
//! here:
//!
//! * [`synth::generate_corpus`] builds a bilingual corpus whose problems
//!   carry *marker tokens* (`m0042z`) and unit *latent vectors* with known
//!   geometry — tight groups that DBSCAN must find, wide gaps everywhere
//!   else;
//! * [`mock::MockEmbedder`] maps any text containing a marker to its latent
//!   plus a small seeded perturbation, so embedding-based detectors behave
//!   exactly as the geometry dictates;
//! * [`mock::MockChat`] answers rendered prompts by comparing the markers
//!   inside the fenced snippets;
//! * [`server::MockServer`] serves both mocks over real HTTP, so client
//!   code — retries, caching, concurrency limits — is exercised rather than
//!   bypassed.
//!
//! With a fixed seed the whole chain, corpus through reports, is
//! byte-identical across runs.

pub mod mock;
pub mod server;
pub mod synth;

pub use mock::{MockChat, MockEmbedder};
pub use server::MockServer;
pub use synth::{generate_corpus, SyntheticCorpus, SyntheticSpec};

use crate::corpus::CorpusError;

/// Errors from synthetic-corpus generation.
#[derive(Debug, thiserror::Error)]
pub enum TestkitError {
    /// Structurally invalid generator settings.
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    /// Could not place enough well-separated latent vectors.
    #[error("could not place {needed} well-separated latent groups in {dim} dimensions")]
    RejectionOverflow { needed: usize, dim: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The marker token for problem `index`: `m0042z` for index 42.
pub fn marker(index: usize) -> String {
    format!("m{index:04}z")
}

/// All distinct marker tokens in `text`, in order of first appearance.
///
/// A marker is `m`, four ASCII digits, `z`, with no alphanumeric characters
/// touching either end.
pub fn find_markers(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let mut found: Vec<String> = Vec::new();
    let mut i = 0;
    while i + 6 <= bytes.len() {
        let boundary_before = i == 0 || !bytes[i - 1].is_ascii_alphanumeric();
        let boundary_after = i + 6 == bytes.len() || !bytes[i + 6].is_ascii_alphanumeric();
        if bytes[i] == b'm'
            && boundary_before
            && boundary_after
            && bytes[i + 1..i + 5].iter().all(u8::is_ascii_digit)
            && bytes[i + 5] == b'z'
        {
            let token = text[i..i + 6].to_string();
            if !found.contains(&token) {
                found.push(token);
            }
            i += 6;
        } else {
            i += 1;
        }
    }
    found
}

/// A 64-bit seed derived from `text` and `salt`, stable across runs and
/// platforms.
pub(crate) fn text_seed(text: &str, salt: u64) -> u64 {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(salt.to_le_bytes());
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}
