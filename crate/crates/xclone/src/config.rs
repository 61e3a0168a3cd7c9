//! One TOML file for the whole pipeline, with flag overrides on top.
//!
//! Every field has a default, so an empty (or absent) file is a valid
//! configuration; a file sets only what it cares about; command-line flags
//! override the file. The fully resolved configuration is echoed into the
//! output directory on every run that writes one, so results stay
//! reproducible from their own provenance.
//!
//! The API credential is deliberately *not* part of this structure: it is
//! read from the environment variable named by `provider.api_key_env`.

use crate::eval::LearnerSpec;
use crate::ml::SvmParams;
use crate::pairing::PairingConfig;
use crate::prompts::{ExplanationVariant, PromptKind};
use crate::providers::ProviderConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Errors raised while loading or writing configuration.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Unreadable { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Detector knobs shared by the `detect` command's backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Cosine similarity at or above this counts as clone.
    pub cosine_threshold: f64,
    /// 0–10 score at or above this counts as clone.
    pub score_threshold: f64,
    /// Default prompt protocol for the LLM backend.
    pub prompt: PromptKind,
    /// Step-1 flavour for `separate_explanation`.
    pub variant: ExplanationVariant,
    /// Label assigned to undecided LLM runs (`clone` or `non_clone`).
    pub fallback: crate::pairing::PairLabel,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            cosine_threshold: 0.5,
            score_threshold: 5.0,
            prompt: PromptKind::ImprovedSimple,
            variant: ExplanationVariant::default(),
            fallback: crate::pairing::PairLabel::NonClone,
        }
    }
}

/// Evaluation knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Folds for cross-validation.
    pub cv_folds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { cv_folds: 10 }
    }
}

/// The resolved run configuration: paths, provider, pairing, detector,
/// learner, and evaluation settings. `seed` is always explicit here — it
/// drives pair shuffling, fold assignment, and SVM scan order alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub corpus_path: PathBuf,
    pub benchmark_path: PathBuf,
    pub cache_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub provider: ProviderConfig,
    pub pairing: PairingConfig,
    pub detector: DetectorConfig,
    pub learner: LearnerSpec,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus_path: "corpus.jsonl".into(),
            benchmark_path: "benchmark.jsonl".into(),
            cache_path: "cache/responses.jsonl".into(),
            out_dir: "out".into(),
            seed: 42,
            provider: ProviderConfig::default(),
            pairing: PairingConfig::default(),
            detector: DetectorConfig::default(),
            learner: LearnerSpec::Svm(SvmParams::default()),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    /// Load from a TOML file; `None` yields the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Unreadable { path: path.to_path_buf(), source })?;
        Ok(toml::from_str(&text)?)
    }

    /// Push the run seed into every component that takes one, so a single
    /// `--seed` flag reseeds the whole pipeline.
    pub fn propagate_seed(&mut self) {
        self.pairing.seed = self.seed;
        if let LearnerSpec::Svm(params) = &mut self.learner {
            params.seed = self.seed;
        }
    }

    /// The resolved configuration as TOML, for the provenance echo.
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Create the output directory and write `resolved.toml` into it.
    pub fn echo_into_out_dir(&self) -> Result<PathBuf, ConfigError> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join("resolved.toml");
        std::fs::write(&path, self.to_toml()?)?;
        Ok(path)
    }
}
