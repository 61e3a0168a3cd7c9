//! From-scratch numerical core: vector similarity, pair featurization,
//! k-nearest-neighbour search (brute force and kd-tree), a soft-margin SVM
//! trained by sequential minimal optimization, and DBSCAN clustering.
//!
//! Everything in this module is deterministic: training takes an explicit
//! seed, prediction is pure, and all tie-breaking rules are documented on
//! the functions that apply them. No external numerics crates are used —
//! these algorithms are the point of the toolkit, not plumbing.

mod dbscan;
mod kdtree;
mod knn;
mod similarity;
mod svm;

pub use dbscan::dbscan;
pub use kdtree::KdTree;
pub use knn::{KnnBackend, KnnModel};
pub use similarity::{abs_diff_features, cosine_distance, cosine_similarity};
pub use svm::{
    svm_train, svm_train_diagnostic, Kernel, KernelConfig, SvmDiagnostics, SvmModel, SvmParams,
};

/// A fixed-length real-valued feature vector (all entries finite).
pub type FeatureVector = Vec<f64>;

/// Errors raised by the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum MlError {
    /// Two vectors (or a model and a query) disagree on dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A zero vector has no direction, so cosine quantities are undefined.
    #[error("zero vector has no direction")]
    ZeroVector,
    /// Training data contains fewer than one example of each class.
    #[error("training data must contain both classes")]
    DegenerateData,
    /// An input value is NaN or infinite.
    #[error("non-finite value in input")]
    NonFinite,
    /// A structurally invalid parameter (k = 0, eps ≤ 0, …).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn check_same_dim(u: &[f64], v: &[f64]) -> Result<(), MlError> {
    if u.len() != v.len() {
        return Err(MlError::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    Ok(())
}

pub(crate) fn check_finite(values: &[f64]) -> Result<(), MlError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MlError::NonFinite);
    }
    Ok(())
}
