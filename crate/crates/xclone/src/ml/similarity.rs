//! Vector similarity primitives and pair featurization.

use super::{check_same_dim, MlError};

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn euclidean_sq(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Cosine similarity `u·v / (‖u‖‖v‖)`, clamped to `[-1, 1]` so rounding can
/// never push it out of range.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, MlError> {
    check_same_dim(u, v)?;
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(MlError::ZeroVector);
    }
    if u == v {
        return Ok(1.0); // identical inputs: identity holds exactly, skip rounding
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Cosine distance `1 − cosine_similarity`, in `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64, MlError> {
    Ok(1.0 - cosine_similarity(u, v)?)
}

/// Featurize an embedding pair as the elementwise absolute difference
/// `|aᵢ − bᵢ|`. Symmetric in its arguments, so classifiers trained on these
/// features cannot depend on pair order.
pub fn abs_diff_features(a: &[f64], b: &[f64]) -> Result<Vec<f64>, MlError> {
    check_same_dim(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect())
}
