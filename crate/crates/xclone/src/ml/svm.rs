//! Soft-margin SVM trained by sequential minimal optimization (SMO).
//!
//! The optimizer follows the classical recipe: scan for a KKT violator,
//! pick the partner that maximizes |E₁ − E₂| among non-bound points, fall
//! back to seeded-random scans, and solve the two-variable subproblem
//! analytically. Every accepted update maximizes the dual restricted to a
//! feasible segment, so the dual objective never decreases — tests probe
//! exactly that. Errors are always recomputed from the current α and b;
//! there is no cache to go stale. The bias is re-centred on the interval
//! the KKT conditions allow before each pass (and once at the end), which
//! keeps the violation scan honest even when every support vector sits at
//! a box corner and the per-step estimate would drift.
//!
//! Training is meant for benchmark-scale data (thousands of points, not
//! millions): the kernel matrix is precomputed when it fits comfortably in
//! memory and evaluated on the fly otherwise.

use super::similarity::{dot, euclidean_sq};
use super::{check_finite, MlError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// An α update smaller than this does not count as progress (Platt's ε).
const ALPHA_EPS: f64 = 1e-5;
/// α within this of 0 or C is treated as sitting on the box boundary.
const BOUND_EPS: f64 = 1e-8;
/// Hard cap on optimization passes, guarding against pathological inputs.
const MAX_TOTAL_PASSES: usize = 5_000;
/// Largest training-set size for which the kernel matrix is precomputed.
const PRECOMPUTE_LIMIT: usize = 2_048;

/// A fully resolved kernel function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// `u·v`
    Linear,
    /// `(γ·u·v + coef0)^degree`
    Polynomial { degree: u32, gamma: f64, coef0: f64 },
    /// `exp(−γ‖u−v‖²)`
    Rbf { gamma: f64 },
}

impl Kernel {
    /// Evaluate the kernel on a pair of vectors.
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(u, v),
            Kernel::Polynomial { degree, gamma, coef0 } => {
                (gamma * dot(u, v) + coef0).powi(degree as i32)
            }
            Kernel::Rbf { gamma } => (-gamma * euclidean_sq(u, v)).exp(),
        }
    }
}

/// Kernel selection as it appears in configuration: γ may be left out, in
/// which case it resolves to the scale heuristic `1 / (dim · var)` over the
/// training features (`1 / dim` when the variance is zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelConfig {
    Linear,
    Polynomial { degree: u32, gamma: Option<f64>, coef0: f64 },
    Rbf { gamma: Option<f64> },
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig::Polynomial { degree: 3, gamma: None, coef0: 0.0 }
    }
}

impl KernelConfig {
    /// Resolve optional γ against the training features.
    pub fn resolve(&self, features: &[Vec<f64>]) -> Kernel {
        match *self {
            KernelConfig::Linear => Kernel::Linear,
            KernelConfig::Polynomial { degree, gamma, coef0 } => Kernel::Polynomial {
                degree,
                gamma: gamma.unwrap_or_else(|| scale_gamma(features)),
                coef0,
            },
            KernelConfig::Rbf { gamma } => {
                Kernel::Rbf { gamma: gamma.unwrap_or_else(|| scale_gamma(features)) }
            }
        }
    }
}

/// `1 / (dim · variance of all feature entries)`; `1 / dim` if flat.
fn scale_gamma(features: &[Vec<f64>]) -> f64 {
    let dim = features.first().map_or(1, Vec::len).max(1);
    let n: usize = features.iter().map(Vec::len).sum();
    if n == 0 {
        return 1.0 / dim as f64;
    }
    let mean: f64 = features.iter().flatten().sum::<f64>() / n as f64;
    let var: f64 = features.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var > 0.0 {
        1.0 / (dim as f64 * var)
    } else {
        1.0 / dim as f64
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: KernelConfig,
    /// Box constraint (soft-margin penalty).
    pub c: f64,
    /// KKT tolerance; also bounds the residuals reported at termination.
    pub tolerance: f64,
    /// Consecutive no-progress passes required before stopping.
    pub max_passes: usize,
    /// Seed for the random-scan fallbacks in pair selection.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            c: 1.0,
            tolerance: 1e-3,
            max_passes: 10,
            seed: 0,
        }
    }
}

/// A trained SVM: support vectors with their α and labels, plus the bias.
///
/// Invariants: `Σ αᵢ·yᵢ = 0` (within 1e-8) and `0 ≤ αᵢ ≤ C`. The JSON
/// serialization round-trips every f64 exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Serialization format version.
    pub version: u32,
    pub kernel: Kernel,
    pub support_vectors: Vec<Vec<f64>>,
    /// α of each support vector, in `(0, C]`.
    pub alphas: Vec<f64>,
    /// Label (±1) of each support vector.
    pub labels: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub tolerance: f64,
}

impl SvmModel {
    /// Feature dimension the model expects.
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    /// Signed distance proxy `Σ αᵢ yᵢ K(xᵢ, x) + b`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64, MlError> {
        if !self.support_vectors.is_empty() && x.len() != self.dim() {
            return Err(MlError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let mut value = self.bias;
        for ((sv, &alpha), &label) in
            self.support_vectors.iter().zip(&self.alphas).zip(&self.labels)
        {
            value += alpha * label * self.kernel.eval(sv, x);
        }
        Ok(value)
    }

    /// Class prediction: sign of the decision value, with an exact zero
    /// resolved to +1 (the clone class) for reproducibility.
    pub fn predict(&self, x: &[f64]) -> Result<f64, MlError> {
        let value = self.decision_value(x)?;
        Ok(if value >= 0.0 { 1.0 } else { -1.0 })
    }
}

/// Optimizer byproducts exposed for verification.
#[derive(Debug, Clone)]
pub struct SvmDiagnostics {
    /// Dual objective after every accepted two-variable update.
    pub objective_trace: Vec<f64>,
    /// Per-training-point KKT residual at termination.
    pub kkt_residuals: Vec<f64>,
    /// Final α for every training point (support vectors and not).
    pub alphas: Vec<f64>,
    /// `Σ αᵢ yᵢ` at termination (should vanish).
    pub alpha_label_sum: f64,
    /// Final bias.
    pub bias: f64,
    /// Optimization passes executed.
    pub passes: usize,
}

/// Train a model; see [`svm_train_diagnostic`] for the instrumented form.
pub fn svm_train(
    features: &[Vec<f64>],
    labels: &[f64],
    params: &SvmParams,
) -> Result<SvmModel, MlError> {
    Ok(svm_train_diagnostic(features, labels, params)?.0)
}

/// Train a model and keep the optimizer's trace: the dual objective after
/// each accepted update, final per-point KKT residuals, and all α values.
pub fn svm_train_diagnostic(
    features: &[Vec<f64>],
    labels: &[f64],
    params: &SvmParams,
) -> Result<(SvmModel, SvmDiagnostics), MlError> {
    validate_training_input(features, labels, params)?;
    let kernel = params.kernel.resolve(features);
    let mut trainer = Trainer::new(features, labels, kernel, params);
    trainer.optimize();
    Ok(trainer.into_model_and_diagnostics())
}

fn validate_training_input(
    features: &[Vec<f64>],
    labels: &[f64],
    params: &SvmParams,
) -> Result<(), MlError> {
    if features.len() != labels.len() {
        return Err(MlError::InvalidParameter(format!(
            "{} feature vectors but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let positive = |v: f64| !v.is_nan() && v > 0.0;
    if !positive(params.c) || !positive(params.tolerance) || params.max_passes == 0 {
        return Err(MlError::InvalidParameter(
            "need C > 0, tolerance > 0, max_passes ≥ 1".into(),
        ));
    }
    let dim = features.first().map_or(0, Vec::len);
    for f in features {
        check_finite(f)?;
        if f.len() != dim {
            return Err(MlError::DimensionMismatch { expected: dim, got: f.len() });
        }
    }
    for &y in labels {
        if y != 1.0 && y != -1.0 {
            return Err(MlError::InvalidParameter(format!("labels must be ±1, got {y}")));
        }
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(MlError::DegenerateData);
    }
    Ok(())
}

struct Trainer<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    kernel: Kernel,
    c: f64,
    tol: f64,
    max_passes: usize,
    alphas: Vec<f64>,
    b: f64,
    kmat: Option<Vec<f64>>,
    rng: ChaCha8Rng,
    trace: Vec<f64>,
    passes: usize,
}

impl<'a> Trainer<'a> {
    fn new(x: &'a [Vec<f64>], y: &'a [f64], kernel: Kernel, params: &SvmParams) -> Self {
        let n = x.len();
        let kmat = (n <= PRECOMPUTE_LIMIT).then(|| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let k = kernel.eval(&x[i], &x[j]);
                    m[i * n + j] = k;
                    m[j * n + i] = k;
                }
            }
            m
        });
        Self {
            x,
            y,
            kernel,
            c: params.c,
            tol: params.tolerance,
            max_passes: params.max_passes,
            alphas: vec![0.0; n],
            b: 0.0,
            kmat,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            trace: Vec::new(),
            passes: 0,
        }
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        match &self.kmat {
            Some(m) => m[i * self.x.len() + j],
            None => self.kernel.eval(&self.x[i], &self.x[j]),
        }
    }

    /// Decision value at training point `i` under the current α, b.
    fn f(&self, i: usize) -> f64 {
        let mut value = self.b;
        for (j, &alpha) in self.alphas.iter().enumerate() {
            if alpha > 0.0 {
                value += alpha * self.y[j] * self.k(j, i);
            }
        }
        value
    }

    fn error(&self, i: usize) -> f64 {
        self.f(i) - self.y[i]
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.y[i] * self.error(i); // = yᵢf(xᵢ) − 1
        (r < -self.tol && self.alphas[i] < self.c) || (r > self.tol && self.alphas[i] > 0.0)
    }

    fn is_non_bound(&self, i: usize) -> bool {
        self.alphas[i] > BOUND_EPS && self.alphas[i] < self.c - BOUND_EPS
    }

    /// Re-centre the bias on the interval the KKT conditions allow.
    ///
    /// The two-variable updates fix `b` from the points they touched, which
    /// drifts when every support vector ends up at a box corner: the running
    /// estimate can then sit outside the feasible interval even though α is
    /// optimal, and the violation scan chases points no pairwise step can
    /// move (the step direction depends on E₁ − E₂, where `b` cancels). In
    /// the spirit of Keerthi's two-threshold refinement, each candidate
    /// `tᵢ = yᵢ − Σⱼ αⱼyⱼK(xⱼ,xᵢ)` bounds `b` from below (α = 0 with y = +1,
    /// α = C with y = −1), from above (the mirror cases), or pins it from
    /// both sides (non-bound α); the midpoint of the resulting interval is
    /// the estimate consistent with the whole training set.
    fn refresh_bias(&mut self) {
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for i in 0..self.x.len() {
            let t = self.y[i] - (self.f(i) - self.b);
            let positive = self.y[i] > 0.0;
            let (floor, ceiling) = if self.is_non_bound(i) {
                (true, true)
            } else if self.alphas[i] <= BOUND_EPS {
                (positive, !positive)
            } else {
                (!positive, positive)
            };
            if floor {
                lower = lower.max(t);
            }
            if ceiling {
                upper = upper.min(t);
            }
        }
        self.b = match (lower.is_finite(), upper.is_finite()) {
            (true, true) => (lower + upper) / 2.0,
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => self.b,
        };
    }

    fn optimize(&mut self) {
        let n = self.x.len();
        let mut quiet_passes = 0;
        while quiet_passes < self.max_passes && self.passes < MAX_TOTAL_PASSES {
            self.refresh_bias();
            let mut changed = 0;
            for i in 0..n {
                if self.violates_kkt(i) && self.examine(i) {
                    changed += 1;
                }
            }
            self.passes += 1;
            if changed == 0 {
                quiet_passes += 1;
            } else {
                quiet_passes = 0;
            }
        }
        self.refresh_bias();
    }

    /// Try to make progress on violator `i1`: best |E₁ − E₂| partner among
    /// non-bound points, then a non-bound scan, then a full scan, both from
    /// seeded-random start positions.
    fn examine(&mut self, i1: usize) -> bool {
        let n = self.x.len();
        let e1 = self.error(i1);
        let mut best: Option<(f64, usize)> = None;
        for j in 0..n {
            if j != i1 && self.is_non_bound(j) {
                let gap = (e1 - self.error(j)).abs();
                if best.is_none_or(|(g, _)| gap > g) {
                    best = Some((gap, j));
                }
            }
        }
        if let Some((_, j)) = best {
            if self.take_step(i1, j) {
                return true;
            }
        }
        let start = self.rng.gen_range(0..n);
        for offset in 0..n {
            let j = (start + offset) % n;
            if j != i1 && self.is_non_bound(j) && self.take_step(i1, j) {
                return true;
            }
        }
        let start = self.rng.gen_range(0..n);
        for offset in 0..n {
            let j = (start + offset) % n;
            if j != i1 && self.take_step(i1, j) {
                return true;
            }
        }
        false
    }

    /// Analytically solve the two-variable subproblem for (i1, i2).
    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        let (a1_old, a2_old) = (self.alphas[i1], self.alphas[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let e1 = self.error(i1);
        let e2 = self.error(i2);
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2_old - a1_old).max(0.0), (self.c + a2_old - a1_old).min(self.c))
        } else {
            ((a1_old + a2_old - self.c).max(0.0), (a1_old + a2_old).min(self.c))
        };
        if lo >= hi {
            return false;
        }
        let k11 = self.k(i1, i1);
        let k12 = self.k(i1, i2);
        let k22 = self.k(i2, i2);
        // η = ‖φ(x₁) − φ(x₂)‖²; a flat direction (η ≈ 0) offers no progress.
        let eta = k11 + k22 - 2.0 * k12;
        if eta <= 1e-12 {
            return false;
        }
        let a2 = (a2_old + y2 * (e1 - e2) / eta).clamp(lo, hi);
        if (a2 - a2_old).abs() < ALPHA_EPS {
            return false;
        }
        // The equality constraint fixes a1; only float dust can leave the box.
        let a1 = (a1_old + s * (a2_old - a2)).clamp(0.0, self.c);
        let b1 = self.b - e1 - y1 * (a1 - a1_old) * k11 - y2 * (a2 - a2_old) * k12;
        let b2 = self.b - e2 - y1 * (a1 - a1_old) * k12 - y2 * (a2 - a2_old) * k22;
        self.b = if a1 > BOUND_EPS && a1 < self.c - BOUND_EPS {
            b1
        } else if a2 > BOUND_EPS && a2 < self.c - BOUND_EPS {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        self.alphas[i1] = a1;
        self.alphas[i2] = a2;
        self.trace.push(self.objective());
        true
    }

    /// Dual objective `Σαᵢ − ½ ΣΣ αᵢαⱼyᵢyⱼK(xᵢ,xⱼ)`.
    fn objective(&self) -> f64 {
        let active: Vec<usize> =
            (0..self.x.len()).filter(|&i| self.alphas[i] > 0.0).collect();
        let mut quad = 0.0;
        for &i in &active {
            for &j in &active {
                quad += self.alphas[i] * self.alphas[j] * self.y[i] * self.y[j] * self.k(i, j);
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }

    /// How far point `i` is from satisfying its KKT condition.
    fn kkt_residual(&self, i: usize) -> f64 {
        let margin = self.y[i] * self.f(i);
        let alpha = self.alphas[i];
        if alpha <= BOUND_EPS {
            (1.0 - margin).max(0.0)
        } else if alpha >= self.c - BOUND_EPS {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        }
    }

    fn into_model_and_diagnostics(self) -> (SvmModel, SvmDiagnostics) {
        let kkt_residuals: Vec<f64> = (0..self.x.len()).map(|i| self.kkt_residual(i)).collect();
        let alpha_label_sum: f64 =
            self.alphas.iter().zip(self.y).map(|(a, y)| a * y).sum();
        let mut support_vectors = Vec::new();
        let mut alphas = Vec::new();
        let mut labels = Vec::new();
        for (i, &alpha) in self.alphas.iter().enumerate() {
            if alpha > 1e-12 {
                support_vectors.push(self.x[i].clone());
                alphas.push(alpha);
                labels.push(self.y[i]);
            }
        }
        let model = SvmModel {
            version: 1,
            kernel: self.kernel,
            support_vectors,
            alphas,
            labels,
            bias: self.b,
            c: self.c,
            tolerance: self.tol,
        };
        let diagnostics = SvmDiagnostics {
            objective_trace: self.trace,
            kkt_residuals,
            alphas: self.alphas,
            alpha_label_sum,
            bias: self.b,
            passes: self.passes,
        };
        (model, diagnostics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_params(c: f64, seed: u64) -> SvmParams {
        SvmParams { kernel: KernelConfig::Linear, c, seed, ..SvmParams::default() }
    }

    #[test]
    fn symmetric_pair_puts_boundary_at_zero() {
        let features = vec![vec![-1.0], vec![1.0]];
        let labels = vec![-1.0, 1.0];
        let params = linear_params(1.0, 0);
        let model = svm_train(&features, &labels, &params).unwrap();
        assert!(model.decision_value(&[0.0]).unwrap().abs() <= params.tolerance);
        assert_eq!(model.predict(&[2.0]).unwrap(), 1.0);
        assert_eq!(model.predict(&[-2.0]).unwrap(), -1.0);
    }

    #[test]
    fn exact_zero_decision_predicts_positive() {
        let model = SvmModel {
            version: 1,
            kernel: Kernel::Linear,
            support_vectors: vec![],
            alphas: vec![],
            labels: vec![],
            bias: 0.0,
            c: 1.0,
            tolerance: 1e-3,
        };
        assert_eq!(model.predict(&[5.0]).unwrap(), 1.0);
    }

    #[test]
    fn xor_with_quadratic_kernel_is_separated() {
        let features = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ];
        let labels = vec![1.0, 1.0, -1.0, -1.0];
        let params = SvmParams {
            kernel: KernelConfig::Polynomial { degree: 2, gamma: Some(1.0), coef0: 0.0 },
            c: 10.0,
            ..SvmParams::default()
        };
        let model = svm_train(&features, &labels, &params).unwrap();
        for (x, &y) in features.iter().zip(&labels) {
            assert_eq!(model.predict(x).unwrap(), y, "point {x:?}");
        }
    }

    /// Two blobs whose only margin-defining points are (1,0) with label −1
    /// and (3,0) with label +1. The maximum-margin separator is the plane
    /// x = 2, so the exact decision function is f(p) = p.x − 2; that closed
    /// form is the reference the trained model must reproduce.
    #[test]
    fn separable_blobs_match_the_analytic_solution() {
        let mut features = vec![vec![1.0, 0.0], vec![3.0, 0.0]];
        let mut labels = vec![-1.0, 1.0];
        for i in 0..19 {
            let t = i as f64 / 19.0;
            features.push(vec![0.2 + 0.6 * t, -1.0 + 2.0 * t]);
            labels.push(-1.0);
            features.push(vec![3.2 + 0.6 * t, 1.0 - 2.0 * t]);
            labels.push(1.0);
        }
        let params = linear_params(10.0, 7);
        let (model, diag) = svm_train_diagnostic(&features, &labels, &params).unwrap();
        for (x, &y) in features.iter().zip(&labels) {
            assert_eq!(model.predict(x).unwrap(), y);
            let expected = x[0] - 2.0;
            let got = model.decision_value(x).unwrap();
            assert!(
                (got - expected).abs() < 0.02,
                "decision at {x:?}: got {got}, reference {expected}"
            );
        }
        assert!(diag.kkt_residuals.iter().all(|&r| r <= params.tolerance));
        assert!(diag.alpha_label_sum.abs() <= 1e-8);
    }

    #[test]
    fn degenerate_and_invalid_inputs_are_rejected() {
        let params = SvmParams::default();
        assert!(matches!(
            svm_train(&[vec![0.0], vec![1.0]], &[1.0, 1.0], &params),
            Err(MlError::DegenerateData)
        ));
        assert!(svm_train(&[vec![0.0], vec![1.0]], &[1.0, 0.5], &params).is_err());
        assert!(matches!(
            svm_train(&[vec![f64::NAN], vec![1.0]], &[1.0, -1.0], &params),
            Err(MlError::NonFinite)
        ));
    }

    #[test]
    fn model_json_round_trip_is_exact() {
        let features = vec![vec![-1.0, 0.3], vec![1.0, -0.2], vec![-0.8, 0.1], vec![0.9, 0.4]];
        let labels = vec![-1.0, 1.0, -1.0, 1.0];
        let params = SvmParams {
            kernel: KernelConfig::Rbf { gamma: None },
            ..SvmParams::default()
        };
        let model = svm_train(&features, &labels, &params).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: SvmModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back); // f64 equality: bit-exact round trip
    }
}
