//! Quadratic losses and the Gaussian-posterior quantities built on them.
//!
//! A round-`t` loss is `ℓ_t(θ) = ½ θᵀ A_t θ − b_tᵀ θ` with `A_t` symmetric
//! positive semidefinite. Everything downstream — the exponentially weighted
//! forecaster, the fixed-share mixture, the regret bounds — consumes only
//! three derived quantities per segment `[s, t]` of the stream:
//!
//! * the posterior mean `θ̂_{s:t}(η) = (Σ A_j + (λ/η) I)⁻¹ Σ b_j`, i.e. the
//!   ridge-regularized minimizer of the segment loss,
//! * the log-partition `log Z_{s:t}(η)` of the Gaussian measure
//!   `π(θ) · exp(−η L_{s:t}(θ))` with prior `π = N(0, λ⁻¹ I)`,
//! * the residual `b⊥` of `b` orthogonal to the column span of `A`, which
//!   measures how far a single loss is from having a bounded minimum.
//!
//! [`SegmentStats`] keeps prefix sums of the `A_t` and `b_t` so that any
//! segment query is a constant number of matrix operations. All solves go
//! through one Cholesky factorization of `Σ A_j + (λ/η) I` (always positive
//! definite because `λ/η > 0`), which yields the mean, the log-determinant,
//! and the quadratic term of the log-partition in one pass. Partition values
//! stay in log domain throughout: `Z` itself overflows `f64` for moderate
//! `η‖b‖`, so it is never materialized.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::{Error, Result};

/// Relative eigenvalue cutoff below which a direction counts as outside the
/// span of a PSD matrix. Pseudo-inverses and rank decisions use
/// `RANK_TOL * λ_max` as the absolute threshold.
pub const RANK_TOL: f64 = 1e-10;

/// One round's loss `ℓ(θ) = ½ θᵀ A θ − bᵀ θ` with `A` symmetric PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLoss {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl QuadraticLoss {
    /// Builds a loss after checking that `a` is square, matches `b`, is
    /// symmetric to a tight relative tolerance, and has no eigenvalue below
    /// `−1e-10 · ‖a‖` (floating-point PSD).
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument(format!(
                "quadratic coefficient matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let max_abs = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if !max_abs.is_finite() || !b.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument(
                "loss coefficients must be finite".to_string(),
            ));
        }
        let mut max_asym = 0.0_f64;
        for i in 0..a.nrows() {
            for j in (i + 1)..a.ncols() {
                max_asym = max_asym.max((a[(i, j)] - a[(j, i)]).abs());
            }
        }
        if max_asym > 1e-12 * (1.0 + max_abs) {
            return Err(Error::InvalidArgument(format!(
                "quadratic coefficient matrix is not symmetric (max asymmetry {max_asym:e})"
            )));
        }
        if a.nrows() > 0 {
            let eigen = symmetric_eigen(&a)?;
            let min_eig = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            // Spectral norm of a symmetric matrix is the largest |eigenvalue|.
            let norm = eigen.eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if min_eig < -1e-10 * norm {
                return Err(Error::InvalidArgument(format!(
                    "quadratic coefficient matrix is not positive semidefinite \
                     (min eigenvalue {min_eig:e})"
                )));
            }
        }
        Ok(Self { a, b })
    }

    /// Builds a loss whose PSD-ness is guaranteed by construction (e.g. a
    /// Gram matrix `g gᵀ`), skipping the eigenvalue check on the hot path.
    pub(crate) fn from_gram(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        debug_assert_eq!(a.nrows(), a.ncols());
        debug_assert_eq!(a.nrows(), b.len());
        Self { a, b }
    }

    /// Dimension `d` of the parameter space.
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// The symmetric PSD coefficient matrix `A`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// The linear coefficient vector `b`.
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Evaluates `½ θᵀ A θ − bᵀ θ`.
    pub fn eval(&self, theta: &DVector<f64>) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        Ok(0.5 * theta.dot(&(&self.a * theta)) - self.b.dot(theta))
    }

    /// Component of `b` orthogonal to the span of `A`: eigenvectors of `A`
    /// with eigenvalue above `rank_tol · λ_max(A)` are projected out of `b`
    /// and the remainder returned. For full-rank `A` this is the zero
    /// vector; it is nonzero exactly when the loss has no bounded minimum.
    pub fn orthogonal_residual(&self, rank_tol: f64) -> Result<DVector<f64>> {
        if !(rank_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rank tolerance must be positive, got {rank_tol}"
            )));
        }
        let eigen = symmetric_eigen(&self.a)?;
        let lambda_max = eigen.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
        if lambda_max <= 0.0 {
            // A vanishes (up to sign of round-off): the whole of b is residual.
            return Ok(self.b.clone());
        }
        let tol = rank_tol * lambda_max;
        let mut residual = self.b.clone();
        for (i, &lam) in eigen.eigenvalues.iter().enumerate() {
            if lam > tol {
                let q = eigen.eigenvectors.column(i);
                residual -= q * q.dot(&self.b);
            }
        }
        Ok(residual)
    }
}

/// Running prefix sums `Σ_{j≤t} A_j` and `Σ_{j≤t} b_j` over a loss stream,
/// 1-indexed by round with index 0 holding the empty sum. Any segment sum
/// `[s, t]` is then a single difference of prefixes.
#[derive(Debug, Clone)]
pub struct SegmentStats {
    dim: usize,
    prefix_a: Vec<DMatrix<f64>>,
    prefix_b: Vec<DVector<f64>>,
}

impl SegmentStats {
    /// Empty statistics for a `dim`-dimensional parameter space.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            prefix_a: vec![DMatrix::zeros(dim, dim)],
            prefix_b: vec![DVector::zeros(dim)],
        }
    }

    /// Dimension of the parameter space.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of losses pushed so far.
    pub fn count(&self) -> usize {
        self.prefix_a.len() - 1
    }

    /// Appends one loss, extending both prefix-sum lists.
    pub fn push(&mut self, loss: &QuadraticLoss) -> Result<()> {
        if loss.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: loss.dim(),
            });
        }
        let last_a = self.prefix_a.last().expect("prefix_a is never empty");
        let last_b = self.prefix_b.last().expect("prefix_b is never empty");
        self.prefix_a.push(last_a + &loss.a);
        self.prefix_b.push(last_b + &loss.b);
        Ok(())
    }

    fn check_range(&self, s: usize, t: usize) -> Result<()> {
        if s < 1 {
            return Err(Error::IndexOutOfRange(format!(
                "segment start must be at least 1, got {s}"
            )));
        }
        if t > self.count() {
            return Err(Error::IndexOutOfRange(format!(
                "segment end {t} exceeds number of pushed losses {}",
                self.count()
            )));
        }
        Ok(())
    }

    /// `Σ_{j=s}^{t} A_j`; the zero matrix when `s > t` (empty segment).
    pub fn sum_a(&self, s: usize, t: usize) -> Result<DMatrix<f64>> {
        if s > t {
            return Ok(DMatrix::zeros(self.dim, self.dim));
        }
        self.check_range(s, t)?;
        Ok(&self.prefix_a[t] - &self.prefix_a[s - 1])
    }

    /// `Σ_{j=s}^{t} b_j`; the zero vector when `s > t` (empty segment).
    pub fn sum_b(&self, s: usize, t: usize) -> Result<DVector<f64>> {
        if s > t {
            return Ok(DVector::zeros(self.dim));
        }
        self.check_range(s, t)?;
        Ok(&self.prefix_b[t] - &self.prefix_b[s - 1])
    }
}

/// Gaussian prior `N(0, λ⁻¹ I)` over parameters, described by its precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorParams {
    lambda: f64,
}

impl PriorParams {
    /// Validates `λ > 0` (finite).
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "prior precision must be a positive finite number, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    /// The prior precision `λ`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Posterior mean and log-partition of one segment under one learning rate,
/// produced together because they share a Cholesky factorization.
#[derive(Debug, Clone)]
pub struct SegmentPosterior {
    /// `θ̂ = (Σ A_j + (λ/η) I)⁻¹ Σ b_j`.
    pub mean: DVector<f64>,
    /// `log ∫ π(θ) exp(−η L(θ)) dθ` for the segment loss `L`.
    pub log_partition: f64,
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be a positive finite number, got {eta}"
        )));
    }
    Ok(())
}

/// Core solve shared by [`posterior_mean`] and [`log_partition`]: one
/// Cholesky of `M = Σ A_j + (λ/η) I` gives the mean `M⁻¹ Σ b_j`, the
/// log-determinant, and the quadratic term `(η/2) ‖L⁻¹ Σ b_j‖²` where
/// `M = L Lᵀ`, so that
///
/// ```text
/// log Z = (d/2) log(λ/η) − ½ log det M + (η/2) ‖L⁻¹ Σ b_j‖².
/// ```
pub fn segment_posterior(
    sum_a: &DMatrix<f64>,
    sum_b: &DVector<f64>,
    prior: &PriorParams,
    eta: f64,
) -> Result<SegmentPosterior> {
    check_eta(eta)?;
    let d = sum_b.len();
    if sum_a.nrows() != d || sum_a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: sum_a.nrows(),
        });
    }
    let ratio = prior.lambda() / eta;
    let mut m = sum_a.clone();
    for i in 0..d {
        m[(i, i)] += ratio;
    }
    let chol = Cholesky::new(m).ok_or_else(|| {
        Error::NumericFailure(
            "Cholesky factorization of the regularized Gram matrix failed".to_string(),
        )
    })?;
    let mean = chol.solve(sum_b);
    let l = chol.l();
    // log det(L Lᵀ) = 2 Σ log L_ii.
    let log_det = 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let y = l.solve_lower_triangular(sum_b).ok_or_else(|| {
        Error::NumericFailure("triangular solve failed on a Cholesky factor".to_string())
    })?;
    let log_partition =
        0.5 * d as f64 * ratio.ln() - 0.5 * log_det + 0.5 * eta * y.norm_squared();
    if !log_partition.is_finite() {
        return Err(Error::NumericFailure(format!(
            "log-partition is not finite ({log_partition})"
        )));
    }
    Ok(SegmentPosterior { mean, log_partition })
}

/// Ridge-regularized segment minimizer `θ̂_{s:t}(η)`; the zero vector for an
/// empty segment (`s > t`), matching the convention that an empty segment's
/// loss is identically zero.
pub fn posterior_mean(
    stats: &SegmentStats,
    s: usize,
    t: usize,
    prior: &PriorParams,
    eta: f64,
) -> Result<DVector<f64>> {
    check_eta(eta)?;
    if s > t {
        return Ok(DVector::zeros(stats.dim()));
    }
    let sum_a = stats.sum_a(s, t)?;
    let sum_b = stats.sum_b(s, t)?;
    Ok(segment_posterior(&sum_a, &sum_b, prior, eta)?.mean)
}

/// Log-partition `log Z_{s:t}(η)`; zero for an empty segment (`Z = ∫π = 1`).
pub fn log_partition(
    stats: &SegmentStats,
    s: usize,
    t: usize,
    prior: &PriorParams,
    eta: f64,
) -> Result<f64> {
    check_eta(eta)?;
    if s > t {
        return Ok(0.0);
    }
    let sum_a = stats.sum_a(s, t)?;
    let sum_b = stats.sum_b(s, t)?;
    Ok(segment_posterior(&sum_a, &sum_b, prior, eta)?.log_partition)
}

/// Minimum-norm stationary point of a cumulative segment loss, with a flag
/// recording whether it is a genuine minimizer.
#[derive(Debug, Clone)]
pub struct MinNormSolution {
    /// `(Σ A_j)† Σ b_j`, the pseudo-inverse solve.
    pub theta: DVector<f64>,
    /// `true` when `Σ b_j` lies in the span of `Σ A_j`, so the segment loss
    /// attains its infimum at `theta`; `false` when the infimum is `−∞`.
    pub bounded: bool,
}

/// Minimum-norm element of `argmin L_{s:t}` via the pseudo-inverse of the
/// summed coefficient matrix. When the summed linear term has a component
/// outside the span of the summed quadratic term, the infimum is `−∞`; the
/// pseudo-inverse solve is still returned with `bounded = false`.
pub fn min_norm_argmin(stats: &SegmentStats, s: usize, t: usize) -> Result<MinNormSolution> {
    stats.check_range(s, t)?;
    if s > t {
        return Err(Error::InvalidArgument(format!(
            "minimizer requires a non-empty segment, got start {s} > end {t}"
        )));
    }
    let m = stats.sum_a(s, t)?;
    let v = stats.sum_b(s, t)?;
    let eigen = symmetric_eigen(&m)?;
    let lambda_max = eigen.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let tol = RANK_TOL * lambda_max;
    let mut theta = DVector::zeros(stats.dim());
    for (i, &lam) in eigen.eigenvalues.iter().enumerate() {
        if lam > tol {
            let q = eigen.eigenvectors.column(i);
            theta += q * (q.dot(&v) / lam);
        }
    }
    let residual = &v - &m * &theta;
    let bounded = residual.norm() <= 1e-8 * (1.0 + v.norm());
    Ok(MinNormSolution { theta, bounded })
}

/// Symmetric eigendecomposition with the failure path mapped onto the
/// crate's error type (the iteration rarely fails, but NaN input can make
/// it diverge and that must not panic a long-running stream).
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, Dyn>> {
    SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
        Error::NumericFailure("symmetric eigendecomposition did not converge".to_string())
    })
}
