//! Independent verification engines for the closed-form machinery.
//!
//! Every quantity the forecasters compute analytically has a second,
//! deliberately different route here:
//!
//! * 1-D composite-Simpson quadrature of the defining integrals for the
//!   log-partition and posterior mean ([`quad_log_z_1d`],
//!   [`quad_posterior_mean_1d`]),
//! * brute-force enumeration of all `2^{t−1}` contiguous segmentations for
//!   the fixed-share mixture ([`brute_force_fs`]), against which the `O(t)`
//!   recursion is validated,
//! * Monte-Carlo checks of the mixability inequality behind the regret
//!   analysis ([`mc_mixability_check`]) and of the integration-by-parts
//!   identity that makes the score loss an unbiased Fisher-divergence
//!   estimate ([`mc_green_check`]),
//! * randomized numeric checks of the three matrix identities the bound
//!   derivations lean on ([`identity_checks`]).
//!
//! These routines favor transparency over speed; they are called by the test
//! suite and by the CLI `selfcheck` subcommand, never on the hot path.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::logsum::{count_times_log, log_sum_exp};
use crate::quadloss::{
    segment_posterior, symmetric_eigen, PriorParams, QuadraticLoss, SegmentStats, RANK_TOL,
};
use crate::{Error, Result};

/// Composite-Simpson grid: `points` nodes (odd, ≥ 3) spanning `[lower, upper]`.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    lower: f64,
    upper: f64,
    points: usize,
}

impl QuadratureSpec {
    /// Validates `upper > lower` and an odd node count of at least 3.
    pub fn new(lower: f64, upper: f64, points: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(Error::InvalidArgument(format!(
                "quadrature range must be finite with upper > lower, got [{lower}, {upper}]"
            )));
        }
        if points < 3 || points % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "Simpson rule needs an odd number of nodes of at least 3, got {points}"
            )));
        }
        Ok(Self { lower, upper, points })
    }

    /// Symmetric grid `center ± halfwidth`; callers typically pass ten or
    /// more posterior standard deviations as the halfwidth so the truncated
    /// Gaussian tails are far below the comparison tolerance.
    pub fn centered(center: f64, halfwidth: f64, points: usize) -> Result<Self> {
        if !(halfwidth > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "quadrature halfwidth must be positive, got {halfwidth}"
            )));
        }
        Self::new(center - halfwidth, center + halfwidth, points)
    }

    fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    fn node(&self, i: usize) -> f64 {
        self.lower + i as f64 * self.step()
    }

    /// Simpson coefficient of node `i` in log form (`log 1`, `log 4`, `log 2`).
    fn log_coef(&self, i: usize) -> f64 {
        if i == 0 || i == self.points - 1 {
            0.0
        } else if i % 2 == 1 {
            4.0_f64.ln()
        } else {
            2.0_f64.ln()
        }
    }
}

/// Combined scalar coefficients of a 1-D segment loss plus the Gaussian
/// prior, giving the log-integrand `−η L_{s:t}(x) + log π(x)` pointwise.
struct LogIntegrand1d {
    sum_a: f64,
    sum_b: f64,
    lambda: f64,
    eta: f64,
}

impl LogIntegrand1d {
    fn build(
        losses: &[QuadraticLoss],
        s: usize,
        t: usize,
        lambda: f64,
        eta: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0) || !(eta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior precision and learning rate must be positive, got λ = {lambda}, η = {eta}"
            )));
        }
        if s < 1 {
            return Err(Error::IndexOutOfRange(format!(
                "segment start must be at least 1, got {s}"
            )));
        }
        if t > losses.len() {
            return Err(Error::IndexOutOfRange(format!(
                "segment end {t} exceeds number of losses {}",
                losses.len()
            )));
        }
        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        if s <= t {
            for loss in &losses[s - 1..t] {
                if loss.dim() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: loss.dim(),
                    });
                }
                sum_a += loss.a()[(0, 0)];
                sum_b += loss.b()[0];
            }
        }
        Ok(Self { sum_a, sum_b, lambda, eta })
    }

    /// `−η (½ ΣA x² − ΣB x) + log π(x)` with `π = N(0, 1/λ)`.
    fn eval(&self, x: f64) -> f64 {
        let seg_loss = 0.5 * self.sum_a * x * x - self.sum_b * x;
        let log_prior = 0.5 * (self.lambda / (2.0 * std::f64::consts::PI)).ln()
            - 0.5 * self.lambda * x * x;
        -self.eta * seg_loss + log_prior
    }
}

/// Log of the Simpson estimate of `∫ exp(−η L_{s:t}(x)) π(x) dx` for a 1-D
/// loss stream, computed in log domain with a log-sum-exp over the nodes so
/// large exponents never overflow.
pub fn quad_log_z_1d(
    losses: &[QuadraticLoss],
    s: usize,
    t: usize,
    lambda: f64,
    eta: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let integrand = LogIntegrand1d::build(losses, s, t, lambda, eta)?;
    let mut terms = Vec::with_capacity(quad.points);
    for i in 0..quad.points {
        let g = integrand.eval(quad.node(i));
        if g.is_nan() || g == f64::INFINITY {
            return Err(Error::NumericFailure(format!(
                "quadrature integrand is not finite at x = {}",
                quad.node(i)
            )));
        }
        terms.push(quad.log_coef(i) + g);
    }
    let log_z = (quad.step() / 3.0).ln() + log_sum_exp(&terms);
    if log_z.is_nan() {
        return Err(Error::NumericFailure(
            "quadrature log-partition is NaN".to_string(),
        ));
    }
    Ok(log_z)
}

/// Ratio of Simpson estimates of `∫ x exp(−η L) π` and `∫ exp(−η L) π`,
/// the quadrature counterpart of the closed-form posterior mean. Both sums
/// share one exponent offset so the ratio is stable however peaked the
/// integrand is.
pub fn quad_posterior_mean_1d(
    losses: &[QuadraticLoss],
    s: usize,
    t: usize,
    lambda: f64,
    eta: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let integrand = LogIntegrand1d::build(losses, s, t, lambda, eta)?;
    let mut log_vals = Vec::with_capacity(quad.points);
    let mut offset = f64::NEG_INFINITY;
    for i in 0..quad.points {
        let g = integrand.eval(quad.node(i));
        if g.is_nan() || g == f64::INFINITY {
            return Err(Error::NumericFailure(format!(
                "quadrature integrand is not finite at x = {}",
                quad.node(i)
            )));
        }
        offset = offset.max(g);
        log_vals.push(g);
    }
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for i in 0..quad.points {
        let w = quad.log_coef(i).exp() * (log_vals[i] - offset).exp();
        numerator += w * quad.node(i);
        denominator += w;
    }
    if !(denominator > 0.0) || !numerator.is_finite() {
        return Err(Error::NumericFailure(
            "quadrature posterior-mean denominator degenerated".to_string(),
        ));
    }
    Ok(numerator / denominator)
}

/// Result of enumerating every contiguous segmentation of `[1, t]`.
#[derive(Debug, Clone)]
pub struct FsBruteForce {
    /// `log V_t`: log-sum over segmentations of prior weight times the
    /// product of per-block partition values.
    pub log_v: f64,
    /// The mixture prediction for round `t + 1` implied by those weights:
    /// each segmentation contributes its last block's posterior mean, scaled
    /// by the keep-probability of the transition kernel; the restart branch
    /// contributes the zero prior mean.
    pub prediction: DVector<f64>,
}

/// Brute-force evaluation of the fixed-share mixture after `t` rounds by
/// summing over all `2^{t−1}` contiguous segmentations, each weighted
/// `α^{m−1} (1−α)^{t−m}` for `m` blocks. Exponential in `t`, so capped at
/// `t ≤ 14`; this is the ground truth the linear-time recursion is checked
/// against.
pub fn brute_force_fs(
    losses: &[QuadraticLoss],
    t: usize,
    lambda: f64,
    eta: f64,
    alpha: f64,
) -> Result<FsBruteForce> {
    if t < 1 {
        return Err(Error::InvalidArgument(
            "enumeration needs at least one round".to_string(),
        ));
    }
    if t > 14 {
        return Err(Error::InvalidArgument(format!(
            "enumeration over 2^(t-1) segmentations is capped at t = 14, got {t}"
        )));
    }
    if t > losses.len() {
        return Err(Error::IndexOutOfRange(format!(
            "round {t} exceeds number of losses {}",
            losses.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "switch probability must lie in [0, 1], got {alpha}"
        )));
    }
    let prior = PriorParams::new(lambda)?;
    let dim = losses[0].dim();
    let mut stats = SegmentStats::new(dim);
    for loss in &losses[..t] {
        stats.push(loss)?;
    }
    // Per-block closed forms for every segment [s, e]; posterior means are
    // only needed for blocks ending at t (the live block of each pattern).
    let mut log_z = vec![vec![0.0; t + 1]; t + 1];
    let mut last_means = vec![DVector::zeros(dim); t + 1];
    for s in 1..=t {
        for e in s..=t {
            let seg = segment_posterior(&stats.sum_a(s, e)?, &stats.sum_b(s, e)?, &prior, eta)?;
            log_z[s][e] = seg.log_partition;
            if e == t {
                last_means[s] = seg.mean;
            }
        }
    }
    let log_alpha = alpha.ln();
    let log_keep = (1.0 - alpha).ln();
    let patterns = 1_usize << (t - 1);
    let mut log_terms = Vec::with_capacity(patterns);
    let mut weighted_mean = DVector::zeros(dim);
    let mut pattern_info = Vec::with_capacity(patterns);
    for mask in 0..patterns {
        // Bit k set = a new block starts at round k + 2.
        let m = 1 + (mask as u32).count_ones() as usize;
        let mut log_term = count_times_log(m - 1, log_alpha) + count_times_log(t - m, log_keep);
        let mut start = 1;
        let mut last_start = 1;
        for k in 0..t - 1 {
            if mask & (1 << k) != 0 {
                log_term += log_z[start][k + 1];
                start = k + 2;
                last_start = start;
            }
        }
        log_term += log_z[start][t];
        log_terms.push(log_term);
        pattern_info.push(last_start);
    }
    let log_v = log_sum_exp(&log_terms);
    if !log_v.is_finite() {
        return Err(Error::NumericFailure(format!(
            "enumerated mixture log-partition is not finite ({log_v})"
        )));
    }
    for (log_term, &last_start) in log_terms.iter().zip(&pattern_info) {
        let w = (log_term - log_v).exp();
        if w > 0.0 {
            weighted_mean += &last_means[last_start] * w;
        }
    }
    // The transition kernel keeps the current block with probability 1 − α
    // and restarts (predicting the zero prior mean) with probability α.
    let prediction = weighted_mean * (1.0 - alpha);
    Ok(FsBruteForce { log_v, prediction })
}

/// Two sides of the mixability inequality, estimated by Monte Carlo.
#[derive(Debug, Clone)]
pub struct MixabilityReport {
    /// `exp{−η ℓ(μ) + η² ‖Ω^{−1/2} b⊥‖²}` — the guaranteed dominating side.
    pub lhs: f64,
    /// Monte-Carlo mean of `exp(−η ℓ(θ))` for `θ ~ N(μ, Ω⁻¹)`.
    pub rhs_mean: f64,
    /// Standard error of `rhs_mean`.
    pub rhs_stderr: f64,
    /// Value of the curvature condition `‖A^{1/2}(μ − A†b)‖²`.
    pub condition_value: f64,
    /// The admissible ceiling `1/(2η)` for the condition.
    pub condition_limit: f64,
    /// `lhs ≥ rhs_mean − 4·rhs_stderr`.
    pub pass: bool,
}

/// Monte-Carlo check of the exponential-weights mixability inequality: for
/// `θ ~ N(μ, Ω⁻¹)` and a quadratic loss whose curvature at `μ` satisfies
/// `‖A^{1/2}(μ − A†b)‖² ≤ 1/(2η)`,
///
/// ```text
/// exp{−η ℓ(μ) + η² ‖Ω^{−1/2} b⊥‖²} ≥ E exp{−η ℓ(θ)}.
/// ```
///
/// The condition is verified before sampling; a violating instance makes the
/// check vacuous and is reported as a precondition failure rather than a
/// pass or fail.
pub fn mc_mixability_check(
    loss: &QuadraticLoss,
    mu: &DVector<f64>,
    omega: &DMatrix<f64>,
    eta: f64,
    samples: usize,
    seed: u64,
) -> Result<MixabilityReport> {
    let d = loss.dim();
    if mu.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: mu.len() });
    }
    if omega.nrows() != d || omega.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: omega.nrows() });
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive and finite, got {eta}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "Monte-Carlo check needs at least two samples".to_string(),
        ));
    }
    // Curvature condition: distance from μ to the loss's flat minimum,
    // measured in the A metric, must not exceed 1/(2η).
    let eigen = symmetric_eigen(loss.a())?;
    let lambda_max = eigen.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let tol = RANK_TOL * lambda_max;
    let mut theta_star = DVector::zeros(d);
    for (i, &lam) in eigen.eigenvalues.iter().enumerate() {
        if lam > tol {
            let q = eigen.eigenvectors.column(i);
            theta_star += q * (q.dot(loss.b()) / lam);
        }
    }
    let w = mu - &theta_star;
    let condition_value = w.dot(&(loss.a() * &w));
    let condition_limit = 0.5 / eta;
    if condition_value > condition_limit * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::PreconditionFailure(format!(
            "curvature condition violated: {condition_value} > {condition_limit}; \
             the inequality is not guaranteed for this instance"
        )));
    }
    let chol = Cholesky::new(omega.clone()).ok_or_else(|| {
        Error::InvalidArgument("covariance precision matrix must be positive definite".to_string())
    })?;
    let b_perp = loss.orthogonal_residual(RANK_TOL)?;
    let correction = eta * eta * b_perp.dot(&chol.solve(&b_perp));
    let log_lhs = -eta * loss.eval(mu)? + correction;
    let lhs = log_lhs.exp();
    // θ = μ + L^{−ᵀ} z has covariance L^{−ᵀ} L^{−1} = Ω⁻¹.
    let lt_inv = chol
        .l()
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::NumericFailure("Cholesky factor not invertible".to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut z = DVector::zeros(d);
    for _ in 0..samples {
        for i in 0..d {
            z[i] = rng.sample(StandardNormal);
        }
        let theta = mu + &lt_inv * &z;
        let v = (-eta * loss.eval(&theta)?).exp();
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let rhs_mean = sum / n;
    let variance = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
    let rhs_stderr = (variance / n).sqrt();
    if !rhs_mean.is_finite() {
        return Err(Error::NumericFailure(
            "Monte-Carlo mean overflowed; instance too extreme for this check".to_string(),
        ));
    }
    // The tiny absolute slack keeps zero-variance (deterministic) instances
    // from failing on last-ulp rounding.
    let pass = lhs >= rhs_mean - 4.0 * rhs_stderr - 1e-12 * (1.0 + rhs_mean.abs());
    Ok(MixabilityReport {
        lhs,
        rhs_mean,
        rhs_stderr,
        condition_value,
        condition_limit,
        pass,
    })
}

/// Monte-Carlo vs analytic comparison for the score-loss expectation.
#[derive(Debug, Clone)]
pub struct GreenReport {
    /// Monte-Carlo mean of the score loss at `theta` over `X ~ N(μ, σ²)`.
    pub mc_mean: f64,
    /// Standard error of `mc_mean`.
    pub mc_stderr: f64,
    /// Analytic value of the shifted Fisher divergence the loss estimates.
    pub analytic: f64,
    /// `|mc_mean − analytic| ≤ 4·mc_stderr`.
    pub pass: bool,
}

/// Checks that the degree-2 score loss in one dimension is an unbiased
/// estimate of the Fisher divergence between the model with score
/// `θ₁ + 2 θ₂ x` and the sampling density `N(μ, σ²)`, up to the constant
/// `−½ E‖∇ log p‖² = −1/(2σ²)` that does not depend on `θ`:
///
/// ```text
/// E ℓ_X(θ) = ½ E (θ₁ + 2θ₂X + (X−μ)/σ²)² − 1/(2σ²).
/// ```
///
/// The left side is estimated by Monte Carlo using the same pointwise loss
/// the detector consumes; the right side is evaluated in closed form.
pub fn mc_green_check(
    mu: f64,
    sigma: f64,
    theta: [f64; 2],
    samples: usize,
    seed: u64,
) -> Result<GreenReport> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sampling standard deviation must be positive, got {sigma}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "Monte-Carlo check needs at least two samples".to_string(),
        ));
    }
    let [t1, t2] = theta;
    // ½ E (model score + sampling score)² − ½ E (sampling score)², with
    // X = μ + σZ making both expectations one-line Gaussian moments.
    let fisher_half =
        0.5 * ((t1 + 2.0 * t2 * mu).powi(2) + sigma.powi(2) * (2.0 * t2 + 1.0 / sigma.powi(2)).powi(2));
    let analytic = fisher_half - 0.5 / sigma.powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let z: f64 = rng.sample(StandardNormal);
        let x = mu + sigma * z;
        // Pointwise score loss: ½ (θ₁ + 2θ₂ x)² + 2θ₂.
        let v = 0.5 * (t1 + 2.0 * t2 * x).powi(2) + 2.0 * t2;
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mc_mean = sum / n;
    let variance = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
    let mc_stderr = (variance / n).sqrt();
    // The tiny absolute slack keeps zero-variance (deterministic) instances
    // from failing on last-ulp rounding.
    let pass = (mc_mean - analytic).abs() <= 4.0 * mc_stderr + 1e-12 * (1.0 + analytic.abs());
    Ok(GreenReport { mc_mean, mc_stderr, analytic, pass })
}

/// Outcome of the randomized matrix-identity checks.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    /// Number of random instances exercised.
    pub trials: usize,
    /// Instances where any of the three identities fell outside tolerance.
    pub violations: usize,
    /// Worst relative error seen in the completed-square identity.
    pub max_square_completion_error: f64,
    /// Worst relative discrepancy among the three forms of the
    /// inverse-difference identity.
    pub max_inverse_difference_error: f64,
    /// Smallest slack (rhs − lhs) seen in the operator-norm vs log-det
    /// bound; negative values beyond −1e-10 count as violations.
    pub min_logdet_slack: f64,
}

/// Matrix square root of a symmetric PSD matrix via eigendecomposition,
/// clamping round-off negatives to zero.
fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eigen = symmetric_eigen(m)?;
    let d = m.nrows();
    let mut s = DMatrix::zeros(d, d);
    for (i, &lam) in eigen.eigenvalues.iter().enumerate() {
        let q = eigen.eigenvectors.column(i);
        s += &q * q.transpose() * lam.max(0.0).sqrt();
    }
    Ok(s)
}

/// Inverse square root of a symmetric PD matrix via eigendecomposition.
fn pd_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eigen = symmetric_eigen(m)?;
    let d = m.nrows();
    let mut s = DMatrix::zeros(d, d);
    for (i, &lam) in eigen.eigenvalues.iter().enumerate() {
        if lam <= 0.0 {
            return Err(Error::NumericFailure(
                "inverse square root requires a positive definite matrix".to_string(),
            ));
        }
        let q = eigen.eigenvectors.column(i);
        s += &q * q.transpose() / lam.sqrt();
    }
    Ok(s)
}

/// Largest absolute eigenvalue — the operator norm of a symmetric matrix.
fn operator_norm(m: &DMatrix<f64>) -> Result<f64> {
    let eigen = symmetric_eigen(m)?;
    Ok(eigen.eigenvalues.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())))
}

/// Randomized verification of the three linear-algebra identities underlying
/// the regret bounds, over random positive definite `Ω` and positive
/// semidefinite (possibly rank-deficient) `A`, `B` in dimensions 1–6:
///
/// 1. the completed square
///    `‖(ηA+Ω)^{−1/2}(ηb+Ωμ)‖² − μᵀΩμ + ημᵀAμ − 2ηbᵀμ
///       = η²‖(Ω+ηA)^{−1/2}(Aμ−b)‖²`,
/// 2. the inverse difference
///    `Ω⁻¹ − (Ω+B)⁻¹ = (Ω+B)⁻¹ B Ω⁻¹ = Ω⁻¹ B (Ω+B)⁻¹`,
/// 3. the spectral bound
///    `‖B^{1/2}(Ω+B)⁻¹B^{1/2}‖ ≤ log det(I + Ω^{−1/2} B Ω^{−1/2})`.
pub fn identity_checks(seed: u64, trials: usize) -> Result<IdentityReport> {
    if trials < 1 {
        return Err(Error::InvalidArgument(
            "identity checks need at least one trial".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut max_square_completion_error = 0.0_f64;
    let mut max_inverse_difference_error = 0.0_f64;
    let mut min_logdet_slack = f64::INFINITY;

    let random_psd = |rng: &mut ChaCha8Rng, d: usize| -> DMatrix<f64> {
        let rank = rng.random_range(1..=d);
        let g = DMatrix::from_fn(d, rank, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose()
    };

    for _ in 0..trials {
        let d = rng.random_range(1..=6);
        let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let omega = &m * m.transpose() + DMatrix::identity(d, d) * 0.1;
        let a = random_psd(&mut rng, d);
        let b_mat = random_psd(&mut rng, d);
        let b = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let mu = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let eta = rng.random_range(0.1..2.0);
        let mut violated = false;

        // Completed square. Both weighted norms reduce to quadratic forms in
        // an inverse, so no matrix square root is needed.
        let shifted = &omega + &a * eta;
        let chol = Cholesky::new(shifted.clone()).ok_or_else(|| {
            Error::NumericFailure("positive definite shift failed to factor".to_string())
        })?;
        let u = b.clone() * eta + &omega * &mu;
        let lhs = u.dot(&chol.solve(&u)) - mu.dot(&(&omega * &mu))
            + eta * mu.dot(&(&a * &mu))
            - 2.0 * eta * b.dot(&mu);
        let r = &a * &mu - &b;
        let rhs = eta * eta * r.dot(&chol.solve(&r));
        let square_err = (lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs()));
        max_square_completion_error = max_square_completion_error.max(square_err);
        if square_err > 1e-8 {
            violated = true;
        }

        // Inverse difference, all three forms.
        let omega_inv = Cholesky::new(omega.clone())
            .ok_or_else(|| Error::NumericFailure("random PD matrix failed to factor".to_string()))?
            .inverse();
        let sum_inv = Cholesky::new(&omega + &b_mat)
            .ok_or_else(|| Error::NumericFailure("PD + PSD sum failed to factor".to_string()))?
            .inverse();
        let form1 = &omega_inv - &sum_inv;
        let form2 = &sum_inv * &b_mat * &omega_inv;
        let form3 = &omega_inv * &b_mat * &sum_inv;
        let scale = 1.0 + form1.norm();
        let inv_err = ((&form1 - &form2).norm() / scale).max((&form1 - &form3).norm() / scale);
        max_inverse_difference_error = max_inverse_difference_error.max(inv_err);
        if inv_err > 1e-8 {
            violated = true;
        }

        // Spectral bound.
        let b_sqrt = psd_sqrt(&b_mat)?;
        let lhs_norm = operator_norm(&(&b_sqrt * &sum_inv * &b_sqrt))?;
        let omega_inv_sqrt = pd_inv_sqrt(&omega)?;
        let inner = &omega_inv_sqrt * &b_mat * &omega_inv_sqrt;
        let inner_eigen = symmetric_eigen(&inner)?;
        let rhs_logdet: f64 = inner_eigen
            .eigenvalues
            .iter()
            .map(|&lam| (1.0 + lam.max(0.0)).ln())
            .sum();
        let slack = rhs_logdet - lhs_norm;
        min_logdet_slack = min_logdet_slack.min(slack);
        if slack < -1e-10 {
            violated = true;
        }

        if violated {
            violations += 1;
        }
    }
    Ok(IdentityReport {
        trials,
        violations,
        max_square_completion_error,
        max_inverse_difference_error,
        min_logdet_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadloss::{log_partition, posterior_mean};
    use approx::assert_relative_eq;

    fn scalar_loss(a: f64, b: f64) -> QuadraticLoss {
        QuadraticLoss::new(
            DMatrix::from_vec(1, 1, vec![a]),
            DVector::from_vec(vec![b]),
        )
        .expect("scalar test loss should be valid")
    }

    fn random_scalar_losses(seed: u64, n: usize) -> Vec<QuadraticLoss> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let g: f64 = rng.random_range(-1.5..1.5);
                scalar_loss(g * g, rng.random_range(-1.0..1.0))
            })
            .collect()
    }

    /// Wide symmetric grid for a posterior with the given coefficient sums.
    fn grid_for(sum_a: f64, sum_b: f64, lambda: f64, eta: f64, points: usize) -> QuadratureSpec {
        let precision = eta * sum_a + lambda;
        let center = eta * sum_b / precision;
        let sd = precision.sqrt().recip();
        QuadratureSpec::centered(center, 12.0 * sd, points).unwrap()
    }

    #[test]
    fn quadrature_spec_rejects_bad_input() {
        assert!(QuadratureSpec::new(1.0, 0.0, 11).is_err());
        assert!(QuadratureSpec::new(0.0, 1.0, 10).is_err(), "even node count");
        assert!(QuadratureSpec::new(0.0, 1.0, 1).is_err(), "too few nodes");
    }

    #[test]
    fn quad_log_z_empty_segment_integrates_the_prior() {
        let quad = QuadratureSpec::centered(0.0, 12.0, 2001).unwrap();
        let lz = quad_log_z_1d(&[], 1, 0, 1.0, 1.0, &quad).unwrap();
        assert_relative_eq!(lz, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn quad_log_z_matches_hand_value() {
        let losses = vec![scalar_loss(1.0, 1.0)];
        let quad = grid_for(1.0, 1.0, 1.0, 1.0, 4001);
        let lz = quad_log_z_1d(&losses, 1, 1, 1.0, 1.0, &quad).unwrap();
        assert_relative_eq!(lz, -0.5 * 2.0_f64.ln() + 0.25, epsilon = 1e-8);
    }

    #[test]
    fn quad_log_z_matches_closed_form_on_random_instances() {
        let losses = random_scalar_losses(3, 12);
        let mut stats = SegmentStats::new(1);
        for l in &losses {
            stats.push(l).unwrap();
        }
        let lambda = 0.7;
        let eta = 1.3;
        let prior = PriorParams::new(lambda).unwrap();
        for (s, t) in [(1, 5), (2, 9), (4, 12), (1, 12)] {
            let sum_a = stats.sum_a(s, t).unwrap()[(0, 0)];
            let sum_b = stats.sum_b(s, t).unwrap()[0];
            let quad = grid_for(sum_a, sum_b, lambda, eta, 4001);
            let by_quad = quad_log_z_1d(&losses, s, t, lambda, eta, &quad).unwrap();
            let closed = log_partition(&stats, s, t, &prior, eta).unwrap();
            assert!(
                (by_quad - closed).abs() <= 1e-6,
                "quadrature {by_quad} vs closed form {closed} on segment [{s}, {t}]"
            );
        }
    }

    #[test]
    fn quad_mean_zero_losses_returns_prior_mean() {
        let quad = QuadratureSpec::centered(0.0, 12.0, 1001).unwrap();
        let mean = quad_posterior_mean_1d(&[], 1, 0, 1.0, 1.0, &quad).unwrap();
        assert_relative_eq!(mean, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn quad_mean_symmetric_instance_is_zero() {
        let losses = vec![scalar_loss(2.0, 0.0), scalar_loss(0.5, 0.0)];
        let quad = grid_for(2.5, 0.0, 0.8, 1.1, 1001);
        let mean = quad_posterior_mean_1d(&losses, 1, 2, 0.8, 1.1, &quad).unwrap();
        assert_relative_eq!(mean, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn quad_mean_matches_closed_form_on_random_instances() {
        let losses = random_scalar_losses(17, 10);
        let mut stats = SegmentStats::new(1);
        for l in &losses {
            stats.push(l).unwrap();
        }
        let lambda = 1.4;
        let eta = 0.6;
        let prior = PriorParams::new(lambda).unwrap();
        for (s, t) in [(1, 10), (3, 7), (6, 6)] {
            let sum_a = stats.sum_a(s, t).unwrap()[(0, 0)];
            let sum_b = stats.sum_b(s, t).unwrap()[0];
            let quad = grid_for(sum_a, sum_b, lambda, eta, 4001);
            let by_quad = quad_posterior_mean_1d(&losses, s, t, lambda, eta, &quad).unwrap();
            let closed = posterior_mean(&stats, s, t, &prior, eta).unwrap()[0];
            assert!(
                (by_quad - closed).abs() <= 1e-6 * (1.0 + closed.abs()),
                "quadrature mean {by_quad} vs closed form {closed} on segment [{s}, {t}]"
            );
        }
    }

    #[test]
    fn simpson_error_shrinks_at_fourth_order() {
        let losses = vec![scalar_loss(1.2, 0.7)];
        let lambda = 0.8;
        let eta = 1.1;
        let mut stats = SegmentStats::new(1);
        stats.push(&losses[0]).unwrap();
        let exact = log_partition(&stats, 1, 1, &PriorParams::new(lambda).unwrap(), eta).unwrap();
        // Node counts chosen so both errors are measurable: with many more
        // nodes the Gaussian integrand is exact to machine precision (no
        // ratio observable), with many fewer the rule is pre-asymptotic.
        let coarse_grid = grid_for(1.2, 0.7, lambda, eta, 25);
        let fine_grid = grid_for(1.2, 0.7, lambda, eta, 49);
        let coarse = (quad_log_z_1d(&losses, 1, 1, lambda, eta, &coarse_grid).unwrap() - exact).abs();
        let fine = (quad_log_z_1d(&losses, 1, 1, lambda, eta, &fine_grid).unwrap() - exact).abs();
        assert!(
            coarse >= 8.0 * fine,
            "doubling Simpson nodes should cut the error at least 8-fold: {coarse:e} vs {fine:e}"
        );
    }

    #[test]
    fn brute_force_single_round_is_single_segment() {
        let losses = random_scalar_losses(29, 3);
        let mut stats = SegmentStats::new(1);
        stats.push(&losses[0]).unwrap();
        let prior = PriorParams::new(0.9).unwrap();
        let out = brute_force_fs(&losses, 1, 0.9, 0.7, 0.3).unwrap();
        let lz = log_partition(&stats, 1, 1, &prior, 0.7).unwrap();
        assert_relative_eq!(out.log_v, lz, epsilon = 1e-12);
        // Next-round prediction keeps the single block with weight 1 − α.
        let mean = posterior_mean(&stats, 1, 1, &prior, 0.7).unwrap();
        assert_relative_eq!(out.prediction[0], 0.7 * mean[0], epsilon = 1e-12);
    }

    #[test]
    fn brute_force_zero_switch_keeps_only_the_full_block() {
        let losses = random_scalar_losses(31, 6);
        let mut stats = SegmentStats::new(1);
        for l in &losses {
            stats.push(l).unwrap();
        }
        let prior = PriorParams::new(1.2).unwrap();
        let out = brute_force_fs(&losses, 6, 1.2, 0.5, 0.0).unwrap();
        let lz = log_partition(&stats, 1, 6, &prior, 0.5).unwrap();
        assert_relative_eq!(out.log_v, lz, epsilon = 1e-12);
    }

    #[test]
    fn brute_force_two_rounds_matches_hand_enumeration() {
        let losses = random_scalar_losses(37, 2);
        let mut stats = SegmentStats::new(1);
        for l in &losses {
            stats.push(l).unwrap();
        }
        let prior = PriorParams::new(0.8).unwrap();
        let eta = 1.1;
        let alpha = 0.25;
        // Two patterns: one block [1,2], or blocks [1,1][2,2].
        let z12 = log_partition(&stats, 1, 2, &prior, eta).unwrap();
        let z1 = log_partition(&stats, 1, 1, &prior, eta).unwrap();
        let z2 = log_partition(&stats, 2, 2, &prior, eta).unwrap();
        let expect = ((1.0 - alpha) * z12.exp() + alpha * (z1 + z2).exp()).ln();
        let out = brute_force_fs(&losses, 2, 0.8, eta, alpha).unwrap();
        assert_relative_eq!(out.log_v, expect, epsilon = 1e-12);
    }

    #[test]
    fn brute_force_full_switch_is_product_of_singletons() {
        let losses = random_scalar_losses(43, 5);
        let mut stats = SegmentStats::new(1);
        for l in &losses {
            stats.push(l).unwrap();
        }
        let prior = PriorParams::new(1.0).unwrap();
        let out = brute_force_fs(&losses, 5, 1.0, 0.9, 1.0).unwrap();
        let product: f64 = (1..=5)
            .map(|k| log_partition(&stats, k, k, &prior, 0.9).unwrap())
            .sum();
        assert_relative_eq!(out.log_v, product, epsilon = 1e-12);
        assert!(out.prediction.norm() <= 1e-15, "restart-always predicts the prior mean");
    }

    #[test]
    fn brute_force_rejects_oversized_rounds() {
        let losses = random_scalar_losses(47, 20);
        assert!(matches!(
            brute_force_fs(&losses, 15, 1.0, 1.0, 0.1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn mixability_trivial_loss_has_equal_sides() {
        let loss = QuadraticLoss::new(DMatrix::zeros(2, 2), DVector::zeros(2)).unwrap();
        let report = mc_mixability_check(
            &loss,
            &DVector::zeros(2),
            &DMatrix::identity(2, 2),
            1.0,
            1000,
            7,
        )
        .unwrap();
        assert_relative_eq!(report.lhs, 1.0, epsilon = 1e-12);
        assert_relative_eq!(report.rhs_mean, 1.0, epsilon = 1e-12);
        assert!(report.pass);
    }

    #[test]
    fn mixability_holds_at_the_flat_minimum_with_small_rate() {
        // b in the span of A and μ = A†b: the condition holds with value 0
        // and the correction vanishes, so domination is pure convexity.
        let a = DMatrix::from_partial_diagonal(3, 3, &[1.0, 2.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 0.0]);
        let loss = QuadraticLoss::new(a, b).unwrap();
        let mu = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let omega = DMatrix::identity(3, 3) * 2.0;
        let report = mc_mixability_check(&loss, &mu, &omega, 0.05, 1_000_000, 11).unwrap();
        assert!(report.condition_value <= 1e-12);
        assert!(
            report.pass,
            "lhs {} should dominate rhs {} ± {}",
            report.lhs, report.rhs_mean, report.rhs_stderr
        );
    }

    #[test]
    fn mixability_rejects_nonconforming_instances() {
        // μ far from the minimum with a large rate violates the condition.
        let loss = scalar_loss(4.0, 0.0);
        let mu = DVector::from_vec(vec![10.0]);
        let omega = DMatrix::identity(1, 1);
        assert!(matches!(
            mc_mixability_check(&loss, &mu, &omega, 2.0, 100, 3),
            Err(Error::PreconditionFailure(_))
        ));
    }

    #[test]
    fn green_check_zero_parameters_give_zero_loss() {
        let report = mc_green_check(0.3, 0.7, [0.0, 0.0], 10_000, 5).unwrap();
        assert_relative_eq!(report.mc_mean, 0.0, epsilon = 1e-12);
        assert_relative_eq!(report.analytic, 0.0, epsilon = 1e-12);
        assert!(report.pass);
    }

    #[test]
    fn green_check_true_score_attains_the_constant() {
        let mu = 0.4;
        let sigma = 0.5;
        let theta = [mu / (sigma * sigma), -0.5 / (sigma * sigma)];
        let report = mc_green_check(mu, sigma, theta, 200_000, 13).unwrap();
        // At the true score parameters the divergence term vanishes.
        assert_relative_eq!(report.analytic, -0.5 / (sigma * sigma), epsilon = 1e-12);
        assert!(report.pass, "gap {} vs stderr {}", (report.mc_mean - report.analytic).abs(), report.mc_stderr);
    }

    #[test]
    fn green_check_hand_instance_standard_normal() {
        let report = mc_green_check(0.0, 1.0, [1.0, 0.0], 200_000, 19).unwrap();
        assert_relative_eq!(report.analytic, 0.5, epsilon = 1e-12);
        assert!(report.pass);
    }

    #[test]
    fn identity_checks_pass_on_random_instances() {
        let report = identity_checks(101, 200).unwrap();
        assert_eq!(
            report.violations, 0,
            "matrix identities should hold numerically: {report:?}"
        );
        assert!(report.max_square_completion_error <= 1e-8);
        assert!(report.max_inverse_difference_error <= 1e-8);
        assert!(report.min_logdet_slack >= -1e-10);
    }

    #[test]
    fn logdet_bound_identity_instance() {
        // Ω = I, B = I: lhs = ‖(2I)⁻¹‖ = ½, rhs = d·log 2.
        let d = 3;
        let sum_inv = Cholesky::new(DMatrix::<f64>::identity(d, d) * 2.0)
            .unwrap()
            .inverse();
        let lhs = operator_norm(&sum_inv).unwrap();
        assert_relative_eq!(lhs, 0.5, epsilon = 1e-12);
        let rhs = d as f64 * 2.0_f64.ln();
        assert!(rhs >= lhs);
    }
}
