//! The two online forecasters the detector compares.
//!
//! Both follow the oblivious-opponent protocol: each round the forecaster
//! commits to a prediction, the environment reveals a quadratic loss, the
//! forecaster suffers the loss at its prediction and only then updates its
//! state. [`EwState`] is the exponentially weighted forecaster whose
//! prediction is the ridge-regularized minimizer of the entire history.
//! [`FsState`] is its fixed-share counterpart: a mixture over all ways of
//! segmenting the history, where each candidate segmentation restarts the
//! posterior at its change points, with restart probability `alpha` per
//! round. The fixed-share mixture is collapsed to a per-round cost linear in
//! `t` by the recursion
//!
//! ```text
//! V_1 = Z_{1:1},
//! V_t = (1−α)^{t−1} Z_{1:t} + α Σ_{s=0}^{t−2} (1−α)^s V_{t−1−s} Z_{t−s:t},
//! ```
//!
//! maintained entirely in log domain: partition values span hundreds of
//! orders of magnitude on long streams, so sums of their exponentials are
//! always reduced with log-sum-exp.
//!
//! Learning rates come from an [`EtaSchedule`]. Under a constant rate the
//! `log V` history and the newest segment posteriors are cached across
//! rounds (each update then costs one pass over the per-start running sums).
//! Under a decreasing rate every cached quantity depends on the current
//! rate, so each prediction recomputes the full `V` ladder from the stored
//! losses — correct but quadratic in `t` per round, which is why constant
//! rates are the default for long streams.

use nalgebra::DVector;

use crate::logsum::{count_times_log, log_sum_exp};
use crate::quadloss::{
    posterior_mean, segment_posterior, PriorParams, QuadraticLoss, SegmentPosterior, SegmentStats,
};
use crate::{Error, Result};

/// Per-round learning-rate rule; rates must be positive and non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub enum EtaSchedule {
    /// The same rate every round.
    Constant(f64),
    /// `η_t = 1/√t`.
    InverseSqrt,
    /// An arbitrary pre-computed sequence; must cover the stream length.
    Explicit(Vec<f64>),
}

impl EtaSchedule {
    /// Checks positivity (and monotonicity for explicit sequences).
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant(eta) => {
                if !(*eta > 0.0) || !eta.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "constant learning rate must be positive and finite, got {eta}"
                    )));
                }
            }
            Self::InverseSqrt => {}
            Self::Explicit(etas) => {
                if etas.is_empty() {
                    return Err(Error::InvalidArgument(
                        "explicit learning-rate sequence is empty".to_string(),
                    ));
                }
                for (i, eta) in etas.iter().enumerate() {
                    if !(*eta > 0.0) || !eta.is_finite() {
                        return Err(Error::InvalidArgument(format!(
                            "learning rate at round {} must be positive and finite, got {eta}",
                            i + 1
                        )));
                    }
                    if i > 0 && *eta > etas[i - 1] {
                        return Err(Error::InvalidArgument(format!(
                            "learning rates must be non-increasing, but rate {} at round {} \
                             exceeds {} at round {}",
                            eta,
                            i + 1,
                            etas[i - 1],
                            i
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Rate for (1-indexed) round `t`.
    pub fn eta(&self, t: usize) -> Result<f64> {
        if t < 1 {
            return Err(Error::IndexOutOfRange(
                "rounds are 1-indexed; round 0 has no learning rate".to_string(),
            ));
        }
        match self {
            Self::Constant(eta) => Ok(*eta),
            Self::InverseSqrt => Ok(1.0 / (t as f64).sqrt()),
            Self::Explicit(etas) => etas.get(t - 1).copied().ok_or_else(|| {
                Error::IndexOutOfRange(format!(
                    "explicit learning-rate sequence of length {} has no rate for round {t}",
                    etas.len()
                ))
            }),
        }
    }

    /// Whether cached per-rate quantities stay valid across rounds.
    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }
}

/// One completed round: the committed prediction and the loss it suffered.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// Prediction the forecaster committed to before seeing the loss.
    pub prediction: DVector<f64>,
    /// Value of the revealed loss at that prediction.
    pub loss_value: f64,
}

/// Exponentially weighted forecaster: predicts the posterior mean of the
/// full history seen so far, under the Gaussian prior and the current rate.
#[derive(Debug, Clone)]
pub struct EwState {
    stats: SegmentStats,
    prior: PriorParams,
    schedule: EtaSchedule,
    cumulative_loss: f64,
    round: usize,
}

impl EwState {
    /// Fresh forecaster over a `dim`-dimensional parameter space.
    pub fn new(dim: usize, prior: PriorParams, schedule: EtaSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(Self {
            stats: SegmentStats::new(dim),
            prior,
            schedule,
            cumulative_loss: 0.0,
            round: 0,
        })
    }

    /// Parameter-space dimension.
    pub fn dim(&self) -> usize {
        self.stats.dim()
    }

    /// Number of completed rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    /// Total loss suffered so far at the committed predictions.
    pub fn cumulative_loss(&self) -> f64 {
        self.cumulative_loss
    }

    /// Prediction for the upcoming round: the regularized minimizer of all
    /// past losses at the upcoming round's rate; the zero vector (the prior
    /// mean) when there is no history.
    pub fn predict(&self) -> Result<DVector<f64>> {
        let eta = self.schedule.eta(self.round + 1)?;
        posterior_mean(&self.stats, 1, self.round, &self.prior, eta)
    }

    /// Suffers `loss` at the current prediction, then absorbs the loss into
    /// the history. Returns what was predicted and what it cost.
    pub fn update(&mut self, loss: &QuadraticLoss) -> Result<StepRecord> {
        if loss.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: loss.dim(),
            });
        }
        let prediction = self.predict()?;
        let loss_value = loss.eval(&prediction)?;
        self.cumulative_loss += loss_value;
        self.stats.push(loss)?;
        self.round += 1;
        Ok(StepRecord { prediction, loss_value })
    }
}

/// Fixed-share forecaster: a mixture over run-length hypotheses, restarting
/// the posterior with probability `alpha` each round.
#[derive(Debug, Clone)]
pub struct FsState {
    dim: usize,
    prior: PriorParams,
    schedule: EtaSchedule,
    alpha: f64,
    /// Per-start running sums: entry `i` holds `Σ_{j=i+1}^{round} A_j` and
    /// the matching `b` sum, i.e. the Gram of the segment `[i+1, round]`.
    seg_a: Vec<nalgebra::DMatrix<f64>>,
    seg_b: Vec<DVector<f64>>,
    /// Full loss history; needed to recompute the mixture at a new rate.
    losses: Vec<QuadraticLoss>,
    /// `log V_k` for `k = 1..round`; valid only under a constant rate.
    log_v: Vec<f64>,
    /// Posteriors of all segments ending at `round`, at the constant rate;
    /// reused by the next prediction. Empty under non-constant schedules.
    end_posteriors: Vec<SegmentPosterior>,
    cumulative_loss: f64,
    round: usize,
}

impl FsState {
    /// Fresh forecaster with restart probability `alpha ∈ [0, 1]`.
    pub fn new(dim: usize, prior: PriorParams, schedule: EtaSchedule, alpha: f64) -> Result<Self> {
        schedule.validate()?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "switch probability must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(Self {
            dim,
            prior,
            schedule,
            alpha,
            seg_a: Vec::new(),
            seg_b: Vec::new(),
            losses: Vec::new(),
            log_v: Vec::new(),
            end_posteriors: Vec::new(),
            cumulative_loss: 0.0,
            round: 0,
        })
    }

    /// Parameter-space dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of completed rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    /// Total loss suffered so far at the committed predictions.
    pub fn cumulative_loss(&self) -> f64 {
        self.cumulative_loss
    }

    /// Restart probability.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `log V_k` for `k = 1..round` under a constant rate; `None` when the
    /// schedule is not constant (the ladder then depends on the round it is
    /// asked for).
    pub fn log_v(&self) -> Option<&[f64]> {
        if self.schedule.is_constant() {
            Some(&self.log_v)
        } else {
            None
        }
    }

    /// Posteriors for all segments `[r, round]`, `r = 1..=round`, at rate
    /// `eta`, from the per-start running sums.
    fn end_posteriors_at(&self, eta: f64) -> Result<Vec<SegmentPosterior>> {
        self.seg_a
            .iter()
            .zip(&self.seg_b)
            .map(|(a, b)| segment_posterior(a, b, &self.prior, eta))
            .collect()
    }

    /// Rebuilds the whole `log V` ladder and the posteriors of segments
    /// ending at `round`, all at rate `eta`. Used when the schedule is not
    /// constant, so nothing cached at earlier rates can be trusted.
    fn ladder_at(&self, eta: f64) -> Result<(Vec<f64>, Vec<SegmentPosterior>)> {
        let mut run_a: Vec<nalgebra::DMatrix<f64>> = Vec::with_capacity(self.round);
        let mut run_b: Vec<DVector<f64>> = Vec::with_capacity(self.round);
        let mut log_v = Vec::with_capacity(self.round);
        let mut newest = Vec::new();
        for e in 1..=self.round {
            let loss = &self.losses[e - 1];
            for (a, b) in run_a.iter_mut().zip(run_b.iter_mut()) {
                *a += loss.a();
                *b += loss.b();
            }
            run_a.push(loss.a().clone());
            run_b.push(loss.b().clone());
            let posts = run_a
                .iter()
                .zip(&run_b)
                .map(|(a, b)| segment_posterior(a, b, &self.prior, eta))
                .collect::<Result<Vec<_>>>()?;
            let end_log_z: Vec<f64> = posts.iter().map(|p| p.log_partition).collect();
            let lv = log_v_next(e, self.alpha, &log_v, &end_log_z)?;
            log_v.push(lv);
            if e == self.round {
                newest = posts;
            }
        }
        Ok((log_v, newest))
    }

    /// Prediction for the upcoming round `t = round + 1`: the zero vector at
    /// `t = 1`; afterwards the mixture, over blocks `[r, t−1]` ending now,
    /// of their posterior means weighted by the run-length posterior of the
    /// restart process. The weights are formed in log domain and must sum to
    /// `1 − α` (the remaining `α` mass restarts and predicts the prior mean
    /// zero); a sum off by more than 1e-8 signals numerical corruption and
    /// is reported as an error rather than silently renormalized.
    pub fn predict(&self) -> Result<DVector<f64>> {
        let t = self.round + 1;
        if t == 1 {
            return Ok(DVector::zeros(self.dim));
        }
        let eta = self.schedule.eta(t)?;
        let (log_v, posteriors);
        let (log_v_ref, posteriors_ref): (&[f64], &[SegmentPosterior]) =
            if self.schedule.is_constant() {
                (&self.log_v, &self.end_posteriors)
            } else {
                let built = self.ladder_at(eta)?;
                log_v = built.0;
                posteriors = built.1;
                (&log_v, &posteriors)
            };
        debug_assert_eq!(log_v_ref.len(), t - 1);
        debug_assert_eq!(posteriors_ref.len(), t - 1);
        let log_keep = (1.0 - self.alpha).ln();
        let log_alpha = self.alpha.ln();
        let log_v_last = log_v_ref[t - 2];
        let mut prediction = DVector::zeros(self.dim);
        let mut weight_sum = 0.0;
        for r in 1..=t - 1 {
            // Block [r, t−1]: reached by keeping since round r, having
            // restarted at r (or never, for r = 1).
            let log_w = if r == 1 {
                count_times_log(t - 1, log_keep) + posteriors_ref[0].log_partition - log_v_last
            } else {
                log_alpha
                    + count_times_log(t - r, log_keep)
                    + log_v_ref[r - 2]
                    + posteriors_ref[r - 1].log_partition
                    - log_v_last
            };
            if log_w.is_nan() || log_w == f64::INFINITY {
                return Err(Error::NumericFailure(format!(
                    "mixture weight for block starting at {r} is not finite ({log_w})"
                )));
            }
            let w = log_w.exp();
            if w > 0.0 {
                prediction += &posteriors_ref[r - 1].mean * w;
                weight_sum += w;
            }
        }
        if (weight_sum - (1.0 - self.alpha)).abs() > 1e-8 {
            return Err(Error::NumericFailure(format!(
                "mixture weights sum to {weight_sum}, expected {}; \
                 partition values have degenerated",
                1.0 - self.alpha
            )));
        }
        Ok(prediction)
    }

    /// Suffers `loss` at the current prediction, absorbs the loss into every
    /// per-start running sum, and (under a constant rate) extends the
    /// `log V` ladder by one rung.
    pub fn update(&mut self, loss: &QuadraticLoss) -> Result<StepRecord> {
        if loss.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: loss.dim(),
            });
        }
        let prediction = self.predict()?;
        let loss_value = loss.eval(&prediction)?;
        self.cumulative_loss += loss_value;
        for (a, b) in self.seg_a.iter_mut().zip(self.seg_b.iter_mut()) {
            *a += loss.a();
            *b += loss.b();
        }
        self.seg_a.push(loss.a().clone());
        self.seg_b.push(loss.b().clone());
        self.losses.push(loss.clone());
        self.round += 1;
        if self.schedule.is_constant() {
            let eta = self.schedule.eta(self.round)?;
            let posts = self.end_posteriors_at(eta)?;
            let end_log_z: Vec<f64> = posts.iter().map(|p| p.log_partition).collect();
            let lv = log_v_next(self.round, self.alpha, &self.log_v, &end_log_z)?;
            self.log_v.push(lv);
            self.end_posteriors = posts;
        }
        Ok(StepRecord { prediction, loss_value })
    }
}

/// One rung of the mixture-partition recursion: `log V_t` from
/// `log V_1..t−1` (`log_v_prev`, 0-indexed by round − 1) and the
/// log-partitions of all segments ending at `t` (`end_log_z`, entry `r − 1`
/// covering `[r, t]`). The full-block term carries weight `(1−α)^{t−1}`; the
/// term restarting after round `t−1−s` carries `α (1−α)^s` for
/// `s = 0..t−2`. Zero-probability branches enter as exact `−∞` log terms
/// and drop out of the log-sum-exp.
fn log_v_next(t: usize, alpha: f64, log_v_prev: &[f64], end_log_z: &[f64]) -> Result<f64> {
    debug_assert!(t >= 1);
    debug_assert_eq!(log_v_prev.len(), t - 1);
    debug_assert_eq!(end_log_z.len(), t);
    let log_keep = (1.0 - alpha).ln();
    let log_alpha = alpha.ln();
    let mut terms = Vec::with_capacity(t);
    terms.push(count_times_log(t - 1, log_keep) + end_log_z[0]);
    for s in 0..t.saturating_sub(1) {
        terms.push(
            log_alpha
                + count_times_log(s, log_keep)
                + log_v_prev[t - 2 - s]
                + end_log_z[t - s - 1],
        );
    }
    let lv = log_sum_exp(&terms);
    if lv.is_nan() || lv == f64::INFINITY {
        return Err(Error::NumericFailure(format!(
            "mixture partition log V_{t} is not finite ({lv})"
        )));
    }
    Ok(lv)
}

/// The two running sums the detector differences, in (plain, fixed-share)
/// order. Errors if the states have not seen the same number of rounds.
pub fn cumulative_losses(ew: &EwState, fs: &FsState) -> Result<(f64, f64)> {
    if ew.round() != fs.round() {
        return Err(Error::InvalidState(format!(
            "forecasters are out of sync: {} vs {} completed rounds",
            ew.round(),
            fs.round()
        )));
    }
    Ok((ew.cumulative_loss(), fs.cumulative_loss()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_fs, quad_posterior_mean_1d, QuadratureSpec};
    use crate::quadloss::log_partition;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_loss(a: f64, b: f64) -> QuadraticLoss {
        QuadraticLoss::new(
            DMatrix::from_vec(1, 1, vec![a]),
            DVector::from_vec(vec![b]),
        )
        .unwrap()
    }

    fn random_losses(seed: u64, n: usize, d: usize) -> Vec<QuadraticLoss> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let g = DMatrix::from_fn(d, 1, |_, _| rng.random_range(-1.0..1.0));
                let a = &g * g.transpose();
                let b = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                QuadraticLoss::new(a, b).unwrap()
            })
            .collect()
    }

    fn prior(lambda: f64) -> PriorParams {
        PriorParams::new(lambda).unwrap()
    }

    #[test]
    fn schedule_validation_catches_bad_sequences() {
        assert!(EtaSchedule::Constant(0.0).validate().is_err());
        assert!(EtaSchedule::Constant(-1.0).validate().is_err());
        assert!(EtaSchedule::Explicit(vec![]).validate().is_err());
        assert!(EtaSchedule::Explicit(vec![0.5, 0.6]).validate().is_err(), "increasing");
        assert!(EtaSchedule::Explicit(vec![0.5, 0.5, 0.1]).validate().is_ok());
        assert!(EtaSchedule::InverseSqrt.validate().is_ok());
    }

    #[test]
    fn schedule_rates_are_as_documented() {
        assert_relative_eq!(EtaSchedule::InverseSqrt.eta(4).unwrap(), 0.5);
        assert_relative_eq!(EtaSchedule::Constant(0.3).eta(17).unwrap(), 0.3);
        let explicit = EtaSchedule::Explicit(vec![1.0, 0.5]);
        assert_relative_eq!(explicit.eta(2).unwrap(), 0.5);
        assert!(explicit.eta(3).is_err(), "sequence exhausted");
        assert!(explicit.eta(0).is_err(), "rounds are 1-indexed");
    }

    #[test]
    fn ew_first_prediction_is_the_prior_mean() {
        let ew = EwState::new(3, prior(1.0), EtaSchedule::Constant(1.0)).unwrap();
        assert_eq!(ew.predict().unwrap(), DVector::zeros(3));
    }

    #[test]
    fn ew_single_loss_posterior() {
        let mut ew = EwState::new(2, prior(1.0), EtaSchedule::Constant(1.0)).unwrap();
        let loss = QuadraticLoss::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 0.0]),
        )
        .unwrap();
        ew.update(&loss).unwrap();
        let pred = ew.predict().unwrap();
        assert_relative_eq!(pred[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(pred[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ew_prediction_matches_quadrature_oracle() {
        let losses = random_losses(3, 10, 1);
        let lambda = 0.9;
        let eta = 0.7;
        let mut ew = EwState::new(1, prior(lambda), EtaSchedule::Constant(eta)).unwrap();
        for loss in &losses {
            ew.update(loss).unwrap();
        }
        let closed = ew.predict().unwrap()[0];
        let sum_a: f64 = losses.iter().map(|l| l.a()[(0, 0)]).sum();
        let sum_b: f64 = losses.iter().map(|l| l.b()[0]).sum();
        let precision = eta * sum_a + lambda;
        let quad = QuadratureSpec::centered(
            eta * sum_b / precision,
            12.0 / precision.sqrt(),
            4001,
        )
        .unwrap();
        let by_quad = quad_posterior_mean_1d(&losses, 1, 10, lambda, eta, &quad).unwrap();
        assert!(
            (closed - by_quad).abs() <= 1e-6 * (1.0 + closed.abs()),
            "closed form {closed} vs quadrature {by_quad}"
        );
    }

    #[test]
    fn ew_zero_loss_leaves_cumulative_loss_unchanged() {
        let mut ew = EwState::new(2, prior(1.0), EtaSchedule::Constant(1.0)).unwrap();
        ew.update(&QuadraticLoss::new(DMatrix::zeros(2, 2), DVector::zeros(2)).unwrap())
            .unwrap();
        assert_eq!(ew.cumulative_loss(), 0.0);
        // Round 1 always predicts zero, and every quadratic loss here
        // vanishes at zero, so the first round is free for any loss.
        let mut ew2 = EwState::new(2, prior(1.0), EtaSchedule::Constant(1.0)).unwrap();
        let record = ew2
            .update(&QuadraticLoss::new(DMatrix::identity(2, 2), DVector::from_vec(vec![3.0, -1.0])).unwrap())
            .unwrap();
        assert_eq!(record.loss_value, 0.0);
    }

    #[test]
    fn ew_cumulative_loss_matches_independent_replay() {
        let losses = random_losses(7, 5, 3);
        let lambda = 1.1;
        let mut ew = EwState::new(3, prior(lambda), EtaSchedule::InverseSqrt).unwrap();
        let mut replay_sum = 0.0;
        let mut stats = SegmentStats::new(3);
        for (i, loss) in losses.iter().enumerate() {
            let t = i + 1;
            let eta = 1.0 / (t as f64).sqrt();
            let pred = posterior_mean(&stats, 1, i, &prior(lambda), eta).unwrap();
            replay_sum += loss.eval(&pred).unwrap();
            ew.update(loss).unwrap();
            stats.push(loss).unwrap();
        }
        assert_relative_eq!(ew.cumulative_loss(), replay_sum, epsilon = 1e-10);
    }

    #[test]
    fn fs_first_prediction_is_zero_and_second_is_shrunk_posterior() {
        let losses = random_losses(11, 2, 2);
        let alpha = 0.3;
        let lambda = 0.8;
        let mut fs = FsState::new(2, prior(lambda), EtaSchedule::Constant(0.6), alpha).unwrap();
        assert_eq!(fs.predict().unwrap(), DVector::zeros(2));
        fs.update(&losses[0]).unwrap();
        let pred = fs.predict().unwrap();
        let mut stats = SegmentStats::new(2);
        stats.push(&losses[0]).unwrap();
        let posterior = posterior_mean(&stats, 1, 1, &prior(lambda), 0.6).unwrap();
        let expected = posterior * (1.0 - alpha);
        assert_relative_eq!(pred, expected, epsilon = 1e-12);
    }

    #[test]
    fn fs_with_zero_switch_probability_reduces_to_ew() {
        let losses = random_losses(13, 40, 3);
        let lambda = 1.2;
        let schedule = EtaSchedule::Constant(0.9);
        let mut ew = EwState::new(3, prior(lambda), schedule.clone()).unwrap();
        let mut fs = FsState::new(3, prior(lambda), schedule, 0.0).unwrap();
        let mut stats = SegmentStats::new(3);
        for loss in &losses {
            let ew_pred = ew.predict().unwrap();
            let fs_pred = fs.predict().unwrap();
            assert!(
                (ew_pred - fs_pred).norm() <= 1e-9,
                "zero-switch mixture should collapse onto the plain forecaster"
            );
            ew.update(loss).unwrap();
            fs.update(loss).unwrap();
            stats.push(loss).unwrap();
            // The mixture partition collapses to the single-segment value.
            let lz = log_partition(&stats, 1, stats.count(), &prior(lambda), 0.9).unwrap();
            let lv = *fs.log_v().unwrap().last().unwrap();
            assert_relative_eq!(lv, lz, epsilon = 1e-9);
        }
        let (l_ew, l_fs) = cumulative_losses(&ew, &fs).unwrap();
        assert_relative_eq!(l_ew, l_fs, epsilon = 1e-9);
    }

    #[test]
    fn fs_matches_brute_force_enumeration() {
        let lambda = 1.0;
        let eta = 0.8;
        for &alpha in &[0.001, 0.1, 0.5] {
            let losses = random_losses(17 + (alpha * 1000.0) as u64, 12, 1);
            let mut fs =
                FsState::new(1, prior(lambda), EtaSchedule::Constant(eta), alpha).unwrap();
            for (i, loss) in losses.iter().enumerate() {
                fs.update(loss).unwrap();
                let t = i + 1;
                let oracle = brute_force_fs(&losses, t, lambda, eta, alpha).unwrap();
                let lv = *fs.log_v().unwrap().last().unwrap();
                assert!(
                    (lv - oracle.log_v).abs() <= 1e-8 * (1.0 + oracle.log_v.abs()),
                    "recursion log V_{t} = {lv} vs enumeration {} at alpha {alpha}",
                    oracle.log_v
                );
                let pred = fs.predict().unwrap();
                assert!(
                    (&pred - &oracle.prediction).norm()
                        <= 1e-8 * (1.0 + oracle.prediction.norm()),
                    "recursion prediction {pred} vs enumeration {} at alpha {alpha}",
                    oracle.prediction
                );
            }
        }
    }

    #[test]
    fn fs_variable_rate_matches_brute_force_at_the_round_rate() {
        let lambda = 0.7;
        let alpha = 0.2;
        let losses = random_losses(23, 9, 1);
        let mut fs = FsState::new(1, prior(lambda), EtaSchedule::InverseSqrt, alpha).unwrap();
        for (i, loss) in losses.iter().enumerate() {
            fs.update(loss).unwrap();
            let completed = i + 1;
            // The prediction for round completed + 1 evaluates the whole
            // mixture at that round's rate.
            let eta_next = 1.0 / ((completed + 1) as f64).sqrt();
            let oracle = brute_force_fs(&losses, completed, lambda, eta_next, alpha).unwrap();
            let pred = fs.predict().unwrap();
            assert!(
                (&pred - &oracle.prediction).norm() <= 1e-8 * (1.0 + oracle.prediction.norm()),
                "variable-rate prediction after round {completed}: {pred} vs {}",
                oracle.prediction
            );
        }
    }

    #[test]
    fn fs_with_certain_switch_forgets_the_past() {
        let lambda = 1.0;
        let eta = 0.9;
        let losses = random_losses(29, 6, 2);
        let mut fs = FsState::new(2, prior(lambda), EtaSchedule::Constant(eta), 1.0).unwrap();
        let mut stats = SegmentStats::new(2);
        let mut product = 0.0;
        for loss in &losses {
            let record = fs.update(loss).unwrap();
            assert!(
                record.prediction.norm() <= 1e-15,
                "restart-always predicts the prior mean every round"
            );
            stats.push(loss).unwrap();
            let k = stats.count();
            product += log_partition(&stats, k, k, &prior(lambda), eta).unwrap();
            let lv = *fs.log_v().unwrap().last().unwrap();
            assert_relative_eq!(lv, product, epsilon = 1e-9);
        }
    }

    #[test]
    fn fs_rejects_invalid_switch_probability() {
        assert!(FsState::new(1, prior(1.0), EtaSchedule::Constant(1.0), -0.1).is_err());
        assert!(FsState::new(1, prior(1.0), EtaSchedule::Constant(1.0), 1.1).is_err());
    }

    #[test]
    fn cumulative_losses_requires_synchronized_states() {
        let mut ew = EwState::new(1, prior(1.0), EtaSchedule::Constant(1.0)).unwrap();
        let fs = FsState::new(1, prior(1.0), EtaSchedule::Constant(1.0), 0.1).unwrap();
        assert_eq!(cumulative_losses(&ew, &fs).unwrap(), (0.0, 0.0));
        ew.update(&scalar_loss(1.0, 0.5)).unwrap();
        assert!(matches!(
            cumulative_losses(&ew, &fs),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn zero_loss_stream_costs_nothing_for_both() {
        let zero = QuadraticLoss::new(DMatrix::zeros(2, 2), DVector::zeros(2)).unwrap();
        let mut ew = EwState::new(2, prior(1.0), EtaSchedule::Constant(0.5)).unwrap();
        let mut fs = FsState::new(2, prior(1.0), EtaSchedule::Constant(0.5), 0.2).unwrap();
        for _ in 0..20 {
            ew.update(&zero).unwrap();
            fs.update(&zero).unwrap();
        }
        assert_eq!(cumulative_losses(&ew, &fs).unwrap(), (0.0, 0.0));
    }
}
