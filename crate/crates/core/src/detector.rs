//! The change-point detector: two forecasters racing on one loss stream.
//!
//! Each incoming observation is turned into a quadratic score loss; the
//! exponentially weighted forecaster (which trusts the whole history) and
//! the fixed-share forecaster (which hedges over restarts) both suffer it.
//! The detector tracks the cumulative gap
//!
//! ```text
//! Ŝ_t = L̂_{1:t}^{EW} − L̂_{1:t}^{FS},   Ŝ_0 = 0,
//! ```
//!
//! and raises an alarm the first time `Ŝ_t` strictly exceeds the threshold.
//! While the stream is stationary both forecasters perform comparably and
//! the gap stays near zero; after a distribution change the full-history
//! forecaster keeps paying for its stale posterior while the fixed-share
//! mixture shifts mass to a restart, so the gap climbs.
//!
//! The detector never resets itself after an alarm — one run hunts one
//! change. A `stop_on_alarm` flag controls whether stepping past the alarm
//! is an error (stopped mode) or the statistic simply keeps accumulating
//! (trace mode, used for calibration and diagnostics). Runs are fully
//! deterministic: identical configuration and input give a bit-identical
//! trace.

use nalgebra::DVector;
use serde::Serialize;

use crate::forecasters::{cumulative_losses, EtaSchedule, EwState, FsState};
use crate::quadloss::PriorParams;
use crate::scoreloss::BasisSpec;
use crate::{Error, Result};

/// Everything a detection run needs: prior, restart probability, learning
/// rates, alarm threshold, score basis, and the after-alarm policy.
#[derive(Debug, Clone)]
pub struct DetectorConfig {
    /// Gaussian prior precision shared by both forecasters.
    pub prior: PriorParams,
    /// Fixed-share restart probability `α ∈ [0, 1]`.
    pub alpha: f64,
    /// Learning-rate schedule shared by both forecasters.
    pub schedule: EtaSchedule,
    /// Alarm threshold; the statistic must strictly exceed it. `+∞` never
    /// alarms (used during calibration).
    pub threshold: f64,
    /// Score basis mapping observations to quadratic losses.
    pub basis: BasisSpec,
    /// When set, stepping after an alarm is an invalid-state error; when
    /// clear, the statistic keeps accumulating and later crossings are
    /// still flagged.
    pub stop_on_alarm: bool,
}

impl DetectorConfig {
    /// Checks the restart probability, the threshold (NaN is the only
    /// rejected value — infinities are legitimate sentinels), and the
    /// learning-rate schedule.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "switch probability must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.threshold.is_nan() {
            return Err(Error::InvalidArgument(
                "alarm threshold must not be NaN".to_string(),
            ));
        }
        self.schedule.validate()
    }
}

/// One detector step, in emission order.
#[derive(Debug, Clone, Serialize)]
pub struct StepOutcome {
    /// 1-based round index.
    pub t: usize,
    /// Prediction committed by the exponentially weighted forecaster.
    pub ew_prediction: Vec<f64>,
    /// Prediction committed by the fixed-share forecaster.
    pub fs_prediction: Vec<f64>,
    /// Loss suffered by the exponentially weighted forecaster.
    pub ew_loss: f64,
    /// Loss suffered by the fixed-share forecaster.
    pub fs_loss: f64,
    /// Running gap `Ŝ_t` after this round.
    pub statistic: f64,
    /// Whether `Ŝ_t` strictly exceeds the threshold.
    pub alarm: bool,
}

/// Serializable snapshot of the configuration a report was produced under.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    /// Prior precision `λ`.
    pub lambda: f64,
    /// Restart probability `α`.
    pub alpha: f64,
    /// Learning-rate schedule, human-readable.
    pub schedule: String,
    /// Alarm threshold.
    pub threshold: f64,
    /// Score basis, human-readable.
    pub basis: String,
    /// After-alarm policy.
    pub stop_on_alarm: bool,
}

impl ConfigEcho {
    fn of(config: &DetectorConfig) -> Self {
        let schedule = match &config.schedule {
            EtaSchedule::Constant(eta) => format!("constant({eta})"),
            EtaSchedule::InverseSqrt => "inverse_sqrt".to_string(),
            EtaSchedule::Explicit(etas) => format!("explicit(len={})", etas.len()),
        };
        Self {
            lambda: config.prior.lambda(),
            alpha: config.alpha,
            schedule,
            threshold: config.threshold,
            basis: config.basis.describe(),
            stop_on_alarm: config.stop_on_alarm,
        }
    }
}

/// Full record of one detection run.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionReport {
    /// First round whose statistic strictly exceeded the threshold, if any.
    pub alarm_time: Option<usize>,
    /// Per-round trace; under `stop_on_alarm` it ends at the alarm round.
    pub trace: Vec<StepOutcome>,
    /// Configuration the run used.
    pub config: ConfigEcho,
    /// Wall-clock duration of the run in seconds.
    pub wall_time_secs: f64,
}

/// Incremental detector: feed observations with [`DetectorState::step`].
#[derive(Debug, Clone)]
pub struct DetectorState {
    config: DetectorConfig,
    ew: EwState,
    fs: FsState,
    statistic: f64,
    round: usize,
    alarm_time: Option<usize>,
}

impl DetectorState {
    /// Validates the configuration and prepares both forecasters for round 1
    /// with `Ŝ_0 = 0`.
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let d = config.basis.param_dim();
        let ew = EwState::new(d, config.prior, config.schedule.clone())?;
        let fs = FsState::new(d, config.prior, config.schedule.clone(), config.alpha)?;
        Ok(Self {
            config,
            ew,
            fs,
            statistic: 0.0,
            round: 0,
            alarm_time: None,
        })
    }

    /// Configuration this detector runs under.
    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Current statistic `Ŝ_t`.
    pub fn statistic(&self) -> f64 {
        self.statistic
    }

    /// Completed rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    /// First alarm round, if one has occurred.
    pub fn alarm_time(&self) -> Option<usize> {
        self.alarm_time
    }

    /// Consumes one observation: builds its score loss, lets both
    /// forecasters predict and suffer it, advances the statistic, and flags
    /// an alarm on strict threshold crossing.
    pub fn step(&mut self, x: &DVector<f64>) -> Result<StepOutcome> {
        if self.config.stop_on_alarm && self.alarm_time.is_some() {
            return Err(Error::InvalidState(
                "the stream was terminated by an alarm; start a fresh detector to continue"
                    .to_string(),
            ));
        }
        let loss = self.config.basis.build_loss(x)?;
        let ew_record = self.ew.update(&loss)?;
        let fs_record = self.fs.update(&loss)?;
        self.statistic += ew_record.loss_value - fs_record.loss_value;
        self.round += 1;
        let alarm = self.statistic > self.config.threshold;
        if alarm && self.alarm_time.is_none() {
            self.alarm_time = Some(self.round);
        }
        Ok(StepOutcome {
            t: self.round,
            ew_prediction: ew_record.prediction.iter().copied().collect(),
            fs_prediction: fs_record.prediction.iter().copied().collect(),
            ew_loss: ew_record.loss_value,
            fs_loss: fs_record.loss_value,
            statistic: self.statistic,
            alarm,
        })
    }

    /// The two forecasters' cumulative losses, `(plain, fixed-share)`.
    pub fn losses(&self) -> Result<(f64, f64)> {
        cumulative_losses(&self.ew, &self.fs)
    }
}

/// Runs a whole stream through a fresh detector. The trace covers every
/// consumed observation; under `stop_on_alarm` consumption ends with the
/// alarm round, otherwise the full stream is traced and `alarm_time` marks
/// the first crossing.
pub fn run_stream(config: DetectorConfig, data: &[DVector<f64>]) -> Result<DetectionReport> {
    let started = std::time::Instant::now();
    let stop_on_alarm = config.stop_on_alarm;
    let mut state = DetectorState::new(config)?;
    let mut trace = Vec::new();
    for x in data {
        let outcome = state.step(x)?;
        let alarmed = outcome.alarm;
        trace.push(outcome);
        if stop_on_alarm && alarmed {
            break;
        }
    }
    Ok(DetectionReport {
        alarm_time: state.alarm_time(),
        trace,
        config: ConfigEcho::of(state.config()),
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}
