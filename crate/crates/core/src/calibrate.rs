//! Threshold calibration and alarm-sequence evaluation.
//!
//! Calibration picks the alarm threshold empirically: run the detector on
//! `J` independent change-free streams with the alarm disabled, record each
//! run's maximum statistic, and set
//!
//! ```text
//! 𝔷 = max_j max_{1 ≤ t ≤ T₀} Ŝ_t^{(j)}.
//! ```
//!
//! By exchangeability, a fresh change-free run of the same length beats all
//! `J` maxima with probability `1/(J+1)`, so `J` directly dials the false
//! alarm rate. The first round's statistic is always zero (both forecasters
//! open with the zero prediction), so the calibrated threshold is never
//! negative.
//!
//! Evaluation scores a sequence of alarm times against annotated change
//! points, classifying every alarm as a detection (possibly early, within a
//! short grace window) or a false alarm, and charging undetected changes
//! the full distance to the next change (or to the horizon).

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::detector::{DetectorConfig, DetectorState};
use crate::{Error, Result};

/// Outcome of an empirical threshold calibration.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    /// Largest statistic seen across all runs: the calibrated threshold.
    pub threshold: f64,
    /// Number of change-free runs.
    pub runs: usize,
    /// Rounds consumed per run.
    pub horizon: usize,
    /// Per-run maxima of the statistic, in run order.
    pub run_maxima: Vec<f64>,
}

/// Calibrates the alarm threshold on change-free streams.
///
/// `null_source(j)` must produce the `j`-th change-free stream, at least
/// `horizon` observations long; runs are independent, so the source is
/// called once per run index in `0..runs` (in parallel). The detector runs
/// with the alarm disabled (`threshold = +∞`, `stop_on_alarm = false`)
/// regardless of what `config` says for those two fields.
pub fn calibrate_threshold<F>(
    config: &DetectorConfig,
    null_source: F,
    runs: usize,
    horizon: usize,
) -> Result<CalibrationResult>
where
    F: Fn(usize) -> Result<Vec<DVector<f64>>> + Sync,
{
    if runs == 0 {
        return Err(Error::InvalidArgument(
            "calibration needs at least one change-free run".to_string(),
        ));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument(
            "calibration horizon must be at least one round".to_string(),
        ));
    }
    config.validate()?;
    let run_maxima: Vec<f64> = (0..runs)
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let stream = null_source(j)?;
            if stream.len() < horizon {
                return Err(Error::InvalidArgument(format!(
                    "change-free stream {j} has {} rounds, needs {horizon}",
                    stream.len()
                )));
            }
            let mut probe = config.clone();
            probe.threshold = f64::INFINITY;
            probe.stop_on_alarm = false;
            let mut state = DetectorState::new(probe)?;
            let mut run_max = f64::NEG_INFINITY;
            for x in stream.iter().take(horizon) {
                let outcome = state.step(x)?;
                run_max = run_max.max(outcome.statistic);
            }
            Ok(run_max)
        })
        .collect::<Result<Vec<f64>>>()?;
    let threshold = run_maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CalibrationResult {
        threshold,
        runs,
        horizon,
        run_maxima,
    })
}

/// Detection metrics for one alarm sequence against one annotation set.
#[derive(Debug, Clone, Serialize)]
pub struct EvalMetrics {
    /// Alarms that matched no change point.
    pub false_alarms: usize,
    /// One delay per annotated change, in annotation order.
    pub delays: Vec<usize>,
    /// Mean of `delays` (zero when there are no annotations).
    pub mean_delay: f64,
    /// Sample standard deviation of `delays` (zero when `delays.len() < 2`).
    pub delay_std: f64,
}

/// Scores alarms against annotated change points.
///
/// Rules, applied to each alarm `a` against the earliest unclaimed
/// annotation `τ`:
///
/// * `a ≥ τ`: detection with delay `a − τ` — unless `a` has already reached
///   a later annotation, in which case every overtaken annotation is
///   retired as missed first.
/// * `0 < τ − a < min_diff`: the alarm is early but within the grace
///   window; detection with delay `0`.
/// * `τ − a ≥ min_diff`: false alarm (the boundary case counts as false).
///
/// A missed annotation is charged the gap to the next annotation, and the
/// last one the gap to the horizon. Alarms arriving after every annotation
/// has been claimed are false alarms.
pub fn evaluate(
    alarms: &[usize],
    annotations: &[usize],
    min_diff: usize,
    horizon: usize,
) -> Result<EvalMetrics> {
    for pair in alarms.windows(2) {
        if pair[1] < pair[0] {
            return Err(Error::InvalidArgument(
                "alarm times must be non-decreasing".to_string(),
            ));
        }
    }
    for pair in annotations.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidArgument(
                "annotated change points must be strictly increasing".to_string(),
            ));
        }
    }
    if let Some(&first) = annotations.first() {
        if first == 0 {
            return Err(Error::InvalidArgument(
                "annotated change points must be at least round 1".to_string(),
            ));
        }
    }
    if let Some(&last) = annotations.last() {
        if last > horizon {
            return Err(Error::InvalidArgument(format!(
                "annotation {last} lies beyond the horizon {horizon}"
            )));
        }
    }
    if let Some(&first) = alarms.first() {
        if first == 0 {
            return Err(Error::InvalidArgument(
                "alarm times must be at least round 1".to_string(),
            ));
        }
    }

    let m = annotations.len();
    let mut false_alarms = 0usize;
    let mut delays = Vec::with_capacity(m);
    // Index of the earliest annotation not yet claimed or retired.
    let mut k = 0usize;
    for &a in alarms {
        // An alarm at or past a later annotation retires every annotation
        // it overtook: those changes went undetected.
        while k + 1 < m && a >= annotations[k + 1] {
            delays.push(annotations[k + 1] - annotations[k]);
            k += 1;
        }
        if k == m {
            false_alarms += 1;
            continue;
        }
        let tau = annotations[k];
        if a >= tau {
            delays.push(a - tau);
            k += 1;
        } else if tau - a < min_diff {
            // Early by less than the grace window: counts as an immediate
            // detection of the upcoming change.
            delays.push(0);
            k += 1;
        } else {
            false_alarms += 1;
        }
    }
    // Whatever remains unclaimed was missed outright.
    while k < m {
        let charge = if k + 1 < m {
            annotations[k + 1] - annotations[k]
        } else {
            horizon - annotations[k]
        };
        delays.push(charge);
        k += 1;
    }

    let mean_delay = if delays.is_empty() {
        0.0
    } else {
        delays.iter().map(|&d| d as f64).sum::<f64>() / delays.len() as f64
    };
    let delay_std = if delays.len() < 2 {
        0.0
    } else {
        let var = delays
            .iter()
            .map(|&d| (d as f64 - mean_delay).powi(2))
            .sum::<f64>()
            / (delays.len() - 1) as f64;
        var.sqrt()
    };
    Ok(EvalMetrics {
        false_alarms,
        delays,
        mean_delay,
        delay_std,
    })
}
