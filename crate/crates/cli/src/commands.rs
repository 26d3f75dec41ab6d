//! The five subcommand implementations.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use scoregap_core::calibrate::{calibrate_threshold, evaluate, CalibrationResult};
use scoregap_core::detector::{run_stream, DetectorConfig};
use scoregap_core::forecasters::{EtaSchedule, FsState};
use scoregap_core::oracle::{
    brute_force_fs, identity_checks, mc_green_check, mc_mixability_check, quad_log_z_1d,
    quad_posterior_mean_1d, QuadratureSpec,
};
use scoregap_core::quadloss::{log_partition, posterior_mean, PriorParams, QuadraticLoss, SegmentStats};
use scoregap_core::regret::{dynamic_regret, ew_bound, fs_bound, static_regret};
use scoregap_core::scoreloss::{poly_basis, BasisSpec};
use scoregap_core::synthetic::{generate, generate_null, SyntheticSpec};

use crate::{
    ingest, outputs, CalibrateArgs, CliError, EvaluateArgs, GenerateArgs, Normalize, RunArgs,
    SelfcheckArgs,
};

// ---------------------------------------------------------------------------
// Shared flag parsing
// ---------------------------------------------------------------------------

fn parse_eta(raw: &str) -> Result<EtaSchedule, CliError> {
    if raw == "inv-sqrt" {
        return Ok(EtaSchedule::InverseSqrt);
    }
    match raw.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(EtaSchedule::Constant(v)),
        _ => Err(CliError::Usage(format!(
            "--eta expects a positive number or \"inv-sqrt\", got \"{raw}\""
        ))),
    }
}

fn parse_generator(raw: &str) -> Result<SyntheticSpec, CliError> {
    let id = match raw {
        "example1" => 1,
        "example2" => 2,
        "example3" => 3,
        "example4" => 4,
        _ => {
            return Err(CliError::Usage(format!(
                "--generate expects example1..example4, got \"{raw}\""
            )))
        }
    };
    SyntheticSpec::example(id).map_err(|e| CliError::Usage(e.to_string()))
}

/// Parses "J,T0" into (runs, rounds per run).
fn parse_calibrate(raw: &str) -> Result<(usize, usize), CliError> {
    let bad = || {
        CliError::Usage(format!(
            "--calibrate expects \"J,T0\" (runs, rounds per run), got \"{raw}\""
        ))
    };
    let (j, t0) = raw.split_once(',').ok_or_else(bad)?;
    let runs = j.trim().parse::<usize>().map_err(|_| bad())?;
    let horizon = t0.trim().parse::<usize>().map_err(|_| bad())?;
    if runs == 0 || horizon == 0 {
        return Err(CliError::Usage(
            "--calibrate needs at least one run and one round per run".to_string(),
        ));
    }
    Ok((runs, horizon))
}

fn basis_for(name: &str, dims: usize) -> Result<BasisSpec, CliError> {
    let degree = match name {
        "poly1" => 1,
        "poly2" => 2,
        _ => {
            return Err(CliError::Usage(format!(
                "--basis expects poly1 or poly2, got \"{name}\""
            )))
        }
    };
    poly_basis(dims, degree).map_err(|e| CliError::Usage(e.to_string()))
}

/// Seed for the j-th calibration draw: the base seed is avalanched so the
/// calibration streams never coincide with the run stream drawn from the
/// base seed itself.
fn calibration_seed(base: u64, j: usize) -> u64 {
    let mut z = base.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z.wrapping_add(j as u64)
}

fn usage(err: scoregap_core::Error) -> CliError {
    CliError::Usage(err.to_string())
}

fn numeric(err: scoregap_core::Error) -> CliError {
    CliError::Numeric(err.to_string())
}

/// Writes `value` to `path` when given, otherwise pretty-prints it to
/// stdout. Returns whether a file was written.
fn emit_json(path: Option<&Path>, value: &serde_json::Value) -> Result<bool, CliError> {
    match path {
        Some(p) => {
            outputs::write_json(p, value)?;
            Ok(true)
        }
        None => {
            let text = serde_json::to_string_pretty(value)
                .map_err(|e| CliError::Numeric(format!("serializing JSON: {e}")))?;
            println!("{text}");
            Ok(false)
        }
    }
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

pub fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    // Data source.
    let (data, source, generator) = match (&args.input, &args.generate) {
        (Some(path), None) => {
            let data = ingest::ingest_csv(path, args.normalize)?;
            (data, path.display().to_string(), None)
        }
        (None, Some(name)) => {
            let spec = parse_generator(name)?;
            let mut data = generate(&spec, args.seed).map_err(numeric)?;
            if args.normalize == Normalize::MaxAbs {
                ingest::normalize_max_abs(&mut data);
            }
            (data, name.clone(), Some(spec))
        }
        _ => {
            return Err(CliError::Usage(
                "provide exactly one of --input and --generate".to_string(),
            ))
        }
    };
    if data.is_empty() {
        return Err(CliError::Usage("the input stream is empty".to_string()));
    }
    let dims = data[0].len();
    let horizon = data.len();

    // Model.
    let basis = basis_for(&args.basis, dims)?;
    let prior = PriorParams::new(args.lambda).map_err(usage)?;
    let schedule = parse_eta(&args.eta)?;

    // Threshold: fixed, or calibrated on change-free draws first.
    let (threshold, calibration) = match (args.threshold, &args.calibrate) {
        (Some(z), None) => {
            if z.is_nan() {
                return Err(CliError::Usage("--threshold must not be NaN".to_string()));
            }
            (z, None)
        }
        (None, Some(spec_str)) => {
            let (runs, cal_horizon) = parse_calibrate(spec_str)?;
            let spec = generator.as_ref().ok_or_else(|| {
                CliError::Usage(
                    "--calibrate draws change-free streams from a generator; use --generate"
                        .to_string(),
                )
            })?;
            if args.normalize == Normalize::MaxAbs {
                return Err(CliError::Usage(
                    "--calibrate cannot be combined with --normalize max-abs: each stream \
                     would be scaled by its own divisor, so the calibrated threshold would \
                     not transfer to the run stream"
                        .to_string(),
                ));
            }
            let config = DetectorConfig {
                prior,
                alpha: args.alpha,
                schedule: schedule.clone(),
                threshold: f64::INFINITY,
                basis: basis.clone(),
                stop_on_alarm: false,
            };
            config.validate().map_err(usage)?;
            let result = calibrate_threshold(
                &config,
                |j| generate_null(spec, calibration_seed(args.seed, j), cal_horizon),
                runs,
                cal_horizon,
            )
            .map_err(numeric)?;
            (result.threshold, Some(result))
        }
        _ => {
            return Err(CliError::Usage(
                "provide exactly one of --threshold and --calibrate".to_string(),
            ))
        }
    };

    // The run itself.
    let config = DetectorConfig {
        prior,
        alpha: args.alpha,
        schedule: schedule.clone(),
        threshold,
        basis: basis.clone(),
        stop_on_alarm: !args.continue_after_alarm,
    };
    config.validate().map_err(usage)?;
    let report = run_stream(config, &data).map_err(numeric)?;
    let processed = report.trace.len();

    // Detection metrics against the generator's change point, when known.
    let annotations: Option<Vec<usize>> = generator.as_ref().map(|s| vec![s.change_point()]);
    let alarms: Vec<usize> = report.alarm_time.into_iter().collect();
    let metrics = match &annotations {
        Some(ann) => Some(evaluate(&alarms, ann, args.min_diff, horizon).map_err(numeric)?),
        None => None,
    };

    // Optional regret diagnostics over the processed prefix.
    let diagnostics = if args.diagnostics {
        Some(run_diagnostics(
            &data[..processed],
            &basis,
            prior,
            &schedule,
            args.alpha,
            annotations.as_deref(),
            &report.trace,
        )?)
    } else {
        None
    };

    // Artifacts.
    if let Some(path) = &args.trace {
        outputs::write_ndjson(path, &report.trace)?;
    }
    if let Some(path) = &args.plot {
        outputs::write_plot_csv(path, &report.trace, threshold)?;
    }
    if let Some(path) = &args.svg {
        outputs::write_svg(path, &report.trace, threshold)?;
    }

    let report_json = json!({
        "alarm_time": report.alarm_time,
        "processed_steps": processed,
        "horizon": horizon,
        "config": report.config,
        "wall_time_secs": report.wall_time_secs,
        "input": {
            "source": source,
            "rows": horizon,
            "dims": dims,
            "normalize": args.normalize.describe(),
            "seed": generator.as_ref().map(|_| args.seed),
        },
        "min_diff": args.min_diff,
        "annotations": annotations,
        "metrics": metrics,
        "calibration": calibration,
        "diagnostics": diagnostics,
    });
    if emit_json(args.report.as_deref(), &report_json)? {
        match report.alarm_time {
            Some(t) => println!(
                "alarm at round {t} of {processed} processed (threshold {threshold}); report: {}",
                args.report.as_ref().unwrap().display()
            ),
            None => println!(
                "no alarm in {processed} rounds (threshold {threshold}); report: {}",
                args.report.as_ref().unwrap().display()
            ),
        }
    }
    Ok(())
}

/// Static/dynamic regret of both forecasters' committed predictions plus
/// their guarantee breakdowns, serialized for the report.
#[allow(clippy::too_many_arguments)]
fn run_diagnostics(
    data: &[DVector<f64>],
    basis: &BasisSpec,
    prior: PriorParams,
    schedule: &EtaSchedule,
    alpha: f64,
    annotations: Option<&[usize]>,
    trace: &[scoregap_core::detector::StepOutcome],
) -> Result<serde_json::Value, CliError> {
    if data.is_empty() {
        return Ok(serde_json::Value::Null);
    }
    let losses: Vec<QuadraticLoss> = data
        .iter()
        .map(|x| basis.build_loss(x))
        .collect::<Result<_, _>>()
        .map_err(numeric)?;
    let ew_path: Vec<DVector<f64>> = trace
        .iter()
        .map(|s| DVector::from_vec(s.ew_prediction.clone()))
        .collect();
    let fs_path: Vec<DVector<f64>> = trace
        .iter()
        .map(|s| DVector::from_vec(s.fs_prediction.clone()))
        .collect();

    let ew_static = static_regret(&losses, &ew_path).map_err(numeric)?;
    let fs_static = static_regret(&losses, &fs_path).map_err(numeric)?;

    // Partition for the switching comparator: one switch at the annotated
    // change point when it lies inside the processed prefix.
    let processed = losses.len();
    let switch_points: Vec<usize> = match annotations {
        Some([tau]) if *tau > 0 && *tau < processed => vec![0, *tau, processed],
        _ => vec![0, processed],
    };
    let fs_dynamic = dynamic_regret(&losses, &fs_path, &switch_points).map_err(numeric)?;

    let ew_guarantee = ew_bound(&losses, prior, schedule).map_err(numeric)?;
    let fs_guarantee = fs_bound(&losses, prior, schedule, alpha, &switch_points).map_err(numeric)?;

    Ok(json!({
        "ew_static_regret": { "regret": ew_static.regret, "unbounded": ew_static.unbounded },
        "fs_static_regret": { "regret": fs_static.regret, "unbounded": fs_static.unbounded },
        "fs_dynamic_regret": { "regret": fs_dynamic.regret, "unbounded": fs_dynamic.unbounded },
        "switch_points": switch_points,
        "ew_guarantee": ew_guarantee,
        "fs_guarantee": fs_guarantee,
    }))
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

pub fn cmd_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let spec = parse_generator(&args.generate)?;
    let (runs, horizon) = parse_calibrate(&args.calibrate)?;
    let basis = basis_for(&args.basis, spec.dims())?;
    let prior = PriorParams::new(args.lambda).map_err(usage)?;
    let schedule = parse_eta(&args.eta)?;
    let config = DetectorConfig {
        prior,
        alpha: args.alpha,
        schedule,
        threshold: f64::INFINITY,
        basis,
        stop_on_alarm: false,
    };
    config.validate().map_err(usage)?;
    let result: CalibrationResult = calibrate_threshold(
        &config,
        |j| generate_null(&spec, calibration_seed(args.seed, j), horizon),
        runs,
        horizon,
    )
    .map_err(numeric)?;

    let threshold = result.threshold;
    let out = json!({
        "threshold": result.threshold,
        "runs": result.runs,
        "horizon": result.horizon,
        "run_maxima": result.run_maxima,
        "config": {
            "generator": args.generate,
            "basis": args.basis,
            "lambda": args.lambda,
            "alpha": args.alpha,
            "eta": args.eta,
            "seed": args.seed,
        },
    });
    if emit_json(args.report.as_deref(), &out)? {
        println!(
            "calibrated threshold {threshold} from {runs} change-free runs of {horizon} rounds; report: {}",
            args.report.as_ref().unwrap().display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Annotation file: a JSON array of change points, or one integer per line.
fn read_annotations(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let trimmed = text.trim();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed)
            .map_err(|e| CliError::Io(format!("{}: invalid JSON array: {e}", path.display())));
    }
    let mut out = Vec::new();
    for (i, line) in trimmed.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value = line.parse::<usize>().map_err(|_| {
            CliError::Io(format!(
                "{}: line {} is not a change-point round: \"{line}\"",
                path.display(),
                i + 1
            ))
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.input.display())))?;
    let report: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("{}: invalid JSON: {e}", args.input.display())))?;

    let horizon = report
        .get("horizon")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| {
            CliError::Io(format!(
                "{}: not a run report (missing \"horizon\")",
                args.input.display()
            ))
        })? as usize;
    let alarms: Vec<usize> = match report.get("alarm_time") {
        Some(serde_json::Value::Number(n)) => {
            let t = n.as_u64().ok_or_else(|| {
                CliError::Io(format!(
                    "{}: \"alarm_time\" is not a round index",
                    args.input.display()
                ))
            })? as usize;
            vec![t]
        }
        Some(serde_json::Value::Null) | None => Vec::new(),
        Some(_) => {
            return Err(CliError::Io(format!(
                "{}: \"alarm_time\" is not a round index",
                args.input.display()
            )))
        }
    };

    let annotations = read_annotations(&args.annotations)?;
    let metrics = evaluate(&alarms, &annotations, args.min_diff, horizon).map_err(usage)?;
    let out = serde_json::to_value(&metrics)
        .map_err(|e| CliError::Numeric(format!("serializing metrics: {e}")))?;
    if emit_json(args.report.as_deref(), &out)? {
        println!(
            "false alarms {}, mean delay {}; report: {}",
            metrics.false_alarms,
            metrics.mean_delay,
            args.report.as_ref().unwrap().display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

pub fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let spec = parse_generator(&args.generate)?;
    let data = generate(&spec, args.seed).map_err(numeric)?;
    let mut text = String::new();
    for row in &data {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    match &args.output {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            println!(
                "{} rows of dimension {} written to {}",
                data.len(),
                spec.dims(),
                path.display()
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// selfcheck
// ---------------------------------------------------------------------------

/// Deterministic pseudo-random doubles in [0, 1) for instance generation —
/// a fixed avalanche keeps the binary free of RNG dependencies.
struct Mix(u64);

impl Mix {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [lo, hi).
    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        let unit = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + unit * (hi - lo)
    }
}

fn scalar_loss(a: f64, b: f64) -> QuadraticLoss {
    QuadraticLoss::new(DMatrix::from_element(1, 1, a), DVector::from_element(1, b))
        .expect("1x1 losses with positive curvature are valid")
}

struct Check {
    name: &'static str,
    pass: bool,
    details: String,
}

pub fn cmd_selfcheck(args: SelfcheckArgs) -> Result<(), CliError> {
    let mut checks: Vec<Check> = Vec::new();
    let mut mix = Mix(args.seed);

    // 1 & 2: closed-form partition value and posterior mean against direct
    // quadrature on scalar losses.
    let quad = QuadratureSpec::new(-12.0, 12.0, 3001).map_err(numeric)?;
    let mut max_z_err = 0.0_f64;
    let mut max_mean_err = 0.0_f64;
    for _ in 0..8 {
        let lambda = mix.range(0.3, 1.5);
        let eta = mix.range(0.15, 0.9);
        let prior = PriorParams::new(lambda).map_err(numeric)?;
        let losses: Vec<QuadraticLoss> = (0..6)
            .map(|_| scalar_loss(mix.range(0.1, 1.5), mix.range(-1.0, 1.0)))
            .collect();
        let mut stats = SegmentStats::new(1);
        for loss in &losses {
            stats.push(loss).map_err(numeric)?;
        }
        for (s, t) in [(1usize, 6usize), (2, 5)] {
            let closed = log_partition(&stats, s, t, &prior, eta).map_err(numeric)?;
            let quadrature = quad_log_z_1d(&losses, s, t, lambda, eta, &quad).map_err(numeric)?;
            max_z_err = max_z_err.max((closed - quadrature).abs() / (1.0 + quadrature.abs()));
            let mean = posterior_mean(&stats, s, t, &prior, eta).map_err(numeric)?[0];
            let mean_q = quad_posterior_mean_1d(&losses, s, t, lambda, eta, &quad).map_err(numeric)?;
            max_mean_err = max_mean_err.max((mean - mean_q).abs() / (1.0 + mean_q.abs()));
        }
    }
    checks.push(Check {
        name: "partition-function-vs-quadrature",
        pass: max_z_err <= 1e-9,
        details: format!("max relative error {max_z_err:.2e} over 16 segments"),
    });
    checks.push(Check {
        name: "posterior-mean-vs-quadrature",
        pass: max_mean_err <= 1e-9,
        details: format!("max relative error {max_mean_err:.2e} over 16 segments"),
    });

    // 3: switching-forecaster recursion against exhaustive enumeration.
    let mut max_v_err = 0.0_f64;
    let mut max_pred_err = 0.0_f64;
    for _ in 0..6 {
        let lambda = mix.range(0.3, 1.5);
        let eta = mix.range(0.15, 0.9);
        let alpha = mix.range(0.005, 0.3);
        let losses: Vec<QuadraticLoss> = (0..10)
            .map(|_| scalar_loss(mix.range(0.1, 1.5), mix.range(-1.0, 1.0)))
            .collect();
        let oracle = brute_force_fs(&losses, 10, lambda, eta, alpha).map_err(numeric)?;
        let prior = PriorParams::new(lambda).map_err(numeric)?;
        let mut fs =
            FsState::new(1, prior, EtaSchedule::Constant(eta), alpha).map_err(numeric)?;
        for loss in &losses {
            fs.update(loss).map_err(numeric)?;
        }
        let log_v = *fs
            .log_v()
            .expect("constant schedule caches log V")
            .last()
            .expect("ten rounds were pushed");
        let prediction = fs.predict().map_err(numeric)?;
        max_v_err = max_v_err.max((log_v - oracle.log_v).abs() / (1.0 + oracle.log_v.abs()));
        max_pred_err = max_pred_err
            .max((prediction[0] - oracle.prediction[0]).abs() / (1.0 + oracle.prediction[0].abs()));
    }
    checks.push(Check {
        name: "switching-weights-vs-enumeration",
        pass: max_v_err <= 1e-8 && max_pred_err <= 1e-8,
        details: format!(
            "max log-weight rel err {max_v_err:.2e}, max prediction rel err {max_pred_err:.2e} over 6 streams"
        ),
    });

    // 4: aggregation inequality by Monte Carlo on hand-conditioned
    // instances (curvature condition satisfied with a 0.9 safety factor).
    let mut mixability_failures = 0usize;
    for k in 0..6 {
        let a = 0.4 + 0.2 * k as f64;
        let b = 0.3 - 0.1 * k as f64;
        let eta = 0.2 + 0.1 * k as f64;
        let loss = scalar_loss(a, b);
        let drift = (0.9 / (2.0 * eta * a)).sqrt();
        let mu = DVector::from_element(1, b / a + drift);
        let omega = DMatrix::from_element(1, 1, 1.0 + 0.5 * k as f64);
        let report = mc_mixability_check(&loss, &mu, &omega, eta, 200_000, args.seed + k as u64)
            .map_err(numeric)?;
        if !report.pass {
            mixability_failures += 1;
        }
    }
    checks.push(Check {
        name: "aggregation-inequality-monte-carlo",
        pass: mixability_failures == 0,
        details: format!("{} of 6 instances failed", mixability_failures),
    });

    // 5: the pointwise loss is an unbiased estimate of its closed-form
    // expectation, including at the exactly-matching score where the
    // expectation hits its floor.
    let mut green_failures = 0usize;
    for (mu, sigma, exact) in [(0.0, 1.0, true), (0.5, 0.7, true), (-0.3, 1.4, false)] {
        let theta = if exact {
            [mu / (sigma * sigma), -0.5 / (sigma * sigma)]
        } else {
            [0.4, -0.2]
        };
        let report = mc_green_check(mu, sigma, theta, 200_000, args.seed + 11).map_err(numeric)?;
        if !report.pass {
            green_failures += 1;
        }
    }
    checks.push(Check {
        name: "loss-expectation-monte-carlo",
        pass: green_failures == 0,
        details: format!("{} of 3 configurations failed", green_failures),
    });

    // 6: matrix identities used by the closed forms.
    let identities = identity_checks(args.seed, 300).map_err(numeric)?;
    checks.push(Check {
        name: "matrix-identities",
        pass: identities.violations == 0,
        details: format!(
            "{} violations in {} trials",
            identities.violations, identities.trials
        ),
    });

    let mut failures = 0usize;
    for check in &checks {
        let status = if check.pass { "PASS" } else { "FAIL" };
        println!("selfcheck {}: {status} — {}", check.name, check.details);
        if !check.pass {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(CliError::Numeric(format!(
            "{failures} of {} selfchecks failed",
            checks.len()
        )));
    }
    println!("all {} selfchecks passed", checks.len());
    Ok(())
}
