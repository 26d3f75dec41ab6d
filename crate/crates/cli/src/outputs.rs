//! Artifact writers: NDJSON traces, JSON reports, plot-data CSV, and a
//! minimal SVG line chart of the statistic.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use scoregap_core::detector::StepOutcome;

use crate::CliError;

fn io_err(path: &Path, err: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

/// Writes a JSON value pretty-printed, with a trailing newline.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numeric(format!("serializing JSON: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes the trace as NDJSON: one JSON object per processed round, in
/// round order, so the file can be tailed while a long run is in progress.
pub fn write_ndjson(path: &Path, trace: &[StepOutcome]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for step in trace {
        let line = serde_json::to_string(step)
            .map_err(|e| CliError::Numeric(format!("serializing trace row: {e}")))?;
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Writes plot data as CSV with header `t,statistic,threshold`.
pub fn write_plot_csv(path: &Path, trace: &[StepOutcome], threshold: f64) -> Result<(), CliError> {
    let mut text = String::from("t,statistic,threshold\n");
    for step in trace {
        let _ = writeln!(text, "{},{},{}", step.t, step.statistic, threshold);
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes a static line chart of the statistic over rounds, with the alarm
/// threshold as a dashed horizontal rule when it is finite.
pub fn write_svg(path: &Path, trace: &[StepOutcome], threshold: f64) -> Result<(), CliError> {
    const W: f64 = 800.0;
    const H: f64 = 400.0;
    const ML: f64 = 64.0; // left margin (y labels)
    const MR: f64 = 16.0;
    const MT: f64 = 16.0;
    const MB: f64 = 36.0; // bottom margin (x labels)

    let t_min = trace.first().map_or(1.0, |s| s.t as f64);
    let t_max = trace.last().map_or(1.0, |s| s.t as f64);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for step in trace {
        y_min = y_min.min(step.statistic);
        y_max = y_max.max(step.statistic);
    }
    if threshold.is_finite() {
        y_min = y_min.min(threshold);
        y_max = y_max.max(threshold);
    }
    if !y_min.is_finite() || !y_max.is_finite() {
        y_min = -1.0;
        y_max = 1.0;
    }
    if y_max - y_min < 1e-12 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let t_span = (t_max - t_min).max(1.0);
    let px = |t: f64| ML + (t - t_min) / t_span * (W - ML - MR);
    let py = |y: f64| MT + (y_max - y) / (y_max - y_min) * (H - MT - MB);

    let mut points = String::new();
    for step in trace {
        let _ = write!(points, "{:.2},{:.2} ", px(step.t as f64), py(step.statistic));
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(svg, r##"<rect width="{W}" height="{H}" fill="white"/>"##);
    // Axes.
    let _ = writeln!(
        svg,
        r##"<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{}" stroke="#444" stroke-width="1"/>"##,
        H - MB
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{ML}" y1="{}" x2="{}" y2="{}" stroke="#444" stroke-width="1"/>"##,
        H - MB,
        W - MR,
        H - MB
    );
    // Axis labels: extremes only.
    let _ = writeln!(
        svg,
        r##"<text x="{ML}" y="{}" text-anchor="middle" fill="#444">{}</text>"##,
        H - MB + 16.0,
        t_min
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" text-anchor="middle" fill="#444">{}</text>"##,
        W - MR,
        H - MB + 16.0,
        t_max
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" text-anchor="end" fill="#444">{:.3}</text>"##,
        ML - 6.0,
        py(y_max) + 4.0,
        y_max
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" text-anchor="end" fill="#444">{:.3}</text>"##,
        ML - 6.0,
        py(y_min) + 4.0,
        y_min
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" text-anchor="middle" fill="#444">round</text>"##,
        (ML + W - MR) / 2.0,
        H - 8.0
    );
    // Threshold rule.
    if threshold.is_finite() {
        let y = py(threshold);
        let _ = writeln!(
            svg,
            r##"<line x1="{ML}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#cc2222" stroke-width="1" stroke-dasharray="6 4"/>"##,
            W - MR
        );
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{:.2}" text-anchor="end" fill="#cc2222">threshold {threshold:.4}</text>"##,
            W - MR - 4.0,
            y - 6.0
        );
    }
    // The statistic.
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#2255cc" stroke-width="1.5"/>"##,
        points.trim_end()
    );
    let _ = writeln!(svg, "</svg>");

    fs::write(path, svg).map_err(|e| io_err(path, e))
}
