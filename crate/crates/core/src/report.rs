//! Plain-text experiment report and SVG result charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{ensure_arg, Error, Result};
use crate::evaluation::{ExperimentReport, RunRecord};
use crate::filter::FeatureScores;

/// The three charted metrics, in the order they are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Error,
    Time,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Accuracy, Metric::Error, Metric::Time];

    pub fn file_stem(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Error => "error",
            Metric::Time => "time",
        }
    }

    pub fn axis_label(self) -> &'static str {
        match self {
            Metric::Accuracy => "test accuracy",
            Metric::Error => "error rate",
            Metric::Time => "selection time (s)",
        }
    }

    pub fn of_record(self, r: &RunRecord) -> f64 {
        match self {
            Metric::Accuracy => r.test_accuracy,
            Metric::Error => r.error_rate,
            Metric::Time => r.outcome.selection_seconds,
        }
    }

    fn average(self, report: &ExperimentReport) -> Vec<f64> {
        report
            .averages
            .iter()
            .map(|a| match self {
                Metric::Accuracy => a.accuracy,
                Metric::Error => a.error_rate,
                Metric::Time => a.selection_seconds,
            })
            .collect()
    }
}

/// Feature indices ordered best first; ties keep index order.
fn weight_order(w: &FeatureScores) -> Vec<usize> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| {
        let c = w.scores[a].total_cmp(&w.scores[b]);
        let c = if w.higher_is_better { c.reverse() } else { c };
        c.then(a.cmp(&b))
    });
    order
}

fn write_weights(out: &mut String, names: &[String], w: &FeatureScores) {
    for j in weight_order(w) {
        let _ = writeln!(out, "{}: {:.4}", names[j], w.scores[j]);
    }
}

/// Renders the report. Timing values only ever appear as `time=<x>s`
/// tokens so that runs can be compared with timing masked out.
pub fn format_text_report(report: &ExperimentReport) -> String {
    let names = &report.dataset.feature_names;
    let mut out = String::new();
    let _ = writeln!(out, "FEATURE SELECTION REPORT");
    let _ = writeln!(out, "method: {}", report.method);
    let _ = writeln!(out, "classifier: {}", report.classifier);
    let _ = writeln!(out, "runs: {}", report.runs);
    let _ = writeln!(out, "base seed: {}", report.base_seed);
    let k_text: Vec<String> = report.k_list.iter().map(|k| k.to_string()).collect();
    let _ = writeln!(out, "numbers of selected features: {}", k_text.join(","));
    out.push('\n');

    let d = &report.dataset;
    let _ = writeln!(out, "DATASET INFO");
    let _ = writeln!(out, "name: {}", d.name);
    let _ = writeln!(out, "training samples: {}", d.n_train);
    let _ = writeln!(out, "test samples: {}", d.n_test);
    let _ = writeln!(out, "features: {}", d.n_features);
    let _ = writeln!(out, "classes: {}", d.n_classes);
    out.push('\n');

    for run in 0..report.runs {
        let records = report.records_for_run(run);
        let _ = writeln!(
            out,
            "RUN {run} (seed {})",
            report.base_seed.wrapping_add(run as u64)
        );
        let shared = records
            .windows(2)
            .all(|p| p[0].outcome.feature_weights == p[1].outcome.feature_weights);
        if shared {
            let _ = writeln!(out, "FEATURE WEIGHTS");
            write_weights(&mut out, names, &records[0].outcome.feature_weights);
        } else {
            for r in records {
                let _ = writeln!(out, "FEATURE WEIGHTS (k={})", r.outcome.k);
                write_weights(&mut out, names, &r.outcome.feature_weights);
            }
        }
        let _ = writeln!(out, "SELECTED SUBSET");
        for r in records {
            let subset: Vec<&str> = r.outcome.selected.iter().map(|&j| names[j].as_str()).collect();
            let _ = writeln!(out, "k={}: {}", r.outcome.k, subset.join(", "));
        }
        let _ = writeln!(out, "ACCURACY/ERROR/TIME");
        for r in records {
            let _ = writeln!(
                out,
                "k={}: accuracy={:.4} error={:.4} train_accuracy={:.4} time={:.3}s",
                r.outcome.k,
                r.test_accuracy,
                r.error_rate,
                r.train_accuracy,
                r.outcome.selection_seconds
            );
        }
        out.push('\n');
    }

    let _ = writeln!(out, "AVERAGES");
    for a in &report.averages {
        let _ = writeln!(
            out,
            "k={}: accuracy={:.4} error={:.4} train_accuracy={:.4} time={:.3}s",
            a.k, a.accuracy, a.error_rate, a.train_accuracy, a.selection_seconds
        );
    }
    if !report.warnings.is_empty() {
        out.push('\n');
        let _ = writeln!(out, "WARNINGS");
        for w in &report.warnings {
            let _ = writeln!(out, "{w}");
        }
    }
    out
}

pub fn write_text_report(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_text_report(report)).map_err(|e| Error::io(path, e))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const RUN_COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Plotted y range: `[min, max]` widened by 5% of the span on both sides.
/// A flat series is widened by 5% of its magnitude (or 0.05 at zero).
pub fn chart_y_range(values: &[f64]) -> (f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let pad = if span > 0.0 {
        0.05 * span
    } else if max != 0.0 {
        0.05 * max.abs()
    } else {
        0.05
    };
    (min - pad, max + pad)
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// SVG line chart with one polyline per run and a thicker dashed average
/// polyline. Output depends only on the inputs.
pub fn render_chart(
    runs: &[Vec<f64>],
    average: &[f64],
    metric: &str,
    k_list: &[usize],
) -> Result<String> {
    ensure_arg!(!k_list.is_empty(), "chart needs at least one k");
    ensure_arg!(
        average.len() == k_list.len(),
        "average series has {} points for {} k values",
        average.len(),
        k_list.len()
    );
    for (r, s) in runs.iter().enumerate() {
        ensure_arg!(
            s.len() == k_list.len(),
            "run {r} series has {} points for {} k values",
            s.len(),
            k_list.len()
        );
    }
    let all: Vec<f64> = runs.iter().flatten().chain(average).copied().collect();
    ensure_arg!(
        all.iter().all(|v| v.is_finite()),
        "chart values must be finite"
    );
    let (ymin, ymax) = chart_y_range(&all);
    let kmin = *k_list.iter().min().unwrap() as f64;
    let kmax = *k_list.iter().max().unwrap() as f64;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |k: usize| {
        if kmax > kmin {
            LEFT + (k as f64 - kmin) / (kmax - kmin) * plot_w
        } else {
            LEFT + plot_w / 2.0
        }
    };
    let y_of = |v: f64| TOP + (ymax - v) / (ymax - ymin) * plot_h;
    let points = |s: &[f64]| -> String {
        k_list
            .iter()
            .zip(s)
            .map(|(&k, &v)| format!("{:.2},{:.2}", x_of(k), y_of(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let title = xml_escape(metric);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-ymin="{ymin}" data-ymax="{ymax}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#,
        LEFT + plot_w / 2.0
    );
    // Axes.
    let (x0, y0, x1, y1) = (LEFT, TOP + plot_h, LEFT + plot_w, TOP);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#
    );
    for &k in k_list {
        let x = x_of(k);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">{k}</text>"#,
            y0 + 18.0
        );
    }
    for i in 0..=4 {
        let v = ymin + (ymax - ymin) * i as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12">{v:.4}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13">number of selected features</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {:.2})">{title}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (r, s) in runs.iter().enumerate() {
        let color = RUN_COLORS[r % RUN_COLORS.len()];
        let _ = writeln!(
            svg,
            r#"<polyline class="run" data-run="{r}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points(s)
        );
    }
    let _ = writeln!(
        svg,
        r#"<polyline class="average" points="{}" fill="none" stroke="black" stroke-width="3" stroke-dasharray="6 3"/>"#,
        points(average)
    );

    // Legend.
    let lx = WIDTH - RIGHT + 15.0;
    let mut ly = TOP + 10.0;
    let mut legend_entry = |svg: &mut String, label: &str, color: &str, extra: &str| {
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}"{extra}/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{label}</text>"#,
            lx + 30.0,
            ly + 4.0
        );
        ly += 18.0;
    };
    for r in 0..runs.len() {
        legend_entry(
            &mut svg,
            &format!("run {r}"),
            RUN_COLORS[r % RUN_COLORS.len()],
            r#" stroke-width="1.5""#,
        );
    }
    legend_entry(
        &mut svg,
        "average",
        "black",
        r#" stroke-width="3" stroke-dasharray="6 3""#,
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes `accuracy.svg`, `error.svg` and `time.svg` into `dir`.
pub fn write_charts(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(3);
    for metric in Metric::ALL {
        let runs = report.metric_by_run(|r| metric.of_record(r));
        let title = format!("{} - {} ({})", report.dataset.name, metric.axis_label(), report.method);
        let svg = render_chart(&runs, &metric.average(report), &title, &report.k_list)?;
        let path = dir.join(format!("{}.svg", metric.file_stem()));
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
