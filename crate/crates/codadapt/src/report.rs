//! CSV tables and SVG plots rendered from stored results.
//!
//! Rendering is deterministic: the same inputs produce byte-identical
//! files, so `report` can always regenerate a run directory's tables
//! from its stored per-seed values. Plots are self-contained SVG with no
//! font or raster dependencies.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{AblationRow, MetricsReport, RobustnessSummary};
use crate::train::TrainLog;

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------

/// Ablation table: one row per method with the averaged final metrics.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("method,runs,mean_accuracy,std_accuracy,mean_macro_f1,std_macro_f1\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.method.as_str(),
            row.outcomes.len(),
            row.mean_accuracy,
            row.std_accuracy,
            row.mean_macro_f1,
            row.std_macro_f1
        );
    }
    out
}

/// Per-seed robustness rows followed by a summary row.
pub fn robustness_csv(summary: &RobustnessSummary) -> String {
    let classes = summary.per_class_mean_accuracy.len();
    let mut out = String::from("seed,accuracy,macro_f1");
    for c in 0..classes {
        let _ = write!(out, ",class{}_accuracy", c + 1);
    }
    out.push('\n');
    for o in &summary.outcomes {
        let _ = write!(out, "{},{},{}", o.seed, o.accuracy, o.macro_f1);
        for v in &o.per_class_accuracy {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    let _ = write!(out, "mean,{},{}", summary.mean_accuracy, summary.mean_macro_f1);
    for v in &summary.per_class_mean_accuracy {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
    let _ = writeln!(out, "std,{},", summary.std_accuracy);
    out
}

/// Confusion matrix as CSV with class-name headers.
pub fn confusion_csv(report: &MetricsReport, class_names: &[String]) -> String {
    let c = report.confusion.num_classes();
    let name = |i: usize| -> String {
        class_names.get(i).cloned().unwrap_or_else(|| format!("class{}", i + 1))
    };
    let mut out = String::from("true\\predicted");
    for j in 0..c {
        let _ = write!(out, ",{}", name(j));
    }
    out.push('\n');
    for i in 0..c {
        let _ = write!(out, "{}", name(i));
        for j in 0..c {
            let _ = write!(out, ",{}", report.confusion.counts()[i][j]);
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// SVG plotting
// ---------------------------------------------------------------------------

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"];

struct Plot {
    width: f64,
    height: f64,
    margin_left: f64,
    margin_right: f64,
    margin_top: f64,
    margin_bottom: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    body: String,
}

impl Plot {
    fn new(width: u32, height: u32, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Self {
            width: width as f64,
            height: height as f64,
            margin_left: 64.0,
            margin_right: 16.0,
            margin_top: 28.0,
            margin_bottom: 44.0,
            x_range: pad(x_range.0, x_range.1),
            y_range: pad(y_range.0, y_range.1),
            body: String::new(),
        }
    }

    fn x(&self, v: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.margin_left + (v - lo) / (hi - lo) * (self.width - self.margin_left - self.margin_right)
    }

    fn y(&self, v: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.height
            - self.margin_bottom
            - (v - lo) / (hi - lo) * (self.height - self.margin_top - self.margin_bottom)
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            r##"<text x="{x:.2}" y="{y:.2}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}" fill="#333">{content}</text>"##
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str, width: f64) {
        let mut path = String::new();
        for &(px, py) in points {
            let _ = write!(path, "{:.2},{:.2} ", self.x(px), self.y(py));
        }
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
            path.trim_end()
        );
    }

    fn rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, color: &str, opacity: f64) {
        let (px0, px1) = (self.x(x0), self.x(x1));
        let (py0, py1) = (self.y(y1), self.y(y0)); // svg y grows downward
        let _ = writeln!(
            self.body,
            r##"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="{opacity}" stroke="#555" stroke-width="0.5"/>"##,
            px1 - px0,
            py1 - py0
        );
    }

    fn axes(&mut self, title: &str, x_label: &str, y_label: &str) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let left = self.x(x0);
        let right = self.x(x1);
        let bottom = self.y(y0);
        let top = self.y(y1);
        let _ = writeln!(
            self.body,
            r##"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#999"/>"##,
            right - left,
            bottom - top
        );
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            self.text(self.x(fx), bottom + 16.0, 10.0, "middle", &trim_num(fx));
            self.text(left - 6.0, self.y(fy) + 3.0, 10.0, "end", &trim_num(fy));
        }
        self.text((left + right) / 2.0, 16.0, 13.0, "middle", title);
        self.text((left + right) / 2.0, self.height - 8.0, 11.0, "middle", x_label);
        let _ = writeln!(
            self.body,
            r##"<text x="14" y="{:.2}" font-size="11" font-family="sans-serif" text-anchor="middle" fill="#333" transform="rotate(-90 14 {:.2})">{y_label}</text>"##,
            (top + bottom) / 2.0,
            (top + bottom) / 2.0
        );
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        let mut x = self.margin_left + 8.0;
        let y = self.margin_top + 12.0;
        for (label, color) in entries {
            let _ = writeln!(
                self.body,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
                x + 18.0
            );
            self.text(x + 22.0, y + 3.5, 10.0, "start", label);
            x += 22.0 + 8.0 * label.len() as f64 + 18.0;
        }
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

fn trim_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}

/// Loss components and target metrics over epochs, two stacked panels.
pub fn render_training_curves(log: &TrainLog, width: u32, height: u32, path: &Path) -> Result<()> {
    if log.epochs.is_empty() {
        return Err(Error::Validation("empty training log".into()));
    }
    let epochs: Vec<f64> = log.epochs.iter().map(|e| e.epoch as f64).collect();
    let max_epoch = *epochs.last().unwrap();
    let series: [(&str, Vec<f64>); 5] = [
        ("task", log.epochs.iter().map(|e| e.losses.task).collect()),
        ("adv", log.epochs.iter().map(|e| e.losses.adversarial).collect()),
        ("mcc", log.epochs.iter().map(|e| e.losses.mcc).collect()),
        ("byol", log.epochs.iter().map(|e| e.losses.byol).collect()),
        ("total", log.epochs.iter().map(|e| e.losses.total).collect()),
    ];
    let y_max = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .cloned()
        .fold(0.0f64, f64::max);

    let mut plot = Plot::new(width, height, (1.0, max_epoch), (0.0, y_max * 1.05));
    plot.axes("training losses", "epoch", "loss");
    let mut legend = Vec::new();
    for (i, (name, values)) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = epochs.iter().cloned().zip(values.iter().cloned()).collect();
        plot.polyline(&pts, PALETTE[i], 1.4);
        legend.push((*name, PALETTE[i]));
    }
    plot.legend(&legend);
    write_file(path, &plot.finish())?;
    Ok(())
}

/// Accuracy and macro F1 on the target domain over epochs.
pub fn render_metric_curves(log: &TrainLog, width: u32, height: u32, path: &Path) -> Result<()> {
    if log.epochs.is_empty() {
        return Err(Error::Validation("empty training log".into()));
    }
    let epochs: Vec<f64> = log.epochs.iter().map(|e| e.epoch as f64).collect();
    let max_epoch = *epochs.last().unwrap();
    let mut plot = Plot::new(width, height, (1.0, max_epoch), (0.0, 1.0));
    plot.axes("target-domain metrics", "epoch", "score");
    let acc: Vec<(f64, f64)> =
        log.epochs.iter().map(|e| (e.epoch as f64, e.target_accuracy)).collect();
    let f1: Vec<(f64, f64)> =
        log.epochs.iter().map(|e| (e.epoch as f64, e.target_macro_f1)).collect();
    plot.polyline(&acc, PALETTE[0], 1.6);
    plot.polyline(&f1, PALETTE[1], 1.6);
    plot.legend(&[("accuracy", PALETTE[0]), ("macro F1", PALETTE[1])]);
    write_file(path, &plot.finish())?;
    Ok(())
}

/// Histogram bars with the KDE curve overlaid.
pub fn render_robustness(
    summary: &RobustnessSummary,
    width: u32,
    height: u32,
    path: &Path,
) -> Result<()> {
    let h = &summary.histogram;
    let total: u64 = h.counts.iter().sum();
    let bin_w = h.edges[1] - h.edges[0];
    // Bars as densities so the KDE overlays on the same scale.
    let densities: Vec<f64> =
        h.counts.iter().map(|&c| c as f64 / (total as f64 * bin_w)).collect();
    let y_max = densities
        .iter()
        .cloned()
        .chain(summary.kde.density.iter().cloned())
        .fold(0.0f64, f64::max);
    let x_lo = summary.kde.x.first().copied().unwrap_or(h.edges[0]).min(h.edges[0]);
    let x_hi = summary
        .kde
        .x
        .last()
        .copied()
        .unwrap_or(*h.edges.last().unwrap())
        .max(*h.edges.last().unwrap());
    let mut plot = Plot::new(width, height, (x_lo, x_hi), (0.0, y_max * 1.05));
    plot.axes(
        &format!(
            "final accuracy over {} seeds ({})",
            summary.outcomes.len(),
            summary.method.as_str()
        ),
        "accuracy",
        "density",
    );
    for (i, &d) in densities.iter().enumerate() {
        if d > 0.0 {
            plot.rect(h.edges[i], 0.0, h.edges[i + 1], d, PALETTE[0], 0.45);
        }
    }
    let pts: Vec<(f64, f64)> =
        summary.kde.x.iter().cloned().zip(summary.kde.density.iter().cloned()).collect();
    plot.polyline(&pts, PALETTE[1], 1.8);
    write_file(path, &plot.finish())?;
    Ok(())
}

/// Confusion matrix as a shaded grid with counts and row percentages.
pub fn render_confusion(
    report: &MetricsReport,
    class_names: &[String],
    width: u32,
    height: u32,
    path: &Path,
) -> Result<()> {
    let c = report.confusion.num_classes();
    let counts = report.confusion.counts();
    let mut plot = Plot::new(width, height, (0.0, c as f64), (0.0, c as f64));
    let name = |i: usize| -> String {
        class_names.get(i).cloned().unwrap_or_else(|| format!("class{}", i + 1))
    };
    for i in 0..c {
        let row_total: u64 = counts[i].iter().sum();
        for j in 0..c {
            let frac = if row_total == 0 { 0.0 } else { counts[i][j] as f64 / row_total as f64 };
            // Row i drawn top-down.
            let y0 = (c - 1 - i) as f64;
            plot.rect(j as f64, y0, (j + 1) as f64, y0 + 1.0, PALETTE[0], 0.15 + 0.75 * frac);
            let cx = plot.x(j as f64 + 0.5);
            let cy = plot.y(y0 + 0.5);
            plot.text(cx, cy - 2.0, 12.0, "middle", &counts[i][j].to_string());
            plot.text(cx, cy + 12.0, 10.0, "middle", &format!("{:.1}%", 100.0 * frac));
        }
    }
    for i in 0..c {
        let cx = plot.x(i as f64 + 0.5);
        plot.text(cx, plot.height - plot.margin_bottom + 16.0, 10.0, "middle", &name(i));
        let cy = plot.y((c - 1 - i) as f64 + 0.5);
        plot.text(plot.margin_left - 6.0, cy, 10.0, "end", &name(i));
    }
    plot.text(plot.width / 2.0, 16.0, 13.0, "middle", "confusion matrix (rows: true class)");
    plot.text(plot.width / 2.0, plot.height - 8.0, 11.0, "middle", "predicted");
    write_file(path, &plot.finish())?;
    Ok(())
}
