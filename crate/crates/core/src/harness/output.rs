//! CSV and SVG artifacts. Every writer is a pure function of its inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::bias_figure::BiasRow;
use super::converge::ConvergencePoint;
use super::train::{MetricsRow, TraceRow, TrainOutput};
use super::verify::BoundReport;
use crate::error::{MiceError, Result};

pub const METRICS_HEADER: &[&str] = &[
    "iteration", "seed", "j_r_hat", "j_c_hat", "j_r_exact", "j_c_exact", "beta", "mean_ci", "memory_size",
    "lambda", "nu", "kl", "violation", "bias", "branch", "accepted", "status",
];
pub const TRACE_HEADER: &[&str] = &["iteration", "branch", "lambda_star", "nu_star", "q", "u", "v", "kl", "c_surplus"];
pub const BOUNDS_HEADER: &[&str] = &["name", "case", "lhs", "rhs", "slack", "holds"];
pub const BIAS_HEADER: &[&str] = &["variant", "seed", "iteration", "state", "estimated", "true", "bias"];
pub const CONVERGENCE_HEADER: &[&str] = &["mode", "updates", "error", "beta"];

/// Header row always, then one line per record.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let csv_err = |e: csv::Error| MiceError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| MiceError::io(path, e))
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_csv(path, METRICS_HEADER, rows)
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    write_csv(path, TRACE_HEADER, rows)
}

pub fn write_bounds(path: &Path, rows: &[BoundReport]) -> Result<()> {
    write_csv(path, BOUNDS_HEADER, rows)
}

pub fn write_bias(path: &Path, rows: &[BiasRow]) -> Result<()> {
    write_csv(path, BIAS_HEADER, rows)
}

pub fn write_convergence(path: &Path, rows: &[ConvergencePoint]) -> Result<()> {
    write_csv(path, CONVERGENCE_HEADER, rows)
}

/// Mean and (population) standard deviation across series, pointwise over
/// the common prefix.
pub fn mean_std(series: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
    let mut mean = vec![0.0; len];
    let mut std = vec![0.0; len];
    for i in 0..len {
        let vals: Vec<f64> = series.iter().map(|s| s[i]).filter(|x| x.is_finite()).collect();
        if vals.is_empty() {
            mean[i] = f64::NAN;
            std[i] = f64::NAN;
            continue;
        }
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        mean[i] = m;
        std[i] = (vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64).sqrt();
    }
    (mean, std)
}

/// One curve of a line plot: mean with a ±std band.
pub struct PlotSeries<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

/// Self-contained SVG line plot with optional dashed horizontal reference.
pub fn svg_line_plot(title: &str, x_label: &str, series: &[PlotSeries<'_>], reference: Option<f64>) -> String {
    let n = series.iter().map(|s| s.mean.len()).max().unwrap_or(0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for (m, d) in s.mean.iter().zip(&s.std) {
            if m.is_finite() {
                lo = lo.min(m - d);
                hi = hi.max(m + d);
            }
        }
    }
    if let Some(r) = reference {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let span_x = (n.max(2) - 1) as f64;
    let px = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / span_x;
    let py = |y: f64| H - PAD - (H - 2.0 * PAD) * (y - lo) / (hi - lo);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, xml(title));
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{:.1}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD
    );
    for (val, y) in [(lo, H - PAD), (hi, PAD)] {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, PAD - 4.0, y + 4.0, val);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
        W / 2.0,
        H - 16.0,
        xml(x_label),
        W - PAD,
        H - PAD + 16.0,
        n.saturating_sub(1)
    );
    for s in series {
        let pts: Vec<(usize, f64, f64)> = s
            .mean
            .iter()
            .zip(&s.std)
            .enumerate()
            .filter(|(_, (m, _))| m.is_finite())
            .map(|(i, (m, d))| (i, *m, *d))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let mut band = String::new();
        for &(i, m, d) in &pts {
            let _ = write!(band, "{:.2},{:.2} ", px(i), py(m + d));
        }
        for &(i, m, d) in pts.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(i), py(m - d));
        }
        let _ = writeln!(out, r#"<polygon points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end(), s.color);
        let line: Vec<String> = pts.iter().map(|&(i, m, _)| format!("{:.2},{:.2}", px(i), py(m))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            line.join(" "),
            s.color
        );
    }
    if let Some(r) = reference {
        let _ = writeln!(
            out,
            r#"<line x1="{PAD}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="gray" stroke-dasharray="6,4"/>"#,
            W - PAD,
            y = py(r)
        );
    }
    for (k, s) in series.iter().enumerate() {
        let y = PAD + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - PAD - 120.0,
            y - 9.0,
            s.color,
            W - PAD - 106.0,
            y,
            xml(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| MiceError::io(path, e))
}

type MetricFn = fn(&MetricsRow) -> f64;

const PLOTTED: &[(&str, MetricFn, bool)] = &[
    ("j_c_exact", |r| r.j_c_exact, true),
    ("j_r_exact", |r| r.j_r_exact, false),
    ("j_c_hat", |r| r.j_c_hat, true),
    ("j_r_hat", |r| r.j_r_hat, false),
    ("beta", |r| r.beta, false),
    ("mean_ci", |r| r.mean_ci, false),
];

/// Write per-seed metrics and traces, the bound and bias tables, and one
/// aggregate SVG per plotted metric. Returns the written paths.
pub fn emit_outputs(
    train: Option<&TrainOutput>,
    reports: &[BoundReport],
    bias: &[BiasRow],
    outdir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(outdir).map_err(|e| MiceError::io(outdir, e))?;
    let mut written = Vec::new();
    if let Some(t) = train {
        for run in &t.runs {
            let p = outdir.join(format!("metrics_{}.csv", run.seed));
            write_metrics(&p, &run.metrics)?;
            written.push(p);
            let p = outdir.join(format!("trace_{}.csv", run.seed));
            write_trace(&p, &run.trace)?;
            written.push(p);
        }
        for (name, f, thresholded) in PLOTTED {
            let series: Vec<Vec<f64>> = t
                .runs
                .iter()
                .map(|r| r.metrics.iter().filter(|m| m.status == "ok").map(f).collect())
                .collect();
            let (mean, std) = mean_std(&series);
            let svg = svg_line_plot(
                name,
                "iteration",
                &[PlotSeries {
                    label: name,
                    color: "#1f77b4",
                    mean,
                    std,
                }],
                if *thresholded { Some(t.threshold) } else { None },
            );
            let p = outdir.join(format!("{name}.svg"));
            write_text(&p, &svg)?;
            written.push(p);
        }
    }
    let p = outdir.join("bounds.csv");
    write_bounds(&p, reports)?;
    written.push(p);
    let p = outdir.join("bias.csv");
    write_bias(&p, bias)?;
    written.push(p);
    if !bias.is_empty() {
        let p = outdir.join("bias.svg");
        write_text(&p, &bias_svg(bias))?;
        written.push(p);
    }
    Ok(written)
}

/// Mean ± std across seeds of the state-averaged bias, per variant, with the
/// zero line dashed.
pub fn bias_svg(rows: &[BiasRow]) -> String {
    let mut variants: Vec<&str> = Vec::new();
    for r in rows {
        if !variants.contains(&r.variant.as_str()) {
            variants.push(&r.variant);
        }
    }
    let colors = ["#d62728", "#2ca02c", "#1f77b4"];
    let series: Vec<PlotSeries<'_>> = variants
        .iter()
        .enumerate()
        .map(|(vi, v)| {
            let mut seeds: Vec<u64> = rows.iter().filter(|r| r.variant == *v).map(|r| r.seed).collect();
            seeds.dedup();
            let per_seed: Vec<Vec<f64>> = seeds
                .iter()
                .map(|&sd| {
                    let mut sums: Vec<(f64, usize)> = Vec::new();
                    for r in rows.iter().filter(|r| r.variant == *v && r.seed == sd) {
                        if sums.len() <= r.iteration {
                            sums.resize(r.iteration + 1, (0.0, 0));
                        }
                        sums[r.iteration].0 += r.bias;
                        sums[r.iteration].1 += 1;
                    }
                    sums.iter().map(|(s, c)| s / (*c).max(1) as f64).collect()
                })
                .collect();
            let (mean, std) = mean_std(&per_seed);
            PlotSeries {
                label: v,
                color: colors[vi % colors.len()],
                mean,
                std,
            }
        })
        .collect();
    svg_line_plot("cost value estimate minus true value", "iteration", &series, Some(0.0))
}
