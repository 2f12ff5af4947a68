//! File outputs. Column order and header names are stable.
//!
//! * `runs.csv`: `panel,config_id,algorithm,alpha,eta,seed,step,cumulative_episodes`
//!   for every run of each sweep's best cell, every `stride` steps plus
//!   the final step.
//! * `sweep.csv`: one row per sweep cell.
//! * `summary_<panel>.csv`: `step,algorithm,mean,stderr` of the best cell
//!   of each algorithm on that panel.
//! * `figure_<panel>.svg` (optional): mean curves with a one-stderr band.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{aggregate, Curves, RunRecord, SweepResult};
use crate::{Error, Result};

pub const RUNS_HEADER: [&str; 8] = ["panel", "config_id", "algorithm", "alpha", "eta", "seed", "step", "cumulative_episodes"];
pub const SWEEP_HEADER: [&str; 11] = [
    "panel",
    "config_id",
    "algorithm",
    "alpha",
    "eta",
    "runs",
    "mean_total",
    "stderr_total",
    "mean_final_quarter",
    "stderr_final_quarter",
    "best",
];
pub const SUMMARY_HEADER: [&str; 4] = ["step", "algorithm", "mean", "stderr"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExportOptions {
    /// Write every `stride`-th step (and always the last one).
    pub stride: usize,
    pub svg: bool,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self { stride: 100, svg: false }
    }
}

/// Aggregated best-cell curves of one algorithm on one panel.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelSeries {
    pub algorithm: String,
    pub curves: Curves,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

/// 1-based step numbers to write for a run of `len` steps.
fn sampled_steps(len: usize, stride: usize) -> impl Iterator<Item = usize> {
    let stride = stride.max(1);
    (1..=len).filter(move |&s| s % stride == 0 || s == len)
}

fn eta_field(eta: Option<f64>) -> String {
    eta.map(|e| e.to_string()).unwrap_or_default()
}

pub fn write_runs(path: &Path, panels: &[(&str, &[RunRecord])], stride: usize) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RUNS_HEADER).map_err(|e| csv_err(path, e))?;
    for (panel, records) in panels {
        for r in *records {
            let head = [
                panel.to_string(),
                r.config_id.to_string(),
                r.algorithm.name().to_string(),
                r.alpha.to_string(),
                eta_field(r.eta),
                r.seed.to_string(),
            ];
            for step in sampled_steps(r.cumulative.len(), stride) {
                let mut row = head.to_vec();
                row.push(step.to_string());
                row.push(r.cumulative[step - 1].to_string());
                w.write_record(&row).map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sweep(path: &Path, results: &[SweepResult]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SWEEP_HEADER).map_err(|e| csv_err(path, e))?;
    for res in results {
        let panel = res.config.env.label();
        for (i, c) in res.cells.iter().enumerate() {
            w.write_record([
                panel.clone(),
                c.cell.config_id.to_string(),
                c.cell.algorithm.name().to_string(),
                c.cell.alpha.to_string(),
                eta_field(c.cell.eta),
                c.runs.len().to_string(),
                c.mean_total.to_string(),
                c.stderr_total.to_string(),
                c.mean_final_quarter.to_string(),
                c.stderr_final_quarter.to_string(),
                (i == res.best).to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary(path: &Path, series: &[PanelSeries], stride: usize) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER).map_err(|e| csv_err(path, e))?;
    for s in series {
        for step in sampled_steps(s.curves.len(), stride) {
            w.write_record([
                step.to_string(),
                s.algorithm.clone(),
                s.curves.mean[step - 1].to_string(),
                s.curves.stderr[step - 1].to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Line chart of mean curves with a shaded one-stderr band.
pub fn write_svg(path: &Path, title: &str, series: &[PanelSeries], stride: usize) -> Result<()> {
    let (width, height, margin) = (640.0, 400.0, 50.0);
    let x_max = series.iter().map(|s| s.curves.len()).max().unwrap_or(0).max(1) as f64;
    let y_max = series
        .iter()
        .flat_map(|s| s.curves.mean.iter().zip(&s.curves.stderr).map(|(m, e)| m + e))
        .fold(0.0f64, f64::max)
        .max(1.0);
    let sx = |step: usize| margin + (width - 2.0 * margin) * step as f64 / x_max;
    let sy = |y: f64| height - margin - (height - 2.0 * margin) * y / y_max;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#, width / 2.0);
    let _ = writeln!(
        out,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        m = margin,
        t = margin,
        b = height - margin,
        r = width - margin
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">environment steps ({})</text>"#, width / 2.0, height - 15.0, x_max);
    let _ = writeln!(out, r#"<text x="15" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">cumulative episodes (max {:.0})</text>"#, height / 2.0, height / 2.0, y_max);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let steps: Vec<usize> = sampled_steps(s.curves.len(), stride).collect();
        if steps.is_empty() {
            continue;
        }
        let mut band = String::new();
        for &st in &steps {
            let _ = write!(band, "{:.2},{:.2} ", sx(st), sy(s.curves.mean[st - 1] + s.curves.stderr[st - 1]));
        }
        for &st in steps.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(st), sy(s.curves.mean[st - 1] - s.curves.stderr[st - 1]));
        }
        let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.25" stroke="none"/>"#, band.trim_end());
        let mut line = String::new();
        for &st in &steps {
            let _ = write!(line, "{:.2},{:.2} ", sx(st), sy(s.curves.mean[st - 1]));
        }
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.trim_end());
        let ly = margin + 18.0 * i as f64;
        let _ = writeln!(out, r#"<text x="{}" y="{ly}" fill="{color}" font-family="sans-serif" font-size="12">{}</text>"#, margin + 10.0, s.algorithm);
    }
    out.push_str("</svg>\n");
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write all outputs for `results` into `dir`, returning the paths written.
pub fn export(results: &[SweepResult], dir: &Path, options: ExportOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let labels: Vec<String> = results.iter().map(|r| r.config.env.label()).collect();
    let runs: Vec<(&str, &[RunRecord])> = labels.iter().zip(results).map(|(l, r)| (l.as_str(), r.best_runs.as_slice())).collect();
    let path = dir.join("runs.csv");
    write_runs(&path, &runs, options.stride)?;
    written.push(path);

    let path = dir.join("sweep.csv");
    write_sweep(&path, results)?;
    written.push(path);

    let mut panels: Vec<&str> = Vec::new();
    for l in &labels {
        if !panels.contains(&l.as_str()) {
            panels.push(l);
        }
    }
    for panel in panels {
        let series = labels
            .iter()
            .zip(results)
            .filter(|(l, _)| l.as_str() == panel)
            .map(|(_, r)| {
                Ok(PanelSeries { algorithm: r.config.algorithm.name().to_string(), curves: aggregate(&r.best_runs)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let path = dir.join(format!("summary_{panel}.csv"));
        write_summary(&path, &series, options.stride)?;
        written.push(path);
        if options.svg {
            let path = dir.join(format!("figure_{panel}.svg"));
            write_svg(&path, panel, &series, options.stride)?;
            written.push(path);
        }
    }
    Ok(written)
}
