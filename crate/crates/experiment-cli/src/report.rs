//! Merges per-seed learning curves into per-epoch mean ± std curves, one
//! group per spec directory, and renders them as a tidy CSV plus a
//! plain-text summary table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;

use crate::runner::METRICS_HEADER;

/// One merged curve point.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub epoch: u32,
    pub spec_id: String,
    pub mean: f64,
    pub std: f64,
    /// Trailing moving average of the mean column, present when a window
    /// was requested.
    pub moving_avg: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct GroupSummary {
    pub spec_id: String,
    pub seed_count: usize,
    pub epochs: usize,
    pub final_mean: f64,
    pub final_std: f64,
}

#[derive(Clone, Debug, Default)]
pub struct MergedReport {
    pub rows: Vec<CurveRow>,
    pub groups: Vec<GroupSummary>,
    /// Human-readable notes about inputs that were skipped.
    pub warnings: Vec<String>,
}

impl MergedReport {
    /// Tidy CSV: one row per (spec, epoch).
    pub fn to_csv(&self, ma_window: Option<usize>) -> String {
        let mut out = String::from("epoch,spec_id,mean,std");
        if let Some(w) = ma_window {
            let _ = write!(out, ",ma{w}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{},{},{}", row.epoch, row.spec_id, row.mean, row.std);
            if ma_window.is_some() {
                let _ = write!(out, ",{}", row.moving_avg.unwrap_or(row.mean));
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width summary table, one line per spec group.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = self
            .groups
            .iter()
            .map(|g| g.spec_id.len())
            .chain(["spec".len()].into_iter())
            .max()
            .unwrap_or(4);
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>6}  {:>12}  {:>10}",
            "spec", "seeds", "epochs", "final mean", "final std"
        );
        for g in &self.groups {
            let _ = writeln!(
                out,
                "{:<width$}  {:>5}  {:>6}  {:>12.4}  {:>10.4}",
                g.spec_id, g.seed_count, g.epochs, g.final_mean, g.final_std
            );
        }
        out
    }
}

/// Reads each spec directory (expected to contain `seed*/metrics.csv`),
/// merges its seeds, and returns rows grouped in input order. Directories
/// or seed files that are missing or malformed are skipped with a warning;
/// an error is returned only if nothing merges.
pub fn merge_runs(dirs: &[PathBuf], ma_window: Option<usize>) -> Result<MergedReport> {
    let mut report = MergedReport::default();
    for dir in dirs {
        match merge_one_dir(dir, ma_window) {
            Ok((rows, summary)) => {
                report.rows.extend(rows);
                report.groups.push(summary);
            }
            Err(reason) => report
                .warnings
                .push(format!("skipping {}: {reason}", dir.display())),
        }
    }
    anyhow::ensure!(
        !report.groups.is_empty(),
        "no usable run directories among: {}",
        dirs.iter()
            .map(|d| d.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(report)
}

fn merge_one_dir(
    dir: &Path,
    ma_window: Option<usize>,
) -> std::result::Result<(Vec<CurveRow>, GroupSummary), String> {
    if !dir.is_dir() {
        return Err("not a directory".into());
    }
    let spec_id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| "directory has no usable name".to_string())?
        .to_string();

    let mut seed_dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("unreadable: {e}"))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("seed"))
        })
        .collect();
    seed_dirs.sort();

    let mut curves: Vec<Vec<f64>> = Vec::new();
    for seed_dir in &seed_dirs {
        let csv = seed_dir.join("metrics.csv");
        match read_reward_curve(&csv) {
            Ok(curve) if curve.is_empty() => {
                return Err(format!("{} has no data rows", csv.display()))
            }
            Ok(curve) => curves.push(curve),
            Err(reason) => return Err(format!("{}: {reason}", csv.display())),
        }
    }
    if curves.is_empty() {
        return Err("contains no seed*/metrics.csv".into());
    }

    let epochs = curves.iter().map(Vec::len).min().unwrap_or(0);
    let mut rows = Vec::with_capacity(epochs);
    let mut ma_buf: Vec<f64> = Vec::with_capacity(epochs);
    for t in 0..epochs {
        let at: Vec<f64> = curves.iter().map(|c| c[t]).collect();
        let mean = at.iter().sum::<f64>() / at.len() as f64;
        let var = at.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / at.len() as f64;
        ma_buf.push(mean);
        let moving_avg = ma_window.map(|w| {
            let lo = (t + 1).saturating_sub(w.max(1));
            let slice = &ma_buf[lo..=t];
            slice.iter().sum::<f64>() / slice.len() as f64
        });
        rows.push(CurveRow {
            epoch: (t + 1) as u32,
            spec_id: spec_id.clone(),
            mean,
            std: var.sqrt(),
            moving_avg,
        });
    }
    let summary = GroupSummary {
        spec_id,
        seed_count: curves.len(),
        epochs,
        final_mean: rows.last().map(|r| r.mean).unwrap_or(0.0),
        final_std: rows.last().map(|r| r.std).unwrap_or(0.0),
    };
    Ok((rows, summary))
}

/// Parses the normalized-reward column from a metrics CSV, verifying the
/// header so schema drift is caught rather than silently misread.
fn read_reward_curve(path: &Path) -> std::result::Result<Vec<f64>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("unreadable: {e}"))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        Some(h) => return Err(format!("unexpected header '{h}'")),
        None => return Err("empty file".into()),
    }
    let reward_col = 1usize;
    let mut curve = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let field = line
            .split(',')
            .nth(reward_col)
            .ok_or_else(|| format!("row {} has too few columns", i + 1))?;
        let value: f64 = field
            .parse()
            .map_err(|_| format!("row {} has non-numeric reward '{field}'", i + 1))?;
        curve.push(value);
    }
    Ok(curve)
}
