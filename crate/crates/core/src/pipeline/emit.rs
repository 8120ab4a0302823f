//! Plot-ready CSV tables and the JSON summary derived from a report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::warn;
use serde::Serialize;

use super::{metric_range, RunConfig, METRICS};
use crate::dataset::{Manifest, Split};
use crate::stats::export::{class_table_csv, csv_table, curves_csv, fmt6, heatmap_csv, histogram_csv};
use crate::stats::{
    cutoff_curve, histogram, ks_heatmap, pearson, per_class_aggregate, summarize, EvalReport, KsHeatmap, Summary,
    OVERALL,
};
use crate::{Error, Result};

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn nonempty(report: &EvalReport) -> Result<()> {
    if report.is_empty() {
        return Err(Error::invalid("report has no entries"));
    }
    Ok(())
}

fn present_metrics(report: &EvalReport) -> Vec<&'static str> {
    METRICS.into_iter().filter(|m| report.has_metric(m)).collect()
}

/// Histogram range: the metric's natural range, or `[0, max]` for unbounded ones.
fn hist_range(report: &EvalReport, metric: &str) -> (f64, f64) {
    if metric != "chamfer" {
        return metric_range(metric);
    }
    let max = report
        .entries()
        .iter()
        .filter(|e| e.metric == metric)
        .map(|e| e.value)
        .fold(0.0, f64::max);
    (0.0, if max > 0.0 { max } else { 1.0 })
}

/// `per_class_<metric>.csv`, `boxplot_overall.csv` and `histogram_<metric>.csv`.
pub fn emit_tables(config: &RunConfig, report: &EvalReport) -> Result<Vec<PathBuf>> {
    nonempty(report)?;
    let dir = config.stats_dir();
    let mut written = Vec::new();
    let mut overall = Vec::new();
    for metric in present_metrics(report) {
        let rows = per_class_aggregate(report, metric)?;
        written.push(write(
            &dir,
            &format!("per_class_{metric}.csv"),
            &class_table_csv(&rows)?,
        )?);
        for r in rows.iter().filter(|r| r.class == OVERALL) {
            let s = &r.summary;
            let mut row = vec![metric.to_owned(), r.method.clone(), s.n.to_string()];
            row.extend([s.mean, s.median, s.q1, s.q3, s.min, s.max, s.std].map(fmt6));
            overall.push(row);
        }

        let (lo, hi) = hist_range(report, metric);
        let mut hist = Vec::new();
        for method in report.methods() {
            for class in report.classes().into_iter().map(Some).chain([None]) {
                let values = report.values(&method, metric, class.as_deref());
                if values.is_empty() {
                    continue;
                }
                let counts = histogram(&values, config.bins, lo, hi)?;
                hist.push((method.clone(), class.unwrap_or_else(|| OVERALL.to_owned()), counts));
            }
        }
        written.push(write(
            &dir,
            &format!("histogram_{metric}.csv"),
            &histogram_csv(&hist, lo, hi)?,
        )?);
    }
    let table = csv_table(
        &[
            "metric", "method", "n", "mean", "median", "q1", "q3", "min", "max", "std",
        ],
        overall,
    )?;
    written.push(write(&dir, "boxplot_overall.csv", &table)?);
    Ok(written)
}

/// KS heatmaps over all methods, one per metric in `metrics`.
pub fn emit_ks(config: &RunConfig, report: &EvalReport, metrics: &[&str]) -> Result<(Vec<PathBuf>, Vec<KsHeatmap>)> {
    nonempty(report)?;
    let methods = report.methods();
    let mut written = Vec::new();
    let mut maps = Vec::new();
    for &metric in metrics {
        let map = ks_heatmap(report, &methods, metric, &config.ks_options(metric))?;
        written.push(write(
            &config.stats_dir(),
            &format!("ks_heatmap_{metric}.csv"),
            &heatmap_csv(&map)?,
        )?);
        maps.push(map);
    }
    Ok((written, maps))
}

/// Mean F-score per method at each sweep threshold: `fscore_sweep.csv`.
pub fn emit_sweep(config: &RunConfig, report: &EvalReport) -> Result<PathBuf> {
    nonempty(report)?;
    let xs = report.sweep_thresholds();
    if xs.is_empty() || report.sweeps().is_empty() {
        return Err(Error::invalid("report holds no F-score sweep"));
    }
    let series: Vec<(String, Vec<f64>)> = report
        .methods()
        .into_iter()
        .filter_map(|m| {
            let curves: Vec<&Vec<f64>> = report
                .sweeps()
                .iter()
                .filter(|c| c.method == m)
                .map(|c| &c.fscores)
                .collect();
            if curves.is_empty() {
                return None;
            }
            let means = (0..xs.len())
                .map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64)
                .collect();
            Some((m, means))
        })
        .collect();
    write(&config.stats_dir(), "fscore_sweep.csv", &curves_csv("d", xs, &series)?)
}

/// Percentage of reconstructions at or above each cutoff, for the percent
/// metrics: `cutoff_<metric>.csv`.
pub fn emit_cutoffs(config: &RunConfig, report: &EvalReport) -> Result<Vec<PathBuf>> {
    nonempty(report)?;
    let mut written = Vec::new();
    for metric in ["precision", "recall", "fscore"] {
        if !report.has_metric(metric) {
            continue;
        }
        let mut series = Vec::new();
        for m in report.methods() {
            let values = report.values(&m, metric, None);
            if values.is_empty() {
                continue;
            }
            series.push((
                m,
                cutoff_curve(&values, &config.cutoffs)?
                    .into_iter()
                    .map(|p| p.1)
                    .collect(),
            ));
        }
        let text = curves_csv("cutoff", &config.cutoffs, &series)?;
        written.push(write(&config.stats_dir(), &format!("cutoff_{metric}.csv"), &text)?);
    }
    Ok(written)
}

/// Training-set size against per-class mean IoU, per method. Writes
/// `class_size.csv`; the coefficient is `None` when either side is constant.
pub fn emit_correlation(config: &RunConfig, report: &EvalReport) -> Result<(PathBuf, BTreeMap<String, Option<f64>>)> {
    nonempty(report)?;
    let manifest = Manifest::load(&config.dataset)?;
    let split = Split::load(&config.dataset)?;
    let classes = report.classes();
    let sizes: Vec<f64> = classes
        .iter()
        .map(|c| {
            split
                .train
                .iter()
                .filter(|id| manifest.shape(id).is_some_and(|s| &s.class == c))
                .count() as f64
        })
        .collect();
    let methods = report.methods();
    let mut means: Vec<Vec<f64>> = Vec::new();
    let mut coefficients = BTreeMap::new();
    for m in &methods {
        let per_class: Vec<f64> = classes
            .iter()
            .map(|c| {
                let v = report.values(m, "iou", Some(c));
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            })
            .collect();
        let c = match pearson(&sizes, &per_class) {
            Ok(c) => Some(c),
            Err(e) => {
                warn!("{m}: no class-size correlation ({e})");
                None
            }
        };
        coefficients.insert(m.clone(), c);
        means.push(per_class);
    }
    let mut header = vec!["class", "train_size"];
    header.extend(methods.iter().map(String::as_str));
    let rows = classes.iter().enumerate().map(|(i, c)| {
        let mut row = vec![c.clone(), fmt6(sizes[i])];
        row.extend(means.iter().map(|m| fmt6(m[i])));
        row
    });
    let path = write(&config.stats_dir(), "class_size.csv", &csv_table(&header, rows)?)?;
    Ok((path, coefficients))
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    methods: Vec<String>,
    classes: Vec<String>,
    /// metric → method → overall statistics
    overall: BTreeMap<&'a str, BTreeMap<String, Summary>>,
    ks: BTreeMap<&'a str, KsHeatmap>,
    class_size_correlation: BTreeMap<String, Option<f64>>,
    skips: usize,
}

/// Every table plus `summary.json`.
pub fn emit_reports(config: &RunConfig, report: &EvalReport) -> Result<Vec<PathBuf>> {
    nonempty(report)?;
    let mut written = emit_tables(config, report)?;
    let ks_metrics: Vec<&str> = ["iou", "fscore"].into_iter().filter(|m| report.has_metric(m)).collect();
    let (paths, maps) = emit_ks(config, report, &ks_metrics)?;
    written.extend(paths);
    if !report.sweeps().is_empty() {
        written.push(emit_sweep(config, report)?);
    }
    written.extend(emit_cutoffs(config, report)?);
    let (path, correlation) = emit_correlation(config, report)?;
    written.push(path);

    let mut overall = BTreeMap::new();
    for metric in present_metrics(report) {
        let mut per_method = BTreeMap::new();
        for m in report.methods() {
            let values = report.values(&m, metric, None);
            if !values.is_empty() {
                per_method.insert(m, summarize(&values)?);
            }
        }
        overall.insert(metric, per_method);
    }
    let summary = SummaryFile {
        methods: report.methods(),
        classes: report.classes(),
        overall,
        ks: ks_metrics.into_iter().zip(maps).collect(),
        class_size_correlation: correlation,
        skips: report.skips().len(),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    written.push(write(&config.stats_dir(), "summary.json", &text)?);
    Ok(written)
}
