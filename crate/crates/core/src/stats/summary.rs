use serde::{Deserialize, Serialize};

use super::report::EvalReport;
use crate::{Error, Result};

/// Label used for the all-classes row of an aggregate table.
pub const OVERALL: &str = "overall";

/// Box-plot statistics of one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Quantile by linear interpolation between closest ranks of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    }
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::invalid("summary of an empty sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let median = if n.is_multiple_of(2) {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    } else {
        sorted[n / 2]
    };
    Ok(Summary {
        n,
        mean,
        median,
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
        min: sorted[0],
        max: sorted[n - 1],
        std: var.sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub method: String,
    pub class: String,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Per-class and overall statistics of `metric` for every method, classes in
/// sorted order with the overall row last.
pub fn per_class_aggregate(report: &EvalReport, metric: &str) -> Result<Vec<ClassRow>> {
    if !report.has_metric(metric) {
        return Err(Error::invalid(format!("unknown metric {metric:?}")));
    }
    let classes = report.classes();
    let mut rows = Vec::new();
    for method in report.methods() {
        for class in classes.iter().map(|c| Some(c.as_str())).chain([None]) {
            let values = report.values(&method, metric, class);
            if values.is_empty() {
                continue;
            }
            rows.push(ClassRow {
                method: method.clone(),
                class: class.unwrap_or(OVERALL).to_owned(),
                summary: summarize(&values)?,
            });
        }
    }
    Ok(rows)
}

/// Equal-width bin counts over `[lo, hi]`. Bins are left-closed; the last bin
/// also holds `hi`. Values outside the range are counted in the end bins.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if !(lo < hi) {
        return Err(Error::invalid(format!("histogram range [{lo}, {hi}] is empty")));
    }
    let mut counts = vec![0; bins];
    for &v in values {
        counts[bin_index(v, bins, lo, hi)] += 1;
    }
    Ok(counts)
}

pub(crate) fn bin_index(v: f64, bins: usize, lo: f64, hi: f64) -> usize {
    let t = (v - lo) / (hi - lo) * bins as f64;
    if t.is_nan() || t < 0.0 {
        0
    } else {
        (t.floor() as usize).min(bins - 1)
    }
}

/// Sample Pearson correlation, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("correlation needs at least 2 pairs"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Percentage of values at or above `cutoff`.
pub fn cutoff_fraction(values: &[f64], cutoff: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("cutoff fraction of an empty sample"));
    }
    Ok(100.0 * values.iter().filter(|&&v| v >= cutoff).count() as f64 / values.len() as f64)
}

/// `cutoff_fraction` at each cutoff; the survival curve.
pub fn cutoff_curve(values: &[f64], cutoffs: &[f64]) -> Result<Vec<(f64, f64)>> {
    cutoffs.iter().map(|&c| Ok((c, cutoff_fraction(values, c)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::report::entry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn aggregate_examples() {
        let mut r = EvalReport::default();
        r.push(entry("a", "chair", "m", "iou", 0.3)).unwrap();
        r.push(entry("b", "lamp", "m", "iou", 0.0)).unwrap();
        r.push(entry("c", "lamp", "m", "iou", 1.0)).unwrap();
        let rows = per_class_aggregate(&r, "iou").unwrap();
        assert_eq!(rows.len(), 3);
        let chair = &rows[0].summary;
        assert_eq!((chair.n, chair.mean, chair.median, chair.std), (1, 0.3, 0.3, 0.0));
        let lamp = &rows[1].summary;
        assert_eq!((lamp.mean, lamp.median, lamp.min, lamp.max), (0.5, 0.5, 0.0, 1.0));
        assert_eq!(rows[2].class, OVERALL);
        assert_eq!(rows[2].summary.n, 3);
        assert!(per_class_aggregate(&r, "fscore").is_err());
    }

    #[test]
    fn summary_matches_streaming_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let s = summarize(&values).unwrap();
        // Welford
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &values {
            n += 1.0;
            let d = v - mean;
            mean += d / n;
            m2 += d * (v - mean);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!((s.mean - mean).abs() < 1e-12);
        assert!((s.std - (m2 / n).sqrt()).abs() < 1e-12);
        assert_eq!((s.min, s.max), (lo, hi));
        let below = values.iter().filter(|&&v| v < s.median).count();
        assert_eq!(below, 500);
    }

    #[test]
    fn quartiles_interpolate() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(histogram(&[0.0; 5], 4, 0.0, 1.0).unwrap(), vec![5, 0, 0, 0]);
        assert_eq!(histogram(&[1.0], 4, 0.0, 1.0).unwrap(), vec![0, 0, 0, 1]);
        assert_eq!(histogram(&[0.25, -3.0, 7.0], 4, 0.0, 1.0).unwrap(), vec![1, 1, 0, 1]);
        assert!(histogram(&[0.5], 0, 0.0, 1.0).is_err());
        assert!(histogram(&[0.5], 3, 1.0, 1.0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let values: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let h = histogram(&values, 50, 0.0, 1.0).unwrap();
        assert_eq!(h.iter().sum::<usize>(), 10_000);
        let sigma = (10_000.0f64 * 0.02 * 0.98).sqrt();
        assert!(h.iter().all(|&c| (c as f64 - 200.0).abs() < 4.0 * sigma));
    }

    #[test]
    fn pearson_examples() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.37).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(pearson(&x, &[3.0; 20]), Err(Error::ZeroVariance)));
        assert!(pearson(&[1.0], &[1.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let b: Vec<f64> = a.iter().map(|v| v + rng.random::<f64>()).collect();
        let n = 300.0;
        let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
        let sab: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let saa: f64 = a.iter().map(|x| x * x).sum();
        let sbb: f64 = b.iter().map(|x| x * x).sum();
        let oracle = (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt());
        assert!((pearson(&a, &b).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff_fraction(&[0.2, 0.9, 0.0], 0.0).unwrap(), 100.0);
        assert_eq!(cutoff_fraction(&[0.4, 0.6], 0.5).unwrap(), 50.0);
        assert_eq!(cutoff_fraction(&[0.5], 0.5).unwrap(), 100.0);
        assert!(cutoff_fraction(&[], 0.5).is_err());
        let curve = cutoff_curve(&[0.1, 0.5, 0.9], &[0.0, 0.2, 0.6, 1.0]).unwrap();
        let pct: Vec<f64> = curve.iter().map(|c| c.1).collect();
        assert_eq!(pct, vec![100.0, 200.0 / 3.0, 100.0 / 3.0, 0.0]);
    }
}
