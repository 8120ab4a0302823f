use log::warn;
use serde::{Deserialize, Serialize};

use super::report::EvalReport;
use super::summary::bin_index;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d_stat: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Two-sample Kolmogorov-Smirnov test. The p-value is the asymptotic
/// Kolmogorov tail at `λ = (√nₑ + 0.12 + 0.11/√nₑ)·D`, `nₑ = n1·n2/(n1+n2)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS test needs two nonempty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("KS test on NaN values"));
    }
    let d = ks_statistic(a, b);
    let (n1, n2) = (a.len(), b.len());
    let sqrt_ne = ((n1 * n2) as f64 / (n1 + n2) as f64).sqrt();
    // Stephens' finite-sample correction of the asymptotic argument
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    Ok(KsResult {
        d_stat: d,
        p_value: kolmogorov_survival(lambda),
        n1,
        n2,
    })
}

/// `sup_x |F_a(x) - F_b(x)|`, evaluated at every point of the merged support.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    // beyond the last step one ECDF is already 1, so the gap can only shrink
    d
}

/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`, summed until terms drop below 1e-8
/// relative to the running sum. Returns 1 where the series has not converged
/// (small λ, where Q is indistinguishable from 1).
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut sign = 2.0;
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = sign * (a2 * (k * k) as f64).exp();
        sum += term;
        if term.abs() <= 1e-8 * sum.abs() {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
    }
    1.0
}

/// Replaces each value by the center of its histogram bin before testing.
pub fn ks_two_sample_binned(a: &[f64], b: &[f64], bins: usize, lo: f64, hi: f64) -> Result<KsResult> {
    if bins == 0 || !(lo < hi) {
        return Err(Error::invalid("binned KS needs bins ≥ 1 and lo < hi"));
    }
    let width = (hi - lo) / bins as f64;
    let center = |v: &f64| lo + (bin_index(*v, bins, lo, hi) as f64 + 0.5) * width;
    let a: Vec<f64> = a.iter().map(center).collect();
    let b: Vec<f64> = b.iter().map(center).collect();
    ks_two_sample(&a, &b)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KsMode {
    #[default]
    Raw,
    /// Test on 50-bin histogram centers over [0, 1] (or the metric's range).
    Binned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsHeatmap {
    pub methods: Vec<String>,
    /// `counts[i][j]`: classes where methods i and j are not distinguished at `alpha`.
    pub counts: Vec<Vec<usize>>,
    pub classes: Vec<String>,
    pub skipped_classes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsOptions {
    pub alpha: f64,
    pub mode: KsMode,
    pub bins: usize,
    pub range: (f64, f64),
}

impl Default for KsOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            mode: KsMode::Raw,
            bins: 50,
            range: (0.0, 1.0),
        }
    }
}

/// Pairwise method comparison: per class, a KS test of the two methods' value
/// distributions; a cell counts the classes where the test does not reject.
pub fn ks_heatmap(report: &EvalReport, methods: &[String], metric: &str, opts: &KsOptions) -> Result<KsHeatmap> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {} outside (0, 1)", opts.alpha)));
    }
    if methods.is_empty() {
        return Err(Error::invalid("no methods to compare"));
    }
    for m in methods {
        if report.values(m, metric, None).is_empty() {
            return Err(Error::invalid(format!("no {metric} values for method {m:?}")));
        }
    }
    let mut classes = Vec::new();
    let mut skipped = Vec::new();
    let mut samples: Vec<Vec<Vec<f64>>> = Vec::new();
    for class in report.classes() {
        let per_method: Vec<Vec<f64>> = methods.iter().map(|m| report.values(m, metric, Some(&class))).collect();
        if per_method.iter().any(|v| v.len() < 2) {
            warn!("class {class:?} has fewer than 2 {metric} values for some method; skipped in KS heatmap");
            skipped.push(class);
            continue;
        }
        classes.push(class);
        samples.push(per_method);
    }
    let k = methods.len();
    let mut counts = vec![vec![0; k]; k];
    for per_method in &samples {
        for i in 0..k {
            for j in i..k {
                let r = match opts.mode {
                    KsMode::Raw => ks_two_sample(&per_method[i], &per_method[j])?,
                    KsMode::Binned => {
                        ks_two_sample_binned(&per_method[i], &per_method[j], opts.bins, opts.range.0, opts.range.1)?
                    }
                };
                if r.p_value >= opts.alpha {
                    counts[i][j] += 1;
                    if i != j {
                        counts[j][i] += 1;
                    }
                }
            }
        }
    }
    Ok(KsHeatmap {
        methods: methods.to_vec(),
        counts,
        classes,
        skipped_classes: skipped,
    })
}
