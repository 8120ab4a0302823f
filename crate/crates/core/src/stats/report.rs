use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One measured value for one (shape, method, metric).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub shape_id: String,
    pub class: String,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

/// A (shape, method) pair, or one metric of it, that could not be evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub shape_id: String,
    pub class: String,
    pub method: String,
    /// `None` when the whole pair was skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    pub reason: String,
}

/// F-scores of one (shape, method) at each of the report's sweep thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub shape_id: String,
    pub class: String,
    pub method: String,
    pub fscores: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub config: serde_json::Value,
    pub dataset_hash: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: ReportMetadata,
    entries: Vec<Entry>,
    #[serde(default)]
    skips: Vec<Skip>,
    #[serde(default)]
    sweep_thresholds: Vec<f64>,
    #[serde(default)]
    sweeps: Vec<SweepCurve>,
    #[serde(skip)]
    keys: HashSet<(String, String, String)>,
}

impl EvalReport {
    pub fn new(metadata: ReportMetadata) -> Self {
        Self {
            metadata,
            ..Default::default()
        }
    }

    pub fn push(&mut self, entry: Entry) -> Result<()> {
        if !entry.value.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite {} for {} / {}",
                entry.metric, entry.shape_id, entry.method
            )));
        }
        let key = (entry.shape_id.clone(), entry.method.clone(), entry.metric.clone());
        if !self.keys.insert(key) {
            return Err(Error::invalid(format!(
                "duplicate {} for {} / {}",
                entry.metric, entry.shape_id, entry.method
            )));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn push_skip(&mut self, skip: Skip) {
        self.skips.push(skip);
    }

    pub fn set_sweep_thresholds(&mut self, thresholds: Vec<f64>) {
        self.sweep_thresholds = thresholds;
    }

    pub fn push_sweep(&mut self, curve: SweepCurve) -> Result<()> {
        if curve.fscores.len() != self.sweep_thresholds.len() {
            return Err(Error::invalid("sweep curve length differs from the threshold list"));
        }
        self.sweeps.push(curve);
        Ok(())
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn skips(&self) -> &[Skip] {
        &self.skips
    }

    pub fn sweep_thresholds(&self) -> &[f64] {
        &self.sweep_thresholds
    }

    pub fn sweeps(&self) -> &[SweepCurve] {
        &self.sweeps
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Methods in first-appearance order.
    pub fn methods(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.method.as_str()))
            .map(|e| e.method.clone())
            .collect()
    }

    pub fn metrics(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.metric.as_str()))
            .map(|e| e.metric.clone())
            .collect()
    }

    /// Class labels, sorted.
    pub fn classes(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.class.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Values of `metric` for `method`, optionally restricted to one class, in entry order.
    pub fn values(&self, method: &str, metric: &str, class: Option<&str>) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.method == method && e.metric == metric && class.is_none_or(|c| e.class == c))
            .map(|e| e.value)
            .collect()
    }

    pub fn has_metric(&self, metric: &str) -> bool {
        self.entries.iter().any(|e| e.metric == metric)
    }

    pub fn has_method(&self, method: &str) -> bool {
        self.entries.iter().any(|e| e.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: EvalReport = serde_json::from_str(text)?;
        let mut report = EvalReport::new(raw.metadata);
        for e in raw.entries {
            report.push(e)?;
        }
        report.skips = raw.skips;
        report.sweep_thresholds = raw.sweep_thresholds;
        for c in raw.sweeps {
            report.push_sweep(c)?;
        }
        Ok(report)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
pub(crate) fn entry(shape: &str, class: &str, method: &str, metric: &str, value: f64) -> Entry {
    Entry {
        shape_id: shape.into(),
        class: class.into(),
        method: method.into(),
        metric: metric.into(),
        value,
    }
}
