use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{default_tau_grid, ClusterParams, SimilarityMode};
use crate::dataset::{Frame, GenConfig, MaterializeParams, Ratios};
use crate::metrics::MetricConfig;
use crate::stats::{KsMode, KsOptions};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cluster,
    Retrieval,
    OracleNn,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Cluster, Method::Retrieval, Method::OracleNn];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cluster => "cluster",
            Method::Retrieval => "retrieval",
            Method::OracleNn => "oracle_nn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::invalid(format!(
                "unknown method {s:?} (expected cluster, retrieval or oracle_nn)"
            ))
        })
    }
}

/// Metric names as they appear in reports.
pub const METRICS: [&str; 5] = ["iou", "chamfer", "precision", "recall", "fscore"];

/// Everything a pipeline run depends on. Missing fields in a config file take
/// the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub output: PathBuf,
    pub seed: u64,

    // synthetic data
    pub classes: usize,
    pub shapes_per_class: usize,
    pub jitter: f64,
    pub contamination: f64,
    pub ratios: Ratios,

    // ground truth
    pub frame: Frame,
    pub resolution: usize,
    pub low_resolution: usize,
    pub poses_per_shape: usize,

    // baselines
    pub methods: Vec<Method>,
    pub k: usize,
    pub max_iters: usize,
    pub tau_grid: Vec<f64>,
    pub dim: usize,
    pub similarity: SimilarityMode,

    // evaluation
    pub metrics: MetricConfig,
    /// F-score thresholds for the sweep curves.
    pub sweep: Vec<f64>,
    /// Cutoffs in percent for the precision / recall / F-score survival curves.
    pub cutoffs: Vec<f64>,
    pub alpha: f64,
    pub ks_mode: KsMode,
    pub bins: usize,

    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data"),
            output: PathBuf::from("out"),
            seed: 0,
            classes: 8,
            shapes_per_class: 40,
            jitter: 0.4,
            contamination: 0.5,
            ratios: Ratios::default(),
            frame: Frame::Object,
            resolution: 64,
            low_resolution: 32,
            poses_per_shape: 5,
            methods: Method::ALL.to_vec(),
            k: 16,
            max_iters: 100,
            tau_grid: default_tau_grid(),
            dim: 32,
            similarity: SimilarityMode::Cosine,
            metrics: MetricConfig::default(),
            sweep: vec![0.005, 0.01, 0.015, 0.02, 0.03, 0.04, 0.05],
            cutoffs: (0..=20).map(|i| i as f64 * 5.0).collect(),
            alpha: 0.05,
            ks_mode: KsMode::Raw,
            bins: 50,
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if !(8..=512).contains(&self.resolution) {
            return bad(format!("resolution {} outside 8..=512", self.resolution));
        }
        if self.low_resolution == 0 || !self.resolution.is_multiple_of(self.low_resolution) {
            return bad(format!(
                "low_resolution {} must divide resolution {}",
                self.low_resolution, self.resolution
            ));
        }
        if self.frame == Frame::Viewer && self.poses_per_shape == 0 {
            return bad("viewer frame needs poses_per_shape ≥ 1".into());
        }
        self.ratios.validate()?;
        self.metrics.validate()?;
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        let mut sorted = self.methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.methods.len() {
            return bad("methods listed twice".into());
        }
        if self.k == 0 || self.dim == 0 {
            return bad("k and dim must be at least 1".into());
        }
        if self.tau_grid.is_empty() || self.tau_grid.iter().any(|t| !(0.0..1.0).contains(t)) {
            return bad("tau_grid must be nonempty with values in [0, 1)".into());
        }
        if self.sweep.is_empty() || self.sweep.iter().any(|d| !(*d > 0.0)) || self.sweep.windows(2).any(|w| w[0] > w[1])
        {
            return bad("sweep must be ascending positive thresholds".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.bins == 0 {
            return bad("bins must be at least 1".into());
        }
        if !(0.0..=crate::shape::synth::MAX_JITTER).contains(&self.jitter) || !(0.0..=1.0).contains(&self.contamination)
        {
            return bad("jitter or contamination out of range".into());
        }
        Ok(())
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            classes: self.classes,
            shapes_per_class: self.shapes_per_class,
            jitter: self.jitter,
            contamination: self.contamination,
            seed: self.seed,
            ratios: self.ratios,
        }
    }

    pub fn materialize_params(&self) -> MaterializeParams {
        MaterializeParams {
            frame: self.frame,
            resolution: self.resolution,
            poses_per_shape: self.poses_per_shape,
            low_resolution: Some(self.low_resolution),
        }
    }

    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            k: self.k,
            seed: self.seed,
            max_iters: self.max_iters,
            tau_grid: self.tau_grid.clone(),
        }
    }

    pub fn ks_options(&self, metric: &str) -> KsOptions {
        KsOptions {
            alpha: self.alpha,
            mode: self.ks_mode,
            bins: self.bins,
            range: metric_range(metric),
        }
    }

    /// The config as recorded in reports: paths and worker count do not
    /// affect results and are left out so reports compare across locations.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("dataset");
            map.remove("output");
            map.remove("workers");
        }
        v
    }

    pub fn model_path(&self, method: Method) -> PathBuf {
        self.output.join("models").join(format!("{}.rbmd", method.name()))
    }

    pub fn prediction_path(&self, method: Method, item_id: &str) -> PathBuf {
        self.output
            .join("predictions")
            .join(method.name())
            .join(format!("{item_id}.vxbg"))
    }

    pub fn report_path(&self) -> PathBuf {
        self.output.join("report.json")
    }

    pub fn stats_dir(&self) -> PathBuf {
        self.output.join("stats")
    }
}

/// Natural value range of a metric, for histograms and binned tests.
pub fn metric_range(metric: &str) -> (f64, f64) {
    match metric {
        "precision" | "recall" | "fscore" => (0.0, 100.0),
        _ => (0.0, 1.0),
    }
}
