//! Shape similarity measures: volumetric IoU on occupancy grids and the
//! point-based Chamfer distance and precision / recall / F-score.
//!
//! Point distances are Euclidean and taken in the normalized unit-cube frame,
//! so an F-score threshold `d` is directly a fraction of the volume side.

pub mod colorize;
pub mod kdtree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::shape::{PointCloud, VoxelGrid};
use crate::{Error, Result};

pub use colorize::{distance_colors, FAR_COLOR, NEAR_COLOR};
pub use kdtree::KdTree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// F-score threshold as a fraction of the side length.
    pub d: f64,
    /// Surface samples per shape.
    pub sample_count: usize,
    /// Optional cap applied to each nearest-neighbor distance in the Chamfer sum.
    pub cd_clamp: Option<f64>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            d: 0.01,
            sample_count: 10_000,
            cd_clamp: None,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) {
            return Err(Error::invalid(format!("threshold d = {} must be positive", self.d)));
        }
        if self.sample_count == 0 {
            return Err(Error::invalid("sample_count must be at least 1"));
        }
        if let Some(c) = self.cd_clamp {
            if !(c > 0.0) {
                return Err(Error::invalid("cd_clamp must be positive"));
            }
        }
        Ok(())
    }
}

/// `|a ∩ b| / |a ∪ b|`.
pub fn iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    let (inter, union) = a.overlap_counts(b)?;
    if union == 0 {
        return Err(Error::BothEmpty);
    }
    Ok(inter as f64 / union as f64)
}

/// For every point of `from`, the exact Euclidean distance to the nearest
/// point of `to`.
pub fn point_distances(from: &PointCloud, to: &PointCloud) -> Result<Vec<f64>> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = KdTree::build(to.points());
    Ok(from.points().par_iter().map(|p| tree.nearest_distance(p)).collect())
}

/// Precision, recall and F-score, all in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    /// Set when the reconstruction had no points; precision is then reported as 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty_reconstruction: bool,
}

impl Prf {
    pub fn from_precision_recall(precision: f64, recall: f64) -> Self {
        let fscore = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            fscore,
            empty_reconstruction: false,
        }
    }
}

fn percent_below(distances: &[f64], d: f64) -> f64 {
    let hits = distances.iter().filter(|&&e| e < d).count();
    100.0 * hits as f64 / distances.len() as f64
}

/// Both directed nearest-neighbor distance lists for a ground-truth /
/// reconstruction pair. Computing these once serves the Chamfer distance and
/// any number of F-score thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDistances {
    /// `e_r` for every reconstructed point.
    pub recon_to_gt: Vec<f64>,
    /// `e_g` for every ground-truth point.
    pub gt_to_recon: Vec<f64>,
}

impl PairDistances {
    /// `gt` must be nonempty; an empty reconstruction is allowed and yields
    /// empty `recon_to_gt` and infinite `gt_to_recon`.
    pub fn compute(gt: &PointCloud, recon: &PointCloud) -> Result<Self> {
        if gt.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if recon.is_empty() {
            return Ok(Self {
                recon_to_gt: Vec::new(),
                gt_to_recon: vec![f64::INFINITY; gt.len()],
            });
        }
        Ok(Self {
            recon_to_gt: point_distances(recon, gt)?,
            gt_to_recon: point_distances(gt, recon)?,
        })
    }

    pub fn chamfer(&self, clamp: Option<f64>) -> Result<f64> {
        if self.recon_to_gt.is_empty() || self.gt_to_recon.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mean = |v: &[f64]| {
            let sum: f64 = v.iter().map(|&e| clamp.map_or(e, |c| e.min(c))).sum();
            sum / v.len() as f64
        };
        Ok(mean(&self.recon_to_gt) + mean(&self.gt_to_recon))
    }

    pub fn prf(&self, d: f64) -> Result<Prf> {
        if !(d > 0.0) {
            return Err(Error::invalid(format!("threshold d = {d} must be positive")));
        }
        let recall = percent_below(&self.gt_to_recon, d);
        if self.recon_to_gt.is_empty() {
            return Ok(Prf {
                precision: 0.0,
                recall,
                fscore: 0.0,
                empty_reconstruction: true,
            });
        }
        Ok(Prf::from_precision_recall(percent_below(&self.recon_to_gt, d), recall))
    }
}

/// Chamfer distance: mean `e_r` plus mean `e_g`.
pub fn chamfer(gt: &PointCloud, recon: &PointCloud) -> Result<f64> {
    chamfer_clamped(gt, recon, None)
}

pub fn chamfer_clamped(gt: &PointCloud, recon: &PointCloud, clamp: Option<f64>) -> Result<f64> {
    if recon.is_empty() {
        return Err(Error::EmptyCloud);
    }
    PairDistances::compute(gt, recon)?.chamfer(clamp)
}

/// `P(d)`, `R(d)` and their harmonic mean, counting distances strictly below `d`.
pub fn precision_recall_f(gt: &PointCloud, recon: &PointCloud, d: f64) -> Result<Prf> {
    PairDistances::compute(gt, recon)?.prf(d)
}

/// F-score curve over ascending thresholds, sharing one distance computation.
pub fn fscore_sweep(gt: &PointCloud, recon: &PointCloud, thresholds: &[f64]) -> Result<Vec<(f64, Prf)>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("sweep thresholds must be sorted ascending"));
    }
    let dist = PairDistances::compute(gt, recon)?;
    thresholds.iter().map(|&d| Ok((d, dist.prf(d)?))).collect()
}
