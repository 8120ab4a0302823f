//! Clustering baseline: k-means on low-resolution occupancy vectors, then a
//! thresholded per-cluster mean shape on the high-resolution members.

use log::warn;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, nearest_centroid};
use crate::shape::VoxelGrid;
use crate::{Error, Result};

/// Default threshold candidates: 0.05, 0.10, …, 0.50.
pub fn default_tau_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 20.0).collect()
}

/// Per-cell average occupancy of a set of grids, kept as exact member counts.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanShape {
    resolution: usize,
    members: u32,
    counts: Vec<u32>,
}

impl MeanShape {
    pub(crate) fn from_counts(resolution: usize, members: u32, counts: Vec<u32>) -> Result<Self> {
        if members == 0 || counts.len() != resolution.pow(3) || counts.iter().any(|&c| c > members) {
            return Err(Error::invalid("inconsistent mean-shape counts"));
        }
        Ok(Self {
            resolution,
            members,
            counts,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn member_count(&self) -> usize {
        self.members as usize
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn value(&self, index: usize) -> f64 {
        self.counts[index] as f64 / self.members as f64
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.counts.len()).map(|i| self.value(i))
    }

    /// Cells whose mean occupancy is strictly above `tau`.
    pub fn threshold(&self, tau: f64) -> VoxelGrid {
        let mut grid = VoxelGrid::new(self.resolution).expect("validated resolution");
        for i in 0..self.counts.len() {
            if self.value(i) > tau {
                grid.set_index(i, true);
            }
        }
        grid
    }
}

pub fn mean_shape(members: &[&VoxelGrid]) -> Result<MeanShape> {
    let first = members
        .first()
        .ok_or_else(|| Error::invalid("mean shape of an empty member list"))?;
    let res = first.resolution();
    let mut counts = vec![0u32; first.len()];
    for m in members {
        if m.resolution() != res {
            return Err(Error::ResolutionMismatch(res, m.resolution()));
        }
        for i in m.iter_occupied() {
            counts[i] += 1;
        }
    }
    MeanShape::from_counts(res, members.len() as u32, counts)
}

/// Result of the threshold search for one cluster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub tau: f64,
    pub mean_iou: f64,
    /// Every candidate produced an empty shape.
    pub all_empty: bool,
}

/// IoU with the convention that two empty grids agree perfectly.
pub(crate) fn iou_or_one(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    let (inter, union) = a.overlap_counts(b)?;
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// The candidate maximizing the average member IoU of `mean > tau`; ties go to
/// the smallest candidate.
pub fn optimal_threshold(mean: &MeanShape, members: &[&VoxelGrid], grid: &[f64]) -> Result<ThresholdChoice> {
    if grid.is_empty() {
        return Err(Error::invalid("empty threshold grid"));
    }
    if members.is_empty() {
        return Err(Error::invalid("threshold search without members"));
    }
    let mut best: Option<ThresholdChoice> = None;
    let mut all_empty = true;
    for &tau in grid {
        let shape = mean.threshold(tau);
        all_empty &= shape.is_empty();
        let mut total = 0.0;
        for m in members {
            total += iou_or_one(&shape, m)?;
        }
        let avg = total / members.len() as f64;
        let better = match best {
            None => true,
            Some(b) => avg > b.mean_iou || (avg == b.mean_iou && tau < b.tau),
        };
        if better {
            best = Some(ThresholdChoice {
                tau,
                mean_iou: avg,
                all_empty: false,
            });
        }
    }
    let mut choice = best.expect("nonempty grid");
    choice.all_empty = all_empty;
    if all_empty {
        warn!("every threshold candidate yields an empty mean shape");
    }
    Ok(choice)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tau_grid: Vec<f64>,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            k: 16,
            seed: 0,
            max_iters: 100,
            tau_grid: default_tau_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel {
    /// Flattened low-resolution centroids.
    pub centroids: Vec<Vec<f64>>,
    pub low_resolution: usize,
    pub mean_shapes: Vec<MeanShape>,
    pub thresholds: Vec<ThresholdChoice>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn member_counts(&self) -> Vec<usize> {
        self.mean_shapes.iter().map(|m| m.member_count()).collect()
    }

    /// The cluster whose centroid is nearest to a low-resolution grid.
    pub fn nearest_cluster(&self, low: &VoxelGrid) -> Result<usize> {
        if low.resolution() != self.low_resolution {
            return Err(Error::ResolutionMismatch(self.low_resolution, low.resolution()));
        }
        Ok(nearest_centroid(&flatten(low), &self.centroids).0)
    }
}

pub(crate) fn flatten(grid: &VoxelGrid) -> Vec<f64> {
    grid.to_f32_vec().into_iter().map(f64::from).collect()
}

pub fn build_cluster_model(
    train_high: &[VoxelGrid],
    train_low: &[VoxelGrid],
    params: &ClusterParams,
) -> Result<ClusterModel> {
    if train_high.len() != train_low.len() {
        return Err(Error::invalid(format!(
            "{} high-resolution grids but {} low-resolution grids",
            train_high.len(),
            train_low.len()
        )));
    }
    let low_resolution = train_low.first().map_or(0, |g| g.resolution());
    if train_low.iter().any(|g| g.resolution() != low_resolution) {
        return Err(Error::invalid("low-resolution grids differ in resolution"));
    }
    let vectors: Vec<Vec<f64>> = train_low.iter().map(flatten).collect();
    let km = kmeans(&vectors, params.k, params.seed, params.max_iters)?;

    let mut mean_shapes = Vec::with_capacity(params.k);
    let mut thresholds = Vec::with_capacity(params.k);
    for j in 0..params.k {
        let members: Vec<&VoxelGrid> = (0..train_high.len())
            .filter(|&i| km.assignments[i] == j)
            .map(|i| &train_high[i])
            .collect();
        if members.is_empty() {
            // only reachable when k exceeds the number of distinct vectors
            return Err(Error::invalid(format!("cluster {j} has no members")));
        }
        let mean = mean_shape(&members)?;
        let choice = optimal_threshold(&mean, &members, &params.tau_grid)?;
        if choice.all_empty {
            warn!("cluster {j}: thresholded mean shape is empty");
        }
        mean_shapes.push(mean);
        thresholds.push(choice);
    }
    Ok(ClusterModel {
        centroids: km.centroids,
        low_resolution,
        mean_shapes,
        thresholds,
    })
}

/// The binarized mean shape of a cluster.
pub fn predict_with_cluster(model: &ClusterModel, cluster_id: usize) -> Result<VoxelGrid> {
    if cluster_id >= model.k() {
        return Err(Error::invalid(format!(
            "cluster id {cluster_id} out of range for k = {}",
            model.k()
        )));
    }
    Ok(model.mean_shapes[cluster_id].threshold(model.thresholds[cluster_id].tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(res: usize, p: f64, rng: &mut ChaCha8Rng) -> VoxelGrid {
        VoxelGrid::from_fn(res, |_, _, _| rng.random_bool(p)).unwrap()
    }

    #[test]
    fn default_grid_values() {
        let g = default_tau_grid();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[2], 0.15);
        assert_eq!(g[9], 0.5);
    }

    #[test]
    fn single_member_mean_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_grid(8, 0.3, &mut rng);
        let m = mean_shape(&[&v]).unwrap();
        for i in 0..v.len() {
            assert_eq!(m.value(i), if v.get_index(i) { 1.0 } else { 0.0 });
        }
    }

    fn a_ab() -> (VoxelGrid, VoxelGrid) {
        let mut a = VoxelGrid::new(2).unwrap();
        a.set(0, 0, 0, true);
        let mut ab = a.clone();
        ab.set(1, 0, 0, true);
        (a, ab)
    }

    #[test]
    fn two_member_mean() {
        let (a, ab) = a_ab();
        let m = mean_shape(&[&a, &ab]).unwrap();
        assert_eq!(m.value(0), 1.0);
        assert_eq!(m.value(1), 0.5);
        assert_eq!(m.value(2), 0.0);
        assert!(mean_shape(&[]).is_err());
    }

    #[test]
    fn mean_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grids: Vec<VoxelGrid> = (0..10).map(|_| random_grid(6, 0.4, &mut rng)).collect();
        let refs: Vec<&VoxelGrid> = grids.iter().collect();
        let m = mean_shape(&refs).unwrap();
        for i in 0..grids[0].len() {
            let naive = grids.iter().filter(|g| g.get_index(i)).count() as f64 / 10.0;
            assert_eq!(m.value(i), naive);
        }
    }

    #[test]
    fn tie_breaks_to_smallest_tau() {
        let (a, ab) = a_ab();
        let members = [&a, &ab];
        let m = mean_shape(&members).unwrap();
        let c = optimal_threshold(&m, &members, &default_tau_grid()).unwrap();
        assert_eq!(c.tau, 0.05);
        assert_eq!(c.mean_iou, 0.75);
        assert!(!c.all_empty);

        let single = optimal_threshold(&mean_shape(&[&a]).unwrap(), &[&a], &default_tau_grid()).unwrap();
        assert_eq!((single.tau, single.mean_iou), (0.05, 1.0));
    }

    #[test]
    fn all_empty_is_flagged() {
        let empty = VoxelGrid::new(4).unwrap();
        let m = mean_shape(&[&empty]).unwrap();
        let c = optimal_threshold(&m, &[&empty], &[0.1, 0.2]).unwrap();
        assert!(c.all_empty);
        assert_eq!((c.tau, c.mean_iou), (0.1, 1.0));
    }

    #[test]
    fn identical_class_is_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = random_grid(8, 0.3, &mut rng);
        let low = shape.downsample(2, 0.5).unwrap();
        let model = build_cluster_model(
            &vec![shape.clone(); 5],
            &vec![low; 5],
            &ClusterParams {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(predict_with_cluster(&model, 0).unwrap(), shape);
        assert_eq!(model.thresholds[0].mean_iou, 1.0);
        assert!(predict_with_cluster(&model, 1).is_err());
    }

    #[test]
    fn separates_two_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut high = Vec::new();
        for i in 0..12 {
            let left = i % 2 == 0;
            high.push(VoxelGrid::from_fn(8, |x, _, _| (x < 4) == left && rng.random_bool(0.8)).unwrap());
        }
        let low: Vec<VoxelGrid> = high.iter().map(|g| g.downsample(2, 0.5).unwrap()).collect();
        let model = build_cluster_model(
            &high,
            &low,
            &ClusterParams {
                k: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let ids: Vec<usize> = low.iter().map(|g| model.nearest_cluster(g).unwrap()).collect();
        for i in 0..12 {
            assert_eq!(ids[i] == ids[0], i % 2 == 0);
        }
        for j in 0..2 {
            let fam: Vec<&VoxelGrid> = (0..12).filter(|&i| ids[i] == j).map(|i| &high[i]).collect();
            assert_eq!(model.mean_shapes[j], mean_shape(&fam).unwrap());
        }
        assert_eq!(model.member_counts().iter().sum::<usize>(), 12);
    }
}
