use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, grid_path, read_json, write_json, Frame, Manifest, INDEX_FILE};
use crate::ply::load_mesh;
use crate::shape::{rotate_mesh, voxelize_mesh, Pose, VoxelGrid};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterializeParams {
    pub frame: Frame,
    pub resolution: usize,
    /// Viewer frame only.
    pub poses_per_shape: usize,
    /// Also store a copy downsampled to this resolution (majority vote).
    pub low_resolution: Option<usize>,
}

impl Default for MaterializeParams {
    fn default() -> Self {
        Self {
            frame: Frame::Object,
            resolution: 64,
            poses_per_shape: 5,
            low_resolution: Some(32),
        }
    }
}

/// One stored grid: a shape, or a (shape, pose) pair in the viewer frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    /// `shape_id`, or `shape_id_<pose>` in the viewer frame.
    pub item_id: String,
    pub shape_id: String,
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose_index: Option<usize>,
    pub azimuth: f64,
    pub elevation: f64,
    /// Relative to the dataset root.
    pub path: String,
    pub occupied: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSet {
    pub resolution: usize,
    pub frame: Frame,
    /// Resolution this set was downsampled from, if derived.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_from: Option<usize>,
    pub entries: Vec<IndexEntry>,
}

impl GridSet {
    pub fn entry(&self, item_id: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.item_id == item_id)
    }

    pub fn load_grid(&self, root: impl AsRef<Path>, item_id: &str) -> Result<VoxelGrid> {
        let e = self
            .entry(item_id)
            .ok_or_else(|| Error::invalid(format!("no {}³ {} grid for {item_id:?}", self.resolution, self.frame)))?;
        let g = VoxelGrid::load(root.as_ref().join(&e.path))?;
        if g.resolution() != self.resolution {
            return Err(Error::ResolutionMismatch(self.resolution, g.resolution()));
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Index {
    pub sets: Vec<GridSet>,
}

impl Index {
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let path = root.as_ref().join(INDEX_FILE);
        if !path.exists() {
            return Ok(Index::default());
        }
        read_json(path)
    }

    pub fn save(&self, root: impl AsRef<Path>) -> Result<()> {
        write_json(root.as_ref().join(INDEX_FILE), self)
    }

    pub fn set(&self, resolution: usize, frame: Frame) -> Option<&GridSet> {
        self.sets
            .iter()
            .find(|s| s.resolution == resolution && s.frame == frame)
    }

    /// Inserts or replaces the set with the same resolution and frame.
    pub fn upsert(&mut self, set: GridSet) {
        self.sets
            .retain(|s| !(s.resolution == set.resolution && s.frame == set.frame));
        self.sets.push(set);
        self.sets.sort_by_key(|s| (s.resolution, s.frame == Frame::Viewer));
    }
}

/// Poses of one shape, drawn from its own stream so adding shapes never
/// changes existing poses. Azimuth uniform in [0, 360), elevation in [0, 50).
pub fn sample_poses(seed: u64, shape_id: &str, count: usize) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("pose/{shape_id}")));
    (0..count)
        .map(|_| {
            let az = rng.random_range(0.0..360.0);
            let el = rng.random_range(0.0..50.0);
            Pose::new(az, el).expect("sampled inside the valid range")
        })
        .collect()
}

/// Voxelizes every manifest shape (object frame: once at the identity pose;
/// viewer frame: once per sampled pose), stores the grids as VXBG and records
/// them in `index.json`.
pub fn materialize(root: impl AsRef<Path>, manifest: &Manifest, params: &MaterializeParams) -> Result<Index> {
    let root = root.as_ref();
    manifest.validate()?;
    if params.frame == Frame::Viewer && params.poses_per_shape == 0 {
        return Err(Error::invalid("viewer frame needs at least one pose per shape"));
    }
    let factor = match params.low_resolution {
        Some(low) if low == 0 || !params.resolution.is_multiple_of(low) => {
            return Err(Error::invalid(format!(
                "low resolution {low} does not divide resolution {}",
                params.resolution
            )))
        }
        Some(low) => Some(params.resolution / low),
        None => None,
    };

    let per_shape: Vec<Vec<(IndexEntry, Option<IndexEntry>)>> = manifest
        .shapes
        .par_iter()
        .map(|shape| {
            let mesh_path = root.join(&shape.mesh);
            let mesh = load_mesh(&mesh_path).map_err(|e| Error::invalid(format!("{}: {e}", mesh_path.display())))?;
            let poses = match params.frame {
                Frame::Object => vec![(None, Pose::IDENTITY)],
                Frame::Viewer => sample_poses(manifest.seed, &shape.id, params.poses_per_shape)
                    .into_iter()
                    .enumerate()
                    .map(|(k, p)| (Some(k), p))
                    .collect(),
            };
            let mut out = Vec::with_capacity(poses.len());
            for (k, pose) in poses {
                let rotated = rotate_mesh(&mesh, pose)?;
                let grid = voxelize_mesh(&rotated, params.resolution, true)?;
                let entry = IndexEntry {
                    item_id: match k {
                        Some(k) => format!("{}_{k}", shape.id),
                        None => shape.id.clone(),
                    },
                    shape_id: shape.id.clone(),
                    class: shape.class.clone(),
                    pose_index: k,
                    azimuth: pose.azimuth(),
                    elevation: pose.elevation(),
                    path: path_string(&grid_path(params.resolution, params.frame, &shape.id, k)),
                    occupied: grid.count(),
                };
                save_grid(root, &entry.path, &grid)?;
                let low = match (factor, params.low_resolution) {
                    (Some(f), Some(low)) => {
                        let small = grid.downsample(f, 0.5)?;
                        let low_entry = IndexEntry {
                            path: path_string(&grid_path(low, params.frame, &shape.id, k)),
                            occupied: small.count(),
                            ..entry.clone()
                        };
                        save_grid(root, &low_entry.path, &small)?;
                        Some(low_entry)
                    }
                    _ => None,
                };
                out.push((entry, low));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    // single writer for the index, after all workers finished
    let mut index = Index::load(root)?;
    let (high, low): (Vec<IndexEntry>, Vec<Option<IndexEntry>>) = per_shape.into_iter().flatten().unzip();
    index.upsert(GridSet {
        resolution: params.resolution,
        frame: params.frame,
        derived_from: None,
        entries: high,
    });
    if let Some(low_res) = params.low_resolution {
        index.upsert(GridSet {
            resolution: low_res,
            frame: params.frame,
            derived_from: Some(params.resolution),
            entries: low.into_iter().flatten().collect(),
        });
    }
    index.save(root)?;
    Ok(index)
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

fn save_grid(root: &Path, rel: &str, grid: &VoxelGrid) -> Result<()> {
    let path = root.join(rel);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    grid.save(path)
}
