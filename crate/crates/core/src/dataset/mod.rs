//! Dataset manifest, per-class train/val/test splits, and materialization of
//! ground-truth occupancy grids in object- or viewer-centered frames.
//!
//! On-disk layout under a dataset root:
//!
//! ```text
//! manifest.json
//! split.json
//! index.json
//! meshes/<shape_id>.ply
//! grids/<res>/<frame>/<shape_id>[_<pose_idx>].vxbg
//! ```

pub mod generate;
pub mod materialize;
pub mod split;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::shape::ShapeSpec;
use crate::{Error, Result};

pub use generate::{generate_dataset, GenConfig};
pub use materialize::{materialize, GridSet, Index, IndexEntry, MaterializeParams};
pub use split::{split_dataset, Ratios, Role, Split};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPLIT_FILE: &str = "split.json";
pub const INDEX_FILE: &str = "index.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestShape {
    pub id: String,
    pub class: String,
    /// Relative to the dataset root.
    pub mesh: String,
    /// Generator recipe, for synthetic shapes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ShapeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub classes: Vec<String>,
    pub shapes: Vec<ManifestShape>,
    /// Settings that produced a synthetic dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GenConfig>,
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::HashSet::new();
        for s in &self.shapes {
            if s.id.is_empty() || s.id.contains(['/', '\\']) {
                return Err(Error::invalid(format!("invalid shape id {:?}", s.id)));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(Error::invalid(format!("duplicate shape id {:?}", s.id)));
            }
            if !self.classes.contains(&s.class) {
                return Err(Error::invalid(format!(
                    "shape {:?} has undeclared class {:?}",
                    s.id, s.class
                )));
            }
        }
        Ok(())
    }

    pub fn shape(&self, id: &str) -> Option<&ManifestShape> {
        self.shapes.iter().find(|s| s.id == id)
    }

    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let m: Manifest = read_json(root.as_ref().join(MANIFEST_FILE))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, root: impl AsRef<Path>) -> Result<()> {
        write_json(root.as_ref().join(MANIFEST_FILE), self)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    #[default]
    Object,
    Viewer,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Object => "object",
            Frame::Viewer => "viewer",
        })
    }
}

impl FromStr for Frame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "object" => Ok(Frame::Object),
            "viewer" => Ok(Frame::Viewer),
            _ => Err(Error::invalid(format!(
                "unknown frame {s:?} (expected object or viewer)"
            ))),
        }
    }
}

/// A 64-bit seed derived from a base seed and a tag, stable across runs and
/// independent of any other tag.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Grid file path relative to the dataset root.
pub fn grid_path(resolution: usize, frame: Frame, shape_id: &str, pose: Option<usize>) -> PathBuf {
    let name = match pose {
        Some(k) => format!("{shape_id}_{k}.vxbg"),
        None => format!("{shape_id}.vxbg"),
    };
    Path::new("grids")
        .join(resolution.to_string())
        .join(frame.to_string())
        .join(name)
}

pub(crate) fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format("JSON", format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
