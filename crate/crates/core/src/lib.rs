//! Shape-reconstruction benchmarking toolkit.
//!
//! The crate is organized around the three shape representations used when
//! scoring single-view reconstructions (voxel occupancy, triangle meshes and
//! sampled point clouds), the similarity measures defined on them, a set of
//! pure-recognition baselines and the statistics used to compare methods.
//!
//! - [`shape`]: voxel grids, meshes, point clouds and conversions between them,
//!   plus a procedural shape generator.
//! - [`metrics`]: IoU, Chamfer distance, precision/recall/F-score.
//! - [`baselines`]: k-means clustering with thresholded mean shapes,
//!   similarity-embedding retrieval and the oracle nearest neighbor.
//! - [`stats`]: per-class aggregation, histograms, Kolmogorov–Smirnov tests.
//! - [`dataset`]: manifests, splits and ground-truth materialization.
//! - [`pipeline`]: the end-to-end driver used by the command line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod ply;
pub mod shape;
pub mod stats;

pub use error::{Error, Result};
