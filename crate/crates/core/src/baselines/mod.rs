//! Pure-recognition baselines: clustering with thresholded mean shapes,
//! similarity-embedding retrieval, and the IoU oracle nearest neighbor.
//!
//! Image-based predictors are out of scope. [`Predictor`] keeps the slot open;
//! the oracle implementations here see the ground-truth shape and therefore act
//! as a perfect classifier / regressor.

pub mod cluster;
pub mod container;
pub mod kmeans;
pub mod retrieval;

use nalgebra::DVector;

use crate::shape::VoxelGrid;
use crate::Result;

pub use cluster::{
    build_cluster_model, default_tau_grid, mean_shape, optimal_threshold, predict_with_cluster, ClusterModel,
    ClusterParams, MeanShape, ThresholdChoice,
};
pub use container::{load_model, save_model, Model, RBMD_VERSION};
pub use kmeans::{kmeans, KMeans};
pub use retrieval::{
    build_similarity_matrix, embed_row, fit_embedding, oracle_nn, retrieve, similarity_row, EmbeddingModel,
    SimilarityMode,
};

/// What a predictor sees of a test item. Oracles only need the shape.
#[derive(Clone, Copy, Debug)]
pub struct TestItem<'a> {
    pub id: &'a str,
    /// Ground truth at the clustering / similarity resolution.
    pub low: &'a VoxelGrid,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Prediction {
    Cluster(usize),
    Descriptor(DVector<f64>),
}

pub trait Predictor: Sync {
    fn predict(&self, item: &TestItem<'_>) -> Result<Prediction>;
}

/// Assigns the cluster whose centroid is nearest to the true shape.
pub struct OracleClassifier<'a> {
    pub model: &'a ClusterModel,
}

impl Predictor for OracleClassifier<'_> {
    fn predict(&self, item: &TestItem<'_>) -> Result<Prediction> {
        Ok(Prediction::Cluster(self.model.nearest_cluster(item.low)?))
    }
}

/// Embeds the true similarity row of the shape against the training set.
pub struct OracleRegressor<'a> {
    pub model: &'a EmbeddingModel,
    pub train_low: &'a [VoxelGrid],
}

impl Predictor for OracleRegressor<'_> {
    fn predict(&self, item: &TestItem<'_>) -> Result<Prediction> {
        let row = similarity_row(item.low, self.train_low)?;
        Ok(Prediction::Descriptor(embed_row(self.model, &row)?))
    }
}
