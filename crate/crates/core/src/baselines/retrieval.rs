//! Retrieval baseline: rows of the pairwise IoU similarity matrix compressed
//! by PCA into descriptors, plus the IoU oracle nearest neighbor.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::iou;
use crate::shape::VoxelGrid;
use crate::{Error, Result};

/// Training shape with the highest IoU against `test`; lowest index on ties.
pub fn oracle_nn(test: &VoxelGrid, train: &[VoxelGrid]) -> Result<(usize, f64)> {
    if train.is_empty() {
        return Err(Error::invalid("oracle search over an empty training set"));
    }
    let scores = train
        .par_iter()
        .map(|t| super::cluster::iou_or_one(test, t))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = (0, scores[0]);
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > best.1 {
            best = (i, s);
        }
    }
    Ok(best)
}

/// `S[i][j] = iou(v_i, v_j)`, computed over the upper triangle in parallel.
pub fn build_similarity_matrix(grids: &[VoxelGrid]) -> Result<DMatrix<f64>> {
    let n = grids.len();
    if n < 2 {
        return Err(Error::invalid("similarity matrix needs at least 2 shapes"));
    }
    if let Some(i) = grids.iter().position(|g| g.is_empty()) {
        return Err(Error::invalid(format!("shape {i} has an empty grid")));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| iou(&grids[i], &grids[j]))
        .collect::<Result<Vec<f64>>>()?;
    let mut s = DMatrix::identity(n, n);
    for (&(i, j), v) in pairs.iter().zip(values) {
        s[(i, j)] = v;
        s[(j, i)] = v;
    }
    Ok(s)
}

/// IoU of one query grid against every training grid.
pub fn similarity_row(query: &VoxelGrid, train: &[VoxelGrid]) -> Result<Vec<f64>> {
    train.par_iter().map(|t| iou(query, t)).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    #[default]
    Cosine,
    Euclidean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    pub train_ids: Vec<String>,
    pub mean_row: DVector<f64>,
    /// One principal direction per row, strongest first.
    pub basis: DMatrix<f64>,
    /// One descriptor per row, in training order.
    pub descriptors: DMatrix<f64>,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn train_count(&self) -> usize {
        self.mean_row.len()
    }

    pub fn descriptor(&self, i: usize) -> DVector<f64> {
        self.descriptors.row(i).transpose()
    }
}

/// PCA of the similarity rows. Directions come from the eigendecomposition of
/// the row covariance, sorted by decreasing eigenvalue, each signed so its
/// largest-magnitude component is positive.
pub fn fit_embedding(similarity: &DMatrix<f64>, dim: usize, train_ids: Vec<String>) -> Result<EmbeddingModel> {
    let n = similarity.nrows();
    if similarity.ncols() != n || n == 0 {
        return Err(Error::invalid("similarity matrix must be square and nonempty"));
    }
    if dim == 0 || dim > n {
        return Err(Error::invalid(format!("descriptor dimension {dim} outside 1..={n}")));
    }
    if train_ids.len() != n {
        return Err(Error::invalid(format!("{} ids for {n} rows", train_ids.len())));
    }
    let mean_row: DVector<f64> = similarity.row_mean().transpose();
    let mut centered = similarity.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean_row.transpose();
    }
    let covariance = centered.transpose() * &centered / n as f64;
    let eigen = SymmetricEigen::new(covariance);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));
    let mut basis = DMatrix::zeros(dim, n);
    for (r, &c) in order.iter().take(dim).enumerate() {
        let mut v = eigen.eigenvectors.column(c).into_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        basis.set_row(r, &v.transpose());
    }
    let mut model = EmbeddingModel {
        train_ids,
        mean_row,
        basis,
        descriptors: DMatrix::zeros(n, dim),
    };
    // same arithmetic as embed_row so a training row maps to its descriptor exactly
    for i in 0..n {
        let row: Vec<f64> = similarity.row(i).iter().copied().collect();
        let d = embed_row(&model, &row)?;
        model.descriptors.set_row(i, &d.transpose());
    }
    Ok(model)
}

/// Projects a similarity row onto the model basis. Applied to the true row of
/// a shape this is a perfect descriptor regressor.
pub fn embed_row(model: &EmbeddingModel, row: &[f64]) -> Result<DVector<f64>> {
    if row.len() != model.train_count() {
        return Err(Error::invalid(format!(
            "similarity row of length {} for {} training shapes",
            row.len(),
            model.train_count()
        )));
    }
    let centered = DVector::from_column_slice(row) - &model.mean_row;
    Ok(&model.basis * centered)
}

/// Training index whose descriptor best matches `query`; lowest index on ties.
pub fn retrieve(model: &EmbeddingModel, query: &DVector<f64>, mode: SimilarityMode) -> Result<usize> {
    if query.len() != model.dim() {
        return Err(Error::invalid(format!(
            "query of dimension {} for a {}-dimensional model",
            query.len(),
            model.dim()
        )));
    }
    let mut best = (0, f64::NEG_INFINITY);
    match mode {
        SimilarityMode::Cosine => {
            let qn = query.norm();
            if qn == 0.0 {
                return Err(Error::invalid("zero-norm query descriptor"));
            }
            for (i, row) in model.descriptors.row_iter().enumerate() {
                let dn = row.norm();
                if dn == 0.0 {
                    return Err(Error::invalid(format!("training descriptor {i} has zero norm")));
                }
                let cos = row.transpose().dot(query) / (qn * dn);
                if cos > best.1 {
                    best = (i, cos);
                }
            }
        }
        SimilarityMode::Euclidean => {
            for (i, row) in model.descriptors.row_iter().enumerate() {
                let score = -(row.transpose() - query).norm_squared();
                if score > best.1 {
                    best = (i, score);
                }
            }
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grids(n: usize, res: usize, seed: u64) -> Vec<VoxelGrid> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let p = rng.random_range(0.1..0.6);
                VoxelGrid::from_fn(res, |_, _, _| rng.random_bool(p)).unwrap()
            })
            .collect()
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn oracle_examples() {
        let grids = random_grids(30, 6, 1);
        assert_eq!(oracle_nn(&grids[7], &grids).unwrap(), (7, 1.0));
        let a = VoxelGrid::from_fn(4, |x, _, _| x < 2).unwrap();
        let b = VoxelGrid::from_fn(4, |x, _, _| x >= 2).unwrap();
        assert_eq!(oracle_nn(&a, &[b.clone(), a.clone()]).unwrap(), (1, 1.0));
        assert_eq!(oracle_nn(&a, &[a.clone(), a.clone()]).unwrap().0, 0);
        assert!(oracle_nn(&a, &[]).is_err());
    }

    #[test]
    fn oracle_matches_linear_scan() {
        let train = random_grids(200, 5, 2);
        for q in random_grids(10, 5, 3) {
            let mut best = (0, -1.0);
            for (i, t) in train.iter().enumerate() {
                let (inter, union) = q.overlap_counts(t).unwrap();
                let v = inter as f64 / union as f64;
                if v > best.1 {
                    best = (i, v);
                }
            }
            assert_eq!(oracle_nn(&q, &train).unwrap(), best);
        }
    }

    #[test]
    fn similarity_examples() {
        let a = VoxelGrid::from_fn(4, |x, _, _| x < 2).unwrap();
        let b = VoxelGrid::from_fn(4, |x, _, _| x >= 2).unwrap();
        assert_eq!(
            build_similarity_matrix(&[a.clone(), a.clone()]).unwrap(),
            DMatrix::from_element(2, 2, 1.0)
        );
        assert_eq!(
            build_similarity_matrix(&[a.clone(), b]).unwrap(),
            DMatrix::identity(2, 2)
        );
        assert!(build_similarity_matrix(std::slice::from_ref(&a)).is_err());
        assert!(build_similarity_matrix(&[a, VoxelGrid::new(4).unwrap()]).is_err());

        let grids = random_grids(20, 5, 4);
        let s = build_similarity_matrix(&grids).unwrap();
        assert_eq!(s, s.transpose());
        for i in 0..20 {
            assert_eq!(
                s.row(i).iter().copied().collect::<Vec<_>>(),
                similarity_row(&grids[i], &grids).unwrap()
            );
        }
    }

    #[test]
    fn full_rank_is_isometry() {
        let grids = random_grids(25, 5, 5);
        let s = build_similarity_matrix(&grids).unwrap();
        let m = fit_embedding(&s, 25, ids(25)).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                let dd = (m.descriptor(i) - m.descriptor(j)).norm();
                let dr = (s.row(i) - s.row(j)).norm();
                assert!((dd - dr).abs() < 1e-6);
            }
        }
        // orthonormal basis
        let gram = &m.basis * m.basis.transpose();
        assert!((gram - DMatrix::identity(25, 25)).amax() < 1e-9);
    }

    #[test]
    fn rank_one_ordering() {
        let u = [0.3, 0.9, 0.5, 0.7, 0.1, 0.6];
        let s = DMatrix::from_fn(6, 6, |i, j| u[i] * u[j]);
        let m = fit_embedding(&s, 1, ids(6)).unwrap();
        let mut by_u: Vec<usize> = (0..6).collect();
        by_u.sort_by(|&a, &b| u[a].total_cmp(&u[b]));
        let mut by_d: Vec<usize> = (0..6).collect();
        by_d.sort_by(|&a, &b| m.descriptors[(a, 0)].total_cmp(&m.descriptors[(b, 0)]));
        assert_eq!(by_u, by_d);
    }

    #[test]
    fn embed_row_consistency() {
        let grids = random_grids(15, 5, 6);
        let s = build_similarity_matrix(&grids).unwrap();
        let m = fit_embedding(&s, 6, ids(15)).unwrap();
        for i in 0..15 {
            let row: Vec<f64> = s.row(i).iter().copied().collect();
            assert_eq!(embed_row(&m, &row).unwrap(), m.descriptor(i));
        }
        let mean: Vec<f64> = m.mean_row.iter().copied().collect();
        assert_eq!(embed_row(&m, &mean).unwrap(), DVector::zeros(6));

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let noise: Vec<f64> = (0..15).map(|_| rng.random_range(-0.01..0.01)).collect();
        let noisy: Vec<f64> = s.row(3).iter().zip(&noise).map(|(a, b)| a + b).collect();
        let eps = noise.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((embed_row(&m, &noisy).unwrap() - m.descriptor(3)).norm() <= eps + 1e-12);
        assert!(embed_row(&m, &[0.0; 3]).is_err());
        assert!(fit_embedding(&s, 16, ids(15)).is_err());
    }

    #[test]
    fn retrieve_examples() {
        let grids = random_grids(15, 5, 7);
        let s = build_similarity_matrix(&grids).unwrap();
        let m = fit_embedding(&s, 15, ids(15)).unwrap();
        for i in 0..15 {
            assert_eq!(retrieve(&m, &m.descriptor(i), SimilarityMode::Euclidean).unwrap(), i);
        }
        assert!(retrieve(&m, &DVector::zeros(15), SimilarityMode::Cosine).is_err());

        let ortho = EmbeddingModel {
            train_ids: ids(2),
            mean_row: DVector::zeros(2),
            basis: DMatrix::identity(2, 2),
            descriptors: DMatrix::identity(2, 2),
        };
        let q = DVector::from_vec(vec![2.0, 0.0]);
        assert_eq!(retrieve(&ortho, &q, SimilarityMode::Cosine).unwrap(), 0);
    }

    #[test]
    fn euclidean_full_rank_matches_nearest_row() {
        let train = random_grids(20, 5, 8);
        let s = build_similarity_matrix(&train).unwrap();
        let m = fit_embedding(&s, 20, ids(20)).unwrap();
        for q in random_grids(10, 5, 9) {
            let row = similarity_row(&q, &train).unwrap();
            let got = retrieve(&m, &embed_row(&m, &row).unwrap(), SimilarityMode::Euclidean).unwrap();
            let r = DVector::from_vec(row);
            let mut best = (0, f64::INFINITY);
            for i in 0..20 {
                let d = (s.row(i).transpose() - &r).norm_squared();
                if d < best.1 {
                    best = (i, d);
                }
            }
            assert_eq!(got, best.0);
        }
    }
}
