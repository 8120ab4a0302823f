//! End-to-end driver: synthetic data, ground truth, baselines, evaluation and
//! report export. Every stage reads its inputs from disk so stages can be run
//! separately from the command line.
//!
//! Output layout under `RunConfig::output`:
//!
//! ```text
//! models/<method>.rbmd
//! predictions/<method>/<item_id>.vxbg
//! predictions.json
//! report.json
//! stats/*.csv, stats/summary.json
//! viz/<method>/<item_id>_{precision,recall}.ply
//! ```

mod config;
mod emit;

use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    build_cluster_model, build_similarity_matrix, fit_embedding, load_model, oracle_nn, predict_with_cluster, retrieve,
    save_model, Model, OracleClassifier, OracleRegressor, Prediction, Predictor, TestItem,
};
use crate::dataset::{
    derive_seed, generate_dataset, materialize, sha256_hex, split_dataset, GridSet, Index, IndexEntry, Manifest, Role,
    Split, INDEX_FILE, MANIFEST_FILE, SPLIT_FILE,
};
use crate::metrics::{distance_colors, iou, PairDistances};
use crate::ply::{save_cloud, PlyFormat, PointAttribute};
use crate::shape::{marching_cubes, sample_surface, PointCloud, VoxelGrid};
use crate::stats::{Entry, EvalReport, ReportMetadata, Skip, SweepCurve};
use crate::{Error, Result};

pub use config::{metric_range, Method, RunConfig, METRICS};
pub use emit::{emit_correlation, emit_cutoffs, emit_ks, emit_reports, emit_sweep, emit_tables};

pub const PREDICTIONS_FILE: &str = "predictions.json";

/// Manifest, split and the two grid sets a run works on.
pub struct DatasetView {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub split: Split,
    pub high: GridSet,
    pub low: GridSet,
}

impl DatasetView {
    pub fn open(config: &RunConfig) -> Result<Self> {
        let root = config.dataset.clone();
        let manifest = Manifest::load(&root)?;
        let split = Split::load(&root)?;
        let index = Index::load(&root)?;
        let find = |res: usize| {
            index.set(res, config.frame).cloned().ok_or_else(|| {
                Error::invalid(format!(
                    "{} has no {res}³ {} grids; run materialize first",
                    root.display(),
                    config.frame
                ))
            })
        };
        let high = find(config.resolution)?;
        let low = find(config.low_resolution)?;
        if high.entries.len() != low.entries.len() {
            return Err(Error::invalid(
                "high- and low-resolution grid sets list different items",
            ));
        }
        Ok(Self {
            root,
            manifest,
            split,
            high,
            low,
        })
    }

    /// Grid items whose shape has the given role, in index order.
    pub fn items(&self, role: Role) -> Vec<&IndexEntry> {
        self.high
            .entries
            .iter()
            .filter(|e| self.split.role(&e.shape_id) == Some(role))
            .collect()
    }

    fn load_grids(&self, set: &GridSet, items: &[&IndexEntry]) -> Result<Vec<VoxelGrid>> {
        items
            .par_iter()
            .map(|e| set.load_grid(&self.root, &e.item_id))
            .collect()
    }

    pub fn load_high(&self, items: &[&IndexEntry]) -> Result<Vec<VoxelGrid>> {
        self.load_grids(&self.high, items)
    }

    pub fn load_low(&self, items: &[&IndexEntry]) -> Result<Vec<VoxelGrid>> {
        self.load_grids(&self.low, items)
    }

    /// Hash of the manifest, split and index files.
    pub fn hash(&self) -> Result<String> {
        let mut bytes = Vec::new();
        for name in [MANIFEST_FILE, SPLIT_FILE, INDEX_FILE] {
            let path = self.root.join(name);
            bytes.extend(std::fs::read(&path).map_err(|e| Error::io(&path, e))?);
        }
        Ok(sha256_hex(&bytes))
    }
}

pub fn run_gen(config: &RunConfig) -> Result<(Manifest, Split)> {
    config.validate()?;
    let (m, s) = generate_dataset(&config.dataset, &config.gen_config())?;
    info!(
        "generated {} shapes in {} classes ({} train / {} val / {} test)",
        m.shapes.len(),
        m.classes.len(),
        s.train.len(),
        s.val.len(),
        s.test.len()
    );
    Ok((m, s))
}

/// Re-splits an existing dataset. Synthetic held-out shapes were generated for
/// the split made at generation time; a different seed or ratios breaks that
/// link, which is reported but allowed.
pub fn run_split(config: &RunConfig) -> Result<Split> {
    config.validate()?;
    let manifest = Manifest::load(&config.dataset)?;
    if let Some(g) = &manifest.generator {
        if g.seed != config.seed || g.ratios != config.ratios {
            warn!("split differs from the one used at generation; held-out shapes no longer match their roles");
        }
    }
    let split = split_dataset(&manifest, config.ratios, config.seed)?;
    split.save(&config.dataset)?;
    Ok(split)
}

pub fn run_materialize(config: &RunConfig) -> Result<Index> {
    config.validate()?;
    let manifest = Manifest::load(&config.dataset)?;
    let index = materialize(&config.dataset, &manifest, &config.materialize_params())?;
    info!("materialized {} grid sets", index.sets.len());
    Ok(index)
}

/// Fits a baseline on the training items and stores it under `models/`.
/// The oracle needs no model.
pub fn run_fit(config: &RunConfig, method: Method) -> Result<Option<PathBuf>> {
    config.validate()?;
    if method == Method::OracleNn {
        return Ok(None);
    }
    let view = DatasetView::open(config)?;
    let train = view.items(Role::Train);
    if train.is_empty() {
        return Err(Error::invalid("no training items"));
    }
    let low = view.load_low(&train)?;
    let model = match method {
        Method::Cluster => {
            let high = view.load_high(&train)?;
            Model::Cluster(build_cluster_model(&high, &low, &config.cluster_params())?)
        }
        Method::Retrieval => {
            let sim = build_similarity_matrix(&low)?;
            let ids = train.iter().map(|e| e.item_id.clone()).collect();
            Model::Embedding(fit_embedding(&sim, config.dim, ids)?)
        }
        Method::OracleNn => unreachable!(),
    };
    let path = config.model_path(method);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_model(&path, &model)?;
    info!("{method}: model written to {}", path.display());
    Ok(Some(path))
}

/// Where a prediction came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub item_id: String,
    pub method: Method,
    /// Cluster index, or the retrieved training item.
    pub source: String,
    pub occupied: usize,
}

fn load_kind(config: &RunConfig, method: Method) -> Result<Model> {
    let path = config.model_path(method);
    if !path.exists() {
        return Err(Error::invalid(format!(
            "{} not found; run `fit {method}` first",
            path.display()
        )));
    }
    let model = load_model(&path)?;
    let expected = match method {
        Method::Cluster => "cluster",
        _ => "embedding",
    };
    if model.kind() != expected {
        return Err(Error::format(
            "RBMD",
            format!("{} holds a {} model", path.display(), model.kind()),
        ));
    }
    Ok(model)
}

/// Predicts a high-resolution grid for every test item with every configured
/// method. Predictors see only the ground truth (oracle classifier / regressor).
pub fn run_predict(config: &RunConfig) -> Result<Vec<PredictionRecord>> {
    config.validate()?;
    let view = DatasetView::open(config)?;
    let train = view.items(Role::Train);
    let test = view.items(Role::Test);
    let train_high = view.load_high(&train)?;
    let test_low = view.load_low(&test)?;
    let mut records = Vec::new();

    for &method in &config.methods {
        let out: Vec<(VoxelGrid, String)> = match method {
            Method::Cluster => {
                let Model::Cluster(model) = load_kind(config, method)? else {
                    unreachable!()
                };
                if model.low_resolution != config.low_resolution {
                    return Err(Error::ResolutionMismatch(config.low_resolution, model.low_resolution));
                }
                let predictor = OracleClassifier { model: &model };
                test.par_iter()
                    .zip(&test_low)
                    .map(|(e, low)| match predictor.predict(&TestItem { id: &e.item_id, low })? {
                        Prediction::Cluster(j) => Ok((predict_with_cluster(&model, j)?, j.to_string())),
                        Prediction::Descriptor(_) => Err(Error::Invariant("classifier returned a descriptor".into())),
                    })
                    .collect::<Result<_>>()?
            }
            Method::Retrieval => {
                let Model::Embedding(model) = load_kind(config, method)? else {
                    unreachable!()
                };
                let ids: Vec<&str> = train.iter().map(|e| e.item_id.as_str()).collect();
                if model.train_ids != ids {
                    return Err(Error::invalid("retrieval model was fit on a different training set"));
                }
                let train_low = view.load_low(&train)?;
                let predictor = OracleRegressor {
                    model: &model,
                    train_low: &train_low,
                };
                test.par_iter()
                    .zip(&test_low)
                    .map(|(e, low)| match predictor.predict(&TestItem { id: &e.item_id, low })? {
                        Prediction::Descriptor(d) => {
                            let i = retrieve(&model, &d, config.similarity)?;
                            Ok((train_high[i].clone(), ids[i].to_owned()))
                        }
                        Prediction::Cluster(_) => Err(Error::Invariant("regressor returned a cluster".into())),
                    })
                    .collect::<Result<_>>()?
            }
            Method::OracleNn => {
                let test_high = view.load_high(&test)?;
                test_high
                    .par_iter()
                    .map(|g| {
                        let (i, _) = oracle_nn(g, &train_high)?;
                        Ok((train_high[i].clone(), train[i].item_id.clone()))
                    })
                    .collect::<Result<_>>()?
            }
        };
        for (e, (grid, source)) in test.iter().zip(out) {
            save_grid(&grid, &config.prediction_path(method, &e.item_id))?;
            records.push(PredictionRecord {
                item_id: e.item_id.clone(),
                method,
                source,
                occupied: grid.count(),
            });
        }
        info!("{method}: {} predictions", test.len());
    }
    crate::dataset::write_json(config.output.join(PREDICTIONS_FILE), &records)?;
    Ok(records)
}

fn save_grid(grid: &VoxelGrid, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    grid.save(path)
}

/// Ground truth and every prediction of an item are sampled with the same
/// seed, so a prediction identical to the ground truth gets identical points
/// (Chamfer 0, F-score 100).
fn sample_seed(seed: u64, item_id: &str) -> u64 {
    derive_seed(seed, &format!("sample/{item_id}"))
}

/// Surface samples of a grid's marching-cubes mesh; `None` for an empty grid.
fn surface_cloud(grid: &VoxelGrid, n: usize, seed: u64) -> Result<Option<PointCloud>> {
    if grid.is_empty() {
        return Ok(None);
    }
    sample_surface(&marching_cubes(grid), n, seed).map(Some)
}

enum Outcome {
    Scored {
        entries: Vec<(&'static str, f64)>,
        sweep: Vec<f64>,
        chamfer_skip: Option<String>,
    },
    Skipped(String),
}

fn score(config: &RunConfig, gt: &VoxelGrid, gt_cloud: &PointCloud, recon: &VoxelGrid, seed: u64) -> Result<Outcome> {
    let m = &config.metrics;
    let iou_value = iou(gt, recon)?;
    let recon_cloud = surface_cloud(recon, m.sample_count, seed)?.unwrap_or_default();
    let dist = PairDistances::compute(gt_cloud, &recon_cloud)?;
    let prf = dist.prf(m.d)?;
    let sweep = config
        .sweep
        .iter()
        .map(|&d| dist.prf(d).map(|p| p.fscore))
        .collect::<Result<_>>()?;
    let mut entries = vec![("iou", iou_value)];
    let mut chamfer_skip = None;
    if prf.empty_reconstruction {
        chamfer_skip = Some("empty reconstruction".to_owned());
    } else {
        entries.push(("chamfer", dist.chamfer(m.cd_clamp)?));
    }
    entries.extend([
        ("precision", prf.precision),
        ("recall", prf.recall),
        ("fscore", prf.fscore),
    ]);
    Ok(Outcome::Scored {
        entries,
        sweep,
        chamfer_skip,
    })
}

/// Scores every stored prediction against the ground truth and writes
/// `report.json`. A missing prediction file becomes a skip record.
pub fn evaluate_run(config: &RunConfig) -> Result<EvalReport> {
    config.validate()?;
    let view = DatasetView::open(config)?;
    let test = view.items(Role::Test);
    if test.is_empty() {
        return Err(Error::invalid("no test items"));
    }
    let n = config.metrics.sample_count;

    let per_item: Vec<Vec<(Method, Outcome)>> = test
        .par_iter()
        .map(|e| {
            let gt = view.high.load_grid(&view.root, &e.item_id)?;
            let gt_cloud = surface_cloud(&gt, n, sample_seed(config.seed, &e.item_id))?
                .ok_or_else(|| Error::invalid(format!("ground truth of {} is empty", e.item_id)))?;
            config
                .methods
                .iter()
                .map(|&method| {
                    let path = config.prediction_path(method, &e.item_id);
                    if !path.exists() {
                        return Ok((
                            method,
                            Outcome::Skipped(format!("missing prediction {}", path.display())),
                        ));
                    }
                    let recon = VoxelGrid::load(&path)?;
                    if recon.resolution() != gt.resolution() {
                        return Err(Error::ResolutionMismatch(gt.resolution(), recon.resolution()));
                    }
                    let seed = sample_seed(config.seed, &e.item_id);
                    Ok((method, score(config, &gt, &gt_cloud, &recon, seed)?))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut report = EvalReport::new(ReportMetadata {
        config: config.snapshot(),
        dataset_hash: view.hash()?,
    });
    report.set_sweep_thresholds(config.sweep.clone());
    for (e, outcomes) in test.iter().zip(per_item) {
        for (method, outcome) in outcomes {
            let skip = |metric: Option<String>, reason: String| Skip {
                shape_id: e.item_id.clone(),
                class: e.class.clone(),
                method: method.to_string(),
                metric,
                reason,
            };
            match outcome {
                Outcome::Skipped(reason) => {
                    warn!("{} / {method}: {reason}", e.item_id);
                    report.push_skip(skip(None, reason));
                }
                Outcome::Scored {
                    entries,
                    sweep,
                    chamfer_skip,
                } => {
                    for (metric, value) in entries {
                        report.push(Entry {
                            shape_id: e.item_id.clone(),
                            class: e.class.clone(),
                            method: method.to_string(),
                            metric: metric.to_owned(),
                            value,
                        })?;
                    }
                    if let Some(reason) = chamfer_skip {
                        report.push_skip(skip(Some("chamfer".into()), reason));
                    }
                    report.push_sweep(SweepCurve {
                        shape_id: e.item_id.clone(),
                        class: e.class.clone(),
                        method: method.to_string(),
                        fscores: sweep,
                    })?;
                }
            }
        }
    }
    check_coverage(&report, &test, &config.methods)?;

    std::fs::create_dir_all(&config.output).map_err(|e| Error::io(&config.output, e))?;
    report.save(config.report_path())?;
    info!(
        "report: {} entries, {} skips over {} test items",
        report.entries().len(),
        report.skips().len(),
        test.len()
    );
    Ok(report)
}

/// Every test item appears once per method, as scored values or as a skip.
fn check_coverage(report: &EvalReport, test: &[&IndexEntry], methods: &[Method]) -> Result<()> {
    use std::collections::HashMap;
    let mut count: HashMap<(&str, &str), usize> = HashMap::new();
    let mut scored = std::collections::HashSet::new();
    for e in report.entries() {
        scored.insert((e.shape_id.as_str(), e.method.as_str()));
    }
    for key in &scored {
        *count.entry(*key).or_default() += 1;
    }
    for s in report.skips().iter().filter(|s| s.metric.is_none()) {
        *count.entry((s.shape_id.as_str(), s.method.as_str())).or_default() += 1;
    }
    for e in test {
        for m in methods {
            let c = count.get(&(e.item_id.as_str(), m.name())).copied().unwrap_or(0);
            if c != 1 {
                return Err(Error::Invariant(format!(
                    "{} / {m} appears {c} times in the report",
                    e.item_id
                )));
            }
        }
    }
    if count.len() != test.len() * methods.len() {
        return Err(Error::Invariant("report holds items outside the test set".into()));
    }
    Ok(())
}

/// Precision and recall visualizations for one prediction: reconstruction
/// points colored by distance to the ground truth, and ground-truth points
/// colored by distance to the reconstruction, both over `[0, 2d]`.
pub fn viz_pr(config: &RunConfig, method: Method, item_id: &str) -> Result<(PathBuf, PathBuf)> {
    config.validate()?;
    let view = DatasetView::open(config)?;
    let entry = view
        .high
        .entry(item_id)
        .ok_or_else(|| Error::invalid(format!("unknown item {item_id:?}")))?;
    let gt = view.high.load_grid(&view.root, &entry.item_id)?;
    let recon = VoxelGrid::load(config.prediction_path(method, item_id))?;
    let n = config.metrics.sample_count;
    let gt_cloud = surface_cloud(&gt, n, sample_seed(config.seed, item_id))?
        .ok_or_else(|| Error::invalid(format!("ground truth of {item_id} is empty")))?;
    let recon_cloud = surface_cloud(&recon, n, sample_seed(config.seed, item_id))?
        .ok_or_else(|| Error::invalid(format!("{method} prediction for {item_id} is empty")))?;
    let dist = PairDistances::compute(&gt_cloud, &recon_cloud)?;
    let d = config.metrics.d;
    let dir = config.output.join("viz").join(method.name());
    let precision = dir.join(format!("{item_id}_precision.ply"));
    let recall = dir.join(format!("{item_id}_recall.ply"));
    write_colored(&precision, &recon_cloud, &dist.recon_to_gt, d)?;
    write_colored(&recall, &gt_cloud, &dist.gt_to_recon, d)?;
    Ok((precision, recall))
}

fn write_colored(path: &Path, cloud: &PointCloud, dist: &[f64], d: f64) -> Result<()> {
    let colors = distance_colors(dist, d);
    save_cloud(
        path,
        cloud,
        PointAttribute::DistanceColor(dist, &colors),
        PlyFormat::BinaryLittleEndian,
    )
}

/// gen → materialize → fit → predict → eval → stats.
pub fn run_all(config: &RunConfig) -> Result<EvalReport> {
    run_gen(config)?;
    run_materialize(config)?;
    for &m in &config.methods {
        run_fit(config, m)?;
    }
    run_predict(config)?;
    let report = evaluate_run(config)?;
    emit_reports(config, &report)?;
    Ok(report)
}
