use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{split_dataset, Ratios, Role};
use super::{derive_seed, Manifest, ManifestShape};
use crate::ply::{save_mesh, PlyFormat};
use crate::shape::{generate_synthetic, Holdout, Recipe, ShapeSpec};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Number of classes, one recipe each (at most 8).
    pub classes: usize,
    pub shapes_per_class: usize,
    pub jitter: f64,
    /// How closely held-out shapes copy a training shape: 1 is an exact copy,
    /// 0 draws them from a parameter range disjoint from training.
    pub contamination: f64,
    pub seed: u64,
    pub ratios: Ratios,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            classes: 8,
            shapes_per_class: 40,
            jitter: 0.4,
            contamination: 0.5,
            seed: 0,
            ratios: Ratios::default(),
        }
    }
}

/// Writes a synthetic dataset (meshes, manifest and split) under `root`.
///
/// Roles come from `split_dataset(manifest, ratios, seed)`, so re-running the
/// split stage with the same seed and ratios reproduces them. Validation and
/// test shapes are held out: each blends a randomly chosen training shape of
/// its class with a draw from the far parameter range.
pub fn generate_dataset(root: impl AsRef<Path>, config: &GenConfig) -> Result<(Manifest, super::Split)> {
    let root = root.as_ref();
    if config.classes == 0 || config.classes > Recipe::ALL.len() {
        return Err(Error::invalid(format!("classes must be in 1..={}", Recipe::ALL.len())));
    }
    if config.shapes_per_class == 0 {
        return Err(Error::invalid("shapes_per_class must be at least 1"));
    }
    let recipes = &Recipe::ALL[..config.classes];
    let mut manifest = Manifest {
        seed: config.seed,
        classes: recipes.iter().map(|r| r.to_string()).collect(),
        shapes: Vec::new(),
        generator: Some(config.clone()),
    };
    for (recipe, class) in recipes.iter().zip(&manifest.classes) {
        for i in 0..config.shapes_per_class {
            let id = format!("{class}_{i:03}");
            manifest.shapes.push(ManifestShape {
                mesh: format!("meshes/{id}.ply"),
                spec: Some(ShapeSpec {
                    class_id: class.clone(),
                    recipe: *recipe,
                    jitter: config.jitter,
                    seed: derive_seed(config.seed, &id),
                    holdout: None,
                }),
                class: class.clone(),
                id,
            });
        }
    }
    let split = split_dataset(&manifest, config.ratios, config.seed)?;

    for class in &manifest.classes {
        let train_seeds: Vec<u64> = manifest
            .shapes
            .iter()
            .filter(|s| &s.class == class && split.role(&s.id) == Some(Role::Train))
            .map(|s| s.spec.as_ref().unwrap().seed)
            .collect();
        if train_seeds.is_empty() {
            continue;
        }
        for shape in manifest.shapes.iter_mut().filter(|s| &s.class == class) {
            if split.role(&shape.id) == Some(Role::Train) {
                continue;
            }
            let pick = derive_seed(config.seed, &format!("partner/{}", shape.id)) as usize % train_seeds.len();
            shape.spec.as_mut().unwrap().holdout = Some(Holdout {
                partner_seed: train_seeds[pick],
                contamination: config.contamination,
            });
        }
    }
    for s in &manifest.shapes {
        s.spec.as_ref().unwrap().validate()?;
    }

    std::fs::create_dir_all(root.join("meshes")).map_err(|e| Error::io(root.join("meshes"), e))?;
    manifest.shapes.par_iter().try_for_each(|s| {
        let mesh = generate_synthetic(s.spec.as_ref().unwrap())?;
        save_mesh(root.join(&s.mesh), &mesh, PlyFormat::BinaryLittleEndian)
    })?;
    manifest.save(root)?;
    split.save(root)?;
    Ok((manifest, split))
}
