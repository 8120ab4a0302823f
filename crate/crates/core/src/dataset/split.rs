use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, read_json, write_json, Manifest, SPLIT_FILE};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for Ratios {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl Ratios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !(*r > 0.0)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split ratios ({}, {}, {}) must be positive and sum to 1",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }

    /// Sizes for a class of `n` shapes by largest-remainder rounding; equal
    /// remainders favor train, then val.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let quotas = [self.train, self.val, self.test].map(|r| r * n as f64);
        // tolerate products like 0.7 * 10 landing just under an integer
        let mut sizes = quotas.map(|q| (q + 1e-9).floor() as usize);
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - sizes[a] as f64;
            let rb = quotas[b] - sizes[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut left = n.saturating_sub(sizes.iter().sum());
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            sizes[i] += 1;
            left -= 1;
        }
        sizes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn role(&self, id: &str) -> Option<Role> {
        let has = |v: &Vec<String>| v.iter().any(|x| x == id);
        if has(&self.train) {
            Some(Role::Train)
        } else if has(&self.val) {
            Some(Role::Val)
        } else if has(&self.test) {
            Some(Role::Test)
        } else {
            None
        }
    }

    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        read_json(root.as_ref().join(SPLIT_FILE))
    }

    pub fn save(&self, root: impl AsRef<Path>) -> Result<()> {
        write_json(root.as_ref().join(SPLIT_FILE), self)
    }
}

/// Per class: shuffle with a seed derived from `(seed, class)`, then cut into
/// train/val/test by largest-remainder sizes. Output lists keep manifest order.
pub fn split_dataset(manifest: &Manifest, ratios: Ratios, seed: u64) -> Result<Split> {
    ratios.validate()?;
    let mut role = std::collections::HashMap::new();
    for class in &manifest.classes {
        let mut ids: Vec<&str> = manifest
            .shapes
            .iter()
            .filter(|s| &s.class == class)
            .map(|s| s.id.as_str())
            .collect();
        if ids.len() < 3 {
            warn!("class {class:?} has {} shapes; all assigned to train", ids.len());
            for id in ids {
                role.insert(id, Role::Train);
            }
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("split/{class}")));
        ids.shuffle(&mut rng);
        let [n_train, n_val, _] = ratios.sizes(ids.len());
        for (i, id) in ids.into_iter().enumerate() {
            let r = if i < n_train {
                Role::Train
            } else if i < n_train + n_val {
                Role::Val
            } else {
                Role::Test
            };
            role.insert(id, r);
        }
    }
    let mut split = Split::default();
    for s in &manifest.shapes {
        match role[s.id.as_str()] {
            Role::Train => split.train.push(s.id.clone()),
            Role::Val => split.val.push(s.id.clone()),
            Role::Test => split.test.push(s.id.clone()),
        }
    }
    Ok(split)
}
