//! Layers of representative relations, each the group means of the one below.

use std::fs;
use std::path::Path;

use log::info;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ModelError, Relation};
use crate::partition::storage::{self, StorageError, NO_PARENT};
use crate::partition::{column_refs, dlv_bucketed, MembershipIndex, Partition, PartitionConfig, PartitionError};

/// Layers with more values than this estimate their smallest gap from a sample.
const GAP_SAMPLE: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum HierarchyError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("layer {layer} of {size} tuples did not shrink ({groups} groups)")]
    Degenerate { layer: usize, size: usize, groups: usize },
    #[error("manifest: {0}")]
    Manifest(String),
}

impl From<std::io::Error> for HierarchyError {
    fn from(e: std::io::Error) -> Self {
        Self::Storage(e.into())
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub relation: Relation,
    /// Groups over this layer's tuples; group `g` is tuple `g` of the next
    /// layer. Absent on the top layer.
    pub partition: Option<Partition>,
    pub index: Option<MembershipIndex>,
    /// Smallest positive gap between two values of one attribute.
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub layers: Vec<Layer>,
    pub downscale: usize,
    pub alpha: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    downscale: usize,
    alpha: usize,
    layer_sizes: Vec<usize>,
}

/// Smallest `L` with `n / d_f^L <= alpha`.
pub fn layer_count(n: usize, alpha: usize, downscale: usize) -> usize {
    let mut size = n as f64;
    let mut l = 0;
    while size > alpha as f64 {
        size /= downscale as f64;
        l += 1;
    }
    l
}

/// Smallest positive difference between sorted neighbours over all
/// attributes; 1 when every attribute is constant.
pub fn smallest_gap(rel: &Relation) -> f64 {
    let n = rel.n_tuples();
    let picks: Option<Vec<usize>> = (n > GAP_SAMPLE).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        sample(&mut rng, n, GAP_SAMPLE).into_vec()
    });
    let mut best = f64::INFINITY;
    for col in rel.columns() {
        let mut v: Vec<f64> = match &picks {
            Some(p) => p.iter().map(|&i| col[i]).collect(),
            None => col.clone(),
        };
        v.sort_unstable_by(f64::total_cmp);
        for w in v.windows(2) {
            let d = w[1] - w[0];
            if d > 0.0 && d < best {
                best = d;
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        1.0
    }
}

impl Hierarchy {
    pub fn build(relation: Relation, alpha: usize, cfg: &PartitionConfig) -> Result<Self, HierarchyError> {
        cfg.validate()?;
        let depth = layer_count(relation.n_tuples(), alpha, cfg.downscale);
        let names = relation.names().to_vec();
        let mut layers = Vec::with_capacity(depth + 1);
        let mut current = relation;
        for l in 0..depth {
            let size = current.n_tuples();
            let part = dlv_bucketed(&column_refs(current.columns()), cfg)?;
            if part.n_groups() >= size {
                return Err(HierarchyError::Degenerate {
                    layer: l,
                    size,
                    groups: part.n_groups(),
                });
            }
            info!("layer {l}: {size} tuples in {} groups", part.n_groups());
            let next = Relation::new(names.clone(), part.representative_columns())?;
            let index = MembershipIndex::build(&part);
            let epsilon = smallest_gap(&current);
            layers.push(Layer {
                relation: current,
                partition: Some(part),
                index: Some(index),
                epsilon,
            });
            current = next;
        }
        let epsilon = smallest_gap(&current);
        layers.push(Layer {
            relation: current,
            partition: None,
            index: None,
            epsilon,
        });
        Ok(Self {
            layers,
            downscale: cfg.downscale,
            alpha,
        })
    }

    /// Index of the top layer.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer(&self, l: usize) -> &Layer {
        &self.layers[l]
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.relation.n_tuples()).collect()
    }

    /// Number of layer-0 tuples behind each tuple of layer `l`.
    pub fn coverage(&self, l: usize) -> Vec<usize> {
        let mut cov = vec![1; self.layers[0].relation.n_tuples()];
        for below in &self.layers[..l] {
            let p = below.partition.as_ref().expect("partition below an upper layer");
            cov = (0..p.n_groups()).map(|g| p.members_of(g).iter().map(|&i| cov[i]).sum()).collect();
        }
        cov
    }

    /// Group of layer `l + 1` holding each tuple of that layer's input, i.e.
    /// the parent of every group of layer `l`.
    fn parents(&self, l: usize) -> Vec<u64> {
        let groups = self.layers[l].partition.as_ref().map_or(0, Partition::n_groups);
        match self.layers.get(l + 1).and_then(|up| up.partition.as_ref()) {
            Some(up) => up
                .assignment(groups)
                .into_iter()
                .map(|g| if g == u32::MAX { NO_PARENT } else { u64::from(g) })
                .collect(),
            None => vec![NO_PARENT; groups],
        }
    }

    /// Directory layout: `manifest.json`, `layer_<l>.values` for every layer,
    /// and `layer_<l>.groups` plus `layer_<l>.members` below the top.
    pub fn save(&self, dir: &Path) -> Result<(), HierarchyError> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            downscale: self.downscale,
            alpha: self.alpha,
            layer_sizes: self.layer_sizes(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| HierarchyError::Manifest(e.to_string()))?;
        fs::write(dir.join("manifest.json"), text)?;
        for (l, layer) in self.layers.iter().enumerate() {
            storage::write_values(
                &dir.join(format!("layer_{l}.values")),
                layer.relation.names(),
                layer.relation.columns(),
            )?;
            if let Some(part) = &layer.partition {
                storage::write_groups(&dir.join(format!("layer_{l}.groups")), part, &self.parents(l))?;
                storage::write_members(&dir.join(format!("layer_{l}.members")), &part.members)?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, HierarchyError> {
        let text = fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| HierarchyError::Manifest(e.to_string()))?;
        let top = manifest.layer_sizes.len().saturating_sub(1);
        let mut layers = Vec::with_capacity(top + 1);
        for l in 0..=top {
            let (names, columns) = storage::read_values(&dir.join(format!("layer_{l}.values")))?;
            let relation = Relation::new(names, columns)?;
            if relation.n_tuples() != manifest.layer_sizes[l] {
                return Err(HierarchyError::Manifest(format!("layer {l} size mismatch")));
            }
            let (partition, index) = if l < top {
                let (part, _) = storage::read_partition(
                    &dir.join(format!("layer_{l}.groups")),
                    &dir.join(format!("layer_{l}.members")),
                    &column_refs(relation.columns()),
                )?;
                let index = MembershipIndex::build(&part);
                (Some(part), Some(index))
            } else {
                (None, None)
            };
            let epsilon = smallest_gap(&relation);
            layers.push(Layer {
                relation,
                partition,
                index,
                epsilon,
            });
        }
        Ok(Self {
            layers,
            downscale: manifest.downscale,
            alpha: manifest.alpha,
        })
    }
}
