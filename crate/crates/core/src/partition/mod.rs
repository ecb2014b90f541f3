//! Variance-bounded partitioning of a relation into axis-aligned groups.

pub mod dlv;
pub mod dlv1d;
pub mod index;
pub mod kdtree;
pub mod scale;
pub mod storage;

pub use dlv::{dlv_bucketed, dlv_partition};
pub use dlv1d::{cut_sorted, one_d_dlv, ratio_score, ZeroVariance};
pub use index::MembershipIndex;
pub use kdtree::{kdtree_partition, KdTreeConfig};
pub use scale::{get_scale_factors, ScaleSearch, DEFAULT_SCALE};

use crate::stats::mean_variance_indexed;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PartitionError {
    #[error("downscale factor must be at least 2, got {0}")]
    Downscale(usize),
    #[error("bucket capacity {capacity} is below the downscale factor {downscale}")]
    Capacity { capacity: usize, downscale: usize },
    #[error("expected {expected} scale factors, got {got}")]
    ScaleLength { expected: usize, got: usize },
}

/// How the per-attribute scale factors are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Scale {
    /// Estimated from a sample of the relation.
    Auto,
    Uniform(f64),
    PerAttribute(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionConfig {
    pub downscale: usize,
    pub scale: Scale,
    /// Largest bucket processed at once; `None` keeps everything in one.
    pub bucket_capacity: Option<usize>,
    pub search: ScaleSearch,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            downscale: 100,
            scale: Scale::Auto,
            bucket_capacity: None,
            search: ScaleSearch::default(),
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<(), PartitionError> {
        if self.downscale < 2 {
            return Err(PartitionError::Downscale(self.downscale));
        }
        if let Some(r) = self.bucket_capacity {
            if r < self.downscale {
                return Err(PartitionError::Capacity {
                    capacity: r,
                    downscale: self.downscale,
                });
            }
        }
        Ok(())
    }

    pub fn scale_factors(&self, columns: &[&[f64]]) -> Result<Vec<f64>, PartitionError> {
        match &self.scale {
            Scale::Auto => Ok(get_scale_factors(columns, self.downscale, &self.search)),
            Scale::Uniform(c) => Ok(vec![*c; columns.len()]),
            Scale::PerAttribute(c) if c.len() == columns.len() => Ok(c.clone()),
            Scale::PerAttribute(c) => Err(PartitionError::ScaleLength {
                expected: columns.len(),
                got: c.len(),
            }),
        }
    }
}

/// A half-open box `[lo_j, hi_j)` per attribute with summary statistics of
/// the tuples inside. Members live in [`Partition::members`] at
/// `offset..offset + len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub rep: Vec<f64>,
    pub variance: Vec<f64>,
    pub offset: usize,
    pub len: usize,
}

impl Group {
    pub fn contains(&self, t: &[f64]) -> bool {
        t.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&a, &b))| a <= v && v < b)
    }

    pub fn member_count(&self) -> usize {
        self.len
    }

    pub fn max_variance(&self) -> f64 {
        self.variance.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub n_attrs: usize,
    pub groups: Vec<Group>,
    /// Tuple indices, contiguous per group.
    pub members: Vec<usize>,
}

impl Partition {
    /// Build from member lists and boxes, computing representatives and
    /// variances from `columns`.
    pub fn from_parts(columns: &[&[f64]], parts: Vec<(Vec<usize>, Vec<f64>, Vec<f64>)>) -> Self {
        let mut members = Vec::with_capacity(parts.iter().map(|p| p.0.len()).sum());
        let mut groups = Vec::with_capacity(parts.len());
        for (ids, lo, hi) in parts {
            let (rep, variance) = summarize(columns, &ids);
            groups.push(Group {
                lo,
                hi,
                rep,
                variance,
                offset: members.len(),
                len: ids.len(),
            });
            members.extend(ids);
        }
        Self {
            n_attrs: columns.len(),
            groups,
            members,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_tuples(&self) -> usize {
        self.members.len()
    }

    pub fn members_of(&self, g: usize) -> &[usize] {
        let grp = &self.groups[g];
        &self.members[grp.offset..grp.offset + grp.len]
    }

    /// Group id of every tuple `0..n`; `u32::MAX` for tuples in no group.
    pub fn assignment(&self, n: usize) -> Vec<u32> {
        let mut out = vec![u32::MAX; n];
        for (g, grp) in self.groups.iter().enumerate() {
            for &i in &self.members[grp.offset..grp.offset + grp.len] {
                out[i] = g as u32;
            }
        }
        out
    }

    /// Representatives as attribute-major columns.
    pub fn representative_columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_attrs)
            .map(|j| self.groups.iter().map(|g| g.rep[j]).collect())
            .collect()
    }
}

pub(crate) fn summarize(columns: &[&[f64]], ids: &[usize]) -> (Vec<f64>, Vec<f64>) {
    columns.iter().map(|c| mean_variance_indexed(c, ids)).unzip()
}

pub fn column_refs(columns: &[Vec<f64>]) -> Vec<&[f64]> {
    columns.iter().map(Vec::as_slice).collect()
}
