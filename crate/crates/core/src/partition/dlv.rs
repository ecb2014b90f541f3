//! Multi-attribute divisive partitioning driven by a max-variance queue, and
//! its bucketed form for relations that do not fit in one pass.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use log::{debug, warn};
use rayon::prelude::*;

use super::dlv1d::cut_sorted;
use super::{summarize, Partition, PartitionConfig, PartitionError};

/// Sorting switches to rayon above this many members.
const PAR_SORT_MIN: usize = 1 << 16;
/// Bucket refinement gives up after this many doublings.
const MAX_REFINE: u32 = 48;

struct Work {
    ids: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    var: Vec<f64>,
}

impl Work {
    fn new(columns: &[&[f64]], ids: Vec<usize>, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let (_, var) = summarize(columns, &ids);
        Self { ids, lo, hi, var }
    }

    fn priority(&self) -> f64 {
        self.ids.len() as f64 * self.var.iter().copied().fold(0.0, f64::max)
    }

    /// Highest-variance attribute, ties to the lower index.
    fn split_attr(&self) -> usize {
        let mut best = 0;
        for (j, &v) in self.var.iter().enumerate() {
            if v > self.var[best] {
                best = j;
            }
        }
        best
    }
}

struct Entry {
    priority: f64,
    id: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        self.priority.total_cmp(&o.priority).then(o.id.cmp(&self.id))
    }
}

/// A boundary `b` with `left_max < b <= right_min`, at the midpoint when
/// floating point allows.
pub(crate) fn boundary(left_max: f64, right_min: f64) -> f64 {
    let m = 0.5 * left_max + 0.5 * right_min;
    if m > left_max && m <= right_min {
        m
    } else {
        right_min
    }
}

fn sort_by_attr(col: &[f64], ids: &mut [usize]) {
    let cmp = |a: &usize, b: &usize| col[*a].total_cmp(&col[*b]).then(a.cmp(b));
    if ids.len() >= PAR_SORT_MIN {
        ids.par_sort_unstable_by(cmp);
    } else {
        ids.sort_unstable_by(cmp);
    }
}

/// Split `ids` inside box `lo..hi` into about `ids.len() / d_f` groups.
/// Groups come back in creation order.
fn dlv_groups(
    columns: &[&[f64]],
    ids: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    scale: &[f64],
    d_f: usize,
) -> Vec<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    let target = ids.len() as f64 / d_f as f64;
    let mut slab: Vec<Option<Work>> = vec![Some(Work::new(columns, ids, lo, hi))];
    let mut heap = BinaryHeap::new();
    let root_priority = slab[0].as_ref().map_or(0.0, Work::priority);
    if root_priority > 0.0 {
        heap.push(Entry {
            priority: root_priority,
            id: 0,
        });
    }
    let mut count = 1usize;
    let df2 = (d_f * d_f) as f64;
    while (count as f64) < target {
        let Some(Entry { id, .. }) = heap.pop() else {
            warn!("partition queue drained at {count} groups, target {target:.0}");
            break;
        };
        let work = slab[id].take().expect("queued group present");
        let j = work.split_attr();
        let beta = scale[j] * work.var[j] / df2;
        let mut order = work.ids;
        sort_by_attr(columns[j], &mut order);
        let sorted: Vec<f64> = order.iter().map(|&i| columns[j][i]).collect();
        let starts = cut_sorted(&sorted, beta);
        if starts.len() < 2 {
            // cannot be cut at this bounding variance; keep as a final group
            slab[id] = Some(Work {
                ids: order,
                ..work
            });
            continue;
        }
        let pieces: Vec<(usize, usize)> = starts
            .iter()
            .enumerate()
            .map(|(s, &a)| (a, starts.get(s + 1).copied().unwrap_or(order.len())))
            .collect();
        let children: Vec<Work> = pieces
            .par_iter()
            .enumerate()
            .map(|(s, &(a, b))| {
                let mut lo = work.lo.clone();
                let mut hi = work.hi.clone();
                if s > 0 {
                    lo[j] = boundary(sorted[a - 1], sorted[a]);
                }
                if b < sorted.len() {
                    hi[j] = boundary(sorted[b - 1], sorted[b]);
                }
                Work::new(columns, order[a..b].to_vec(), lo, hi)
            })
            .collect();
        count += children.len() - 1;
        for child in children {
            let cid = slab.len();
            let p = child.priority();
            slab.push(Some(child));
            if p > 0.0 {
                heap.push(Entry { priority: p, id: cid });
            }
        }
    }
    debug!("partitioned into {count} groups (target {target:.1})");
    slab.into_iter()
        .flatten()
        .map(|w| (w.ids, w.lo, w.hi))
        .collect()
}

/// Partition every tuple of `columns` (attribute-major) into about
/// `n / d_f` groups.
pub fn dlv_partition(columns: &[&[f64]], cfg: &PartitionConfig) -> Result<Partition, PartitionError> {
    cfg.validate()?;
    let scale = cfg.scale_factors(columns)?;
    Ok(dlv_with_scale(columns, &scale, cfg.downscale))
}

fn dlv_with_scale(columns: &[&[f64]], scale: &[f64], d_f: usize) -> Partition {
    let n = columns.first().map_or(0, |c| c.len());
    let k = columns.len();
    if n == 0 {
        return Partition::from_parts(columns, Vec::new());
    }
    let parts = dlv_groups(
        columns,
        (0..n).collect(),
        vec![f64::NEG_INFINITY; k],
        vec![f64::INFINITY; k],
        scale,
        d_f,
    );
    Partition::from_parts(columns, parts)
}

/// Equal-width buckets over the highest-variance attribute so that each
/// holds at most `r` tuples, then [`dlv_partition`] inside every bucket.
pub fn dlv_bucketed(columns: &[&[f64]], cfg: &PartitionConfig) -> Result<Partition, PartitionError> {
    cfg.validate()?;
    let n = columns.first().map_or(0, |c| c.len());
    let k = columns.len();
    let r = cfg.bucket_capacity.unwrap_or(usize::MAX);
    let scale = cfg.scale_factors(columns)?;
    if r >= n || k == 0 {
        return Ok(dlv_with_scale(columns, &scale, cfg.downscale));
    }
    let all: Vec<usize> = (0..n).collect();
    let (_, var) = summarize(columns, &all);
    let mut j = 0;
    for (a, &v) in var.iter().enumerate() {
        if v > var[j] {
            j = a;
        }
    }
    let col = columns[j];
    let buckets = bucketize(col, r);
    debug!("{} buckets of at most {r} tuples on attribute {j}", buckets.len());

    let keys: Vec<&Vec<usize>> = buckets.values().collect();
    let edges: Vec<(f64, f64)> = keys
        .iter()
        .map(|ids| {
            let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in ids.iter() {
                a = a.min(col[i]);
                b = b.max(col[i]);
            }
            (a, b)
        })
        .collect();
    let parts: Vec<Vec<(Vec<usize>, Vec<f64>, Vec<f64>)>> = keys
        .par_iter()
        .enumerate()
        .map(|(b, ids)| {
            let mut lo = vec![f64::NEG_INFINITY; k];
            let mut hi = vec![f64::INFINITY; k];
            if b > 0 {
                lo[j] = boundary(edges[b - 1].1, edges[b].0);
            }
            if b + 1 < edges.len() {
                hi[j] = boundary(edges[b].1, edges[b + 1].0);
            }
            let ids = (*ids).clone();
            if ids.len() > r && edges[b].0 == edges[b].1 {
                // a single repeated value that no refinement can split
                return vec![(ids, lo, hi)];
            }
            dlv_groups(columns, ids, lo, hi, &scale, cfg.downscale)
        })
        .collect();
    Ok(Partition::from_parts(columns, parts.into_iter().flatten().collect()))
}

/// Tuple ids per nonempty equal-width bucket, in ascending bucket order.
fn bucketize(col: &[f64], r: usize) -> BTreeMap<u64, Vec<usize>> {
    let n = col.len();
    let (lo, hi) = col
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut count = n.div_ceil(r).max(1) as u64;
    let mut refine = 0;
    loop {
        let width = (hi - lo) / count as f64;
        let mut buckets: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, &v) in col.iter().enumerate() {
            let b = if width > 0.0 {
                (((v - lo) / width) as u64).min(count - 1)
            } else {
                0
            };
            buckets.entry(b).or_default().push(i);
        }
        let overfull = buckets.values().any(|ids| {
            ids.len() > r && {
                let first = col[ids[0]];
                ids.iter().any(|&i| col[i] != first)
            }
        });
        if !overfull || refine >= MAX_REFINE || width == 0.0 {
            return buckets;
        }
        count = count.saturating_mul(2);
        refine += 1;
    }
}
