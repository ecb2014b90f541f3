//! Single-attribute partitioning by bounding variance, and the ratio score.

use crate::stats::{mean_variance_indexed, RunningVariance};

/// Cut a sorted slice into runs whose population variance stays within
/// `beta`. Returns the start offset of every subset (the first is 0).
///
/// A delimiter placed at value `v` sends every copy of `v` to the right, so a
/// trigger in the middle of a run of equal values cuts before the run.
pub fn cut_sorted(sorted: &[f64], beta: f64) -> Vec<usize> {
    if sorted.is_empty() {
        return Vec::new();
    }
    let mut starts = vec![0];
    let mut acc = RunningVariance::new();
    let mut run_start = 0;
    for (i, &v) in sorted.iter().enumerate() {
        if i > 0 && v != sorted[i - 1] {
            run_start = i;
        }
        if !acc.is_empty() && acc.variance_with(v) > beta {
            // run_start > current start here: a subset made only of copies
            // of v has zero variance and cannot trigger
            starts.push(run_start);
            acc.clear();
            for _ in run_start..i {
                acc.push(v);
            }
        }
        acc.push(v);
    }
    starts
}

/// Indices of `values` in ascending value order, ties by index.
pub fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// One-dimensional partition of `values` under bounding variance `beta`.
/// Subsets are returned in ascending value order, each as indices into `values`.
pub fn one_d_dlv(values: &[f64], beta: f64) -> Vec<Vec<usize>> {
    let order = sorted_order(values);
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let starts = cut_sorted(&sorted, beta);
    split_at_starts(&order, &starts)
}

pub(crate) fn split_at_starts<T: Clone>(items: &[T], starts: &[usize]) -> Vec<Vec<T>> {
    starts
        .iter()
        .enumerate()
        .map(|(s, &a)| {
            let b = starts.get(s + 1).copied().unwrap_or(items.len());
            items[a..b].to_vec()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("ratio score undefined: the set has zero variance")]
pub struct ZeroVariance;

/// Sum of subset variances divided by the variance of the whole set.
pub fn ratio_score(values: &[f64], subsets: &[Vec<usize>]) -> Result<f64, ZeroVariance> {
    let all: Vec<usize> = (0..values.len()).collect();
    let (_, total) = mean_variance_indexed(values, &all);
    if total <= 0.0 {
        return Err(ZeroVariance);
    }
    let within: f64 = subsets.iter().map(|s| mean_variance_indexed(values, s).1).sum();
    Ok(within / total)
}
