//! Per-attribute scale factors `c_j` so that a bounding variance of
//! `c_j * var / d_f^2` cuts a group into about `d_f` subsets.

use log::warn;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dlv1d::cut_sorted;
use crate::stats::variance;

pub const DEFAULT_SCALE: f64 = 13.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSearch {
    /// Sample size drawn from the relation.
    pub samples: usize,
    /// Binary search stops once the interval is below `tolerance * range^2`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for ScaleSearch {
    fn default() -> Self {
        Self {
            samples: 10_000,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

/// Bounding variance whose 1-D partition of `sorted` has about `target`
/// subsets, found by bisection on `[0, range^2 / 4]`.
pub fn search_beta(sorted: &[f64], target: usize, tolerance: f64) -> f64 {
    let range = sorted.last().copied().unwrap_or(0.0) - sorted.first().copied().unwrap_or(0.0);
    let eps = tolerance * range * range;
    let (mut lo, mut hi) = (0.0, range * range / 4.0);
    let mut beta = hi;
    while hi - lo > eps {
        beta = 0.5 * (lo + hi);
        let count = cut_sorted(sorted, beta).len();
        match count.cmp(&target) {
            std::cmp::Ordering::Equal => break,
            std::cmp::Ordering::Less => hi = beta,
            std::cmp::Ordering::Greater => lo = beta,
        }
    }
    beta
}

pub fn get_scale_factors(columns: &[&[f64]], d_f: usize, cfg: &ScaleSearch) -> Vec<f64> {
    let n = columns.first().map_or(0, |c| c.len());
    let take = cfg.samples.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picks: Vec<usize> = sample(&mut rng, n, take).into_vec();
    picks.sort_unstable();
    columns
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let mut s: Vec<f64> = picks.iter().map(|&i| col[i]).collect();
            s.sort_unstable_by(f64::total_cmp);
            let var = variance(&s);
            if var <= 0.0 {
                warn!("attribute {j} is constant on the sample; using scale factor {DEFAULT_SCALE}");
                return DEFAULT_SCALE;
            }
            let beta = search_beta(&s, d_f, cfg.tolerance);
            beta * (d_f * d_f) as f64 / var
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_gets_default() {
        let c = vec![4.0; 100];
        let f = get_scale_factors(&[&c], 10, &ScaleSearch::default());
        assert_eq!(f, vec![DEFAULT_SCALE]);
    }
}
