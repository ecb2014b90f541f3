//! Mean-split kd-tree clustering, kept as the baseline splitter.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdTreeConfig {
    /// A cluster larger than this is split.
    pub size_threshold: usize,
    /// A cluster whose radius exceeds this is split.
    pub radius_limit: f64,
}

impl Default for KdTreeConfig {
    fn default() -> Self {
        Self {
            size_threshold: 1,
            radius_limit: 0.0,
        }
    }
}

/// Leaves of the kd-tree over `columns` (attribute-major). A cluster is split
/// at its mean along the next attribute in round-robin order, values `<=`
/// the mean going left. Leaves come out in left-to-right order.
pub fn kdtree_partition(columns: &[&[f64]], cfg: &KdTreeConfig) -> Vec<Vec<usize>> {
    let n = columns.first().map_or(0, |c| c.len());
    if n == 0 {
        return Vec::new();
    }
    let k = columns.len();
    let mut leaves = Vec::new();
    let mut stack = vec![((0..n).collect::<Vec<_>>(), 0usize)];
    while let Some((ids, depth)) = stack.pop() {
        let means: Vec<f64> = columns
            .iter()
            .map(|c| ids.iter().map(|&i| c[i]).sum::<f64>() / ids.len() as f64)
            .collect();
        let radius = ids
            .iter()
            .map(|&i| {
                columns
                    .iter()
                    .zip(&means)
                    .map(|(c, m)| (c[i] - m) * (c[i] - m))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if ids.len() <= cfg.size_threshold && radius <= cfg.radius_limit {
            leaves.push(ids);
            continue;
        }
        let mut split = None;
        for step in 0..k {
            let j = (depth + step) % k;
            let (left, right): (Vec<usize>, Vec<usize>) = ids.iter().partition(|&&i| columns[j][i] <= means[j]);
            if !left.is_empty() && !right.is_empty() {
                split = Some((left, right, j));
                break;
            }
        }
        match split {
            Some((left, right, j)) => {
                stack.push((right, j + 1));
                stack.push((left, j + 1));
            }
            None => leaves.push(ids),
        }
    }
    leaves
}
