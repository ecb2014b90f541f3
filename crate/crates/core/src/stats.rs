//! Small numeric helpers shared by the partitioner and the pipeline.

/// Population mean and variance, shifted by the first element so that a
/// constant slice yields a variance of exactly zero.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let shift = values[0];
    let inv = 1.0 / n as f64;
    let mean_d = values.iter().map(|v| v - shift).sum::<f64>() * inv;
    let var = values
        .iter()
        .map(|v| {
            let d = v - shift - mean_d;
            d * d
        })
        .sum::<f64>()
        * inv;
    (shift + mean_d, var.max(0.0))
}

pub fn variance(values: &[f64]) -> f64 {
    mean_variance(values).1
}

/// Same as [`mean_variance`] but over `column[ids[..]]`.
pub fn mean_variance_indexed(column: &[f64], ids: &[usize]) -> (f64, f64) {
    let n = ids.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let shift = column[ids[0]];
    let inv = 1.0 / n as f64;
    let mean_d = ids.iter().map(|&i| column[i] - shift).sum::<f64>() * inv;
    let var = ids
        .iter()
        .map(|&i| {
            let d = column[i] - shift - mean_d;
            d * d
        })
        .sum::<f64>()
        * inv;
    (shift + mean_d, var.max(0.0))
}

/// Running population variance over a stream of values, accumulated as
/// shifted sum and sum of squares.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningVariance {
    count: usize,
    shift: f64,
    sum: f64,
    sum_sq: f64,
}

impl RunningVariance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    pub fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.shift = x;
        }
        let d = x - self.shift;
        self.count += 1;
        self.sum += d;
        self.sum_sq += d * d;
    }

    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let c = self.count as f64;
        let m = self.sum / c;
        (self.sum_sq / c - m * m).max(0.0)
    }

    /// Variance the accumulator would report after pushing `x`.
    pub fn variance_with(&self, x: f64) -> f64 {
        let mut next = *self;
        next.push(x);
        next.variance()
    }
}
