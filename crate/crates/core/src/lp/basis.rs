//! Explicit dense basis inverse.

use super::standard::StandardFormLp;

/// Condition alarm: an inverse entry beyond this triggers refactorization.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Row-major `m × m` inverse of the basis matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisInverse {
    m: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular;

impl BasisInverse {
    pub fn identity(m: usize) -> Self {
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            data[i * m + i] = 1.0;
        }
        Self { m, data }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.m..(r + 1) * self.m]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    /// Solves `B p = q`.
    pub fn ftran(&self, q: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| self.row(i).iter().zip(q).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Solves `Bᵀ p = q`.
    pub fn btran(&self, q: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.m];
        for (i, &qi) in q.iter().enumerate() {
            if qi != 0.0 {
                for (pj, &b) in p.iter_mut().zip(self.row(i)) {
                    *pj += qi * b;
                }
            }
        }
        p
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    /// Replaces basic row `r` by the column whose ftran is `alpha`.
    pub fn pivot(&mut self, r: usize, alpha: &[f64]) -> Result<(), Singular> {
        let m = self.m;
        let piv = alpha[r];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Singular);
        }
        let inv = 1.0 / piv;
        for v in &mut self.data[r * m..(r + 1) * m] {
            *v *= inv;
        }
        let (head, rest) = self.data.split_at_mut(r * m);
        let (prow, tail) = rest.split_at_mut(m);
        for (i, row) in head.chunks_mut(m).chain(tail.chunks_mut(m)).enumerate() {
            let i = if i < r { i } else { i + 1 };
            let f = alpha[i];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
            }
        }
        Ok(())
    }

    /// Gauss-Jordan inversion of the basis `basic` with partial pivoting.
    pub fn factor(lp: &StandardFormLp, basic: &[usize]) -> Result<Self, Singular> {
        let m = lp.m;
        let mut b = vec![0.0; m * m];
        for (k, &j) in basic.iter().enumerate() {
            for (i, v) in lp.column(j).into_iter().enumerate() {
                b[i * m + k] = v;
            }
        }
        invert_dense(&mut b, m).map(|data| Self { m, data })
    }
}

/// Inverts a row-major square matrix in place, returning the inverse.
pub fn invert_dense(a: &mut [f64], m: usize) -> Result<Vec<f64>, Singular> {
    let mut inv = BasisInverse::identity(m).data;
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    for col in 0..m {
        let (piv_row, piv_abs) = (col..m)
            .map(|r| (r, a[r * m + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs <= 1e-12 * scale {
            return Err(Singular);
        }
        if piv_row != col {
            for k in 0..m {
                a.swap(piv_row * m + k, col * m + k);
                inv.swap(piv_row * m + k, col * m + k);
            }
        }
        let p = 1.0 / a[col * m + col];
        for k in 0..m {
            a[col * m + k] *= p;
            inv[col * m + k] *= p;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = a[r * m + col];
            if f != 0.0 {
                for k in 0..m {
                    a[r * m + k] -= f * a[col * m + k];
                    inv[r * m + k] -= f * inv[col * m + k];
                }
            }
        }
    }
    Ok(inv)
}
