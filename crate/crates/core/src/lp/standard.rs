//! Equality form `A x = 0, l <= x <= u` with one slack per row.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::model::NormalizedQuery;

/// `min c·x  s.t.  [-Ã | I] x = 0,  l <= x <= u`.
///
/// Structural columns are stored densely, column-major, holding `-Ã`; the
/// slack block is the identity and is never materialized. Variable `j < n`
/// is structural, `n + i` is the slack of row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormLp {
    pub m: usize,
    pub n: usize,
    /// `n * m` entries; column `j` occupies `cols[j*m .. (j+1)*m]`.
    /// Shared so bound-modified copies stay cheap.
    pub cols: Arc<Vec<f64>>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Set when some `l > u`; the solver reports infeasible without pivoting.
    pub infeasible: bool,
}

impl StandardFormLp {
    pub fn n_total(&self) -> usize {
        self.n + self.m
    }

    pub fn is_slack(&self, j: usize) -> bool {
        j >= self.n
    }

    /// Structural column `j` (entries of `-Ã`).
    #[inline]
    pub fn structural(&self, j: usize) -> &[f64] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }

    /// `p · A_j`.
    #[inline]
    pub fn dot_column(&self, j: usize, p: &[f64]) -> f64 {
        if j >= self.n {
            p[j - self.n]
        } else {
            self.structural(j).iter().zip(p).map(|(a, b)| a * b).sum()
        }
    }

    /// `out += scale * A_j`.
    #[inline]
    pub fn add_column(&self, j: usize, scale: f64, out: &mut [f64]) {
        if j >= self.n {
            out[j - self.n] += scale;
        } else {
            for (o, a) in out.iter_mut().zip(self.structural(j)) {
                *o += scale * a;
            }
        }
    }

    /// Dense copy of column `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        self.add_column(j, 1.0, &mut v);
        v
    }

    /// Row activities `Ã x̃` for a structural vector.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.m];
        for (j, &v) in x.iter().enumerate().take(self.n) {
            if v != 0.0 {
                for (a, c) in act.iter_mut().zip(self.structural(j)) {
                    *a -= c * v;
                }
            }
        }
        act
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Plain-text dump: dimensions, then `c`, the rows of `A`, `l`, `u`,
    /// every number printed with 17 significant digits.
    pub fn dump(&self) -> String {
        let nt = self.n_total();
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.m, nt);
        let line = |s: &mut String, it: &mut dyn Iterator<Item = f64>| {
            let parts: Vec<String> = it.map(fmt17).collect();
            let _ = writeln!(s, "{}", parts.join(" "));
        };
        line(&mut s, &mut self.cost.iter().copied());
        for i in 0..self.m {
            line(
                &mut s,
                &mut (0..nt).map(|j| if j < self.n { self.cols[j * self.m + i] } else { f64::from(u8::from(j - self.n == i)) }),
            );
        }
        line(&mut s, &mut self.lower.iter().copied());
        line(&mut s, &mut self.upper.iter().copied());
        s
    }

    /// Inverse of [`StandardFormLp::dump`].
    pub fn parse_dump(text: &str) -> Option<Self> {
        let mut lines = text.lines();
        let mut dims = lines.next()?.split_whitespace().map(|t| t.parse::<usize>().ok());
        let m = dims.next()??;
        let nt = dims.next()??;
        let n = nt.checked_sub(m)?;
        let mut row = || -> Option<Vec<f64>> {
            let v: Option<Vec<f64>> = lines.next()?.split_whitespace().map(|t| t.parse().ok()).collect();
            v.filter(|v| v.len() == nt)
        };
        let cost = row()?;
        let mut cols = vec![0.0; n * m];
        for i in 0..m {
            let r = row()?;
            for j in 0..n {
                cols[j * m + i] = r[j];
            }
        }
        let lower = row()?;
        let upper = row()?;
        let infeasible = lower.iter().zip(&upper).any(|(l, u)| l > u);
        Some(Self {
            m,
            n,
            cols: Arc::new(cols),
            cost,
            lower,
            upper,
            infeasible,
        })
    }
}

fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Converts a normalized query (integrality dropped) into equality form.
///
/// Infinite row bounds are replaced by the row's implied activity range so
/// every variable, slacks included, is boxed.
pub fn to_standard_form(nq: &NormalizedQuery) -> StandardFormLp {
    let m = nq.n_rows();
    let n = nq.n_vars();
    assert!(
        nq.var_upper.iter().all(|u| u.is_finite()),
        "variables must be finitely bounded"
    );
    let mut cols = vec![0.0; n * m];
    for (i, row) in nq.rows.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            cols[j * m + i] = -a;
        }
    }
    let mut lower = vec![0.0; n + m];
    let mut upper = vec![0.0; n + m];
    upper[..n].copy_from_slice(&nq.var_upper);
    for i in 0..m {
        let (mut lo_act, mut hi_act) = (0.0, 0.0);
        for (j, &a) in nq.rows[i].iter().enumerate() {
            let (p, q) = (a * lower[j], a * upper[j]);
            lo_act += p.min(q);
            hi_act += p.max(q);
        }
        lower[n + i] = if nq.row_lower[i].is_finite() { nq.row_lower[i] } else { lo_act };
        upper[n + i] = if nq.row_upper[i].is_finite() { nq.row_upper[i] } else { hi_act };
    }
    let mut cost = vec![0.0; n + m];
    cost[..n].copy_from_slice(&nq.cost);
    let infeasible = lower.iter().zip(&upper).any(|(l, u)| l > u);
    StandardFormLp {
        m,
        n,
        cols: Arc::new(cols),
        cost,
        lower,
        upper,
        infeasible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RowKind;

    fn nq(rows: Vec<Vec<f64>>, lo: Vec<f64>, hi: Vec<f64>, cap: f64) -> NormalizedQuery {
        let n = rows[0].len();
        let m = rows.len();
        NormalizedQuery {
            tuple_ids: (0..n).collect(),
            cost: vec![1.0; n],
            rows,
            row_lower: lo,
            row_upper: hi,
            row_kinds: vec![RowKind::Sum { attr: 0 }; m],
            var_upper: vec![cap; n],
            maximize: false,
        }
    }

    #[test]
    fn single_row_embed() {
        let lp = to_standard_form(&nq(vec![vec![1.0, 1.0]], vec![0.0], vec![5.0], 1.0));
        assert_eq!(lp.column(2), vec![1.0]);
        assert_eq!((lp.lower[2], lp.upper[2]), (0.0, 5.0));
        assert_eq!(lp.column(0), vec![-1.0]);
        assert!(!lp.infeasible);
    }

    #[test]
    fn infinite_bounds_become_activity_range() {
        let lp = to_standard_form(&nq(
            vec![vec![2.0, -3.0]],
            vec![f64::NEG_INFINITY],
            vec![f64::INFINITY],
            2.0,
        ));
        assert_eq!((lp.lower[2], lp.upper[2]), (-6.0, 4.0));
    }

    #[test]
    fn empty_bounds_flagged() {
        let lp = to_standard_form(&nq(vec![vec![1.0]], vec![3.0], vec![2.0], 1.0));
        assert!(lp.infeasible);
    }

    #[test]
    fn dump_round_trip() {
        let lp = to_standard_form(&nq(
            vec![vec![0.1, 1.0 / 3.0], vec![1e-17, 7.0]],
            vec![1.0, f64::NEG_INFINITY],
            vec![2.0, 8.5],
            3.0,
        ));
        let back = StandardFormLp::parse_dump(&lp.dump()).unwrap();
        assert_eq!(back, lp);
    }
}
