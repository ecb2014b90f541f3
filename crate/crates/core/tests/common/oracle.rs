//! Independent reference solvers for small bounded LPs and ILPs.
//!
//! `vertex_enumeration` tries every vertex candidate in floating point;
//! `exact_simplex` is a two-phase bounded primal simplex with Bland's rule
//! over arbitrary-precision rationals, so its verdict is exact for the
//! (dyadic) input data.

#![allow(dead_code)]

use num::{BigRational, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `min c·x  s.t.  row_lo <= rows·x <= row_hi,  lo <= x <= hi`.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub cost: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DenseLp {
    pub fn n(&self) -> usize {
        self.cost.len()
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        let boxed = x
            .iter()
            .enumerate()
            .all(|(j, &v)| v >= self.lo[j] - tol && v <= self.hi[j] + tol);
        boxed
            && self.rows.iter().enumerate().all(|(i, r)| {
                let a: f64 = r.iter().zip(x).map(|(p, q)| p * q).sum();
                let scale = 1.0 + a.abs();
                a >= self.row_lo[i] - tol * scale && a <= self.row_hi[i] + tol * scale
            })
    }
}

/// Random instance with small integer data so rational arithmetic stays cheap.
pub fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseLp {
    let cost = (0..n).map(|_| f64::from(rng.random_range(-10i32..=10))).collect();
    let hi: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(1i32..=4))).collect();
    let lo = vec![0.0; n];
    let mut rows = Vec::with_capacity(m);
    let mut row_lo = Vec::with_capacity(m);
    let mut row_hi = Vec::with_capacity(m);
    for _ in 0..m {
        let r: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.3) {
                    0.0
                } else {
                    f64::from(rng.random_range(-9i32..=9))
                }
            })
            .collect();
        let max_act: f64 = r.iter().zip(&hi).map(|(a, u)| (a * u).max(0.0)).sum();
        let min_act: f64 = r.iter().zip(&hi).map(|(a, u)| (a * u).min(0.0)).sum();
        let span = max_act - min_act;
        // aim bounds around the middle; some instances end up infeasible
        let centre = min_act + span * rng.random_range(0.2..0.8);
        let width = span * rng.random_range(-0.05..0.3);
        let (mut a, mut b) = ((centre - width / 2.0).round(), (centre + width / 2.0).round());
        match rng.random_range(0..4) {
            0 => a = f64::NEG_INFINITY,
            1 => b = f64::INFINITY,
            _ => {}
        }
        rows.push(r);
        row_lo.push(a);
        row_hi.push(b);
    }
    DenseLp {
        cost,
        rows,
        row_lo,
        row_hi,
        lo,
        hi,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Enumerates every choice of `n` tight constraints among the box and row
/// bounds, solves for the point, and keeps the best feasible one.
pub fn vertex_enumeration(lp: &DenseLp) -> Option<f64> {
    let (n, m) = (lp.n(), lp.m());
    // tight-constraint catalogue: (normal, rhs)
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lo[j]));
        planes.push((e, lp.hi[j]));
    }
    for i in 0..m {
        if lp.row_lo[i].is_finite() {
            planes.push((lp.rows[i].clone(), lp.row_lo[i]));
        }
        if lp.row_hi[i].is_finite() {
            planes.push((lp.rows[i].clone(), lp.row_hi[i]));
        }
    }
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(n);
    choose(&planes, n, 0, &mut pick, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&k| planes[k].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&k| planes[k].1).collect();
        if let Some(x) = solve_square(a, b) {
            if lp.is_feasible(&x, 1e-9) {
                let obj: f64 = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.is_none_or(|b| obj < b) {
                    best = Some(obj);
                }
            }
        }
    });
    best
}

fn choose(planes: &[(Vec<f64>, f64)], k: usize, start: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    let need = k - pick.len();
    for s in start..=planes.len().saturating_sub(need) {
        pick.push(s);
        choose(planes, k, s + 1, pick, f);
        pick.pop();
    }
}

pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn q(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Exact optimum of `lp`, or `None` when infeasible.
pub fn exact_simplex(lp: &DenseLp) -> Option<f64> {
    let (n, m) = (lp.n(), lp.m());
    if (0..m).any(|i| lp.row_lo[i] > lp.row_hi[i]) {
        return None;
    }
    // variables: x (n), row activities s (m), artificials (m)
    let nv = n + 2 * m;
    let zero = BigRational::zero();
    let one = BigRational::from_integer(1.into());
    let mut lo: Vec<Option<BigRational>> = Vec::with_capacity(nv);
    let mut hi: Vec<Option<BigRational>> = Vec::with_capacity(nv);
    for j in 0..n {
        lo.push(Some(q(lp.lo[j])));
        hi.push(Some(q(lp.hi[j])));
    }
    for i in 0..m {
        lo.push(lp.row_lo[i].is_finite().then(|| q(lp.row_lo[i])));
        hi.push(lp.row_hi[i].is_finite().then(|| q(lp.row_hi[i])));
    }
    for _ in 0..m {
        lo.push(Some(zero.clone()));
        hi.push(None);
    }
    let mut x: Vec<BigRational> = vec![zero.clone(); nv];
    for j in 0..n + m {
        x[j] = lo[j].clone().or_else(|| hi[j].clone()).expect("one finite bound");
    }
    // rows: Σ a x - s + D a = 0
    let mut t: Vec<Vec<BigRational>> = vec![vec![zero.clone(); nv]; m];
    let mut basic: Vec<usize> = Vec::with_capacity(m);
    for i in 0..m {
        for j in 0..n {
            t[i][j] = q(lp.rows[i][j]);
        }
        t[i][n + i] = -one.clone();
        let resid: BigRational = (0..n + m).map(|j| &t[i][j] * &x[j]).sum();
        let d = if resid.is_positive() { -one.clone() } else { one.clone() };
        t[i][n + m + i] = d.clone();
        // make the artificial column a unit vector
        if d.is_negative() {
            for v in &mut t[i] {
                *v = -v.clone();
            }
        }
        x[n + m + i] = resid.abs();
        basic.push(n + m + i);
    }
    let mut state = Tableau { t, basic, x, lo, hi };

    let mut phase1 = vec![zero.clone(); nv];
    for c in phase1.iter_mut().skip(n + m) {
        *c = one.clone();
    }
    state.optimize(&phase1, nv);
    let infeas: BigRational = (n + m..nv).map(|j| state.x[j].clone()).sum();
    if infeas.is_positive() {
        return None;
    }
    for j in n + m..nv {
        state.hi[j] = Some(zero.clone());
    }
    let mut cost = vec![zero; nv];
    for j in 0..n {
        cost[j] = q(lp.cost[j]);
    }
    state.optimize(&cost, n + m);
    let obj: BigRational = (0..n).map(|j| &cost[j] * &state.x[j]).sum();
    Some(to_f64(&obj))
}

fn to_f64(v: &BigRational) -> f64 {
    use num::ToPrimitive;
    v.to_f64().expect("representable")
}

struct Tableau {
    t: Vec<Vec<BigRational>>,
    basic: Vec<usize>,
    x: Vec<BigRational>,
    lo: Vec<Option<BigRational>>,
    hi: Vec<Option<BigRational>>,
}

impl Tableau {
    /// Largest reduced cost first, switching to Bland's rule for good after
    /// a run of degenerate steps; only variables below `enter_limit` enter.
    fn optimize(&mut self, cost: &[BigRational], enter_limit: usize) {
        const DEGENERATE_RUN: usize = 30;
        let m = self.basic.len();
        let (mut degenerate, mut bland) = (0usize, false);
        let mut reduced: Option<Vec<BigRational>> = None;
        loop {
            // reduced costs only change when the basis does
            let d = reduced.get_or_insert_with(|| {
                let mut is_basic = vec![false; self.x.len()];
                for &b in &self.basic {
                    is_basic[b] = true;
                }
                (0..enter_limit)
                    .map(|j| {
                        if is_basic[j] {
                            return BigRational::zero();
                        }
                        let mut d = cost[j].clone();
                        for i in 0..m {
                            if !self.t[i][j].is_zero() {
                                d -= &cost[self.basic[i]] * &self.t[i][j];
                            }
                        }
                        d
                    })
                    .collect()
            });
            let mut entering: Option<(usize, i32)> = None;
            for j in 0..enter_limit {
                if d[j].is_zero() || self.lo[j] == self.hi[j] {
                    continue;
                }
                let at_lo = self.lo[j].as_ref() == Some(&self.x[j]);
                let at_hi = self.hi[j].as_ref() == Some(&self.x[j]);
                if (at_lo && d[j].is_negative()) || (at_hi && d[j].is_positive()) {
                    if entering.is_none_or(|(e, _)| d[j].abs() > d[e].abs()) {
                        entering = Some((j, if at_lo { 1 } else { -1 }));
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((j, dir)) = entering else { return };
            // step limit from the entering variable's own range
            let mut best_t = match (&self.lo[j], &self.hi[j]) {
                (Some(l), Some(h)) => Some(h - l),
                _ => None,
            };
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..m {
                // Δx_B(i) = -dir * t[i][j] * step
                let g = if dir > 0 { -self.t[i][j].clone() } else { self.t[i][j].clone() };
                let b = self.basic[i];
                let (limit, to_upper) = if g.is_negative() {
                    match &self.lo[b] {
                        Some(l) => ((&self.x[b] - l) / -g, false),
                        None => continue,
                    }
                } else if g.is_positive() {
                    match &self.hi[b] {
                        Some(h) => ((h - &self.x[b]) / g, true),
                        None => continue,
                    }
                } else {
                    continue;
                };
                let better = match (&best_t, &leave) {
                    (None, _) => true,
                    (Some(bt), _) if limit < *bt => true,
                    (Some(bt), Some((li, _))) if limit == *bt => b < self.basic[*li],
                    (Some(bt), None) if limit == *bt => false,
                    _ => false,
                };
                if better {
                    best_t = Some(limit);
                    leave = Some((i, to_upper));
                }
            }
            let step = best_t.expect("bounded step");
            if step.is_zero() {
                degenerate += 1;
                bland |= degenerate > DEGENERATE_RUN;
            } else {
                degenerate = 0;
            }
            let signed = if dir > 0 { step.clone() } else { -step.clone() };
            for i in 0..m {
                if !self.t[i][j].is_zero() {
                    let b = self.basic[i];
                    self.x[b] = &self.x[b] - &self.t[i][j] * &signed;
                }
            }
            self.x[j] = &self.x[j] + &signed;
            if let Some((r, to_upper)) = leave {
                let b = self.basic[r];
                self.x[b] = if to_upper { self.hi[b].clone() } else { self.lo[b].clone() }.expect("finite bound");
                self.pivot(r, j);
                reduced = None;
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.t[r][j].clone();
        for v in &mut self.t[r] {
            *v = &*v / &piv;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r || row[j].is_zero() {
                continue;
            }
            let f = row[j].clone();
            for (v, p) in row.iter_mut().zip(&prow) {
                if !p.is_zero() {
                    *v = &*v - &f * p;
                }
            }
        }
        self.basic[r] = j;
    }
}

/// Best integer point by exhaustive enumeration; `None` when infeasible.
pub fn brute_force_ilp(lp: &DenseLp) -> Option<(f64, Vec<i64>)> {
    let n = lp.n();
    let mut x = vec![0i64; n];
    let mut best: Option<(f64, Vec<i64>)> = None;
    loop {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        if lp.is_feasible(&xf, 1e-9) {
            let obj: f64 = lp.cost.iter().zip(&xf).map(|(c, v)| c * v).sum();
            if best.as_ref().is_none_or(|b| obj < b.0) {
                best = Some((obj, x.clone()));
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            if (x[k] as f64) < lp.hi[k] {
                x[k] += 1;
                break;
            }
            x[k] = lp.lo[k] as i64;
            k += 1;
        }
    }
}
