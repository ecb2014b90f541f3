//! Local search that turns a rounded LP point into a package.
//!
//! A move adds one unit of a variable, drops one, or swaps a unit of one
//! variable for a unit of another. While rows are violated each step takes
//! the move with the least weighted violation, ties broken by cost, with a
//! short tabu list against cycling. Once feasible, cost-lowering moves that
//! keep every row satisfied are taken until none is left.

use std::time::Instant;

use crate::model::NormalizedQuery;

const TABU: usize = 7;

/// Constraint rows plus, when a cutoff is set, the cost as one more row.
struct Rows<'a> {
    coef: Vec<&'a [f64]>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    weight: Vec<f64>,
}

impl Rows<'_> {
    fn violation(&self, act: &[f64]) -> f64 {
        let mut v = 0.0;
        for (r, &a) in act.iter().enumerate() {
            let over = if a < self.lower[r] {
                self.lower[r] - a
            } else if a > self.upper[r] {
                a - self.upper[r]
            } else {
                0.0
            };
            v += self.weight[r] * over;
        }
        v
    }

    /// Adds `sign` units of column `j` to the activities.
    fn shift(&self, act: &mut [f64], j: usize, sign: f64) {
        for (a, row) in act.iter_mut().zip(&self.coef) {
            *a += sign * row[j];
        }
    }
}

#[derive(Clone, Copy)]
struct Move {
    drop: Option<usize>,
    add: Option<usize>,
    violation: f64,
    cost: f64,
}

impl Move {
    fn better(&self, o: &Move) -> bool {
        let tol = 1e-12 * (1.0 + o.violation.abs());
        self.violation < o.violation - tol || (self.violation <= o.violation + tol && self.cost < o.cost)
    }
}

/// Searches from `start` for an integral point satisfying every row and
/// variable cap of `nq` with internal objective at most `cutoff`. Returns
/// the cheapest one met within `max_steps`.
pub fn repair(
    nq: &NormalizedQuery,
    start: &[u64],
    cutoff: f64,
    max_steps: usize,
    deadline: Option<Instant>,
) -> Option<Vec<u64>> {
    let n = nq.n_vars();
    let cap: Vec<u64> = nq.var_upper.iter().map(|&u| u.max(0.0).floor() as u64).collect();
    let mut x: Vec<u64> = start.iter().zip(&cap).map(|(&v, &c)| v.min(c)).collect();
    let mut coef: Vec<&[f64]> = nq.rows.iter().map(Vec::as_slice).collect();
    let mut lower = nq.row_lower.clone();
    let mut upper = nq.row_upper.clone();
    if cutoff.is_finite() {
        coef.push(&nq.cost);
        lower.push(f64::NEG_INFINITY);
        upper.push(cutoff);
    }
    let m = coef.len();
    let weight = coef
        .iter()
        .map(|row| {
            let s = row.iter().map(|a| a.abs()).sum::<f64>() / n.max(1) as f64;
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect();
    let rows = Rows {
        coef,
        lower,
        upper,
        weight,
    };
    let activity = |x: &[u64]| -> Vec<f64> {
        rows.coef
            .iter()
            .map(|row| row.iter().zip(x).map(|(a, &v)| a * v as f64).sum())
            .collect()
    };
    let mut act = activity(&x);
    let mut tabu_until = vec![0usize; n];
    let mut best: Option<(f64, Vec<u64>)> = None;
    let mut trial = vec![0.0; m];

    for step in 1..=max_steps {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        let current = rows.violation(&act);
        let feasible = current == 0.0;
        if feasible {
            // recompute to shed drift before recording
            act = activity(&x);
            if rows.violation(&act) == 0.0 {
                let obj = nq.internal_objective(&x.iter().map(|&v| v as f64).collect::<Vec<_>>());
                if best.as_ref().is_none_or(|b| obj < b.0) {
                    best = Some((obj, x.clone()));
                }
            }
        }
        let pkg: Vec<usize> = (0..n).filter(|&i| x[i] > 0).collect();
        let free = |j: usize| tabu_until[j] < step;
        let mut pick: Option<Move> = None;
        let mut consider = |mv: Move| {
            if feasible && (mv.violation > 0.0 || mv.cost >= -1e-12) {
                return;
            }
            if pick.is_none_or(|p| mv.better(&p)) {
                pick = Some(mv);
            }
        };
        let eval = |drop: Option<usize>, add: Option<usize>, trial: &mut [f64]| -> Move {
            let mut cost = 0.0;
            trial.copy_from_slice(&act);
            if let Some(i) = drop {
                rows.shift(trial, i, -1.0);
                cost -= nq.cost[i];
            }
            if let Some(j) = add {
                rows.shift(trial, j, 1.0);
                cost += nq.cost[j];
            }
            Move {
                drop,
                add,
                violation: rows.violation(trial),
                cost,
            }
        };
        for j in 0..n {
            if x[j] < cap[j] && free(j) {
                consider(eval(None, Some(j), &mut trial));
            }
        }
        for &i in &pkg {
            if !free(i) {
                continue;
            }
            consider(eval(Some(i), None, &mut trial));
            for j in 0..n {
                if j != i && x[j] < cap[j] && free(j) {
                    consider(eval(Some(i), Some(j), &mut trial));
                }
            }
        }
        let Some(mv) = pick else { break };
        if let Some(i) = mv.drop {
            x[i] -= 1;
            rows.shift(&mut act, i, -1.0);
            tabu_until[i] = step + TABU;
        }
        if let Some(j) = mv.add {
            x[j] += 1;
            rows.shift(&mut act, j, 1.0);
            tabu_until[j] = step + TABU;
        }
    }
    if rows.violation(&act) == 0.0 {
        let obj = nq.internal_objective(&x.iter().map(|&v| v as f64).collect::<Vec<_>>());
        if best.as_ref().is_none_or(|b| obj < b.0) {
            best = Some((obj, x));
        }
    }
    best.map(|b| b.1)
}
