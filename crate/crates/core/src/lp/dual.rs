//! Bounded-variable dual simplex with a long-step ratio test.

use std::time::Instant;

use log::{debug, warn};

use super::basis::{BasisInverse, CONDITION_LIMIT};
use super::bfrt::{choose_variant, BfrtInstance, BfrtVariant};
use super::pricing::price_all;
use super::standard::StandardFormLp;
use super::support;

const PRIMAL_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-8;
const REFACTOR_EVERY: usize = 200;
const PERTURBATION: f64 = 1e-10;
const MAX_FINAL_ROUNDS: usize = 50;
const NOT_BASIC: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, Default)]
pub struct LpOptions {
    pub max_iterations: Option<usize>,
    pub deadline: Option<Instant>,
    pub bfrt: Option<BfrtVariant>,
}

/// Enough to rebuild a basis on a problem with the same columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisSnapshot {
    pub basic: Vec<usize>,
    pub at_upper: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Structural values; slacks stripped.
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
    /// Iterations that flipped at least one bound.
    pub long_steps: usize,
    pub basis: Option<BasisSnapshot>,
}

impl LpSolution {
    fn without_values(lp: &StandardFormLp, status: LpStatus, iterations: usize, long_steps: usize) -> Self {
        Self {
            x: vec![0.0; lp.n],
            objective: f64::NAN,
            status,
            iterations,
            long_steps,
            basis: None,
        }
    }
}

/// Working state: basis, nonbasic statuses, inverse, values and reduced costs.
#[derive(Debug, Clone)]
pub struct BasisState {
    basic: Vec<usize>,
    pos: Vec<usize>,
    at_upper: Vec<bool>,
    inv: BasisInverse,
    x: Vec<f64>,
    d: Vec<f64>,
}

impl BasisState {
    /// All slacks basic; every structural sits on the bound its cost favours.
    pub fn slack(lp: &StandardFormLp) -> Self {
        let (n, m) = (lp.n, lp.m);
        let basic: Vec<usize> = (n..n + m).collect();
        let mut pos = vec![NOT_BASIC; n + m];
        for (r, &j) in basic.iter().enumerate() {
            pos[j] = r;
        }
        let at_upper = (0..n + m).map(|j| j < n && lp.cost[j] < 0.0).collect();
        let mut st = Self {
            basic,
            pos,
            at_upper,
            inv: BasisInverse::identity(m),
            x: vec![0.0; n + m],
            d: lp.cost.clone(),
        };
        for &j in &st.basic {
            st.d[j] = 0.0;
        }
        st.compute_primal(lp);
        st
    }

    /// Rebuilds the state for `snap`; falls back to the slack basis when the
    /// snapshot does not fit or is singular.
    pub fn from_snapshot(lp: &StandardFormLp, snap: &BasisSnapshot, cost: &[f64]) -> Self {
        let nt = lp.n_total();
        let valid = snap.basic.len() == lp.m
            && snap.at_upper.len() == nt
            && snap.basic.iter().all(|&j| j < nt);
        let mut pos = vec![NOT_BASIC; nt];
        if valid {
            for (r, &j) in snap.basic.iter().enumerate() {
                if pos[j] != NOT_BASIC {
                    return Self::slack(lp);
                }
                pos[j] = r;
            }
        }
        let inv = match valid.then(|| BasisInverse::factor(lp, &snap.basic)) {
            Some(Ok(inv)) => inv,
            _ => return Self::slack(lp),
        };
        let mut st = Self {
            basic: snap.basic.clone(),
            pos,
            at_upper: snap.at_upper.clone(),
            inv,
            x: vec![0.0; nt],
            d: vec![0.0; nt],
        };
        st.compute_duals(lp, cost);
        st.repair_duals(lp, dual_tol(cost));
        st.compute_primal(lp);
        st
    }

    pub fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot {
            basic: self.basic.clone(),
            at_upper: self.at_upper.clone(),
        }
    }

    pub fn basic(&self) -> &[usize] {
        &self.basic
    }

    pub fn is_basic(&self, j: usize) -> bool {
        self.pos[j] != NOT_BASIC
    }

    pub fn at_upper(&self, j: usize) -> bool {
        self.at_upper[j]
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn reduced_costs(&self) -> &[f64] {
        &self.d
    }

    pub fn inverse(&self) -> &BasisInverse {
        &self.inv
    }

    /// Solves `B p = q`.
    pub fn ftran(&self, q: &[f64]) -> Vec<f64> {
        self.inv.ftran(q)
    }

    /// Solves `Bᵀ p = q`.
    pub fn btran(&self, q: &[f64]) -> Vec<f64> {
        self.inv.btran(q)
    }

    /// Largest sign violation of a nonbasic reduced cost (0 when dual feasible).
    pub fn dual_infeasibility(&self, lp: &StandardFormLp) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..lp.n_total() {
            if self.is_basic(j) || lp.lower[j] == lp.upper[j] {
                continue;
            }
            let v = if self.at_upper[j] { self.d[j] } else { -self.d[j] };
            worst = worst.max(v);
        }
        worst
    }

    fn nonbasic_value(&self, lp: &StandardFormLp, j: usize) -> f64 {
        if self.at_upper[j] {
            lp.upper[j]
        } else {
            lp.lower[j]
        }
    }

    /// `x_B = -B⁻¹ N x_N` with every nonbasic variable at its bound.
    fn compute_primal(&mut self, lp: &StandardFormLp) {
        let mut rhs = vec![0.0; lp.m];
        for j in 0..lp.n_total() {
            if self.is_basic(j) {
                continue;
            }
            let v = self.nonbasic_value(lp, j);
            self.x[j] = v;
            if v != 0.0 {
                lp.add_column(j, v, &mut rhs);
            }
        }
        let xb = self.inv.ftran(&rhs);
        for (r, &j) in self.basic.iter().enumerate() {
            self.x[j] = -xb[r];
        }
    }

    /// `d = c - Aᵀ y` with `Bᵀ y = c_B`.
    fn compute_duals(&mut self, lp: &StandardFormLp, cost: &[f64]) {
        let cb: Vec<f64> = self.basic.iter().map(|&j| cost[j]).collect();
        let y = self.inv.btran(&cb);
        price_all(lp, &y, &mut self.d);
        for (dj, cj) in self.d.iter_mut().zip(cost) {
            *dj = cj - *dj;
        }
        for &j in &self.basic {
            self.d[j] = 0.0;
        }
    }

    /// Moves every nonbasic variable whose reduced cost has the wrong sign
    /// to its other bound. Returns the number of flips; primal values of
    /// basic variables are stale afterwards.
    fn repair_duals(&mut self, lp: &StandardFormLp, tol: f64) -> usize {
        let mut flips = 0;
        for j in 0..lp.n_total() {
            if self.is_basic(j) || lp.lower[j] == lp.upper[j] {
                continue;
            }
            let wrong = if self.at_upper[j] { self.d[j] > tol } else { self.d[j] < -tol };
            if wrong {
                self.at_upper[j] = !self.at_upper[j];
                flips += 1;
            }
        }
        flips
    }

    fn refactor(&mut self, lp: &StandardFormLp, cost: &[f64]) {
        match BasisInverse::factor(lp, &self.basic) {
            Ok(inv) => self.inv = inv,
            Err(_) => {
                warn!("singular basis on refactorization; restarting from slack basis");
                *self = Self::slack(lp);
            }
        }
        self.compute_duals(lp, cost);
        self.repair_duals(lp, dual_tol(cost));
        self.compute_primal(lp);
    }

    /// Row with the largest bound violation and the bound it must reach.
    fn leaving_row(&self, lp: &StandardFormLp) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for (r, &j) in self.basic.iter().enumerate() {
            let v = self.x[j];
            let (viol, target) = if v < lp.lower[j] - primal_tol(lp.lower[j]) {
                (lp.lower[j] - v, lp.lower[j])
            } else if v > lp.upper[j] + primal_tol(lp.upper[j]) {
                (v - lp.upper[j], lp.upper[j])
            } else {
                continue;
            };
            if best.is_none_or(|b| viol > b.1) {
                best = Some((r, viol, target));
            }
        }
        best.map(|(r, _, t)| (r, t))
    }
}

fn primal_tol(bound: f64) -> f64 {
    PRIMAL_TOL * (1.0 + bound.abs())
}

fn dual_tol(cost: &[f64]) -> f64 {
    DUAL_TOL * cost.iter().fold(1.0f64, |a, c| a.max(c.abs()))
}

/// Cold start from the slack basis.
pub fn dual_simplex_solve(lp: &StandardFormLp, opts: &LpOptions) -> LpSolution {
    if lp.infeasible {
        return LpSolution::without_values(lp, LpStatus::Infeasible, 0, 0);
    }
    Solver::new(lp, BasisState::slack(lp), opts).run()
}

/// Warm start from a basis of a problem with the same columns and costs.
pub fn dual_simplex_warm(lp: &StandardFormLp, snap: &BasisSnapshot, opts: &LpOptions) -> LpSolution {
    if lp.infeasible {
        return LpSolution::without_values(lp, LpStatus::Infeasible, 0, 0);
    }
    let st = BasisState::from_snapshot(lp, snap, &lp.cost);
    Solver::new(lp, st, opts).run()
}

struct Solver<'a> {
    lp: &'a StandardFormLp,
    opts: &'a LpOptions,
    st: BasisState,
    cost: Vec<f64>,
    perturbed: bool,
    dtol: f64,
    iterations: usize,
    long_steps: usize,
    since_refactor: usize,
    stalled: usize,
    alpha: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(lp: &'a StandardFormLp, st: BasisState, opts: &'a LpOptions) -> Self {
        Self {
            lp,
            opts,
            st,
            cost: lp.cost.clone(),
            perturbed: false,
            dtol: dual_tol(&lp.cost),
            iterations: 0,
            long_steps: 0,
            since_refactor: 0,
            stalled: 0,
            alpha: vec![0.0; lp.n_total()],
        }
    }

    fn max_iterations(&self) -> usize {
        self.opts
            .max_iterations
            .unwrap_or(50 * self.lp.n_total() + 10_000)
    }

    fn run(mut self) -> LpSolution {
        let lp = self.lp;
        let limit = self.max_iterations();
        let mut final_rounds = 0;
        let mut confirmed_unbounded = false;
        loop {
            if self.iterations >= limit || self.past_deadline() {
                return self.finish(LpStatus::IterationLimit);
            }
            let Some((r, target)) = self.st.leaving_row(lp) else {
                if self.verify_optimal() {
                    return self.finish(LpStatus::Optimal);
                }
                final_rounds += 1;
                if final_rounds > MAX_FINAL_ROUNDS {
                    warn!("dual simplex did not settle after {MAX_FINAL_ROUNDS} final checks");
                    return self.finish(LpStatus::IterationLimit);
                }
                continue;
            };
            match self.iterate(r, target) {
                Step::Pivoted => confirmed_unbounded = false,
                Step::Restart => {}
                Step::DualUnbounded => {
                    // confirm on a fresh factorization before declaring infeasibility
                    if confirmed_unbounded || self.since_refactor == 0 {
                        return self.finish(LpStatus::Infeasible);
                    }
                    confirmed_unbounded = true;
                    self.refresh();
                }
            }
        }
    }

    fn past_deadline(&self) -> bool {
        self.iterations.is_multiple_of(32) && self.opts.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn refresh(&mut self) {
        self.st.refactor(self.lp, &self.cost);
        self.since_refactor = 0;
    }

    /// Removes any perturbation, recomputes everything from scratch and
    /// reports whether the basis is still primal and dual feasible.
    fn verify_optimal(&mut self) -> bool {
        if self.perturbed {
            self.cost.copy_from_slice(&self.lp.cost);
            self.perturbed = false;
            self.stalled = 0;
        }
        self.st.inv = match BasisInverse::factor(self.lp, &self.st.basic) {
            Ok(inv) => inv,
            Err(_) => {
                self.refresh();
                return false;
            }
        };
        self.since_refactor = 0;
        self.st.compute_duals(self.lp, &self.cost);
        let flips = self.st.repair_duals(self.lp, self.dtol);
        self.st.compute_primal(self.lp);
        flips == 0 && self.st.leaving_row(self.lp).is_none()
    }

    fn iterate(&mut self, r: usize, target: f64) -> Step {
        let lp = self.lp;
        let p = self.st.basic[r];
        let to_lower = self.st.x[p] < target;
        let delta = (self.st.x[p] - target).abs();

        let rho = self.st.inv.row(r).to_vec();
        price_all(lp, &rho, &mut self.alpha);

        // candidates of the long-step ratio test
        let dir = if to_lower { 1.0 } else { -1.0 };
        let mut cand = Vec::new();
        let mut scores = Vec::new();
        let mut costs = Vec::new();
        for j in 0..lp.n_total() {
            if self.st.is_basic(j) || lp.lower[j] == lp.upper[j] {
                continue;
            }
            let a = dir * self.alpha[j];
            let eligible = if self.st.at_upper[j] { a > PIVOT_TOL } else { a < -PIVOT_TOL };
            if eligible {
                cand.push(j);
                scores.push((self.st.d[j] / -a).max(0.0));
                costs.push(self.alpha[j].abs() * (lp.upper[j] - lp.lower[j]));
            }
        }
        let inst = BfrtInstance {
            scores,
            costs,
            budget: delta,
        };
        let variant = choose_variant(self.iterations, self.opts.bfrt);
        let sel = inst.select(variant);
        let Some(next) = sel.next else {
            return Step::DualUnbounded;
        };
        let q = cand[next];
        let alpha_rq = self.alpha[q];

        let col_q = self.st.inv.ftran(&lp.column(q));
        if (col_q[r] - alpha_rq).abs() > 1e-6 * (1.0 + alpha_rq.abs()) || col_q[r].abs() < PIVOT_TOL {
            debug!("pivot mismatch {} vs {alpha_rq}; refactoring", col_q[r]);
            self.refresh();
            return Step::Restart;
        }
        self.iterations += 1;

        // dual step
        let theta_d = self.st.d[q] / alpha_rq;
        if theta_d.abs() > 1e-12 {
            self.stalled = 0;
        } else {
            self.stalled += 1;
        }
        if theta_d != 0.0 {
            for j in 0..lp.n_total() {
                if !self.st.is_basic(j) {
                    self.st.d[j] -= theta_d * self.alpha[j];
                }
            }
        }
        self.st.d[q] = 0.0;
        self.st.d[p] = -theta_d;

        // bound flips: selected breakpoints plus any sign drift
        let mut shift = vec![0.0; lp.m];
        let mut flipped = 0;
        let mut flip = |st: &mut BasisState, j: usize| {
            let dx = if st.at_upper[j] { lp.lower[j] - lp.upper[j] } else { lp.upper[j] - lp.lower[j] };
            st.at_upper[j] = !st.at_upper[j];
            st.x[j] += dx;
            lp.add_column(j, dx, &mut shift);
            flipped += 1;
        };
        for &k in &sel.selected {
            flip(&mut self.st, cand[k]);
        }
        for j in 0..lp.n_total() {
            if j == q || j == p || self.st.is_basic(j) || lp.lower[j] == lp.upper[j] {
                continue;
            }
            let wrong = if self.st.at_upper[j] { self.st.d[j] > self.dtol } else { self.st.d[j] < -self.dtol };
            if wrong {
                flip(&mut self.st, j);
            }
        }
        if flipped > 0 {
            self.long_steps += 1;
            let dx_b = self.st.inv.ftran(&shift);
            for (i, &j) in self.st.basic.iter().enumerate() {
                self.st.x[j] -= dx_b[i];
            }
        }

        // primal step
        let theta_p = (self.st.x[p] - target) / col_q[r];
        for (i, &j) in self.st.basic.iter().enumerate() {
            self.st.x[j] -= theta_p * col_q[i];
        }
        self.st.x[q] += theta_p;
        self.st.x[p] = target;

        // basis change
        if self.st.inv.pivot(r, &col_q).is_err() {
            self.refresh();
            return Step::Restart;
        }
        self.st.basic[r] = q;
        self.st.pos[q] = r;
        self.st.pos[p] = NOT_BASIC;
        self.st.at_upper[p] = !to_lower;
        self.since_refactor += 1;

        if cfg!(debug_assertions) {
            let worst = self.st.dual_infeasibility(lp);
            debug_assert!(worst <= self.dtol.max(1e-7), "dual infeasibility {worst}");
        }

        if self.since_refactor >= REFACTOR_EVERY || self.st.inv.max_abs() > CONDITION_LIMIT {
            self.refresh();
        }
        if !self.perturbed && self.stalled > 5 * lp.n_total() {
            self.perturb();
        }
        Step::Pivoted
    }

    /// Nudges nonbasic costs away from zero reduced cost, in the direction
    /// that keeps the basis dual feasible.
    fn perturb(&mut self) {
        debug!("perturbing costs after {} stalled iterations", self.stalled);
        let lp = self.lp;
        for j in 0..lp.n_total() {
            if self.st.is_basic(j) || lp.lower[j] == lp.upper[j] {
                continue;
            }
            // deterministic spread in [0.5, 1)
            let spread = 0.5 + 0.5 * ((j.wrapping_mul(2_654_435_761) % 1024) as f64 / 1024.0);
            let eps = PERTURBATION * (1.0 + self.cost[j].abs()) * spread;
            let eps = if self.st.at_upper[j] { -eps } else { eps };
            self.cost[j] += eps;
            self.st.d[j] += eps;
        }
        self.perturbed = true;
        self.stalled = 0;
    }

    fn finish(self, status: LpStatus) -> LpSolution {
        let lp = self.lp;
        if status != LpStatus::Optimal {
            let mut sol = LpSolution::without_values(lp, status, self.iterations, self.long_steps);
            sol.basis = (status == LpStatus::IterationLimit).then(|| self.st.snapshot());
            return sol;
        }
        let x: Vec<f64> = (0..lp.n)
            .map(|j| self.st.x[j].clamp(lp.lower[j], lp.upper[j]))
            .collect();
        let objective = lp.objective(&x);
        support::record(lp, &x);
        LpSolution {
            x,
            objective,
            status,
            iterations: self.iterations,
            long_steps: self.long_steps,
            basis: Some(self.st.snapshot()),
        }
    }
}

enum Step {
    Pivoted,
    Restart,
    DualUnbounded,
}
