//! Best-bound branch and bound over the dual simplex.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use log::debug;

use super::repair::repair;
use crate::lp::{
    dual_simplex_solve, dual_simplex_warm, to_standard_form, BasisSnapshot, BasisState, LpOptions, LpSolution, LpStatus,
    StandardFormLp,
};
use crate::model::{check_feasible, NormalizedQuery, PackageSolution, SolveStatus};

pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const MIP_GAP: f64 = 1e-3;
const REPAIR_STEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct BnbOptions {
    pub node_limit: Option<usize>,
    pub deadline: Option<Instant>,
    /// Relative gap between incumbent and best bound at which search stops.
    pub mip_gap: f64,
    /// Ignore the objective and stop at the first integral feasible point.
    pub feasibility_only: bool,
    pub lp: LpOptions,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            node_limit: None,
            deadline: None,
            mip_gap: MIP_GAP,
            feasibility_only: false,
            lp: LpOptions::default(),
        }
    }
}

/// A normalized query together with its LP relaxation.
#[derive(Debug, Clone)]
pub struct IlpInstance {
    pub query: NormalizedQuery,
    pub lp: StandardFormLp,
}

impl IlpInstance {
    pub fn new(query: NormalizedQuery) -> Self {
        let lp = to_standard_form(&query);
        Self { query, lp }
    }
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    pub solution: PackageSolution,
    /// Root relaxation objective in the query's own sense (NaN if none).
    pub lp_bound: f64,
    pub root_status: LpStatus,
    pub nodes: usize,
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    /// (variable, lower, upper) overrides accumulated from the root.
    changes: Vec<(usize, f64, f64)>,
    basis: Option<Arc<BasisSnapshot>>,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    // max-heap: lowest bound first, then deeper, then older
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&o.depth))
            .then(o.seq.cmp(&self.seq))
    }
}

pub fn branch_and_bound(nq: &NormalizedQuery, opts: &BnbOptions) -> BnbResult {
    let inst = if opts.feasibility_only {
        IlpInstance::new(nq.feasibility_only())
    } else {
        IlpInstance::new(nq.clone())
    };
    solve_instance(&inst, nq, opts)
}

pub fn solve_instance(inst: &IlpInstance, report: &NormalizedQuery, opts: &BnbOptions) -> BnbResult {
    let lp_opts = LpOptions {
        deadline: opts.deadline.or(opts.lp.deadline),
        ..opts.lp.clone()
    };
    let root = dual_simplex_solve(&inst.lp, &lp_opts);
    let mut result = BnbResult {
        solution: PackageSolution::empty(SolveStatus::Infeasible),
        lp_bound: if root.status == LpStatus::Optimal {
            report.reported(report.internal_objective(&root.x))
        } else {
            f64::NAN
        },
        root_status: root.status,
        nodes: 1,
    };
    match root.status {
        LpStatus::Infeasible => return result,
        LpStatus::IterationLimit => {
            result.solution.status = SolveStatus::Timeout;
            return result;
        }
        LpStatus::Optimal => {}
    }

    let out = search_from(inst, opts, &lp_opts, root, f64::INFINITY);
    result.nodes = out.nodes;
    result.solution = match out.best {
        Some((_, x)) => {
            let status = if out.exhausted && !opts.feasibility_only {
                SolveStatus::Optimal
            } else {
                SolveStatus::Feasible
            };
            report.package(&x, status)
        }
        None if out.exhausted => PackageSolution::empty(SolveStatus::Infeasible),
        None => PackageSolution::empty(SolveStatus::Timeout),
    };
    debug!(
        "branch and bound: {} nodes, status {}",
        result.nodes, result.solution.status
    );
    result
}

struct Outcome {
    /// Internal objective and multiplicities of the best point found.
    best: Option<(f64, Vec<u64>)>,
    /// Every open node was either solved or pruned by bound.
    exhausted: bool,
    nodes: usize,
}

/// Searches the tree below an optimal root, looking only for points with
/// internal objective below `cutoff`.
fn search_from(inst: &IlpInstance, opts: &BnbOptions, lp_opts: &LpOptions, root: LpSolution, cutoff: f64) -> Outcome {
    let mut search = Search {
        inst,
        opts,
        lp_opts: lp_opts.clone(),
        incumbent: None,
        incumbent_obj: cutoff,
        heap: BinaryHeap::new(),
        seq: 0,
        nodes: 1,
        incomplete: false,
    };
    let root_obj = root.objective;
    let root_basis = root.basis.clone();
    search.process(&[], 0, root);

    if !opts.feasibility_only && search.incumbent_obj.is_finite() && !search.heap.is_empty() {
        let keep = root_basis
            .as_ref()
            .and_then(|b| unfixed(&inst.lp, root_obj, b, search.cutoff()));
        if let Some(keep) = keep.filter(|k| k.len() * 10 <= inst.lp.n * 9) {
            debug!("reduced-cost fixing keeps {} of {} variables", keep.len(), inst.lp.n);
            let sub = IlpInstance::new(inst.query.restrict(&keep));
            let sub_root = dual_simplex_solve(&sub.lp, lp_opts);
            let inner = match sub_root.status {
                LpStatus::Optimal => search_from(&sub, opts, lp_opts, sub_root, search.incumbent_obj),
                status => Outcome {
                    best: None,
                    exhausted: status == LpStatus::Infeasible,
                    nodes: 1,
                },
            };
            let best = match inner.best {
                Some((obj, xs)) => {
                    let mut full = vec![0; inst.lp.n];
                    for (k, &j) in keep.iter().enumerate() {
                        full[j] = xs[k];
                    }
                    Some((obj, full))
                }
                None => search.incumbent.map(|x| (search.incumbent_obj, x)),
            };
            return Outcome {
                best,
                exhausted: inner.exhausted && !search.incomplete,
                nodes: search.nodes + inner.nodes,
            };
        }
    }

    let mut stopped = false;
    while let Some(node) = search.heap.pop() {
        if search.prunable(node.bound) {
            continue;
        }
        if search.done() {
            stopped = true;
            search.heap.push(node);
            break;
        }
        let mut lp = inst.lp.clone();
        for &(j, l, u) in &node.changes {
            lp.lower[j] = l;
            lp.upper[j] = u;
        }
        let sol = match &node.basis {
            Some(b) => dual_simplex_warm(&lp, b, &search.lp_opts),
            None => dual_simplex_solve(&lp, &search.lp_opts),
        };
        search.nodes += 1;
        search.process(&node.changes, node.depth, sol);
    }
    Outcome {
        exhausted: !stopped && search.heap.is_empty() && !search.incomplete,
        nodes: search.nodes,
        best: search.incumbent.map(|x| (search.incumbent_obj, x)),
    }
}

/// Variables that reduced-cost fixing leaves free. A variable nonbasic at a
/// zero lower bound whose reduced cost alone lifts the root bound past
/// `cutoff` is zero in every point below the cutoff.
fn unfixed(lp: &StandardFormLp, root_obj: f64, basis: &BasisSnapshot, cutoff: f64) -> Option<Vec<usize>> {
    let st = BasisState::from_snapshot(lp, basis, &lp.cost);
    if st.basic() != basis.basic.as_slice() {
        return None;
    }
    let d = st.reduced_costs();
    let room = cutoff - root_obj;
    Some(
        (0..lp.n)
            .filter(|&j| st.is_basic(j) || st.at_upper(j) || lp.lower[j] != 0.0 || d[j] <= room)
            .collect(),
    )
}

struct Search<'a> {
    inst: &'a IlpInstance,
    opts: &'a BnbOptions,
    lp_opts: LpOptions,
    incumbent: Option<Vec<u64>>,
    incumbent_obj: f64,
    heap: BinaryHeap<Node>,
    seq: usize,
    nodes: usize,
    /// Some subtree was dropped for a reason other than its bound.
    incomplete: bool,
}

impl Search<'_> {
    fn done(&self) -> bool {
        if self.opts.feasibility_only && self.incumbent.is_some() {
            return true;
        }
        if self.opts.node_limit.is_some_and(|l| self.nodes >= l) {
            return true;
        }
        self.opts.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Objective a new point must beat to matter.
    fn cutoff(&self) -> f64 {
        if self.incumbent_obj.is_finite() {
            self.incumbent_obj - self.opts.mip_gap * self.incumbent_obj.abs() - 1e-9
        } else {
            f64::INFINITY
        }
    }

    fn prunable(&self, bound: f64) -> bool {
        bound >= self.cutoff()
    }

    fn try_incumbent(&mut self, x: Vec<u64>) -> bool {
        let q = &self.inst.query;
        let sol = q.package(&x, SolveStatus::Feasible);
        if !check_feasible(&sol, q).is_feasible() {
            return false;
        }
        let obj = q.internal_objective(&x.iter().map(|&v| v as f64).collect::<Vec<_>>());
        if obj < self.incumbent_obj {
            debug!("new incumbent {obj}");
            self.incumbent_obj = obj;
            self.incumbent = Some(x);
        }
        true
    }

    fn process(&mut self, changes: &[(usize, f64, f64)], depth: usize, sol: LpSolution) {
        match sol.status {
            LpStatus::Infeasible => return,
            LpStatus::IterationLimit => {
                self.incomplete = true;
                return;
            }
            LpStatus::Optimal => {}
        }
        if self.prunable(sol.objective) {
            return;
        }
        let x = &sol.x;
        let rounded: Vec<u64> = x.iter().map(|v| v.round().max(0.0) as u64).collect();
        let integral = x.iter().all(|v| (v - v.round()).abs() <= INTEGRALITY_TOL);
        if integral && self.try_incumbent(rounded.clone()) {
            return;
        }
        if !integral {
            // rounding heuristic: nearest, then floor
            if !self.try_incumbent(rounded.clone()) {
                let floored: Vec<u64> = x.iter().map(|v| (v + INTEGRALITY_TOL).floor().max(0.0) as u64).collect();
                self.try_incumbent(floored);
            }
            // local search at the root and then ever more sparsely
            if self.nodes.is_power_of_two() {
                // first aim at the node bound itself, then at anything better than the incumbent
                let ambitious = (sol.objective + self.opts.mip_gap * sol.objective.abs() + 1e-9).min(self.cutoff());
                let q = &self.inst.query;
                let deadline = self.opts.deadline;
                let found = repair(q, &rounded, ambitious, REPAIR_STEPS, deadline).or_else(|| {
                    (self.cutoff() > ambitious)
                        .then(|| repair(q, &rounded, self.cutoff(), REPAIR_STEPS, deadline))
                        .flatten()
                });
                if let Some(found) = found {
                    self.try_incumbent(found);
                }
            }
            if self.prunable(sol.objective) || (self.opts.feasibility_only && self.incumbent.is_some()) {
                return;
            }
        }
        // most fractional variable; integral points that failed the exact check
        // branch on the largest deviation from an integer
        let mut branch: Option<(usize, f64)> = None;
        for (j, &v) in x.iter().enumerate() {
            let f = (v - v.floor()).min(v.ceil() - v);
            if f > 0.0 && branch.is_none_or(|b| f > b.1) {
                branch = Some((j, f));
            }
        }
        let Some((j, _)) = branch else {
            self.incomplete = true;
            return;
        };
        let v = x[j];
        let basis = sol.basis.map(Arc::new);
        let (lo, hi) = self.bounds_of(changes, j);
        let down = v.floor().max(lo);
        let up = v.ceil().min(hi);
        for (l, u) in [(lo, down), (up, hi)] {
            if l > u {
                continue;
            }
            let mut ch = changes.to_vec();
            ch.retain(|c| c.0 != j);
            ch.push((j, l, u));
            self.seq += 1;
            self.heap.push(Node {
                bound: sol.objective,
                depth: depth + 1,
                seq: self.seq,
                changes: ch,
                basis: basis.clone(),
            });
        }
    }

    fn bounds_of(&self, changes: &[(usize, f64, f64)], j: usize) -> (f64, f64) {
        changes
            .iter()
            .rev()
            .find(|c| c.0 == j)
            .map_or((self.inst.lp.lower[j], self.inst.lp.upper[j]), |c| (c.1, c.2))
    }
}
