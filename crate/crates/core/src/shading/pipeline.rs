//! Layer-by-layer candidate reduction ending in the Dual Reducer.

use std::time::{Duration, Instant};

use log::{debug, info};
use serde::Serialize;

use super::hierarchy::Hierarchy;
use super::neighbor::{neighbor_sampling, random_sampling, Expansion};
use crate::ilp::{dual_reducer, DrDiagnostics, DualReducerConfig};
use crate::lp::{dual_simplex_solve, to_standard_form, LpOptions, LpStatus};
use crate::model::{check_feasible, ModelError, PackageQuery, PackageSolution, QueryModel, SolveStatus};

/// How the LP support of one layer is widened into candidates below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Augment {
    Neighbor,
    Random,
}

#[derive(Debug, Clone)]
pub struct ShadingConfig {
    /// Largest candidate set handed to any LP below the top layer.
    pub alpha: usize,
    pub augment: Augment,
    pub seed: u64,
    pub time_limit: Option<Duration>,
    pub lp: LpOptions,
    pub reducer: DualReducerConfig,
}

impl Default for ShadingConfig {
    fn default() -> Self {
        Self {
            alpha: 100_000,
            augment: Augment::Neighbor,
            seed: 0,
            time_limit: None,
            lp: LpOptions::default(),
            reducer: DualReducerConfig::default(),
        }
    }
}

/// One record per layer descent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerTrace {
    pub layer: usize,
    pub candidates: usize,
    pub lp_status: String,
    pub lp_objective: f64,
    pub lp_mass: f64,
    pub support: usize,
    pub expanded: usize,
    pub discovered: usize,
    pub probes: usize,
    pub next_candidates: usize,
}

#[derive(Debug, Clone)]
pub struct ShadingResult {
    pub solution: PackageSolution,
    pub trace: Vec<LayerTrace>,
    pub reducer: Option<DrDiagnostics>,
    /// Layer whose LP had no solution, when the descent stopped early.
    pub failed_layer: Option<usize>,
    /// Layer-0 tuple ids handed to the Dual Reducer.
    pub final_candidates: Vec<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum ShadingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("final package failed verification: {0}")]
    Verification(String),
}

/// Line-delimited JSON, one object per layer.
pub fn trace_lines(trace: &[LayerTrace]) -> String {
    trace
        .iter()
        .map(|t| serde_json::to_string(t).expect("trace serializes") + "\n")
        .collect()
}

enum Step {
    Next(Vec<usize>, LayerTrace),
    Stopped(SolveStatus, LayerTrace),
}

/// Solve the LP over candidates `s_l` of layer `l >= 1` and expand its
/// support into candidates of layer `l - 1`.
fn shading_step(
    h: &Hierarchy,
    l: usize,
    s_l: &[usize],
    model: &QueryModel,
    cap: f64,
    cfg: &ShadingConfig,
    deadline: Option<Instant>,
) -> Step {
    let rel = &h.layer(l).relation;
    let mut nq = model.formulate_capped(rel, s_l, cap);
    // a representative may stand in for every tuple of its group
    let cov = h.coverage(l);
    for (u, &i) in nq.var_upper.iter_mut().zip(s_l) {
        *u *= cov[i] as f64;
    }
    let lp = to_standard_form(&nq);
    let opts = LpOptions {
        deadline: deadline.or(cfg.lp.deadline),
        ..cfg.lp.clone()
    };
    let sol = dual_simplex_solve(&lp, &opts);
    let mut trace = LayerTrace {
        layer: l,
        candidates: s_l.len(),
        lp_status: format!("{:?}", sol.status).to_lowercase(),
        lp_objective: f64::NAN,
        lp_mass: f64::NAN,
        support: 0,
        expanded: 0,
        discovered: 0,
        probes: 0,
        next_candidates: 0,
    };
    match sol.status {
        LpStatus::Infeasible => return Step::Stopped(SolveStatus::Infeasible, trace),
        LpStatus::IterationLimit => return Step::Stopped(SolveStatus::Timeout, trace),
        LpStatus::Optimal => {}
    }
    trace.lp_objective = nq.reported(sol.objective);
    trace.lp_mass = sol.x.iter().sum();
    let support: Vec<usize> = sol
        .x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > crate::lp::support::SUPPORT_THRESHOLD)
        .map(|(p, _)| s_l[p])
        .collect();
    trace.support = support.len();
    let exp: Expansion = match cfg.augment {
        Augment::Neighbor => neighbor_sampling(h, l, cfg.alpha, &support),
        Augment::Random => random_sampling(h, l, cfg.alpha, &support, cfg.seed ^ l as u64),
    };
    trace.expanded = exp.expanded;
    trace.discovered = exp.discovered;
    trace.probes = exp.probes;
    trace.next_candidates = exp.tuples.len();
    debug!("layer {l}: {} candidates, support {}, next {}", s_l.len(), support.len(), exp.tuples.len());
    Step::Next(exp.tuples, trace)
}

pub fn progressive_shading(h: &Hierarchy, query: &PackageQuery, cfg: &ShadingConfig) -> Result<ShadingResult, ShadingError> {
    let started = Instant::now();
    let deadline = cfg.time_limit.map(|t| started + t);
    let base = &h.layer(0).relation;
    let model = QueryModel::compile(query, base.names())?;
    let cap = model.cap_for(base.n_tuples());
    let top = h.depth();
    let mut candidates: Vec<usize> = (0..h.layer(top).relation.n_tuples()).collect();
    let mut trace = Vec::with_capacity(top);
    for l in (1..=top).rev() {
        match shading_step(h, l, &candidates, &model, cap, cfg, deadline) {
            Step::Next(next, t) => {
                trace.push(t);
                candidates = next;
            }
            Step::Stopped(status, t) => {
                info!("layer {l} LP ended {status}; stopping");
                trace.push(t);
                return Ok(ShadingResult {
                    solution: PackageSolution::empty(status),
                    trace,
                    reducer: None,
                    failed_layer: Some(l),
                    final_candidates: Vec::new(),
                });
            }
        }
    }

    let nq = model.formulate_capped(base, &candidates, cap);
    let reducer = DualReducerConfig {
        time_limit: deadline
            .map(|d| d.saturating_duration_since(Instant::now()))
            .or(cfg.reducer.time_limit),
        ..cfg.reducer.clone()
    };
    let (solution, diag) = dual_reducer(&nq, &[], &reducer);
    if solution.status.has_package() {
        let ids: Vec<usize> = solution.multiplicities.keys().copied().collect();
        let check = model.formulate_capped(base, &ids, cap);
        let report = check_feasible(&solution, &check);
        if !report.is_feasible() {
            return Err(ShadingError::Verification(format!("{report:?}")));
        }
    }
    info!(
        "progressive shading: {} in {:.3}s",
        solution.status,
        started.elapsed().as_secs_f64()
    );
    Ok(ShadingResult {
        solution,
        trace,
        reducer: Some(diag),
        failed_layer: None,
        final_candidates: candidates,
    })
}
