//! Dual Reducer: shrink an ILP to the support of two LP solutions, solve
//! that sub-ILP exactly, and widen it by sampling when it proves infeasible.

use std::time::{Duration, Instant};

use log::{debug, info};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::bnb::{solve_instance, BnbOptions, IlpInstance};
use crate::lp::{dual_simplex_solve, dual_simplex_warm, to_standard_form, LpOptions, LpStatus};
use crate::model::{check_feasible, NormalizedQuery, PackageSolution, SolveStatus};

/// LP values above this count as positive.
pub const POSITIVE: f64 = 1e-9;

/// How the sub-ILP support is widened beyond the LP support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    /// Support of an auxiliary LP whose caps are `E / q`.
    AuxiliaryLp,
    /// Each tuple independently with probability `q / n`.
    Random,
}

#[derive(Debug, Clone)]
pub struct DualReducerConfig {
    pub q: usize,
    pub time_limit: Option<Duration>,
    pub seed: u64,
    /// Cap on doubling rounds; `None` keeps doubling until all tuples are in.
    pub max_fallbacks: Option<usize>,
    pub augment: AugmentMode,
    pub bnb: BnbOptions,
}

impl Default for DualReducerConfig {
    fn default() -> Self {
        Self {
            q: 5000,
            time_limit: None,
            seed: 0,
            max_fallbacks: None,
            augment: AugmentMode::AuxiliaryLp,
            bnb: BnbOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DrDiagnostics {
    /// Sum of the LP solution.
    pub lp_mass: f64,
    /// LP objective in the query's sense.
    pub lp_objective: f64,
    pub lp_support: usize,
    pub aux_support: usize,
    pub fallbacks: usize,
    pub final_size: usize,
    pub seed: u64,
    pub nodes: usize,
}

/// Runs on the variables at positions `subset` of `nq`; an empty `subset`
/// means all of them. Returned tuple ids are those of `nq`.
pub fn dual_reducer(nq: &NormalizedQuery, subset: &[usize], cfg: &DualReducerConfig) -> (PackageSolution, DrDiagnostics) {
    let started = Instant::now();
    let deadline = cfg.time_limit.map(|t| started + t);
    let sub = if subset.is_empty() { nq.clone() } else { nq.restrict(subset) };
    let n = sub.n_vars();
    let mut diag = DrDiagnostics {
        seed: cfg.seed,
        lp_objective: f64::NAN,
        ..DrDiagnostics::default()
    };
    let lp_opts = LpOptions {
        deadline,
        ..cfg.bnb.lp.clone()
    };

    let lp = to_standard_form(&sub);
    let root = dual_simplex_solve(&lp, &lp_opts);
    match root.status {
        LpStatus::Infeasible => return (PackageSolution::empty(SolveStatus::Infeasible), diag),
        LpStatus::IterationLimit => return (PackageSolution::empty(SolveStatus::Timeout), diag),
        LpStatus::Optimal => {}
    }
    let x = &root.x;
    diag.lp_mass = x.iter().sum();
    diag.lp_objective = sub.reported(root.objective);
    let mut chosen: Vec<bool> = x.iter().map(|&v| v > POSITIVE).collect();
    diag.lp_support = chosen.iter().filter(|&&c| c).count();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut q = cfg.q.max(1).min(n);
    if n > q {
        match cfg.augment {
            AugmentMode::AuxiliaryLp => {
                let cap = diag.lp_mass / q as f64;
                let mut aux = lp.clone();
                for j in 0..n {
                    aux.upper[j] = aux.upper[j].min(cap);
                }
                let y = match &root.basis {
                    Some(b) => dual_simplex_warm(&aux, b, &lp_opts),
                    None => dual_simplex_solve(&aux, &lp_opts),
                };
                if y.status == LpStatus::Optimal {
                    for (c, &v) in chosen.iter_mut().zip(&y.x) {
                        *c |= v > POSITIVE;
                    }
                    diag.aux_support = y.x.iter().filter(|&&v| v > POSITIVE).count();
                } else {
                    debug!("auxiliary LP ended with {:?}", y.status);
                }
            }
            AugmentMode::Random => {
                let p = q as f64 / n as f64;
                for c in chosen.iter_mut() {
                    let pick = rng.random::<f64>() < p;
                    *c |= pick;
                    diag.aux_support += usize::from(pick);
                }
            }
        }
    } else {
        chosen.iter_mut().for_each(|c| *c = true);
    }

    let mut fallbacks = 0;
    loop {
        let vars: Vec<usize> = (0..n).filter(|&j| chosen[j]).collect();
        diag.final_size = vars.len();
        let query = sub.restrict(&vars);
        let inst = if cfg.bnb.feasibility_only {
            IlpInstance::new(query.feasibility_only())
        } else {
            IlpInstance::new(query.clone())
        };
        let bnb = BnbOptions {
            deadline: deadline.or(cfg.bnb.deadline),
            ..cfg.bnb.clone()
        };
        let res = solve_instance(&inst, &query, &bnb);
        diag.nodes += res.nodes;
        let whole = vars.len() == n;
        if res.solution.status.has_package() {
            let mut sol = res.solution;
            if !whole && sol.status == SolveStatus::Optimal {
                sol.status = SolveStatus::Feasible;
            }
            debug_assert!(check_feasible(&sol, nq).is_feasible());
            diag.fallbacks = fallbacks;
            return (sol, diag);
        }
        let timed_out = deadline.is_some_and(|d| Instant::now() >= d);
        if whole || timed_out || cfg.max_fallbacks.is_some_and(|m| fallbacks >= m) {
            diag.fallbacks = fallbacks;
            let status = if timed_out || res.solution.status == SolveStatus::Timeout {
                SolveStatus::Timeout
            } else {
                SolveStatus::Infeasible
            };
            // a q-restricted failure is only evidence, not proof, of infeasibility
            return (PackageSolution::empty(status), diag);
        }
        fallbacks += 1;
        q = (2 * q).min(n);
        while q <= vars.len() && q < n {
            q = (2 * q).min(n);
        }
        let outside: Vec<usize> = (0..n).filter(|&j| !chosen[j]).collect();
        let want = q.saturating_sub(vars.len()).min(outside.len());
        for k in sample(&mut rng, outside.len(), want) {
            chosen[outside[k]] = true;
        }
        info!("sub-ILP over {} tuples failed; widening to {}", vars.len(), vars.len() + want);
    }
}
