//! Runs every (dataset, seed, hardness, method) combination and collects
//! one row per run.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use log::info;
use pq_core::ilp::{branch_and_bound, dual_reducer, AugmentMode, BnbOptions, DualReducerConfig};
use pq_core::lp::{solve_relaxation, LpOptions, LpStatus};
use pq_core::model::{integrality_gap, normalize_query, PackageQuery, PackageSolution, SolveStatus};
use pq_core::partition::PartitionConfig;
use pq_core::shading::{progressive_shading, Augment, Hierarchy, HierarchyError, ShadingConfig, ShadingError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{Dataset, DatasetError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ProgressiveShading,
    /// Progressive shading with random instead of neighbour augmentation.
    ShadingRandom,
    DualReducer,
    /// Dual Reducer with random instead of auxiliary-LP augmentation.
    ReducerRandom,
    Exact,
    /// Exact search with the objective removed: stops at the first package.
    ExactFeasibility,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ProgressiveShading => "progressive_shading",
            Method::ShadingRandom => "shading_random",
            Method::DualReducer => "dual_reducer",
            Method::ReducerRandom => "reducer_random",
            Method::Exact => "exact",
            Method::ExactFeasibility => "exact_feasibility",
        }
    }

    fn uses_hierarchy(self) -> bool {
        matches!(self, Method::ProgressiveShading | Method::ShadingRandom)
    }
}

fn default_alpha() -> usize {
    100_000
}
fn default_downscale() -> usize {
    100
}
fn default_q() -> usize {
    5000
}
fn default_time_limit() -> f64 {
    300.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub datasets: Vec<Dataset>,
    pub tuples: usize,
    pub hardness: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    #[serde(default = "default_alpha")]
    pub alpha: usize,
    #[serde(default = "default_downscale")]
    pub downscale: usize,
    #[serde(default = "default_q")]
    pub q: usize,
    /// Per-run cap in seconds.
    #[serde(default = "default_time_limit")]
    pub time_limit_secs: f64,
    /// Doubling rounds allowed to the Dual Reducer; `None` is unlimited.
    #[serde(default)]
    pub max_fallbacks: Option<usize>,
}

impl SuiteConfig {
    pub fn new(datasets: Vec<Dataset>, tuples: usize, hardness: Vec<f64>, seeds: Vec<u64>, methods: Vec<Method>) -> Self {
        Self {
            datasets,
            tuples,
            hardness,
            seeds,
            methods,
            alpha: default_alpha(),
            downscale: default_downscale(),
            q: default_q(),
            time_limit_secs: default_time_limit(),
            max_fallbacks: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub dataset: String,
    pub seed: u64,
    pub hardness: f64,
    pub method: Method,
    pub status: SolveStatus,
    pub wall_secs: f64,
    pub objective: Option<f64>,
    /// LP relaxation over the whole relation, in the query's sense.
    pub lp_bound: Option<f64>,
    pub gap: Option<f64>,
    pub fallbacks: Option<usize>,
    pub package_size: u64,
    /// Candidate-set size at each stage, from the full relation down.
    pub candidates: Vec<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Model(#[from] pq_core::model::ModelError),
    #[error(transparent)]
    Shading(#[from] ShadingError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Independent stream for `tag` derived from one top-level seed.
pub fn fan_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Instance {
    dataset: Dataset,
    seed: u64,
    hierarchy: Hierarchy,
}

struct Job<'a> {
    inst: &'a Instance,
    hardness: f64,
    query: &'a PackageQuery,
    lp_bound: Option<f64>,
    method: Method,
}

fn reducer_config(cfg: &SuiteConfig, seed: u64, augment: AugmentMode, limit: Duration) -> DualReducerConfig {
    DualReducerConfig {
        q: cfg.q,
        time_limit: Some(limit),
        seed,
        max_fallbacks: cfg.max_fallbacks,
        augment,
        bnb: BnbOptions::default(),
    }
}

fn run_job(job: &Job, cfg: &SuiteConfig) -> Result<BenchRow, SuiteError> {
    let limit = Duration::from_secs_f64(cfg.time_limit_secs);
    let rel = &job.inst.hierarchy.layer(0).relation;
    let n = rel.n_tuples();
    let run_seed = fan_seed(job.inst.seed, job.hardness.to_bits() ^ job.method as u64);
    let started = Instant::now();
    let (solution, fallbacks, candidates): (PackageSolution, Option<usize>, Vec<usize>) = match job.method {
        Method::ProgressiveShading | Method::ShadingRandom => {
            let sc = ShadingConfig {
                alpha: cfg.alpha,
                augment: if job.method == Method::ProgressiveShading {
                    Augment::Neighbor
                } else {
                    Augment::Random
                },
                seed: run_seed,
                time_limit: Some(limit),
                lp: LpOptions::default(),
                reducer: reducer_config(cfg, run_seed, AugmentMode::AuxiliaryLp, limit),
            };
            let res = progressive_shading(&job.inst.hierarchy, job.query, &sc)?;
            let mut cands: Vec<usize> = res.trace.iter().map(|t| t.candidates).collect();
            if res.failed_layer.is_none() {
                cands.push(res.final_candidates.len());
            }
            (res.solution, res.reducer.map(|d| d.fallbacks), cands)
        }
        Method::DualReducer | Method::ReducerRandom => {
            let augment = if job.method == Method::DualReducer {
                AugmentMode::AuxiliaryLp
            } else {
                AugmentMode::Random
            };
            let nq = normalize_query(job.query, rel)?;
            let (sol, diag) = dual_reducer(&nq, &[], &reducer_config(cfg, run_seed, augment, limit));
            (sol, Some(diag.fallbacks), vec![n, diag.final_size])
        }
        Method::Exact | Method::ExactFeasibility => {
            let nq = normalize_query(job.query, rel)?;
            let opts = BnbOptions {
                deadline: Some(started + limit),
                feasibility_only: job.method == Method::ExactFeasibility,
                ..BnbOptions::default()
            };
            (branch_and_bound(&nq, &opts).solution, None, vec![n])
        }
    };
    let wall = started.elapsed().as_secs_f64();
    let sense = job.query.objective.as_ref().map(|o| o.sense);
    let has = solution.status.has_package();
    let gap = match (has, job.lp_bound, sense) {
        (true, Some(lp), Some(s)) => integrality_gap(solution.objective, lp, s).ok(),
        _ => None,
    };
    Ok(BenchRow {
        dataset: job.inst.dataset.name().to_string(),
        seed: job.inst.seed,
        hardness: job.hardness,
        method: job.method,
        status: solution.status,
        wall_secs: wall,
        objective: has.then_some(solution.objective),
        lp_bound: job.lp_bound,
        gap,
        fallbacks,
        package_size: solution.size(),
        candidates,
    })
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<BenchRow>, SuiteError> {
    let needs_layers = cfg.methods.iter().any(|m| m.uses_hierarchy());
    let pcfg = PartitionConfig {
        downscale: cfg.downscale,
        ..PartitionConfig::default()
    };
    let mut instances = Vec::new();
    for &dataset in &cfg.datasets {
        for &seed in &cfg.seeds {
            let rel = dataset.template().relation(cfg.tuples, fan_seed(seed, dataset as u64))?;
            let alpha = if needs_layers { cfg.alpha } else { usize::MAX };
            let hierarchy = Hierarchy::build(rel, alpha, &pcfg)?;
            info!("{} seed {seed}: layers {:?}", dataset.name(), hierarchy.layer_sizes());
            instances.push(Instance { dataset, seed, hierarchy });
        }
    }
    let mut queries = Vec::new();
    for inst in &instances {
        for &h in &cfg.hardness {
            queries.push((inst, h, inst.dataset.template().query(h)?));
        }
    }
    let bounds: Vec<Option<f64>> = queries
        .par_iter()
        .map(|(inst, _, q)| -> Result<Option<f64>, SuiteError> {
            let nq = normalize_query(q, &inst.hierarchy.layer(0).relation)?;
            let lp = solve_relaxation(&nq, &LpOptions::default());
            Ok((lp.status == LpStatus::Optimal && q.objective.is_some()).then(|| nq.reported(lp.objective)))
        })
        .collect::<Result<_, _>>()?;
    let jobs: Vec<Job> = queries
        .iter()
        .zip(&bounds)
        .flat_map(|((inst, h, q), &lp_bound)| {
            cfg.methods.iter().map(move |&method| Job {
                inst,
                hardness: *h,
                query: q,
                lp_bound,
                method,
            })
        })
        .collect();
    jobs.par_iter().map(|j| run_job(j, cfg)).collect()
}

/// Rows with wall time zeroed, for run-to-run comparison.
pub fn without_timing(rows: &[BenchRow]) -> Vec<BenchRow> {
    rows.iter()
        .map(|r| BenchRow {
            wall_secs: 0.0,
            ..r.clone()
        })
        .collect()
}

#[derive(Serialize)]
struct CsvRow<'a> {
    dataset: &'a str,
    seed: u64,
    hardness: f64,
    method: &'static str,
    status: String,
    wall_secs: f64,
    objective: Option<f64>,
    lp_bound: Option<f64>,
    gap: Option<f64>,
    fallbacks: Option<usize>,
    package_size: u64,
    candidates: String,
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<(), SuiteError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            dataset: &r.dataset,
            seed: r.seed,
            hardness: r.hardness,
            method: r.method.name(),
            status: r.status.to_string(),
            wall_secs: r.wall_secs,
            objective: r.objective,
            lp_bound: r.lp_bound,
            gap: r.gap,
            fallbacks: r.fallbacks,
            package_size: r.package_size,
            candidates: r.candidates.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub dataset: String,
    pub method: Method,
    pub hardness: f64,
    pub runs: usize,
    pub solved: usize,
    pub mean_gap: Option<f64>,
    pub mean_wall_secs: f64,
}

/// Aggregates by (dataset, method, hardness), in that order.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryEntry> {
    let mut groups: BTreeMap<(String, Method, u64), Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        // hardness levels are non-negative, so bit order is numeric order
        groups
            .entry((r.dataset.clone(), r.method, r.hardness.to_bits()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((dataset, method, h), rs)| {
            let gaps: Vec<f64> = rs.iter().filter_map(|r| r.gap).collect();
            SummaryEntry {
                dataset,
                method,
                hardness: f64::from_bits(h),
                runs: rs.len(),
                solved: rs.iter().filter(|r| r.status.has_package()).count(),
                mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
                mean_wall_secs: rs.iter().map(|r| r.wall_secs).sum::<f64>() / rs.len() as f64,
            }
        })
        .collect()
}
