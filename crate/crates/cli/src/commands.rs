//! `pq ingest | partition | solve | bench`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use pq_bench::{fan_seed, run_suite, summarize, write_csv, SuiteConfig};
use pq_core::ilp::DualReducerConfig;
use pq_core::lp::{solve_relaxation, LpOptions, LpStatus};
use pq_core::model::{integrality_gap, PackageQuery, QueryModel, SolveStatus};
use pq_core::partition::{PartitionConfig, Scale, ScaleSearch};
use pq_core::shading::{progressive_shading, trace_lines, Augment, Hierarchy, ShadingConfig};
use serde::Serialize;

use crate::ingest::{ingest_csv, load_query, load_relation, write_cache};

pub const DEFAULT_ALPHA: usize = 100_000;
pub const DEFAULT_DOWNSCALE: usize = 100;
pub const DEFAULT_Q: usize = 5000;

/// Settings shared by the commands, with their documented defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: usize,
    pub downscale: usize,
    pub q: usize,
    /// Uniform scale factor replacing the per-attribute search.
    pub scale: Option<f64>,
    pub threads: Option<usize>,
    pub seed: u64,
    pub time_limit: Option<Duration>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            downscale: DEFAULT_DOWNSCALE,
            q: DEFAULT_Q,
            scale: None,
            threads: None,
            seed: 0,
            time_limit: None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pq", version, about = "Package queries over large relations")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Top-level seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a CSV file into a columnar value file.
    Ingest(IngestArgs),
    /// Build and save the layer hierarchy of a relation.
    Partition(PartitionArgs),
    /// Answer a package query.
    Solve(SolveArgs),
    /// Run a benchmark suite described by a JSON config.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct LayerArgs {
    /// Downscale factor between adjacent layers.
    #[arg(long = "df", default_value_t = DEFAULT_DOWNSCALE)]
    pub downscale: usize,
    /// Uniform scale factor instead of the per-attribute search.
    #[arg(long = "c")]
    pub scale: Option<f64>,
    /// Bucket capacity for partitioning very large layers.
    #[arg(long)]
    pub bucket: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    /// A `.csv` file or a value file.
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Largest top layer.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: usize,
    #[command(flatten)]
    pub layers: LayerArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AugmentArg {
    Neighbor,
    Random,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// PaQL text, or the same query as JSON.
    #[arg(long)]
    pub query: PathBuf,
    /// Saved hierarchy directory.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub hierarchy: Option<PathBuf>,
    /// Relation (`.csv` or value file); its hierarchy is built in memory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Augmenting size [default: the hierarchy's, else 100000].
    #[arg(long)]
    pub alpha: Option<usize>,
    #[command(flatten)]
    pub layers: LayerArgs,
    /// Dual Reducer sub-ILP target size.
    #[arg(long, default_value_t = DEFAULT_Q)]
    pub q: usize,
    /// Seconds.
    #[arg(long = "time-limit")]
    pub time_limit: Option<f64>,
    /// Write per-layer JSON lines here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AugmentArg::Neighbor)]
    pub augment: AugmentArg,
    /// Skip the LP over the whole relation used for the integrality gap.
    #[arg(long = "no-gap")]
    pub no_gap: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Suite config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Result table (CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Summary (JSON) [default: the table path with a `.summary.json` extension].
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

impl Cli {
    pub fn run_config(&self) -> RunConfig {
        let mut rc = RunConfig {
            threads: self.threads,
            seed: self.seed,
            ..RunConfig::default()
        };
        match &self.command {
            Command::Partition(a) => {
                rc.alpha = a.alpha;
                rc.downscale = a.layers.downscale;
                rc.scale = a.layers.scale;
            }
            Command::Solve(a) => {
                rc.alpha = a.alpha.unwrap_or(DEFAULT_ALPHA);
                rc.downscale = a.layers.downscale;
                rc.scale = a.layers.scale;
                rc.q = a.q;
                rc.time_limit = a.time_limit.map(Duration::from_secs_f64);
            }
            _ => {}
        }
        rc
    }
}

fn partition_config(layers: &LayerArgs, seed: u64) -> PartitionConfig {
    PartitionConfig {
        downscale: layers.downscale,
        scale: layers.scale.map_or(Scale::Auto, Scale::Uniform),
        bucket_capacity: layers.bucket,
        search: ScaleSearch {
            seed: fan_seed(seed, 3),
            ..ScaleSearch::default()
        },
    }
}

#[derive(Debug, Serialize)]
pub struct PackageEntry {
    pub id: usize,
    pub multiplicity: u64,
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub lp_bound: Option<f64>,
    pub gap: Option<f64>,
    pub size: u64,
    pub package: Vec<PackageEntry>,
    pub layers: Vec<usize>,
    pub failed_layer: Option<usize>,
    pub fallbacks: Option<usize>,
    pub wall_secs: f64,
}

pub fn exit_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal | SolveStatus::Feasible => 0,
        SolveStatus::Infeasible => 1,
        SolveStatus::Timeout => 3,
    }
}

fn ingest(a: &IngestArgs) -> Result<u8> {
    let rel = ingest_csv(&a.input)?;
    write_cache(&a.out, &rel)?;
    info!("{} rows x {} columns -> {}", rel.n_tuples(), rel.n_attrs(), a.out.display());
    Ok(0)
}

fn partition(a: &PartitionArgs, seed: u64) -> Result<u8> {
    let started = Instant::now();
    let rel = load_relation(&a.input)?;
    let h = Hierarchy::build(rel, a.alpha, &partition_config(&a.layers, seed))?;
    h.save(&a.out).with_context(|| format!("saving to {}", a.out.display()))?;
    eprintln!(
        "layers {:?} in {:.2}s -> {}",
        h.layer_sizes(),
        started.elapsed().as_secs_f64(),
        a.out.display()
    );
    Ok(0)
}

fn full_lp_bound(h: &Hierarchy, query: &PackageQuery) -> Result<Option<f64>> {
    if query.objective.is_none() {
        return Ok(None);
    }
    let base = &h.layer(0).relation;
    let model = QueryModel::compile(query, base.names())?;
    let ids: Vec<usize> = (0..base.n_tuples()).collect();
    let nq = model.formulate(base, &ids);
    let lp = solve_relaxation(&nq, &LpOptions::default());
    Ok((lp.status == LpStatus::Optimal).then(|| nq.reported(lp.objective)))
}

pub fn solve(a: &SolveArgs, seed: u64) -> Result<(u8, SolveReport)> {
    let started = Instant::now();
    let query = load_query(&a.query).with_context(|| format!("reading {}", a.query.display()))?;
    let (h, alpha) = match (&a.hierarchy, &a.data) {
        (Some(dir), _) => {
            let h = Hierarchy::load(dir).with_context(|| format!("loading {}", dir.display()))?;
            let alpha = a.alpha.unwrap_or(h.alpha);
            (h, alpha)
        }
        (None, Some(path)) => {
            let alpha = a.alpha.unwrap_or(DEFAULT_ALPHA);
            let rel = load_relation(path)?;
            (Hierarchy::build(rel, alpha, &partition_config(&a.layers, seed))?, alpha)
        }
        (None, None) => bail!("one of --hierarchy or --data is required"),
    };
    let cfg = ShadingConfig {
        alpha,
        augment: match a.augment {
            AugmentArg::Neighbor => Augment::Neighbor,
            AugmentArg::Random => Augment::Random,
        },
        seed: fan_seed(seed, 1),
        time_limit: a.time_limit.map(Duration::from_secs_f64),
        lp: LpOptions::default(),
        reducer: DualReducerConfig {
            q: a.q,
            seed: fan_seed(seed, 2),
            ..DualReducerConfig::default()
        },
    };
    let res = progressive_shading(&h, &query, &cfg)?;
    if let Some(path) = &a.trace {
        fs::write(path, trace_lines(&res.trace)).with_context(|| format!("writing {}", path.display()))?;
    }
    let sol = &res.solution;
    let has = sol.status.has_package();
    let lp_bound = if a.no_gap || !has { None } else { full_lp_bound(&h, &query)? };
    let gap = match (lp_bound, &query.objective) {
        (Some(lp), Some(o)) => integrality_gap(sol.objective, lp, o.sense).ok(),
        _ => None,
    };
    let report = SolveReport {
        status: sol.status,
        objective: has.then_some(sol.objective),
        lp_bound,
        gap,
        size: sol.size(),
        package: sol
            .multiplicities
            .iter()
            .map(|(&id, &multiplicity)| PackageEntry { id, multiplicity })
            .collect(),
        layers: h.layer_sizes(),
        failed_layer: res.failed_layer,
        fallbacks: res.reducer.as_ref().map(|d| d.fallbacks),
        wall_secs: started.elapsed().as_secs_f64(),
    };
    Ok((exit_code(sol.status), report))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn bench(a: &BenchArgs) -> Result<u8> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let cfg: SuiteConfig = serde_json::from_str(&text).context("suite config")?;
    let rows = run_suite(&cfg)?;
    let file = fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_csv(&rows, file)?;
    let summary_path = a.summary.clone().unwrap_or_else(|| a.out.with_extension("summary.json"));
    let summary = serde_json::json!({ "config": cfg, "summary": summarize(&rows) });
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    eprintln!("{} rows -> {}", rows.len(), a.out.display());
    Ok(0)
}

pub fn run(cli: &Cli) -> Result<u8> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Partition(a) => partition(a, cli.seed),
        Command::Solve(a) => {
            let (code, report) = solve(a, cli.seed)?;
            write_or_print(a.output.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
            Ok(code)
        }
        Command::Bench(a) => bench(a),
    }
}

/// Entry point for the binary: usage and I/O failures exit with 2.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
