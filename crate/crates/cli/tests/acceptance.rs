//! Acceptance run: one PASS/FAIL line per criterion, then a single verdict.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use oracle::{exact_simplex, random_lp, rng, vertex_enumeration, DenseLp};
use pq_bench::{run_suite, without_timing, BenchRow, Dataset, Method, SuiteConfig};
use pq_cli::{write_cache, Paql};
use pq_core::lp::{dual_simplex_solve, support, to_standard_form, BfrtInstance, BfrtVariant, LpOptions, LpStatus};
use pq_core::model::{NormalizedQuery, RowKind};
use pq_core::partition::{kdtree_partition, one_d_dlv, KdTreeConfig};
use pq_core::shading::{progressive_shading, Hierarchy, ShadingConfig};
use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde_json::Value;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Check) -> bool {
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = started.elapsed().as_secs_f64();
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {id:>2} {tag}  {name}: {detail} [{secs:.1}s]");
    outcome.is_ok()
}

fn pop_var(v: &[f64]) -> f64 {
    // exact for a constant set, where the rounded mean can differ from the value
    if v.iter().all(|&x| x == v[0]) {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Sum of subset variances over the variance of the whole set.
fn ratio(v: &[f64], parts: &[Vec<usize>]) -> f64 {
    let within: f64 = parts
        .iter()
        .map(|p| pop_var(&p.iter().map(|&i| v[i]).collect::<Vec<_>>()))
        .sum();
    within / pop_var(v)
}

fn to_nq(lp: &DenseLp) -> NormalizedQuery {
    let n = lp.n();
    NormalizedQuery {
        tuple_ids: (0..n).collect(),
        cost: lp.cost.clone(),
        rows: lp.rows.clone(),
        row_lower: lp.row_lo.clone(),
        row_upper: lp.row_hi.clone(),
        row_kinds: vec![RowKind::Sum { attr: 0 }; lp.m()],
        var_upper: lp.hi.clone(),
        maximize: false,
    }
}

fn lp_oracle() -> Check {
    let mut r = rng(2024);
    let (mut optimal, mut infeasible, mut worst) = (0, 0, 0.0f64);
    for k in 0..500 {
        let small = k % 4 == 0;
        let n = if small { r.random_range(2..=6) } else { r.random_range(8..=200) };
        let m = if small { r.random_range(1..=3) } else { r.random_range(1..=8) };
        let lp = random_lp(&mut r, n, m);
        let want = if small { vertex_enumeration(&lp) } else { exact_simplex(&lp) };
        let got = dual_simplex_solve(&to_standard_form(&to_nq(&lp)), &LpOptions::default());
        match want {
            Some(obj) => {
                ensure(got.status == LpStatus::Optimal, || format!("instance {k}: {:?}, oracle optimal", got.status))?;
                let err = (got.objective - obj).abs() / obj.abs().max(1.0);
                ensure(err <= 1e-6, || format!("instance {k}: {} vs {obj}", got.objective))?;
                worst = worst.max(err);
                optimal += 1;
            }
            None => {
                ensure(got.status == LpStatus::Infeasible, || format!("instance {k}: {:?}, oracle infeasible", got.status))?;
                infeasible += 1;
            }
        }
    }
    Ok(format!("500 LPs ({optimal} optimal, {infeasible} infeasible), worst relative error {worst:.1e}"))
}

fn bfrt() -> Check {
    let mut r = rng(77);
    let mut total = 0usize;
    for k in 0..1000 {
        let n = 10f64.powf(r.random_range(0.0..5.0)).round() as usize;
        // coarse scores so ties are common
        let scores: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..(n as i32 / 3 + 2))) * 0.125).collect();
        let costs: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0f64).powi(3) * 10.0).collect();
        let budget = costs.iter().sum::<f64>() * r.random_range(0.0..1.1);
        let inst = BfrtInstance { scores, costs, budget };
        let seq = inst.select(BfrtVariant::Sequential);
        for v in [BfrtVariant::LargeBudget, BfrtVariant::SmallBudget] {
            ensure(inst.select(v) == seq, || format!("instance {k} (n = {n}): {v:?} differs"))?;
        }
        total += n;
    }
    Ok(format!("1000 instances, {total} candidates, three variants identical"))
}

fn ratio_bound() -> Check {
    let mut trials = 0;
    let mut worst = 0.0f64;
    for family in ["normal", "uniform", "cauchy"] {
        for n in [100usize, 1000, 10_000] {
            for seed in 0..20u64 {
                let mut r = rng(seed * 31 + n as u64);
                let v: Vec<f64> = (0..n)
                    .map(|_| match family {
                        "normal" => StandardNormal.sample(&mut r),
                        "uniform" => r.random_range(-1.0..1.0),
                        _ => Cauchy::new(0.0, 1.0).unwrap().sample(&mut r),
                    })
                    .collect();
                let beta = 24.0 * pop_var(&v) / (n * n) as f64;
                let parts = one_d_dlv(&v, beta);
                let p = parts.len() as f64;
                ensure(p <= 0.75 * n as f64 + 0.5, || format!("{family} n={n} seed {seed}: p = {p}"))?;
                let z = ratio(&v, &parts);
                ensure(z <= 24.0 / n as f64 * (1.0 + 1e-9), || format!("{family} n={n} seed {seed}: score {z}"))?;
                worst = worst.max(z * n as f64 / 24.0);
                trials += 1;
            }
        }
    }
    Ok(format!("{trials} trials, largest score at {:.0}% of 24/n", 100.0 * worst))
}

fn adversarial(n: usize) -> Vec<f64> {
    let mut v = vec![-1.0, 1.0];
    v.extend(std::iter::repeat_n(1.0 + 3.0 / n as f64, n));
    v
}

fn kd_contrast() -> Check {
    let mut scores = Vec::new();
    for n in [100usize, 1000, 10_000] {
        let s = adversarial(n);
        let mut lowest = f64::INFINITY;
        for tau in [2, 10, n / 2, n + 2] {
            let cfg = KdTreeConfig {
                size_threshold: tau,
                radius_limit: 1.0,
            };
            lowest = lowest.min(ratio(&s, &kdtree_partition(&[&s], &cfg)));
        }
        scores.push(lowest);
    }
    ensure(scores[1] >= 200.0, || format!("kd-tree score {} at n = 1000", scores[1]))?;
    ensure(scores.windows(2).all(|w| w[1] > w[0]), || format!("kd-tree scores not growing: {scores:?}"))?;
    for n in [39usize, 100, 1000, 10_000] {
        let s = adversarial(n);
        let beta = 24.0 * pop_var(&s) / (s.len() * s.len()) as f64;
        let z = ratio(&s, &one_d_dlv(&s, beta));
        ensure(z == 0.0, || format!("DLV score {z} at n = {n}"))?;
    }
    Ok(format!("kd-tree scores {:.0} / {:.0} / {:.0}; DLV 0 for n in 39..10000", scores[0], scores[1], scores[2]))
}

/// Reference bounds at hardness 1, 3, 5, 7: lower bounds, and upper bounds
/// for the two-sided rows.
const TABLE: [(&str, [[f64; 4]; 4]); 2] = [
    (
        "sdss",
        [
            [445.37, 455.56, 461.91, 466.86],
            [420.68, 409.87, 403.14, 397.89],
            [406.04, 410.71, 411.64, 411.84],
            [417.76, 413.09, 412.16, 411.96],
        ],
    ),
    (
        "tpch",
        [
            [772.11, 866.29, 924.88, 970.61],
            [56456.81, 44493.54, 37051.09, 31242.12],
            [40864.32, 44877.91, 45680.35, 45852.68],
            [50935.68, 46922.09, 46119.65, 45947.32],
        ],
    ),
];

fn table_bounds() -> Check {
    let mut checked = 0;
    let mut worst = 0.0f64;
    for (ds, (name, rows)) in [Dataset::Sdss, Dataset::Tpch].into_iter().zip(TABLE) {
        for (level, h) in [1.0, 3.0, 5.0, 7.0].into_iter().enumerate() {
            let b = pq_bench::derive_bounds(&ds.template().hardness_spec(h)).map_err(|e| e.to_string())?;
            let got = [b[0].lower, b[1].upper, b[2].lower, b[2].upper];
            for (row, g) in got.iter().enumerate() {
                let want = rows[row][level];
                let err = ((g - want) / want).abs();
                ensure(err <= 0.005, || format!("{name} h={h} row {row}: {g} vs {want}"))?;
                worst = worst.max(err);
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} bounds, worst relative error {:.3}%", 100.0 * worst))
}

fn support_bound() -> Check {
    let s = support::stats();
    ensure(s.checked > 0, || "no LP was checked".into())?;
    ensure(s.violated == 0, || format!("{} of {} LPs exceed the bound", s.violated, s.checked))?;
    Ok(format!(
        "{} optimal LPs in this run within the bound ({} with fractional caps not applicable)",
        s.checked, s.skipped
    ))
}

fn instance_key(r: &BenchRow) -> (String, u64, u64) {
    (r.dataset.clone(), r.seed, r.hardness.to_bits())
}

fn parity() -> Check {
    let mut cfg = SuiteConfig::new(
        vec![Dataset::Sdss, Dataset::Tpch],
        100_000,
        vec![1.0, 3.0, 5.0, 7.0],
        (1..=5).collect(),
        vec![Method::ProgressiveShading, Method::Exact],
    );
    cfg.alpha = 10_000;
    let rows = run_suite(&cfg).map_err(|e| e.to_string())?;
    let mut by: BTreeMap<(String, u64, u64), BTreeMap<Method, &BenchRow>> = BTreeMap::new();
    for r in &rows {
        by.entry(instance_key(r)).or_default().insert(r.method, r);
    }
    let (mut compared, mut worst) = (0, 0.0f64);
    for (key, m) in &by {
        let exact = m[&Method::Exact];
        if !exact.status.has_package() {
            continue;
        }
        let ps = m[&Method::ProgressiveShading];
        ensure(ps.status.has_package(), || format!("{key:?}: exact {} but shading {}", exact.status, ps.status))?;
        let (ge, gp) = (exact.gap.unwrap(), ps.gap.unwrap());
        let excess = (gp - ge) / ge;
        ensure(excess <= 0.10, || format!("{key:?}: gap {gp} vs exact {ge}"))?;
        worst = worst.max(excess);
        compared += 1;
    }
    let total: f64 = rows.iter().map(|r| r.wall_secs).sum();
    Ok(format!(
        "{compared}/{} instances proved feasible and matched, worst gap excess {:.2e}, solver time {total:.0}s",
        by.len(),
        worst
    ))
}

fn pq(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pq")).args(args).output().expect("run pq")
}

fn scaling(dir: &Path) -> Check {
    let t = Dataset::Sdss.template();
    let rel = t.relation(10_000_000, 8).map_err(|e| e.to_string())?;
    let data = dir.join("sdss.values");
    write_cache(&data, &rel).map_err(|e| e.to_string())?;
    drop(rel);
    let query = dir.join("q.paql");
    fs::write(&query, Paql(&t.query(5.0).map_err(|e| e.to_string())?).to_string()).map_err(|e| e.to_string())?;
    let layers = dir.join("layers");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let started = Instant::now();
    let o = pq(&["partition", &s(&data), "--out", &s(&layers), "--df", "100", "--alpha", "100000"]);
    ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    let built = started.elapsed().as_secs_f64();
    let o = pq(&["solve", "--hierarchy", &s(&layers), "--query", &s(&query), "--no-gap"]);
    let total = started.elapsed().as_secs_f64();
    ensure(o.status.code() == Some(0), || format!("solve exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)))?;
    let v: Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;
    ensure(total < 120.0, || format!("partition {built:.1}s + solve {:.1}s", total - built))?;
    Ok(format!(
        "layers {}, partition {built:.1}s + solve {:.1}s on {} thread(s), package of {}",
        v["layers"],
        total - built,
        rayon::current_num_threads(),
        v["size"]
    ))
}

fn directions() -> Check {
    let mut cfg = SuiteConfig::new(
        vec![Dataset::Sdss],
        100_000,
        (0..8).map(|i| f64::from(2 * i + 1)).collect(),
        (1..=5).collect(),
        vec![Method::DualReducer, Method::ReducerRandom, Method::ProgressiveShading, Method::ShadingRandom],
    );
    cfg.alpha = 10_000;
    cfg.max_fallbacks = Some(0);
    cfg.time_limit_secs = 60.0;
    let rows = run_suite(&cfg).map_err(|e| e.to_string())?;
    let solved = |m: Method| rows.iter().filter(|r| r.method == m && r.status.has_package()).count();
    let (aux, random) = (solved(Method::DualReducer), solved(Method::ReducerRandom));
    ensure(aux >= random, || format!("auxiliary LP solved {aux}, random {random}"))?;
    let mut by: BTreeMap<(String, u64, u64), BTreeMap<Method, &BenchRow>> = BTreeMap::new();
    for r in &rows {
        by.entry(instance_key(r)).or_default().insert(r.method, r);
    }
    let (mut joint, mut ns, mut rs) = (0, 0.0, 0.0);
    for m in by.values() {
        let (a, b) = (m[&Method::ProgressiveShading], m[&Method::ShadingRandom]);
        if let (Some(x), Some(y)) = (a.objective, b.objective) {
            joint += 1;
            ns += x;
            rs += y;
        }
    }
    ensure(joint > 0, || "no query solved by both augmentations".into())?;
    let (ns, rs) = (ns / joint as f64, rs / joint as f64);
    // minimization: lower is better
    ensure(ns <= rs + 1e-9, || format!("neighbor mean {ns} vs random {rs}"))?;
    Ok(format!(
        "(a) auxiliary LP {aux}/40 vs random {random}/40; (b) {joint} joint, mean objective {ns:.3} vs {rs:.3}"
    ))
}

fn determinism(dir: &Path) -> Check {
    let mut cfg = SuiteConfig::new(
        vec![Dataset::Sdss, Dataset::Tpch],
        20_000,
        vec![3.0, 7.0],
        vec![1, 2],
        vec![
            Method::ProgressiveShading,
            Method::ShadingRandom,
            Method::DualReducer,
            Method::ReducerRandom,
            Method::Exact,
            Method::ExactFeasibility,
        ],
    );
    cfg.alpha = 2000;
    cfg.q = 500;
    let mut tables = 0;
    for threads in [1, 2] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let a = pool.install(|| run_suite(&cfg)).map_err(|e| e.to_string())?;
        let b = pool.install(|| run_suite(&cfg)).map_err(|e| e.to_string())?;
        ensure(without_timing(&a) == without_timing(&b), || format!("bench tables differ at {threads} thread(s)"))?;
        tables += 2;
    }

    let t = Dataset::Tpch.template();
    let h = Hierarchy::build(t.relation(50_000, 3).map_err(|e| e.to_string())?, 2000, &Default::default())
        .map_err(|e| e.to_string())?;
    let q = t.query(5.0).map_err(|e| e.to_string())?;
    let sc = ShadingConfig {
        alpha: 2000,
        seed: 42,
        ..ShadingConfig::default()
    };
    let first = progressive_shading(&h, &q, &sc).map_err(|e| e.to_string())?.solution;
    let second = progressive_shading(&h, &q, &sc).map_err(|e| e.to_string())?.solution;
    ensure(first.multiplicities == second.multiplicities, || "library packages differ".into())?;

    let layers = dir.join("det");
    h.save(&layers).map_err(|e| e.to_string())?;
    let query = dir.join("det.paql");
    fs::write(&query, Paql(&q).to_string()).map_err(|e| e.to_string())?;
    let solve = |threads: &str| {
        let o = pq(&[
            "--threads",
            threads,
            "--seed",
            "42",
            "solve",
            "--hierarchy",
            layers.to_str().unwrap(),
            "--query",
            query.to_str().unwrap(),
        ]);
        let v: Value = serde_json::from_slice(&o.stdout).unwrap_or(Value::Null);
        v["package"].clone()
    };
    for threads in ["1", "2"] {
        let (a, b) = (solve(threads), solve(threads));
        ensure(a.is_array() && a == b, || format!("CLI packages differ at {threads} thread(s)"))?;
    }
    Ok(format!("{tables} bench tables and 6 packages reproduced"))
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let timed = |limit: Duration, f: fn() -> Check| {
        move || {
            let started = Instant::now();
            let detail = f()?;
            let took = started.elapsed();
            ensure(took <= limit, || format!("{detail}; took {:.0}s over {:.0}s", took.as_secs_f64(), limit.as_secs_f64()))?;
            Ok(detail)
        }
    };
    let mut results = vec![
        run(1, "LP oracle equivalence", timed(Duration::from_secs(120), lp_oracle)),
        run(2, "BFRT variant equivalence", timed(Duration::from_secs(60), bfrt)),
        run(3, "universal bounded ratio score", timed(Duration::from_secs(60), ratio_bound)),
        run(4, "kd-tree contrast", timed(Duration::from_secs(30), kd_contrast)),
        run(5, "hardness-derived bounds", timed(Duration::from_secs(1), table_bounds)),
    ];
    results.push(run(7, "end-to-end parity", timed(Duration::from_secs(30 * 60), parity)));
    results.push(run(8, "scaling smoke", || scaling(dir.path())));
    results.push(run(9, "mini-experiment directions", directions));
    results.push(run(10, "determinism", || determinism(dir.path())));
    // last, so every LP solved above is counted
    results.push(run(6, "support bound", support_bound));
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    assert_eq!(passed, results.len());
}
