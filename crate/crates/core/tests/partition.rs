mod common;

use common::oracle::rng;
use pq_core::partition::{
    column_refs, cut_sorted, dlv_bucketed, dlv_partition, get_scale_factors, kdtree_partition, one_d_dlv,
    ratio_score, storage, Group, KdTreeConfig, MembershipIndex, Partition, PartitionConfig, Scale, ScaleSearch,
    DEFAULT_SCALE,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

/// Plain two-pass population variance, independent of the crate's helpers.
fn pop_var(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

fn values_of(v: &[f64], ids: &[usize]) -> Vec<f64> {
    ids.iter().map(|&i| v[i]).collect()
}

fn adversarial(n: usize, w: f64) -> Vec<f64> {
    let mut v = vec![-w, w];
    v.extend(std::iter::repeat_n(w + 3.0 * w / n as f64, n));
    v
}

fn adversarial_variance(n: usize, w: f64) -> f64 {
    let n = n as f64;
    2.0 * w * w * (1.0 / (n + 2.0) + (n + 3.0).powi(2) / (n * (n + 2.0).powi(2)))
}

fn assert_exact_cover(subsets: &[Vec<usize>], n: usize) {
    let mut seen = vec![false; n];
    for s in subsets {
        for &i in s {
            assert!(!seen[i], "tuple {i} twice");
            seen[i] = true;
        }
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn equal_values_stay_together() {
    let v = vec![7.25; 300];
    assert_eq!(one_d_dlv(&v, 1e-6).len(), 1);
}

#[test]
fn adversarial_family_isolates_extremes() {
    let n = 39;
    let s = adversarial(n, 1.0);
    let beta = 24.0 * pop_var(&s) / (s.len() * s.len()) as f64;
    let parts = one_d_dlv(&s, beta);
    assert_eq!(parts[0], vec![0]);
    assert_eq!(parts[1], vec![1]);
    assert_eq!(ratio_score(&s, &parts).unwrap(), 0.0);
}

#[test]
fn normal_sample_respects_bound() {
    let mut r = rng(11);
    let v: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut r)).collect();
    let n = v.len() as f64;
    let beta = 24.0 * pop_var(&v) / (n * n);
    let parts = one_d_dlv(&v, beta);
    assert_exact_cover(&parts, v.len());
    for p in &parts {
        assert!(pop_var(&values_of(&v, p)) <= beta * (1.0 + 1e-9));
    }
    assert!(parts.len() as f64 <= 0.75 * n + 0.5);
}

#[test]
fn kdtree_groups_discrepant_values() {
    let n = 1000;
    let s = adversarial(n, 1.0);
    for tau in [2, 10, 5000] {
        let cfg = KdTreeConfig {
            size_threshold: tau,
            radius_limit: 1.0,
        };
        let leaves = kdtree_partition(&[&s], &cfg);
        assert!(leaves.contains(&vec![0, 1]), "tau {tau}");
        let z = ratio_score(&s, &leaves).unwrap();
        let want = 1.0 / adversarial_variance(n, 1.0);
        assert!((z - want).abs() <= 1e-6 * want, "{z} vs {want}");
        assert!(z > 249.0 && z < 251.0);
    }
}

#[test]
fn kdtree_singletons_and_leaf_rule() {
    let mut r = rng(2);
    let v: Vec<f64> = (0..400).map(|_| r.random::<f64>()).collect();
    let leaves = kdtree_partition(&[&v], &KdTreeConfig::default());
    assert_eq!(leaves.len(), 400);
    assert_eq!(ratio_score(&v, &leaves).unwrap(), 0.0);

    let cfg = KdTreeConfig {
        size_threshold: 50,
        radius_limit: 0.05,
    };
    let leaves = kdtree_partition(&[&v], &cfg);
    assert_exact_cover(&leaves, v.len());
    for l in &leaves {
        let vals = values_of(&v, l);
        let mu = vals.iter().sum::<f64>() / vals.len() as f64;
        let radius = vals.iter().map(|x| (x - mu).abs()).fold(0.0, f64::max);
        assert!(l.len() <= 50 || radius <= 0.05);
    }
}

#[test]
fn scale_factor_reproduces_target_on_fresh_sample() {
    let mut r = rng(5);
    let u = Uniform::new(0.0, 1.0).unwrap();
    let sample: Vec<f64> = (0..10_000).map(|_| u.sample(&mut r)).collect();
    let c = get_scale_factors(&[&sample], 10, &ScaleSearch::default())[0];
    let fresh: Vec<f64> = (0..10_000).map(|_| u.sample(&mut r)).collect();
    let beta = c * pop_var(&fresh) / 100.0;
    let p = one_d_dlv(&fresh, beta).len();
    assert!((7..=13).contains(&p), "{p} subsets, c = {c}");

    let constant = vec![3.0; 500];
    assert_eq!(get_scale_factors(&[&constant], 10, &ScaleSearch::default()), vec![DEFAULT_SCALE]);
}

#[test]
fn subset_count_decreases_with_beta() {
    let mut r = rng(8);
    let mut v: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut r)).collect();
    v.sort_by(f64::total_cmp);
    let mut last = usize::MAX;
    for step in 0..60 {
        let beta = 1e-6 * 1.3f64.powi(step);
        let p = cut_sorted(&v, beta).len();
        assert!(p <= last, "beta {beta}: {p} > {last}");
        last = p;
    }
}

fn check_partition(columns: &[&[f64]], part: &Partition) {
    let n = columns[0].len();
    assert_eq!(part.n_tuples(), n);
    assert_exact_cover(
        &part.groups.iter().enumerate().map(|(g, _)| part.members_of(g).to_vec()).collect::<Vec<_>>(),
        n,
    );
    let index = MembershipIndex::build(part);
    for (g, grp) in part.groups.iter().enumerate() {
        for &i in part.members_of(g) {
            let t: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            assert!(grp.contains(&t), "tuple {i} outside group {g}");
        }
        for (j, col) in columns.iter().enumerate() {
            let vals = values_of(col, part.members_of(g));
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((grp.rep[j] - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        }
        assert_eq!(index.get_group(&grp.rep), Some(g));
    }
}

fn layered(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let layer = (i % 4) as f64;
        x.push(r.random::<f64>() * 10.0);
        y.push(layer * 5.0 + r.random::<f64>());
    }
    vec![x, y]
}

#[test]
fn small_downscale_on_layered_data() {
    let cols = layered(2000, 1);
    let refs = column_refs(&cols);
    let cfg = PartitionConfig {
        downscale: 4,
        ..PartitionConfig::default()
    };
    let part = dlv_partition(&refs, &cfg).unwrap();
    let g = part.n_groups();
    assert!((250..=1000).contains(&g), "{g} groups");
    check_partition(&refs, &part);
}

#[test]
fn single_attribute_groups_are_sorted_intervals() {
    let mut r = rng(4);
    let v: Vec<f64> = (0..3000).map(|_| StandardNormal.sample(&mut r)).collect();
    let part = dlv_partition(&[&v], &PartitionConfig {
        downscale: 10,
        ..PartitionConfig::default()
    })
    .unwrap();
    let mut spans: Vec<(f64, f64)> = (0..part.n_groups())
        .map(|g| {
            let vals = values_of(&v, part.members_of(g));
            (vals.iter().copied().fold(f64::INFINITY, f64::min), vals.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in spans.windows(2) {
        assert!(w[0].1 < w[1].0);
    }
    check_partition(&[&v], &part);
}

#[test]
fn bivariate_normal_reduces_variance() {
    let mut r = rng(9);
    let nx = Normal::new(0.0, 1.0).unwrap();
    let n = 100_000;
    let x: Vec<f64> = (0..n).map(|_| nx.sample(&mut r)).collect();
    let y: Vec<f64> = x.iter().map(|&a| 0.5 * a + nx.sample(&mut r) * 3.0).collect();
    let cols = vec![x, y];
    let refs = column_refs(&cols);
    let cfg = PartitionConfig::default();
    let part = dlv_partition(&refs, &cfg).unwrap();
    let g = part.n_groups();
    assert!(g >= 1000 && g <= 1000 + 2 * 100, "{g} groups");
    let total: f64 = cols.iter().map(|c| pop_var(c)).sum();
    let within: f64 = part
        .groups
        .iter()
        .enumerate()
        .map(|(gi, grp)| {
            let ids = part.members_of(gi);
            grp.len as f64 / n as f64 * cols.iter().map(|c| pop_var(&values_of(c, ids))).sum::<f64>()
        })
        .sum();
    assert!(within < total);
    check_partition(&refs, &part);
}

#[test]
fn bucketing_without_pressure_is_identical() {
    let cols = layered(3000, 3);
    let refs = column_refs(&cols);
    let base = PartitionConfig {
        downscale: 10,
        ..PartitionConfig::default()
    };
    let plain = dlv_partition(&refs, &base).unwrap();
    let bucketed = dlv_bucketed(
        &refs,
        &PartitionConfig {
            bucket_capacity: Some(3000),
            ..base.clone()
        },
    )
    .unwrap();
    assert_eq!(plain, bucketed);
}

#[test]
fn bucketed_group_count_tracks_unbucketed() {
    let mut r = rng(6);
    let n = 20_000;
    let cols: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| r.random::<f64>()).collect()).collect();
    let refs = column_refs(&cols);
    let base = PartitionConfig {
        downscale: 20,
        ..PartitionConfig::default()
    };
    let plain = dlv_partition(&refs, &base).unwrap().n_groups() as f64;
    let part = dlv_bucketed(
        &refs,
        &PartitionConfig {
            bucket_capacity: Some(n / 10),
            ..base
        },
    )
    .unwrap();
    let b = part.n_groups() as f64;
    assert!((b - plain).abs() <= 0.2 * plain, "{b} vs {plain}");
    check_partition(&refs, &part);
}

#[test]
fn oversized_duplicate_bucket_becomes_one_group() {
    let mut x = vec![0.0; 500];
    x.extend((0..500).map(|i| 1.0 + i as f64));
    let y: Vec<f64> = (0..1000).map(|i| (i % 7) as f64).collect();
    let refs: Vec<&[f64]> = vec![&x, &y];
    let cfg = PartitionConfig {
        downscale: 10,
        bucket_capacity: Some(100),
        scale: Scale::Uniform(DEFAULT_SCALE),
        ..PartitionConfig::default()
    };
    let part = dlv_bucketed(&refs, &cfg).unwrap();
    let zeros: Vec<&Group> = part.groups.iter().filter(|g| g.rep[0] == 0.0).collect();
    assert_eq!(zeros.len(), 1);
    assert_eq!(zeros[0].len, 500);
    assert_eq!(zeros[0].variance[0], 0.0);
    check_partition(&refs, &part);
}

#[test]
fn index_matches_linear_scan() {
    let mut r = rng(12);
    let n = 30_000;
    let cols: Vec<Vec<f64>> = (0..3).map(|j| (0..n).map(|_| r.random::<f64>() * (j + 1) as f64).collect()).collect();
    let refs = column_refs(&cols);
    let part = dlv_partition(
        &refs,
        &PartitionConfig {
            downscale: 30,
            ..PartitionConfig::default()
        },
    )
    .unwrap();
    let index = MembershipIndex::build(&part);
    for _ in 0..100_000 {
        let t: Vec<f64> = (0..3).map(|j| r.random::<f64>() * 1.2 * (j + 1) as f64 - 0.1).collect();
        let scan = part.groups.iter().position(|g| g.contains(&t));
        assert_eq!(index.get_group(&t), scan);
    }
}

#[test]
fn index_reports_points_outside_every_box() {
    let cols = vec![vec![0.5, 2.5], vec![0.5, 0.5]];
    let refs = column_refs(&cols);
    let part = Partition::from_parts(
        &refs,
        vec![
            (vec![0], vec![0.0, 0.0], vec![1.0, 1.0]),
            (vec![1], vec![2.0, 0.0], vec![3.0, 1.0]),
        ],
    );
    let index = MembershipIndex::build(&part);
    assert_eq!(index.get_group(&[0.5, 0.5]), Some(0));
    assert_eq!(index.get_group(&[2.5, 0.2]), Some(1));
    assert_eq!(index.get_group(&[1.5, 0.5]), None);
    assert_eq!(index.get_group(&[0.5, 1.0]), None);
}

#[test]
fn storage_round_trip_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cols = layered(1500, 7);
    let names = vec!["x".to_string(), "y".to_string()];
    let vpath = dir.path().join("layer.values");
    storage::write_values(&vpath, &names, &cols).unwrap();
    let (names2, cols2) = storage::read_values(&vpath).unwrap();
    assert_eq!(names, names2);
    assert_eq!(cols, cols2);

    let refs = column_refs(&cols);
    let part = dlv_partition(
        &refs,
        &PartitionConfig {
            downscale: 10,
            ..PartitionConfig::default()
        },
    )
    .unwrap();
    let parents: Vec<u64> = (0..part.n_groups() as u64).map(|g| g / 3).collect();
    let (gpath, mpath) = (dir.path().join("a.groups"), dir.path().join("a.members"));
    storage::write_groups(&gpath, &part, &parents).unwrap();
    storage::write_members(&mpath, &part.members).unwrap();
    let (back, parents2) = storage::read_partition(&gpath, &mpath, &refs).unwrap();
    assert_eq!(back, part);
    assert_eq!(parents2, parents);
    let gpath2 = dir.path().join("b.groups");
    storage::write_groups(&gpath2, &back, &parents2).unwrap();
    assert_eq!(std::fs::read(&gpath).unwrap(), std::fs::read(&gpath2).unwrap());
    assert!(matches!(
        storage::read_values(&gpath),
        Err(storage::StorageError::BadMagic(_))
    ));
}

proptest! {
    #[test]
    fn subsets_respect_bounding_variance(
        raw in prop::collection::vec(-50i32..50, 1..300),
        scale in 1e-3f64..1e3,
        beta in 1e-4f64..10.0,
    ) {
        let v: Vec<f64> = raw.iter().map(|&x| x as f64 * scale).collect();
        let beta = beta * scale * scale;
        let parts = one_d_dlv(&v, beta);
        assert_exact_cover(&parts, v.len());
        let mut prev_max = f64::NEG_INFINITY;
        for p in &parts {
            let vals = values_of(&v, p);
            prop_assert!(pop_var(&vals) <= beta * (1.0 + 1e-9));
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(lo > prev_max);
            prev_max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
    }

    #[test]
    fn universal_ratio_bound(raw in prop::collection::vec(-1e3f64..1e3, 2..400), dup in 0usize..4) {
        let mut v = raw;
        // inject repeated values
        for i in 0..dup.min(v.len() / 2) {
            v[2 * i + 1] = v[2 * i];
        }
        let n = v.len() as f64;
        let var = pop_var(&v);
        prop_assume!(var > 0.0);
        let parts = one_d_dlv(&v, 24.0 * var / (n * n));
        prop_assert!(parts.len() as f64 <= 0.75 * n + 0.5);
        prop_assert!(ratio_score(&v, &parts).unwrap() <= 24.0 / n + 1e-12);
    }
}
