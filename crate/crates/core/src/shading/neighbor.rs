//! Expansion of selected representatives into tuples of the layer below.

use std::collections::{HashSet, VecDeque};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::hierarchy::Hierarchy;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Expansion {
    /// Tuple ids of layer `l - 1`: members of the selected groups first,
    /// then members of discovered groups in discovery order.
    pub tuples: Vec<usize>,
    /// Groups taken from the queue and probed.
    pub expanded: usize,
    /// Groups added beyond the selection.
    pub discovered: usize,
    pub probes: usize,
}

/// Probe coordinates around a box: just below, the middle, just above. An
/// infinite edge is replaced by the member extent on that side.
fn probe_axes(lo: f64, hi: f64, min: f64, max: f64, eps: f64) -> [f64; 3] {
    let a = if lo.is_finite() { lo } else { min };
    let b = if hi.is_finite() { hi } else { max };
    [a - eps, 0.5 * (a + b), b + eps]
}

/// Grow `support` (tuple ids of layer `l`, i.e. groups of layer `l - 1`)
/// by probing the `3^k` points around each group box, breadth-first, until
/// `alpha` tuples of layer `l - 1` are collected.
pub fn neighbor_sampling(h: &Hierarchy, l: usize, alpha: usize, support: &[usize]) -> Expansion {
    let below = h.layer(l - 1);
    let part = below.partition.as_ref().expect("layer below the top has a partition");
    let index = below.index.as_ref().expect("layer below the top has an index");
    let cols = below.relation.columns();
    let k = cols.len();
    // the gap below bounds every box width from beneath, so a step of this
    // size never jumps over an adjacent box
    let eps = h.layer(l).epsilon.min(below.epsilon);

    let mut seeds: Vec<usize> = support.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let mut out = Expansion::default();
    let mut seen: HashSet<usize> = seeds.iter().copied().collect();
    for &g in &seeds {
        out.tuples.extend_from_slice(part.members_of(g));
    }
    let mut queue: VecDeque<usize> = seeds.into();
    let mut probe = vec![0.0; k];
    let total = 3usize.pow(k as u32);
    while out.tuples.len() < alpha {
        let Some(g) = queue.pop_front() else { break };
        out.expanded += 1;
        let grp = &part.groups[g];
        let members = part.members_of(g);
        let axes: Vec<[f64; 3]> = (0..k)
            .map(|j| {
                let (mn, mx) = members
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| (a.min(cols[j][i]), b.max(cols[j][i])));
                probe_axes(grp.lo[j], grp.hi[j], mn, mx, eps)
            })
            .collect();
        for code in 0..total {
            let mut c = code;
            for j in 0..k {
                probe[j] = axes[j][c % 3];
                c /= 3;
            }
            out.probes += 1;
            let Some(found) = index.get_group(&probe) else { continue };
            if found == g || !seen.insert(found) {
                continue;
            }
            out.discovered += 1;
            queue.push_back(found);
            out.tuples.extend_from_slice(part.members_of(found));
        }
    }
    out.tuples.truncate(alpha);
    out
}

/// Baseline: members of the selected groups, then members of uniformly
/// drawn other groups until `alpha` tuples are collected.
pub fn random_sampling(h: &Hierarchy, l: usize, alpha: usize, support: &[usize], seed: u64) -> Expansion {
    let part = h.layer(l - 1).partition.as_ref().expect("layer below the top has a partition");
    let mut seeds: Vec<usize> = support.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let mut out = Expansion::default();
    for &g in &seeds {
        out.tuples.extend_from_slice(part.members_of(g));
    }
    let chosen: HashSet<usize> = seeds.into_iter().collect();
    let rest: Vec<usize> = (0..part.n_groups()).filter(|g| !chosen.contains(g)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = sample(&mut rng, rest.len(), rest.len());
    for pos in order {
        if out.tuples.len() >= alpha {
            break;
        }
        out.discovered += 1;
        out.tuples.extend_from_slice(part.members_of(rest[pos]));
    }
    out.tuples.truncate(alpha);
    out
}
