//! Selection kernel of the bound flipping ratio test.
//!
//! Each candidate has a score (its dual-ratio breakpoint) and a cost (the
//! slope it consumes when flipped). Visiting candidates in ascending
//! `(score, index)` order, every candidate whose cumulative cost stays
//! within the budget is selected; the first one that does not fit is
//! returned as `next`.
//!
//! Costs are compared in fixed point, as integer multiples of
//! `budget / 2^52`, so cumulative sums are exact whatever the summation
//! order and all variants agree bit for bit.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::pricing::PARALLEL_THRESHOLD;

const UNIT_BITS: i32 = 52;
const CHUNK: usize = 8192;

#[derive(Debug, Clone, PartialEq)]
pub struct BfrtInstance {
    pub scores: Vec<f64>,
    pub costs: Vec<f64>,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BfrtSelection {
    /// Selected candidate positions in ascending `(score, index)` order.
    pub selected: Vec<usize>,
    /// First candidate past the budget, if any.
    pub next: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfrtVariant {
    Sequential,
    LargeBudget,
    SmallBudget,
}

/// First iteration flips about half the candidates; later ones only a few.
pub fn choose_variant(iteration: usize, forced: Option<BfrtVariant>) -> BfrtVariant {
    match forced {
        Some(v) => v,
        None if iteration == 0 => BfrtVariant::LargeBudget,
        None => BfrtVariant::SmallBudget,
    }
}

impl BfrtInstance {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn select(&self, variant: BfrtVariant) -> BfrtSelection {
        match variant {
            BfrtVariant::Sequential => select_sequential(self),
            BfrtVariant::LargeBudget => select_large_budget(self),
            BfrtVariant::SmallBudget => select_small_budget(self),
        }
    }

    #[inline]
    fn key(&self, i: usize) -> Key {
        Key(self.scores[i], i)
    }

    fn budget_units(&self) -> u128 {
        1u128 << UNIT_BITS
    }

    fn units(&self, i: usize) -> u128 {
        cost_units(self.costs[i], self.budget)
    }
}

fn cost_units(cost: f64, budget: f64) -> u128 {
    if cost <= 0.0 {
        return 0;
    }
    if budget <= 0.0 {
        return u64::MAX as u128;
    }
    let scaled = (cost / budget) * f64::from(2u32).powi(UNIT_BITS);
    if scaled >= u64::MAX as f64 {
        u64::MAX as u128
    } else {
        scaled.round() as u128
    }
}

#[derive(Debug, Clone, Copy)]
struct Key(f64, usize);

impl PartialEq for Key {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Key {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0).then(self.1.cmp(&o.1))
    }
}

fn take_prefix(inst: &BfrtInstance, order: impl Iterator<Item = usize>) -> BfrtSelection {
    let budget = inst.budget_units();
    let mut sel = BfrtSelection::default();
    let mut cum = 0u128;
    for i in order {
        cum += inst.units(i);
        if cum > budget {
            sel.next = Some(i);
            break;
        }
        sel.selected.push(i);
    }
    sel
}

pub fn select_sequential(inst: &BfrtInstance) -> BfrtSelection {
    let mut order: Vec<usize> = (0..inst.len()).collect();
    order.sort_unstable_by_key(|&i| inst.key(i));
    take_prefix(inst, order.into_iter())
}

/// Sort everything, prefix-sum the costs and binary-search the budget.
pub fn select_large_budget(inst: &BfrtInstance) -> BfrtSelection {
    let n = inst.len();
    let mut order: Vec<usize> = (0..n).collect();
    let par = n >= PARALLEL_THRESHOLD;
    if par {
        order.par_sort_unstable_by_key(|&i| inst.key(i));
    } else {
        order.sort_unstable_by_key(|&i| inst.key(i));
    }
    let local = |chunk: &[usize]| -> Vec<u128> {
        let mut acc = 0u128;
        chunk
            .iter()
            .map(|&i| {
                acc += inst.units(i);
                acc
            })
            .collect()
    };
    let mut parts: Vec<Vec<u128>> = if par {
        order.par_chunks(CHUNK).map(local).collect()
    } else {
        order.chunks(CHUNK).map(local).collect()
    };
    let mut offset = 0u128;
    for part in &mut parts {
        let total = part.last().copied().unwrap_or(0);
        for v in part.iter_mut() {
            *v += offset;
        }
        offset += total;
    }
    let prefix: Vec<u128> = parts.into_iter().flatten().collect();
    let budget = inst.budget_units();
    let k = prefix.partition_point(|&p| p <= budget);
    BfrtSelection {
        selected: order[..k].to_vec(),
        next: order.get(k).copied(),
    }
}

/// Each chunk keeps a bounded max-heap of the candidates that could still
/// fit; the survivors are merged and swept in ascending order.
pub fn select_small_budget(inst: &BfrtInstance) -> BfrtSelection {
    let n = inst.len();
    let budget = inst.budget_units();
    let keep = |start: usize| -> Vec<usize> {
        let end = (start + CHUNK).min(n);
        let mut heap: BinaryHeap<(Key, u128)> = BinaryHeap::new();
        let mut total = 0u128;
        for i in start..end {
            let c = inst.units(i);
            heap.push((inst.key(i), c));
            total += c;
            // drop the largest key while everything below it already busts the budget
            while let Some(&(_, top)) = heap.peek() {
                if total - top > budget {
                    heap.pop();
                    total -= top;
                } else {
                    break;
                }
            }
        }
        heap.into_iter().map(|(k, _)| k.1).collect()
    };
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let kept: Vec<Vec<usize>> = if n >= PARALLEL_THRESHOLD {
        starts.par_iter().map(|&s| keep(s)).collect()
    } else {
        starts.iter().map(|&s| keep(s)).collect()
    };
    let mut merged: BinaryHeap<Reverse<Key>> = kept
        .into_iter()
        .flatten()
        .map(|i| Reverse(inst.key(i)))
        .collect();
    take_prefix(inst, std::iter::from_fn(move || merged.pop().map(|Reverse(k)| k.1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(inst: &BfrtInstance) -> BfrtSelection {
        let n = inst.len();
        let below = |i: usize| -> Vec<usize> {
            (0..n)
                .filter(|&j| (inst.scores[j], j) <= (inst.scores[i], i))
                .collect()
        };
        let mut fits: Vec<usize> = (0..n)
            .filter(|&i| below(i).iter().map(|&j| inst.costs[j]).sum::<f64>() <= inst.budget)
            .collect();
        fits.sort_by(|&a, &b| inst.scores[a].total_cmp(&inst.scores[b]).then(a.cmp(&b)));
        let next = (0..n)
            .filter(|i| !fits.contains(i))
            .min_by(|&a, &b| inst.scores[a].total_cmp(&inst.scores[b]).then(a.cmp(&b)));
        BfrtSelection { selected: fits, next }
    }

    fn all_variants(inst: &BfrtInstance) -> [BfrtSelection; 3] {
        [
            inst.select(BfrtVariant::Sequential),
            inst.select(BfrtVariant::LargeBudget),
            inst.select(BfrtVariant::SmallBudget),
        ]
    }

    #[test]
    fn budget_dominates_and_zero_budget() {
        let inst = BfrtInstance {
            scores: vec![3.0, 1.0, 2.0],
            costs: vec![1.0, 2.0, 3.0],
            budget: 100.0,
        };
        for s in all_variants(&inst) {
            assert_eq!(s.selected, vec![1, 2, 0]);
            assert_eq!(s.next, None);
        }
        let inst = BfrtInstance { budget: 0.0, ..inst };
        for s in all_variants(&inst) {
            assert!(s.selected.is_empty());
            assert_eq!(s.next, Some(1));
        }
    }

    #[test]
    fn ties_break_by_index() {
        let inst = BfrtInstance {
            scores: vec![1.0, 1.0, 1.0],
            costs: vec![1.0, 1.0, 1.0],
            budget: 2.0,
        };
        for s in all_variants(&inst) {
            assert_eq!(s.selected, vec![0, 1]);
            assert_eq!(s.next, Some(2));
        }
    }

    #[test]
    fn variant_choice() {
        assert_eq!(choose_variant(0, None), BfrtVariant::LargeBudget);
        assert_eq!(choose_variant(5, None), BfrtVariant::SmallBudget);
        assert_eq!(choose_variant(0, Some(BfrtVariant::Sequential)), BfrtVariant::Sequential);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            items in prop::collection::vec((0u32..50, 0.0f64..10.0), 0..20),
            budget in 0.0f64..60.0,
        ) {
            let inst = BfrtInstance {
                scores: items.iter().map(|p| f64::from(p.0) * 0.5).collect(),
                costs: items.iter().map(|p| p.1).collect(),
                budget,
            };
            let want = brute_force(&inst);
            for got in all_variants(&inst) {
                prop_assert_eq!(&got, &want);
            }
        }

        #[test]
        fn variants_agree_across_chunks(
            seed_scores in prop::collection::vec(0.0f64..1.0, 20_000..20_001),
            budget in 0.0f64..200.0,
        ) {
            let n = seed_scores.len();
            let inst = BfrtInstance {
                costs: (0..n).map(|i| ((i * 7919) % 97) as f64 * 0.01).collect(),
                scores: seed_scores,
                budget,
            };
            let [a, b, c] = all_variants(&inst);
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(&a, &c);
        }
    }
}
