//! Point-in-box lookup over the disjoint group boxes of a partition.
//!
//! The boxes are recursively separated by cut planes: at each node the
//! attribute giving the most pieces wins, ties going to the attribute with
//! the highest representative variance. Partitions produced by recursive
//! splitting always separate down to single boxes; anything that does not
//! ends in a small leaf scanned linearly.

use super::Partition;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
enum Node {
    Split { attr: usize, cuts: Vec<f64>, children: Vec<usize> },
    Leaf(Vec<u32>),
}

#[derive(Debug, Clone)]
pub struct MembershipIndex {
    k: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    nodes: Vec<Node>,
}

impl MembershipIndex {
    pub fn build(partition: &Partition) -> Self {
        let k = partition.n_attrs;
        let g = partition.n_groups();
        let mut lo = Vec::with_capacity(g * k);
        let mut hi = Vec::with_capacity(g * k);
        for grp in &partition.groups {
            lo.extend_from_slice(&grp.lo);
            hi.extend_from_slice(&grp.hi);
        }
        let reps = partition.representative_columns();
        let var: Vec<f64> = reps.iter().map(|c| crate::stats::variance(c)).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
        let mut index = Self {
            k,
            lo,
            hi,
            nodes: Vec::new(),
        };
        index.nodes.push(Node::Leaf(Vec::new()));
        let mut stack = vec![(0usize, (0..g as u32).collect::<Vec<_>>())];
        while let Some((slot, ids)) = stack.pop() {
            if ids.len() <= LEAF_SIZE {
                index.nodes[slot] = Node::Leaf(ids);
                continue;
            }
            let mut best: Option<(usize, Vec<f64>, Vec<Vec<u32>>)> = None;
            for &j in &order {
                let (cuts, pieces) = index.separate(&ids, j);
                if pieces.len() > best.as_ref().map_or(1, |b| b.2.len()) {
                    best = Some((j, cuts, pieces));
                }
            }
            let Some((attr, cuts, pieces)) = best else {
                index.nodes[slot] = Node::Leaf(ids);
                continue;
            };
            let mut children = Vec::with_capacity(pieces.len());
            for piece in pieces {
                let c = index.nodes.len();
                index.nodes.push(Node::Leaf(Vec::new()));
                children.push(c);
                stack.push((c, piece));
            }
            index.nodes[slot] = Node::Split { attr, cuts, children };
        }
        index
    }

    /// Sort by lower edge on `j` and cut wherever no earlier box reaches past
    /// the next lower edge.
    fn separate(&self, ids: &[u32], j: usize) -> (Vec<f64>, Vec<Vec<u32>>) {
        let k = self.k;
        let mut sorted = ids.to_vec();
        sorted.sort_by(|&a, &b| {
            let (a, b) = (a as usize * k + j, b as usize * k + j);
            self.lo[a].total_cmp(&self.lo[b]).then(self.hi[a].total_cmp(&self.hi[b]))
        });
        let mut cuts = Vec::new();
        let mut pieces = vec![Vec::new()];
        let mut reach = f64::NEG_INFINITY;
        for (pos, &g) in sorted.iter().enumerate() {
            let (l, h) = (self.lo[g as usize * k + j], self.hi[g as usize * k + j]);
            if pos > 0 && l >= reach {
                cuts.push(l);
                pieces.push(Vec::new());
            }
            reach = reach.max(h);
            pieces.last_mut().expect("nonempty").push(g);
        }
        (cuts, pieces)
    }

    fn contains(&self, g: usize, t: &[f64]) -> bool {
        let k = self.k;
        (0..k).all(|j| self.lo[g * k + j] <= t[j] && t[j] < self.hi[g * k + j])
    }

    /// The group whose box holds `t`, if any.
    pub fn get_group(&self, t: &[f64]) -> Option<usize> {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Split { attr, cuts, children } => {
                    let c = cuts.partition_point(|&x| x <= t[*attr]);
                    node = children[c];
                }
                Node::Leaf(ids) => {
                    return ids.iter().map(|&g| g as usize).find(|&g| self.contains(g, t));
                }
            }
        }
    }

    pub fn n_groups(&self) -> usize {
        self.lo.len() / self.k.max(1)
    }

    /// Depth of the cut tree, for diagnostics.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 1usize)];
        while let Some((n, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Split { children, .. } = &self.nodes[n] {
                stack.extend(children.iter().map(|&c| (c, d + 1)));
            }
        }
        best
    }
}
