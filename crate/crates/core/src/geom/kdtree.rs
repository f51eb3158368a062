//! Exact k-nearest-neighbor search over a static point set.
//!
//! The tree stores every point together with an `id` used to break distance
//! ties (lower id wins) and a `rank` used to restrict queries to a prefix of
//! some external ordering. Each node caches the minimum rank of its subtree
//! so rank-limited queries skip whole subtrees that hold only later points.

use std::cmp::Ordering as CmpOrdering;
use std::collections::BinaryHeap;

use super::{sq_dist, LocationSet};

const LEAF_SIZE: usize = 8;
const NONE: u32 = u32::MAX;

/// A neighbor returned by a query: the point's id and its squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub sq_dist: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        self.sq_dist.sqrt()
    }
}

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    left: u32,
    right: u32,
    min_rank: usize,
}

/// Immutable KD-tree answering exact Euclidean k-nearest queries.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    coords: Vec<f64>,
    ids: Vec<usize>,
    ranks: Vec<usize>,
    nodes: Vec<Node>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

// Max-heap entry keyed on (distance, id); the top is the current worst.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    sq_dist: f64,
    id: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == CmpOrdering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        self.sq_dist
            .total_cmp(&other.sq_dist)
            .then(self.id.cmp(&other.id))
    }
}

impl SpatialIndex {
    /// Index every point of `locs`, with ids and ranks equal to row indices.
    pub fn build(locs: &LocationSet) -> Self {
        let n = locs.len();
        Self::build_ranked(locs, &(0..n).collect::<Vec<_>>())
    }

    /// Index `locs` with a caller-supplied rank per row (ids stay row indices).
    pub fn build_ranked(locs: &LocationSet, ranks: &[usize]) -> Self {
        assert_eq!(ranks.len(), locs.len(), "one rank per point");
        Self::from_flat(locs.dim(), locs.as_flat(), ranks)
    }

    /// Index a row-major `n x dim` buffer.
    pub fn from_flat(dim: usize, flat: &[f64], ranks: &[usize]) -> Self {
        assert!(dim >= 1);
        let n = flat.len() / dim;
        assert_eq!(n * dim, flat.len());
        assert_eq!(ranks.len(), n);

        let mut order: Vec<usize> = (0..n).collect();
        let mut index = SpatialIndex {
            dim,
            coords: Vec::with_capacity(n * dim),
            ids: Vec::with_capacity(n),
            ranks: Vec::with_capacity(n),
            nodes: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
        };
        if n > 0 {
            index.build_node(flat, ranks, &mut order, 0);
        }
        for &row in &order {
            index.coords.extend_from_slice(&flat[row * dim..(row + 1) * dim]);
            index.ids.push(row);
            index.ranks.push(ranks[row]);
        }
        index
    }

    fn build_node(&mut self, flat: &[f64], ranks: &[usize], order: &mut [usize], start: usize) -> u32 {
        let dim = self.dim;
        let slot = self.nodes.len();
        let end = start + order.len();
        self.nodes.push(Node {
            start,
            end,
            left: NONE,
            right: NONE,
            min_rank: order.iter().map(|&r| ranks[r]).min().unwrap_or(usize::MAX),
        });

        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &row in order.iter() {
            for k in 0..dim {
                let v = flat[row * dim + k];
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        let split_dim = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let spread = hi[split_dim] - lo[split_dim];
        self.lo.extend_from_slice(&lo);
        self.hi.extend_from_slice(&hi);

        if order.len() <= LEAF_SIZE || spread <= 0.0 {
            return slot as u32;
        }

        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            flat[a * dim + split_dim].total_cmp(&flat[b * dim + split_dim])
        });
        let (left, right) = order.split_at_mut(mid);
        let l = self.build_node(flat, ranks, left, start);
        let r = self.build_node(flat, ranks, right, start + mid);
        self.nodes[slot].left = l;
        self.nodes[slot].right = r;
        slot as u32
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, slot: usize) -> &[f64] {
        &self.coords[slot * self.dim..(slot + 1) * self.dim]
    }

    fn box_sq_dist(&self, node: usize, query: &[f64]) -> f64 {
        let lo = &self.lo[node * self.dim..(node + 1) * self.dim];
        let hi = &self.hi[node * self.dim..(node + 1) * self.dim];
        let mut acc = 0.0;
        for k in 0..self.dim {
            let q = query[k];
            let gap = if q < lo[k] {
                lo[k] - q
            } else if q > hi[k] {
                q - hi[k]
            } else {
                0.0
            };
            acc += gap * gap;
        }
        acc
    }

    /// The `k` nearest points to `query`, nearest first, ties by lower id.
    pub fn knn(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        self.knn_ranked(query, k, usize::MAX)
    }

    /// The `k` nearest points among those with rank strictly below `rank_limit`.
    pub fn knn_ranked(&self, query: &[f64], k: usize, rank_limit: usize) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.dim, "query dimension");
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, rank_limit, &mut heap);
        let mut out: Vec<Neighbor> = heap
            .into_iter()
            .map(|c| Neighbor {
                id: c.id,
                sq_dist: c.sq_dist,
            })
            .collect();
        out.sort_by(|a, b| a.sq_dist.total_cmp(&b.sq_dist).then(a.id.cmp(&b.id)));
        out
    }

    fn search(
        &self,
        node: usize,
        query: &[f64],
        k: usize,
        rank_limit: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        let n = &self.nodes[node];
        if n.min_rank >= rank_limit {
            return;
        }
        if heap.len() == k {
            // Equal distance may still hide a lower id, so prune only on strict excess.
            if self.box_sq_dist(node, query) > heap.peek().map_or(f64::INFINITY, |c| c.sq_dist) {
                return;
            }
        }
        if n.left == NONE {
            for slot in n.start..n.end {
                if self.ranks[slot] >= rank_limit {
                    continue;
                }
                let cand = Candidate {
                    sq_dist: sq_dist(self.point(slot), query),
                    id: self.ids[slot],
                };
                if heap.len() < k {
                    heap.push(cand);
                } else if cand < *heap.peek().expect("heap is full") {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        let (l, r) = (n.left as usize, n.right as usize);
        let (dl, dr) = (self.box_sq_dist(l, query), self.box_sq_dist(r, query));
        let (first, second) = if dl <= dr { (l, r) } else { (r, l) };
        self.search(first, query, k, rank_limit, heap);
        self.search(second, query, k, rank_limit, heap);
    }

    /// Ids of all points within squared distance `sq_radius` (inclusive), unordered.
    pub fn within(&self, query: &[f64], sq_radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if !self.is_empty() {
            self.collect_within(0, query, sq_radius, out);
        }
    }

    fn collect_within(&self, node: usize, query: &[f64], sq_radius: f64, out: &mut Vec<usize>) {
        if self.box_sq_dist(node, query) > sq_radius {
            return;
        }
        let n = &self.nodes[node];
        if n.left == NONE {
            for slot in n.start..n.end {
                if sq_dist(self.point(slot), query) <= sq_radius {
                    out.push(self.ids[slot]);
                }
            }
            return;
        }
        self.collect_within(n.left as usize, query, sq_radius, out);
        self.collect_within(n.right as usize, query, sq_radius, out);
    }
}
