use ndarray::ArrayView2;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

/// CART regression tree, variance-reduction splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            if n.feature == LEAF {
                return n.value;
            }
            i = if x[n.feature as usize] <= n.threshold {
                n.left
            } else {
                n.right
            } as usize;
        }
    }
}

/// Grows one tree over a bootstrap sample. Every feature keeps the sample
/// slots sorted by value; a node owns the same contiguous range in each of
/// these orders, and splits partition the ranges stably.
struct Grower {
    p: usize,
    min_leaf: usize,
    mtry: usize,
    nodes: Vec<Node>,
    /// Feature `f` of bootstrap slot `s` at `xs[f * n + s]`.
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// `orders[f]` lists slots by increasing feature `f`.
    orders: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    buf: Vec<u32>,
}

impl Grower {
    fn new(x: &[f64], p: usize, y: &[f64], min_leaf: usize, mtry: usize, rows: &[usize]) -> Self {
        let n = rows.len();
        let mut xs = vec![0.0; n * p];
        for (s, &r) in rows.iter().enumerate() {
            for f in 0..p {
                xs[f * n + s] = x[r * p + f];
            }
        }
        let mut pairs: Vec<(f64, u32)> = Vec::with_capacity(n);
        let orders = (0..p)
            .map(|f| {
                pairs.clear();
                pairs.extend(xs[f * n..(f + 1) * n].iter().enumerate().map(|(s, &v)| (v, s as u32)));
                pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                pairs.iter().map(|&(_, s)| s).collect()
            })
            .collect();
        Grower {
            p,
            min_leaf,
            mtry,
            nodes: Vec::new(),
            xs,
            ys: rows.iter().map(|&r| y[r]).collect(),
            orders,
            goes_left: vec![false; n],
            buf: Vec::with_capacity(n),
        }
    }

    fn value(&self, slot: u32, f: usize) -> f64 {
        self.xs[f * self.ys.len() + slot as usize]
    }

    fn response(&self, slot: u32) -> f64 {
        self.ys[slot as usize]
    }

    fn leaf(&mut self, mean: f64) -> u32 {
        self.nodes.push(Node {
            feature: LEAF,
            threshold: 0.0,
            left: LEAF,
            right: LEAF,
            value: mean,
        });
        (self.nodes.len() - 1) as u32
    }

    fn grow<R: Rng>(&mut self, start: usize, end: usize, rng: &mut R) -> u32 {
        let m = end - start;
        let slots = &self.orders[0][start..end];
        let total: f64 = slots.iter().map(|&s| self.response(s)).sum();
        let mean = total / m as f64;
        let first = self.response(slots[0]);
        if m < 2 * self.min_leaf || slots.iter().all(|&s| self.response(s) == first) {
            return self.leaf(mean);
        }
        let parent = total * total / m as f64;

        // (score, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        for f in sample_indices(rng, self.p, self.mtry.min(self.p)) {
            let order = &self.orders[f][start..end];
            let mut left = 0.0;
            for i in 0..m - 1 {
                left += self.response(order[i]);
                let nl = i + 1;
                let (a, b) = (self.value(order[i], f), self.value(order[i + 1], f));
                if a == b || nl < self.min_leaf || m - nl < self.min_leaf {
                    continue;
                }
                let right = total - left;
                let score = left * left / nl as f64 + right * right / (m - nl) as f64;
                if best.is_none_or(|(s, _, _)| score > s) {
                    let mut t = 0.5 * (a + b);
                    if t >= b {
                        t = a;
                    }
                    best = Some((score, f, t));
                }
            }
        }

        let Some((score, feature, threshold)) = best else {
            return self.leaf(mean);
        };
        if !(score > parent) {
            return self.leaf(mean);
        }

        let mut split = 0;
        for i in start..end {
            let s = self.orders[feature][i];
            let left = self.value(s, feature) <= threshold;
            self.goes_left[s as usize] = left;
            split += left as usize;
        }
        for f in 0..self.p {
            self.buf.clear();
            let order = &mut self.orders[f][start..end];
            self.buf.extend(order.iter().filter(|&&s| !self.goes_left[s as usize]));
            let mut l = 0;
            for i in 0..m {
                if self.goes_left[order[i] as usize] {
                    order[l] = order[i];
                    l += 1;
                }
            }
            order[l..].copy_from_slice(&self.buf);
        }

        let slot = self.nodes.len();
        self.nodes.push(Node {
            feature: feature as u32,
            threshold,
            left: LEAF,
            right: LEAF,
            value: mean,
        });
        let left = self.grow(start, start + split, rng);
        let right = self.grow(start + split, end, rng);
        self.nodes[slot].left = left;
        self.nodes[slot].right = right;
        slot as u32
    }
}

/// Bootstrap-aggregated regression trees with per-split feature subsampling.
///
/// Tree `t` draws its bootstrap sample and feature subsets from a ChaCha
/// stream `t` keyed by the learner seed, so fits are reproducible and
/// independent of thread scheduling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggedTrees {
    n_features: usize,
    trees: Vec<Tree>,
}

impl BaggedTrees {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[f64], trees: usize, min_leaf: usize, mtry: usize, seed: u64) -> Self {
        let (n, p) = x.dim();
        let flat: Vec<f64> = x.iter().copied().collect();
        let trees = (0..trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut g = Grower::new(&flat, p, y, min_leaf, mtry, &rows);
                g.grow(0, n, &mut rng);
                Tree { nodes: g.nodes }
            })
            .collect();
        BaggedTrees { n_features: p, trees }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}
