use std::cmp::Ordering as CmpOrdering;
use std::collections::BinaryHeap;

use super::{sq_dist, LocationSet, Ordering, SpatialIndex};

// Heap key: larger min-distance first, then lower index.
#[derive(Debug, Clone, Copy)]
struct Entry {
    sq_dist: f64,
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == CmpOrdering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        self.sq_dist
            .total_cmp(&other.sq_dist)
            .then(other.index.cmp(&self.index))
    }
}

/// Greedy max-min ordering.
///
/// Starts at the point nearest the centroid; every later step picks the
/// unselected point whose distance to the selected set is largest. All ties
/// go to the lowest original index.
///
/// Output is identical to the quadratic greedy scan. Selecting a point whose
/// min-distance is `r` can only lower the min-distance of points within `r`
/// of it, so each step updates a radius query instead of the whole set and a
/// lazy max-heap tracks the current maximum. On roughly uniform data this
/// runs in about `O(n log n)`.
pub fn maxmin_order(locs: &LocationSet) -> Ordering {
    let n = locs.len();
    if n == 1 {
        return Ordering::identity(1);
    }

    let centroid = locs.centroid();
    let first = (0..n)
        .map(|i| (sq_dist(locs.point(i), &centroid), i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, i)| i)
        .expect("non-empty");

    let index = SpatialIndex::build(locs);
    let mut selected = vec![false; n];
    let mut min_dist = vec![f64::INFINITY; n];
    let mut perm = Vec::with_capacity(n);
    let mut heap = BinaryHeap::with_capacity(2 * n);

    selected[first] = true;
    perm.push(first);
    let p0 = locs.point(first);
    for q in 0..n {
        if q != first {
            min_dist[q] = sq_dist(p0, locs.point(q));
            heap.push(Entry {
                sq_dist: min_dist[q],
                index: q,
            });
        }
    }

    let mut nearby = Vec::new();
    while let Some(Entry { sq_dist: d, index: s }) = heap.pop() {
        if selected[s] || d != min_dist[s] {
            continue;
        }
        selected[s] = true;
        perm.push(s);
        let ps = locs.point(s);
        index.within(ps, d, &mut nearby);
        for &q in &nearby {
            if selected[q] {
                continue;
            }
            let dq = sq_dist(ps, locs.point(q));
            if dq < min_dist[q] {
                min_dist[q] = dq;
                heap.push(Entry { sq_dist: dq, index: q });
            }
        }
    }
    debug_assert_eq!(perm.len(), n);
    Ordering::new(perm).expect("greedy selection visits each point once")
}
