use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::geom::{sq_dist, SpatialIndex};

/// Above this many features a KD-tree prunes too little to beat a full scan.
const TREE_MAX_DIM: usize = 6;

/// Mean response of the `k` nearest training rows in feature space.
/// Distance ties go to the lower training row.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "KnnState", into = "KnnState")]
pub struct KnnRegressor {
    state: KnnState,
    index: Option<SpatialIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct KnnState {
    k: usize,
    n_features: usize,
    rows: Vec<f64>,
    response: Vec<f64>,
}

impl From<KnnState> for KnnRegressor {
    fn from(state: KnnState) -> Self {
        let index = (state.n_features <= TREE_MAX_DIM).then(|| {
            let ranks: Vec<usize> = (0..state.response.len()).collect();
            SpatialIndex::from_flat(state.n_features, &state.rows, &ranks)
        });
        KnnRegressor { state, index }
    }
}

impl From<KnnRegressor> for KnnState {
    fn from(m: KnnRegressor) -> Self {
        m.state
    }
}

impl PartialEq for KnnRegressor {
    fn eq(&self, other: &Self) -> bool {
        self.state == other.state
    }
}

impl KnnRegressor {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[f64], k: usize) -> Self {
        KnnState {
            k: k.min(y.len()),
            n_features: x.ncols(),
            rows: x.iter().copied().collect(),
            response: y.to_vec(),
        }
        .into()
    }

    pub fn k(&self) -> usize {
        self.state.k
    }

    pub fn n_features(&self) -> usize {
        self.state.n_features
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let ids: Vec<usize> = match &self.index {
            Some(index) => index.knn(x, self.state.k).into_iter().map(|n| n.id).collect(),
            None => self.scan(x),
        };
        ids.iter().map(|&i| self.state.response[i]).sum::<f64>() / ids.len() as f64
    }

    fn scan(&self, x: &[f64]) -> Vec<usize> {
        let (k, p) = (self.state.k, self.state.n_features);
        let mut d: Vec<(f64, usize)> = self
            .state
            .rows
            .chunks_exact(p)
            .enumerate()
            .map(|(i, row)| (sq_dist(row, x), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_unstable_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_neighbor_returns_training_response() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 5.0]];
        let y = [3.0, -1.0, 8.0];
        let m = KnnRegressor::fit(x.view(), &y, 1);
        for i in 0..3 {
            assert_eq!(m.predict_row(x.row(i).as_slice().unwrap()), y[i]);
        }
    }

    #[test]
    fn all_neighbors_give_the_mean() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 5.0], [1.0, -2.0]];
        let y = [3.0, -1.0, 8.0, 2.0];
        let m = KnnRegressor::fit(x.view(), &y, 4);
        for q in [[1.0, 0.3], [1.0, 100.0]] {
            assert_eq!(m.predict_row(&q), 3.0);
        }
        // k above n is clamped
        assert_eq!(KnnRegressor::fit(x.view(), &y, 50).k(), 4);
    }

    #[test]
    fn equidistant_tie_uses_lower_row() {
        // query at 0 is equidistant from rows 1 and 2; k = 1 takes row 1
        let x = array![[1.0, 5.0], [1.0, -1.0], [1.0, 1.0]];
        let y = [0.0, 10.0, 20.0];
        let m = KnnRegressor::fit(x.view(), &y, 1);
        assert_eq!(m.predict_row(&[1.0, 0.0]), 10.0);
        let x2 = array![[1.0, 5.0], [1.0, 1.0], [1.0, -1.0]];
        let m2 = KnnRegressor::fit(x2.view(), &y, 1);
        assert_eq!(m2.predict_row(&[1.0, 0.0]), 10.0);
    }

    #[test]
    fn scan_agrees_with_tree() {
        let x = ndarray::Array2::from_shape_fn((97, 3), |(i, j)| ((i * (j + 3) * 37) % 11) as f64);
        let y: Vec<f64> = (0..97).map(|i| (i as f64 * 0.7).sin()).collect();
        let m = KnnRegressor::fit(x.view(), &y, 6);
        assert!(m.index.is_some());
        for q in [[0.0, 3.0, 5.0], [10.0, 1.0, 2.0], [4.5, 4.5, 4.5]] {
            let tree: Vec<usize> = m.index.as_ref().unwrap().knn(&q, 6).into_iter().map(|n| n.id).collect();
            assert_eq!(tree, m.scan(&q));
        }
    }
}
