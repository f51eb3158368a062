//! Independent dense and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use vdecor::geom::LocationSet;
use vdecor::kernel::CorrelationModel;
use vdecor::vecchia::VecchiaFactors;

pub fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Points on an integer lattice, many exact distance ties.
pub fn lattice(side: usize) -> LocationSet {
    let rows: Vec<[f64; 2]> = (0..side * side)
        .map(|i| [(i % side) as f64, (i / side) as f64])
        .collect();
    LocationSet::from_rows(&rows).unwrap()
}

/// Correlation matrix of `locs` taken in the given order.
pub fn dense_correlation(locs: &LocationSet, model: &CorrelationModel, order: &[usize]) -> DMatrix<f64> {
    let n = order.len();
    DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            1.0
        } else {
            let d = sq(locs.point(order[a]), locs.point(order[b])).sqrt();
            (1.0 - model.nugget) * model.correlation(d).unwrap()
        }
    })
}

/// The lower-triangular transform implied by the factors, in ordered positions.
pub fn transform_matrix(f: &VecchiaFactors) -> DMatrix<f64> {
    let n = f.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let s = f.variance(i).max(1e-12).sqrt();
        a[(i, i)] = 1.0 / s;
        for (&j, &b) in f.sets().get(i).iter().zip(f.weights(i)) {
            a[(i, j)] = -b / s;
        }
    }
    a
}

/// The `k` nearest rows of `locs` to `q`, ties by lower row.
pub fn brute_knn(locs: &LocationSet, q: &[f64], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..locs.len()).map(|i| (sq(locs.point(i), q), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, i)| i).collect()
}

fn centroid_start(locs: &LocationSet) -> usize {
    let n = locs.len();
    let dim = locs.dim();
    let c: Vec<f64> = (0..dim)
        .map(|k| (0..n).map(|i| locs.point(i)[k]).sum::<f64>() / n as f64)
        .collect();
    (0..n)
        .min_by(|&a, &b| sq(locs.point(a), &c).total_cmp(&sq(locs.point(b), &c)).then(a.cmp(&b)))
        .unwrap()
}

/// Quadratic greedy max-min ordering, ties by lower index.
pub fn naive_maxmin(locs: &LocationSet) -> Vec<usize> {
    let n = locs.len();
    let first = centroid_start(locs);
    let mut perm = vec![first];
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut mind: Vec<f64> = (0..n).map(|i| sq(locs.point(i), locs.point(first))).collect();
    while perm.len() < n {
        let mut best = usize::MAX;
        for i in 0..n {
            if !chosen[i] && (best == usize::MAX || mind[i] > mind[best]) {
                best = i;
            }
        }
        chosen[best] = true;
        perm.push(best);
        for i in 0..n {
            mind[i] = mind[i].min(sq(locs.point(i), locs.point(best)));
        }
    }
    perm
}

/// Checks the max-min property of `perm` from scratch at every step.
pub fn verify_maxmin(locs: &LocationSet, perm: &[usize]) -> Result<(), String> {
    let n = locs.len();
    if perm.len() != n {
        return Err("length".into());
    }
    if perm[0] != centroid_start(locs) {
        return Err(format!("first point {} is not nearest the centroid", perm[0]));
    }
    for i in 1..n {
        let min_to_prefix = |j: usize| {
            perm[..i]
                .iter()
                .map(|&p| sq(locs.point(p), locs.point(j)))
                .fold(f64::INFINITY, f64::min)
        };
        let got = min_to_prefix(perm[i]);
        for &j in &perm[i..] {
            let dj = min_to_prefix(j);
            if dj > got || (dj == got && j < perm[i]) {
                return Err(format!("position {i}: {} chosen but {j} is farther or ties lower", perm[i]));
            }
        }
    }
    Ok(())
}

/// Exhaustive conditioning sets in ordered positions.
pub fn naive_sets(locs: &LocationSet, perm: &[usize], cap: usize) -> Vec<Vec<usize>> {
    (0..perm.len())
        .map(|i| {
            let mut c: Vec<(f64, usize, usize)> = (0..i)
                .map(|j| (sq(locs.point(perm[i]), locs.point(perm[j])), perm[j], j))
                .collect();
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            c.into_iter().take(cap).map(|(_, _, j)| j).collect()
        })
        .collect()
}

/// Dense GLS coefficients `(X'R^-1X)^-1 X'R^-1 y`.
pub fn gls(x: &DMatrix<f64>, y: &DVector<f64>, r: &DMatrix<f64>) -> DVector<f64> {
    let chol = r.clone().cholesky().expect("positive definite");
    let rx = chol.solve(x);
    let ry = chol.solve(y);
    let lhs = x.transpose() * rx;
    let rhs = x.transpose() * ry;
    lhs.cholesky().expect("full rank").solve(&rhs)
}

pub fn to_dmatrix(a: &ndarray::Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}
