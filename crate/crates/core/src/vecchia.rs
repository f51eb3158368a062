//! Nearest-neighbor Gaussian decorrelation.
//!
//! Observations are put in max-min order and each one is conditioned on at
//! most `C` nearest earlier neighbors. For position `i` with neighbor set
//! `N(i)` the weights are `b_i = R(i, N) R(N, N)^-1` and the conditional
//! variance is `v_i = 1 - b_i R(N, i)`. The forward map
//!
//! ```text
//! y~_i = (y_i - b_i . y_N(i)) / sqrt(v_i)
//! ```
//!
//! is applied identically to the response and to every feature column
//! (intercept included). A prediction `y~*` made on the transformed scale at
//! a new location `u` is mapped back with `y*(u) = sqrt(v_u) y~* + b_u . y_N(u)`,
//! where `N(u)` are the `C` nearest training locations.

use std::io::{Read, Write};

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{maxmin_order, sq_dist, ConditioningSets, LocationSet, Ordering, SpatialIndex};
use crate::kernel::CorrelationModel;
use crate::linalg::{dot, Cholesky};

pub const DEFAULT_NEIGHBORS: usize = 30;
/// Diagonal jitter used on the single retry after a failed factorization.
pub const CHOLESKY_JITTER: f64 = 1e-10;
/// Lower bound applied to conditional variances before `v^-1/2`.
pub const VARIANCE_FLOOR: f64 = 1e-12;
pub const FACTORS_FORMAT_VERSION: u32 = 1;

/// Ordering and conditioning sets. Depends on locations and `C` only, so it
/// can be shared across every correlation model evaluated on the same points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecchiaGeometry {
    ordering: Ordering,
    sets: ConditioningSets,
}

impl VecchiaGeometry {
    pub fn build(locs: &LocationSet, neighbors: usize) -> Result<Self> {
        if neighbors < 1 {
            return Err(Error::InvalidParameter("neighbor count C must be >= 1".into()));
        }
        let ordering = maxmin_order(locs);
        let sets = ConditioningSets::build(locs, &ordering, neighbors)?;
        Ok(VecchiaGeometry { ordering, sets })
    }

    pub fn ordering(&self) -> &Ordering {
        &self.ordering
    }

    pub fn sets(&self) -> &ConditioningSets {
        &self.sets
    }
}

/// Conditioning weights and variances for one point, given its neighbors.
struct Conditional {
    weights: Vec<f64>,
    variance: f64,
}

#[derive(Default)]
struct Scratch {
    block: Vec<f64>,
    cross: Vec<f64>,
}

/// Pairwise correlations among all training points, `n x n` row-major.
/// Used when the conditioning sets together cover more pairs than the
/// full matrix holds.
struct PairTable {
    n: usize,
    values: Vec<f64>,
}

const PAIR_TABLE_MAX_POINTS: usize = 4_096;

impl PairTable {
    fn build(locs: &LocationSet, model: &CorrelationModel) -> Self {
        let n = locs.len();
        let mut values = vec![1.0; n * n];
        values.par_chunks_mut(n).enumerate().for_each(|(a, row)| {
            let pa = locs.point(a);
            for (b, v) in row.iter_mut().enumerate() {
                if a != b {
                    *v = model.cross(sq_dist(pa, locs.point(b)).sqrt());
                }
            }
        });
        PairTable { n, values }
    }

    fn fill(&self, target: usize, points: &[usize], scratch: &mut Scratch) {
        scratch.block.clear();
        for &a in points {
            let row = &self.values[a * self.n..(a + 1) * self.n];
            scratch.block.extend(points.iter().map(|&b| row[b]));
        }
        scratch.cross.clear();
        scratch.cross.extend(points.iter().map(|&b| self.values[target * self.n + b]));
    }
}

fn condition_on(
    target: &[f64],
    neighbors: &[usize],
    locs: &LocationSet,
    model: &CorrelationModel,
    scratch: &mut Scratch,
) -> std::result::Result<Conditional, ()> {
    model.block_into(locs, neighbors, &mut scratch.block);
    model.cross_into(target, locs, neighbors, &mut scratch.cross);
    solve_local(neighbors.len(), scratch)
}

fn solve_local(k: usize, scratch: &mut Scratch) -> std::result::Result<Conditional, ()> {
    let chol = Cholesky::factor(&scratch.block, k, 0.0)
        .or_else(|_| Cholesky::factor(&scratch.block, k, CHOLESKY_JITTER))
        .map_err(|_| ())?;
    // w = L^-1 r, v = 1 - |w|^2, b = L^-T w
    let mut w = scratch.cross.clone();
    chol.solve_lower(&mut w);
    let variance = (1.0 - dot(&w, &w)).clamp(0.0, 1.0);
    chol.solve_upper(&mut w);
    Ok(Conditional {
        weights: w,
        variance,
    })
}

/// Fitted decorrelation transform for one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecchiaFactors {
    ordering: Ordering,
    sets: ConditioningSets,
    weights: Vec<Vec<f64>>,
    variances: Vec<f64>,
    model: CorrelationModel,
    neighbors: usize,
}

/// Order `locs` by max-min, build neighbor sets of size `neighbors` and
/// compute every conditional weight vector and variance under `model`.
pub fn compute_factors(locs: &LocationSet, model: &CorrelationModel, neighbors: usize) -> Result<VecchiaFactors> {
    let geometry = VecchiaGeometry::build(locs, neighbors)?;
    VecchiaFactors::from_geometry(&geometry, locs, model)
}

impl VecchiaFactors {
    pub fn from_geometry(geometry: &VecchiaGeometry, locs: &LocationSet, model: &CorrelationModel) -> Result<Self> {
        let model = model.validated()?;
        let n = locs.len();
        if geometry.ordering.len() != n {
            return Err(Error::DimensionMismatch {
                context: "geometry size",
                expected: n,
                got: geometry.ordering.len(),
            });
        }
        let ord = &geometry.ordering;
        let pairs: usize = (0..n).map(|i| geometry.sets.get(i).len().pow(2)).sum();
        let table = (n <= PAIR_TABLE_MAX_POINTS && pairs > n * n).then(|| PairTable::build(locs, &model));
        let solved: Vec<Result<Conditional>> = (0..n)
            .into_par_iter()
            .map_init(Scratch::default, |scratch, pos| {
                let orig: Vec<usize> = geometry.sets.get(pos).iter().map(|&p| ord.original(p)).collect();
                let index = ord.original(pos);
                let c = match &table {
                    Some(t) => {
                        t.fill(index, &orig, scratch);
                        solve_local(orig.len(), scratch)
                    }
                    None => condition_on(locs.point(index), &orig, locs, &model, scratch),
                };
                c.map_err(|_| Error::SingularCorrelation { index })
            })
            .collect();
        let mut weights = Vec::with_capacity(n);
        let mut variances = Vec::with_capacity(n);
        for c in solved {
            let c = c?;
            weights.push(c.weights);
            variances.push(c.variance);
        }
        Ok(VecchiaFactors {
            ordering: geometry.ordering.clone(),
            sets: geometry.sets.clone(),
            weights,
            variances,
            model,
            neighbors: geometry.sets.cap(),
        })
    }

    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }

    pub fn ordering(&self) -> &Ordering {
        &self.ordering
    }

    pub fn sets(&self) -> &ConditioningSets {
        &self.sets
    }

    /// Weights of ordered position `pos`, aligned with `sets().get(pos)`.
    pub fn weights(&self, pos: usize) -> &[f64] {
        &self.weights[pos]
    }

    pub fn variance(&self, pos: usize) -> f64 {
        self.variances[pos]
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn model(&self) -> &CorrelationModel {
        &self.model
    }

    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    fn check_len(&self, got: usize, context: &'static str) -> Result<()> {
        if got != self.len() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }

    // y~ at ordered position `pos` for a column indexed by original row
    #[inline]
    fn forward_at(&self, pos: usize, column: impl Fn(usize) -> f64) -> f64 {
        let lag: f64 = self.sets.get(pos)
            .iter()
            .zip(&self.weights[pos])
            .map(|(&p, &b)| b * column(self.ordering.original(p)))
            .sum();
        (column(self.ordering.original(pos)) - lag) / self.variances[pos].max(VARIANCE_FLOOR).sqrt()
    }

    /// Decorrelated response, in max-min order. `y` is in input order.
    pub fn decorrelate_response(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y.len(), "response length")?;
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                row,
                column: "y".into(),
                message: "non-finite response".into(),
            });
        }
        Ok((0..self.len()).map(|pos| self.forward_at(pos, |i| y[i])).collect())
    }

    /// Decorrelated features, rows in max-min order. The leading column of
    /// `x` must be the all-ones intercept; it is transformed like any other.
    pub fn decorrelate_features(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_len(x.nrows(), "feature rows")?;
        check_intercept(x)?;
        let mut out = Array2::zeros(x.raw_dim());
        for (c, col) in x.axis_iter(Axis(1)).enumerate() {
            for pos in 0..self.len() {
                out[[pos, c]] = self.forward_at(pos, |i| col[i]);
            }
        }
        Ok(out)
    }

    /// Transform both response and features.
    pub fn transform(&self, y: &[f64], x: ArrayView2<'_, f64>) -> Result<TransformedDataset> {
        Ok(TransformedDataset {
            response: self.decorrelate_response(y)?,
            features: self.decorrelate_features(x)?,
            ordering: self.ordering.clone(),
        })
    }

    /// Back-transform factors for the training point at ordered position `pos`
    /// (its own earlier-neighbor conditional), with neighbors as input indices.
    pub fn training_conditional(&self, pos: usize) -> PredictionFactors {
        PredictionFactors {
            neighbors: self.sets.get(pos).iter().map(|&p| self.ordering.original(p)).collect(),
            weights: self.weights[pos].clone(),
            variance: self.variances[pos],
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(
            writer,
            &Versioned {
                version: FACTORS_FORMAT_VERSION,
                factors: self,
            },
        )?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let v: Versioned<VecchiaFactors> = serde_json::from_reader(reader)?;
        if v.version != FACTORS_FORMAT_VERSION {
            return Err(Error::Version {
                found: v.version,
                expected: FACTORS_FORMAT_VERSION,
            });
        }
        v.factors.check_consistent()?;
        Ok(v.factors)
    }

    fn check_consistent(&self) -> Result<()> {
        let n = self.ordering.len();
        let ok = self.sets.len() == n
            && self.weights.len() == n
            && self.variances.len() == n
            && (0..n).all(|i| self.weights[i].len() == self.sets.get(i).len())
            && self.variances.iter().all(|v| (0.0..=1.0).contains(v));
        if ok {
            Ok(())
        } else {
            Err(Error::Schema("inconsistent factor artifact".into()))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    version: u32,
    factors: T,
}

pub(crate) fn check_intercept(x: ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() == 0 {
        return Err(Error::MissingIntercept { row: 0, value: f64::NAN });
    }
    if let Some((row, &value)) = x.column(0).iter().enumerate().find(|(_, &v)| v != 1.0) {
        return Err(Error::MissingIntercept { row, value });
    }
    Ok(())
}

/// Transformed training data, rows in max-min order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedDataset {
    pub response: Vec<f64>,
    pub features: Array2<f64>,
    pub ordering: Ordering,
}

impl TransformedDataset {
    /// Rows moved back to input order.
    pub fn into_input_order(self) -> (Vec<f64>, Array2<f64>) {
        let n = self.response.len();
        let pos: Vec<usize> = (0..n).map(|i| self.ordering.position(i)).collect();
        let y = pos.iter().map(|&p| self.response[p]).collect();
        let x = self.features.select(Axis(0), &pos);
        (y, x)
    }
}

/// Conditioning of one prediction location on its nearest training points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionFactors {
    /// Training row indices (input order), nearest first.
    pub neighbors: Vec<usize>,
    pub weights: Vec<f64>,
    pub variance: f64,
}

impl PredictionFactors {
    /// Factors for `target` conditioned on the given training rows.
    pub fn from_neighbors(
        target: &[f64],
        neighbors: Vec<usize>,
        locs: &LocationSet,
        model: &CorrelationModel,
    ) -> Result<Self> {
        let c = condition_on(target, &neighbors, locs, model, &mut Scratch::default())
            .map_err(|_| Error::SingularCorrelation {
                index: neighbors.first().copied().unwrap_or(0),
            })?;
        Ok(PredictionFactors {
            neighbors,
            weights: c.weights,
            variance: c.variance,
        })
    }
}

/// Nearest-neighbor lookup over training locations for building
/// [`PredictionFactors`] at arbitrary query points.
#[derive(Debug, Clone)]
pub struct PredictionContext<'a> {
    locs: &'a LocationSet,
    index: SpatialIndex,
    model: CorrelationModel,
    neighbors: usize,
}

impl<'a> PredictionContext<'a> {
    pub fn new(locs: &'a LocationSet, model: &CorrelationModel, neighbors: usize) -> Result<Self> {
        if neighbors < 1 {
            return Err(Error::InvalidParameter("neighbor count C must be >= 1".into()));
        }
        Ok(PredictionContext {
            locs,
            index: SpatialIndex::build(locs),
            model: model.validated()?,
            neighbors,
        })
    }

    /// The `min(n, C)` nearest training rows to `u`, nearest first.
    pub fn nearest(&self, u: &[f64]) -> Result<Vec<usize>> {
        check_query(u, self.locs.dim())?;
        Ok(self.index.knn(u, self.neighbors).into_iter().map(|nb| nb.id).collect())
    }

    pub fn factors(&self, u: &[f64]) -> Result<PredictionFactors> {
        let nb = self.nearest(u)?;
        PredictionFactors::from_neighbors(u, nb, self.locs, &self.model)
    }
}

fn check_query(u: &[f64], dim: usize) -> Result<()> {
    if u.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "query location",
            expected: dim,
            got: u.len(),
        });
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("query location is not finite".into()));
    }
    Ok(())
}

/// One-off [`PredictionFactors`] for `u`; builds a fresh neighbor index.
pub fn prediction_factors(
    u: &[f64],
    locs: &LocationSet,
    model: &CorrelationModel,
    neighbors: usize,
) -> Result<PredictionFactors> {
    PredictionContext::new(locs, model, neighbors)?.factors(u)
}

/// Transform a feature row (intercept first) at a prediction location.
pub fn transform_features_at(x: &[f64], x_train: ArrayView2<'_, f64>, pf: &PredictionFactors) -> Result<Vec<f64>> {
    if x.len() != x_train.ncols() {
        return Err(Error::DimensionMismatch {
            context: "feature row",
            expected: x_train.ncols(),
            got: x.len(),
        });
    }
    check_neighbors(pf, x_train.nrows())?;
    let scale = pf.variance.max(VARIANCE_FLOOR).sqrt();
    Ok((0..x.len())
        .map(|c| {
            let lag: f64 = pf
                .neighbors
                .iter()
                .zip(&pf.weights)
                .map(|(&j, &b)| b * x_train[[j, c]])
                .sum();
            (x[c] - lag) / scale
        })
        .collect())
}

/// Map a transformed-scale prediction back to the response scale.
pub fn recorrelate_prediction(transformed: f64, pf: &PredictionFactors, y_train: &[f64]) -> Result<f64> {
    check_neighbors(pf, y_train.len())?;
    let lag: f64 = pf
        .neighbors
        .iter()
        .zip(&pf.weights)
        .map(|(&j, &b)| b * y_train[j])
        .sum();
    Ok(pf.variance.sqrt() * transformed + lag)
}

fn check_neighbors(pf: &PredictionFactors, n: usize) -> Result<()> {
    if pf.neighbors.len() != pf.weights.len() {
        return Err(Error::DimensionMismatch {
            context: "prediction weights",
            expected: pf.neighbors.len(),
            got: pf.weights.len(),
        });
    }
    if let Some(&j) = pf.neighbors.iter().find(|&&j| j >= n) {
        return Err(Error::InvalidParameter(format!(
            "neighbor index {j} out of range for {n} training rows"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn pair(d: f64) -> LocationSet {
        LocationSet::from_rows(&[[0.0, 0.0], [d, 0.0]]).unwrap()
    }

    #[test]
    fn pure_nugget_is_independence() {
        let locs = LocationSet::from_rows(&[[0.1, 0.2], [0.5, 0.5], [0.9, 0.1], [0.3, 0.8]]).unwrap();
        let m = CorrelationModel::exponential(0.3, 1.0).unwrap();
        let f = compute_factors(&locs, &m, 30).unwrap();
        for pos in 0..4 {
            assert!(f.weights(pos).iter().all(|&b| b == 0.0));
            assert_eq!(f.variance(pos), 1.0);
        }
        let y = [1.5, -2.0, 0.25, 7.0];
        let yt = f.decorrelate_response(&y).unwrap();
        for pos in 0..4 {
            assert_eq!(yt[pos], y[f.ordering().original(pos)]);
        }
    }

    #[test]
    fn two_point_scalar_algebra() {
        let (d, phi) = (0.3, 0.5);
        let locs = pair(d);
        let m = CorrelationModel::exponential(phi, 0.0).unwrap();
        let f = compute_factors(&locs, &m, 30).unwrap();
        let rho = (-d / phi).exp();
        assert_eq!(f.variance(0), 1.0);
        assert!(f.weights(0).is_empty());
        assert_abs_diff_eq!(f.weights(1)[0], rho, epsilon = 1e-15);
        assert_abs_diff_eq!(f.variance(1), 1.0 - rho * rho, epsilon = 1e-15);

        let y = [2.0, -1.0];
        let yt = f.decorrelate_response(&y).unwrap();
        let (first, second) = (f.ordering().original(0), f.ordering().original(1));
        assert_eq!(yt[0], y[first]);
        assert_abs_diff_eq!(yt[1], (y[second] - rho * y[first]) / (1.0 - rho * rho).sqrt(), epsilon = 1e-14);

        // transformed intercept
        let x = array![[1.0, 3.0], [1.0, 4.0]];
        let xt = f.decorrelate_features(x.view()).unwrap();
        assert_eq!(xt[[0, 0]], 1.0);
        let want = (1.0 - rho) / (1.0 - rho * rho).sqrt();
        assert_abs_diff_eq!(xt[[1, 0]], want, epsilon = 1e-14);
        assert!((xt[[1, 0]] - 1.0).abs() > 1e-3);

        // inverse
        let pf = f.training_conditional(1);
        let back = recorrelate_prediction(yt[1], &pf, &y).unwrap();
        assert_abs_diff_eq!(back, y[second], epsilon = 1e-14);
    }

    #[test]
    fn features_match_per_column_response_transform() {
        let locs = LocationSet::from_rows(&[[0.0, 0.0], [0.2, 0.1], [0.9, 0.4], [0.5, 0.5], [0.3, 0.8], [0.7, 0.9]]).unwrap();
        let m = CorrelationModel::exponential(0.4, 0.2).unwrap();
        let f = compute_factors(&locs, &m, 2).unwrap();
        let x = array![
            [1.0, 0.3, -1.0],
            [1.0, 1.1, 2.0],
            [1.0, -0.7, 0.5],
            [1.0, 0.0, 0.1],
            [1.0, 2.2, -0.4],
            [1.0, 0.9, 0.9]
        ];
        let xt = f.decorrelate_features(x.view()).unwrap();
        for c in 0..3 {
            let col: Vec<f64> = x.column(c).to_vec();
            let yt = f.decorrelate_response(&col).unwrap();
            for pos in 0..6 {
                assert_eq!(xt[[pos, c]], yt[pos]);
            }
        }
    }

    #[test]
    fn missing_intercept_rejected() {
        let f = compute_factors(&pair(0.5), &CorrelationModel::exponential(1.0, 0.0).unwrap(), 1).unwrap();
        let x = array![[1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(
            f.decorrelate_features(x.view()),
            Err(Error::MissingIntercept { row: 1, .. })
        ));
        assert!(f.decorrelate_response(&[1.0]).is_err());
        assert!(f.decorrelate_response(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn duplicate_points_without_nugget_are_rescued_by_jitter() {
        // duplicates inside one conditioning set make the block singular;
        // the jittered retry succeeds and the duplicate gets a ~zero variance
        let locs = LocationSet::from_rows(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]).unwrap();
        let m = CorrelationModel::exponential(1.0, 0.0).unwrap();
        let f = compute_factors(&locs, &m, 3).unwrap();
        assert!(f.variances().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(f.variances().iter().any(|&v| v < 1e-9));
        let yt = f.decorrelate_response(&[1.0, 1.0, 2.0, 1.0]).unwrap();
        assert!(yt.iter().all(|v| v.is_finite()));
        assert!(Error::SingularCorrelation { index: 3 }.is_numerical());
    }

    #[test]
    fn prediction_at_training_point_interpolates() {
        let locs = LocationSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let m = CorrelationModel::exponential(0.5, 0.0).unwrap();
        let pf = prediction_factors(&[1.0, 0.0], &locs, &m, 1).unwrap();
        assert_eq!(pf.neighbors, vec![1]);
        assert_abs_diff_eq!(pf.weights[0], 1.0, epsilon = 1e-15);
        assert_eq!(pf.variance, 0.0);
        let y = [3.0, -2.0, 5.0];
        assert_abs_diff_eq!(recorrelate_prediction(123.0, &pf, &y).unwrap(), -2.0, epsilon = 1e-15);
        let x_train = array![[1.0, 0.5], [1.0, 0.25], [1.0, 2.0]];
        let xt = transform_features_at(&[1.0, 0.25], x_train.view(), &pf).unwrap();
        assert!(xt.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn symmetric_neighbors_get_equal_weights() {
        let locs = LocationSet::from_rows(&[[-1.0, 0.0], [1.0, 0.0], [5.0, 5.0]]).unwrap();
        let m = CorrelationModel::exponential(1.0, 0.1).unwrap();
        let pf = prediction_factors(&[0.0, 0.0], &locs, &m, 2).unwrap();
        assert_eq!(pf.neighbors, vec![0, 1]);
        assert_abs_diff_eq!(pf.weights[0], pf.weights[1], epsilon = 1e-15);
        assert!(pf.variance > 0.0 && pf.variance <= 1.0);
    }

    #[test]
    fn pure_nugget_prediction_is_identity() {
        let locs = LocationSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let m = CorrelationModel::exponential(0.5, 1.0).unwrap();
        let pf = prediction_factors(&[0.2, 0.2], &locs, &m, 2).unwrap();
        assert!(pf.weights.iter().all(|&b| b == 0.0));
        assert_eq!(pf.variance, 1.0);
        assert_eq!(recorrelate_prediction(4.25, &pf, &[1.0, 2.0, 3.0]).unwrap(), 4.25);
        let x_train = Array2::from_elem((3, 2), 1.0);
        assert_eq!(transform_features_at(&[1.0, -3.0], x_train.view(), &pf).unwrap(), vec![1.0, -3.0]);
    }

    #[test]
    fn single_neighbor_feature_factorization() {
        let locs = LocationSet::from_rows(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        let m = CorrelationModel::exponential(0.7, 0.3).unwrap();
        let pf = prediction_factors(&[0.2, 0.1], &locs, &m, 1).unwrap();
        let x = [1.0, 0.6, -2.0];
        let x_train = array![[1.0, 0.6, -2.0], [1.0, 9.0, 9.0]];
        let xt = transform_features_at(&x, x_train.view(), &pf).unwrap();
        let s = (1.0 - pf.weights[0]) / pf.variance.sqrt();
        for c in 0..3 {
            assert_abs_diff_eq!(xt[c], s * x[c], epsilon = 1e-14);
        }
        assert!(transform_features_at(&x[..2], x_train.view(), &pf).is_err());
    }

    #[test]
    fn neighbor_count_caps_at_training_size() {
        let locs = LocationSet::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let m = CorrelationModel::exponential(0.5, 0.5).unwrap();
        let pf = prediction_factors(&[0.4, 0.0], &locs, &m, 30).unwrap();
        assert_eq!(pf.neighbors, vec![0, 1]);
        assert!(prediction_factors(&[0.4], &locs, &m, 30).is_err());
        assert!(prediction_factors(&[0.4, f64::INFINITY], &locs, &m, 30).is_err());
    }

    #[test]
    fn json_artifact_round_trip_and_version_check() {
        let locs = LocationSet::from_rows(&[[0.0, 0.0], [0.2, 0.1], [0.9, 0.4], [0.5, 0.5]]).unwrap();
        let f = compute_factors(&locs, &CorrelationModel::matern(1.2, 0.3, 0.1).unwrap(), 2).unwrap();
        let mut buf = Vec::new();
        f.write_json(&mut buf).unwrap();
        let back = VecchiaFactors::read_json(buf.as_slice()).unwrap();
        assert_eq!(back, f);

        let mut v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        v["version"] = 99.into();
        let err = VecchiaFactors::read_json(v.to_string().as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Version { found: 99, .. }));
    }

    #[test]
    fn input_order_restores_rows() {
        let locs = LocationSet::from_rows(&[[0.0, 0.0], [0.2, 0.1], [0.9, 0.4], [0.5, 0.5]]).unwrap();
        let f = compute_factors(&locs, &CorrelationModel::exponential(0.3, 1.0).unwrap(), 2).unwrap();
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let x = array![[1.0, 10.0], [1.0, 20.0], [1.0, 30.0], [1.0, 40.0]];
        let (yy, xx) = f.transform(&y, x.view()).unwrap().into_input_order();
        assert_eq!(yy, y);
        assert_eq!(xx, x);
    }
}
