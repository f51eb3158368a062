//! Cross-validated selection of the nugget, range and learner hyperparameters,
//! and the fitted end-to-end pipeline.
//!
//! Held-out rows are scored the way new locations are predicted: factors are
//! computed on the fold's training rows only, each held-out row is conditioned
//! on its nearest fold-training neighbors, and the error is measured on the
//! original response scale.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{QuerySet, SpatialDataset};
use crate::error::{Error, Result};
use crate::geom::LocationSet;
use crate::kernel::{CorrelationModel, Family};
use crate::learners::{self, rmse, FitReport, FittedLearner, LearnerSpec};
use crate::simgen::rng_from_seed;
use crate::vecchia::{
    recorrelate_prediction, transform_features_at, PredictionContext, PredictionFactors, VecchiaFactors,
    VecchiaGeometry, DEFAULT_NEIGHBORS,
};

pub const DEFAULT_NUGGETS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_RANGE_COUNT: usize = 5;
pub const PIPELINE_FORMAT_VERSION: u32 = 1;

/// Candidate nuggets, ranges and learners. Every combination is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningGrid {
    pub family: Family,
    pub nuggets: Vec<f64>,
    pub ranges: Vec<f64>,
    pub learners: Vec<LearnerSpec>,
}

impl TuningGrid {
    /// Default nuggets and ranges for `locs` with the given learners.
    pub fn default_for(locs: &LocationSet, family: Family, learners: Vec<LearnerSpec>) -> Self {
        TuningGrid {
            family,
            nuggets: DEFAULT_NUGGETS.to_vec(),
            ranges: default_ranges(locs, DEFAULT_RANGE_COUNT),
            learners,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nuggets.is_empty() || self.ranges.is_empty() || self.learners.is_empty() {
            return Err(Error::InvalidParameter("tuning grid is empty".into()));
        }
        for &w in &self.nuggets {
            for &r in &self.ranges {
                self.model(w, r)?;
            }
        }
        for l in &self.learners {
            l.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nuggets.len() * self.ranges.len() * self.learners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn model(&self, nugget: f64, range: f64) -> Result<CorrelationModel> {
        CorrelationModel {
            family: self.family,
            range,
            nugget,
        }
        .validated()
    }
}

/// `count` log-spaced ranges from `0.01 D` to `D / 3`, where `D` is the
/// diagonal of the bounding box of `locs`.
pub fn default_ranges(locs: &LocationSet, count: usize) -> Vec<f64> {
    let d = bounding_diagonal(locs).max(f64::MIN_POSITIVE);
    let (lo, hi) = ((0.01 * d).ln(), (d / 3.0).ln());
    match count {
        0 => Vec::new(),
        1 => vec![(0.5 * (lo + hi)).exp()],
        _ => (0..count)
            .map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp())
            .collect(),
    }
}

fn bounding_diagonal(locs: &LocationSet) -> f64 {
    let mut s = 0.0;
    for c in locs.coords().columns() {
        let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if hi > lo {
            s += (hi - lo) * (hi - lo);
        }
    }
    s.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldSplit {
    /// Rows shuffled and dealt round-robin into folds.
    #[default]
    Random,
    /// Rows grouped into square blocks of the bounding box; whole blocks are
    /// dealt into folds at random.
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub neighbors: usize,
    pub split: FoldSplit,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 5,
            seed: 0,
            neighbors: DEFAULT_NEIGHBORS,
            split: FoldSplit::Random,
        }
    }
}

/// Fold label of every row.
pub fn fold_assignment(locs: &LocationSet, folds: usize, seed: u64, split: FoldSplit) -> Result<Vec<usize>> {
    let n = locs.len();
    if folds < 2 || n < folds {
        return Err(Error::InvalidParameter(format!(
            "need 2 <= folds <= n, got {folds} folds for {n} rows"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let labels = match split {
        FoldSplit::Random => {
            let mut rows: Vec<usize> = (0..n).collect();
            rows.shuffle(&mut rng);
            let mut labels = vec![0; n];
            for (i, &r) in rows.iter().enumerate() {
                labels[r] = i % folds;
            }
            labels
        }
        FoldSplit::Blocked => {
            let side = ((4 * folds) as f64).sqrt().ceil() as usize;
            let d = locs.dim();
            let bounds: Vec<(f64, f64)> = locs
                .coords()
                .columns()
                .into_iter()
                .map(|c| c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))))
                .collect();
            let cell = |i: usize| -> usize {
                let p = locs.point(i);
                (0..d.min(2)).fold(0, |acc, k| {
                    let (lo, hi) = bounds[k];
                    let t = if hi > lo { (p[k] - lo) / (hi - lo) } else { 0.0 };
                    acc * side + ((t * side as f64) as usize).min(side - 1)
                })
            };
            let blocks: Vec<usize> = (0..n).map(cell).collect();
            let mut ids: Vec<usize> = blocks.clone();
            ids.sort_unstable();
            ids.dedup();
            ids.shuffle(&mut rng);
            let fold_of: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, &b)| (b, i % folds)).collect();
            blocks.iter().map(|b| fold_of[b]).collect()
        }
    };
    for f in 0..folds {
        let size = labels.iter().filter(|&&l| l == f).count();
        if size < 2 {
            return Err(Error::InvalidParameter(format!("fold {f} has {size} rows; need at least 2")));
        }
    }
    Ok(labels)
}

/// Cross-validation score of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub nugget: f64,
    pub range: f64,
    pub learner: LearnerSpec,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// One entry per grid cell; nuggets vary slowest, learners fastest.
    pub cells: Vec<CellResult>,
    /// Index of the selected cell.
    pub best: usize,
    pub folds: usize,
    pub wall_time_secs: f64,
}

impl CvResult {
    pub fn best_cell(&self) -> &CellResult {
        &self.cells[self.best]
    }

    /// Best cell among those accepted by `keep`, with the usual tie-breaks.
    pub fn best_where(&self, keep: impl Fn(&CellResult) -> bool) -> Option<usize> {
        select_best(&self.cells, keep)
    }
}

/// Lowest mean RMSE; ties go to the larger nugget, then the smaller range,
/// then the earlier learner in the grid.
fn select_best(cells: &[CellResult], keep: impl Fn(&CellResult) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        if !keep(c) || c.mean_rmse.is_nan() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let o = &cells[b];
                c.mean_rmse < o.mean_rmse
                    || (c.mean_rmse == o.mean_rmse
                        && (c.nugget > o.nugget || (c.nugget == o.nugget && c.range < o.range)))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// What the factor computation of one fold and kernel cell was given.
#[derive(Debug)]
pub struct FactorCall<'a> {
    pub fold: usize,
    pub nugget: f64,
    pub range: f64,
    /// Rows of the full dataset whose locations entered factor computation.
    pub train_rows: &'a [usize],
    /// Responses passed alongside, in `train_rows` order.
    pub train_response: &'a [f64],
}

/// Grid-search cross-validation; see the module docs for the scoring path.
pub fn cross_validate(data: &SpatialDataset, grid: &TuningGrid, opts: &CvOptions) -> Result<CvResult> {
    cross_validate_observed(data, grid, opts, &|_| {})
}

/// [`cross_validate`] that reports every factor computation to `observer`.
pub fn cross_validate_observed(
    data: &SpatialDataset,
    grid: &TuningGrid,
    opts: &CvOptions,
    observer: &(dyn Fn(&FactorCall<'_>) + Sync),
) -> Result<CvResult> {
    let start = Instant::now();
    grid.validate()?;
    if opts.neighbors < 1 {
        return Err(Error::InvalidParameter("neighbor count C must be >= 1".into()));
    }
    let labels = fold_assignment(&data.locations, opts.folds, opts.seed, opts.split)?;
    let design = data.design();

    // a nugget of one makes the range irrelevant, so evaluate it once
    let mut kernels: Vec<(f64, f64)> = Vec::new();
    for &w in &grid.nuggets {
        for &r in &grid.ranges {
            let key = if w == 1.0 { (w, grid.ranges[0]) } else { (w, r) };
            if !kernels.contains(&key) {
                kernels.push(key);
            }
        }
    }

    let folds: Vec<Fold> = (0..opts.folds)
        .into_par_iter()
        .map(|f| Fold::build(data, &design, &labels, f, opts.neighbors))
        .collect::<Result<_>>()?;

    let tasks: Vec<(usize, usize)> = (0..folds.len())
        .flat_map(|f| (0..kernels.len()).map(move |k| (f, k)))
        .collect();
    let scores: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(f, k)| {
            let (nugget, range) = kernels[k];
            let model = grid.model(nugget, range)?;
            folds[f].score(f, &model, &grid.learners, observer)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(grid.len());
    for &w in &grid.nuggets {
        for &r in &grid.ranges {
            let key = if w == 1.0 { (w, grid.ranges[0]) } else { (w, r) };
            let k = kernels.iter().position(|&c| c == key).expect("kernel listed");
            for (l, spec) in grid.learners.iter().enumerate() {
                let fold_rmse: Vec<f64> = (0..folds.len()).map(|f| scores[f * kernels.len() + k][l]).collect();
                let mean_rmse = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
                cells.push(CellResult {
                    nugget: w,
                    range: r,
                    learner: *spec,
                    fold_rmse,
                    mean_rmse,
                });
            }
        }
    }
    let best = select_best(&cells, |_| true)
        .ok_or_else(|| Error::InvalidParameter("no grid cell produced a finite score".into()))?;
    let result = CvResult {
        cells,
        best,
        folds: opts.folds,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    log::info!(
        "cv: {} cells x {} folds, best nugget={} range={} {} rmse={:.6}",
        result.cells.len(),
        opts.folds,
        result.best_cell().nugget,
        result.best_cell().range,
        result.best_cell().learner,
        result.best_cell().mean_rmse
    );
    Ok(result)
}

/// Per-fold data that does not depend on the correlation model.
struct Fold {
    train_rows: Vec<usize>,
    train_locs: LocationSet,
    train_y: Vec<f64>,
    train_x: Array2<f64>,
    test_coords: Array2<f64>,
    test_y: Vec<f64>,
    test_x: Array2<f64>,
    geometry: VecchiaGeometry,
    /// Nearest fold-training rows of each held-out row.
    test_neighbors: Vec<Vec<usize>>,
}

impl Fold {
    fn build(data: &SpatialDataset, design: &Array2<f64>, labels: &[usize], fold: usize, c: usize) -> Result<Self> {
        let train_rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != fold).collect();
        let test_rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == fold).collect();
        let train_locs = data.locations.select(&train_rows);
        let geometry = VecchiaGeometry::build(&train_locs, c)?;
        let any_model = CorrelationModel::exponential(1.0, 1.0)?;
        let ctx = PredictionContext::new(&train_locs, &any_model, c)?;
        let test_neighbors = test_rows
            .iter()
            .map(|&i| ctx.nearest(data.locations.point(i)))
            .collect::<Result<_>>()?;
        let pick = |rows: &[usize]| design.select(Axis(0), rows);
        Ok(Fold {
            train_y: train_rows.iter().map(|&i| data.response[i]).collect(),
            train_x: pick(&train_rows),
            test_coords: data.locations.coords().select(Axis(0), &test_rows),
            test_y: test_rows.iter().map(|&i| data.response[i]).collect(),
            test_x: pick(&test_rows),
            train_rows,
            train_locs,
            geometry,
            test_neighbors,
        })
    }

    /// Held-out RMSE of every learner under `model`.
    fn score(
        &self,
        fold: usize,
        model: &CorrelationModel,
        learners: &[LearnerSpec],
        observer: &(dyn Fn(&FactorCall<'_>) + Sync),
    ) -> Result<Vec<f64>> {
        observer(&FactorCall {
            fold,
            nugget: model.nugget,
            range: model.range,
            train_rows: &self.train_rows,
            train_response: &self.train_y,
        });
        let factors = VecchiaFactors::from_geometry(&self.geometry, &self.train_locs, model)?;
        let (y_t, x_t) = factors.transform(&self.train_y, self.train_x.view())?.into_input_order();
        let held: Vec<(PredictionFactors, Vec<f64>)> = self
            .test_neighbors
            .iter()
            .enumerate()
            .map(|(i, nb)| {
                let u = self.test_coords.row(i);
                let pf = PredictionFactors::from_neighbors(u.as_slice().expect("standard layout"), nb.clone(), &self.train_locs, model)?;
                let x = transform_features_at(self.test_x.row(i).as_slice().expect("standard layout"), self.train_x.view(), &pf)?;
                Ok((pf, x))
            })
            .collect::<Result<_>>()?;
        learners
            .iter()
            .map(|spec| {
                let fitted = learners::fit_model(spec, x_t.view(), &y_t)?;
                let pred = held
                    .iter()
                    .map(|(pf, x)| recorrelate_prediction(fitted.predict_row(x), pf, &self.train_y))
                    .collect::<Result<Vec<_>>>()?;
                Ok(rmse(&self.test_y, &pred))
            })
            .collect()
    }
}

/// Fitted transform and learner, ready to predict at new locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub version: u32,
    pub model: CorrelationModel,
    pub neighbors: usize,
    pub learner_spec: LearnerSpec,
    pub train: SpatialDataset,
    pub factors: VecchiaFactors,
    pub learner: FittedLearner,
}

/// Compute factors on all of `data`, transform it and fit `spec` on the
/// transformed rows (input order).
pub fn final_fit(
    data: &SpatialDataset,
    model: &CorrelationModel,
    neighbors: usize,
    spec: &LearnerSpec,
) -> Result<(Pipeline, FitReport)> {
    let factors = crate::vecchia::compute_factors(&data.locations, model, neighbors)?;
    let (y_t, x_t) = factors.transform(&data.response, data.design().view())?.into_input_order();
    let (learner, report) = learners::fit(spec, x_t.view(), &y_t)?;
    let pipeline = Pipeline {
        version: PIPELINE_FORMAT_VERSION,
        model: *factors.model(),
        neighbors,
        learner_spec: *spec,
        train: data.clone(),
        factors,
        learner,
    };
    Ok((pipeline, report))
}

/// [`final_fit`] at the selected cell of `cv`.
pub fn final_fit_best(
    data: &SpatialDataset,
    grid: &TuningGrid,
    cv: &CvResult,
    neighbors: usize,
) -> Result<(Pipeline, FitReport)> {
    let cell = cv.best_cell();
    final_fit(data, &grid.model(cell.nugget, cell.range)?, neighbors, &cell.learner)
}

impl Pipeline {
    pub fn n_features(&self) -> usize {
        self.train.n_features()
    }

    /// Predictions on the response scale, one per query row.
    pub fn predict(&self, query: &QuerySet) -> Result<Vec<f64>> {
        self.check_query(query)?;
        if query.is_empty() {
            return Ok(Vec::new());
        }
        let ctx = PredictionContext::new(&self.train.locations, &self.model, self.neighbors)?;
        let x_train = self.train.design();
        let x_query = query.design();
        (0..query.len())
            .into_par_iter()
            .map(|i| {
                let u = query.coords.row(i).to_vec();
                let pf = ctx.factors(&u)?;
                let x = transform_features_at(&x_query.row(i).to_vec(), x_train.view(), &pf)?;
                recorrelate_prediction(self.learner.predict_row(&x), &pf, &self.train.response)
            })
            .collect()
    }

    /// Transformed training response and design, in input order.
    pub fn transformed_training(&self) -> Result<(Vec<f64>, Array2<f64>)> {
        Ok(self
            .factors
            .transform(&self.train.response, self.train.design().view())?
            .into_input_order())
    }

    fn check_query(&self, query: &QuerySet) -> Result<()> {
        if query.features.ncols() != self.n_features() {
            return Err(Error::Schema(format!(
                "query has {} feature columns, pipeline was fitted with {}",
                query.features.ncols(),
                self.n_features()
            )));
        }
        if query.coords.ncols() != self.train.locations.dim() {
            return Err(Error::Schema(format!(
                "query has {} location columns, pipeline was fitted with {}",
                query.coords.ncols(),
                self.train.locations.dim()
            )));
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(reader)?;
        let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != PIPELINE_FORMAT_VERSION {
            return Err(Error::Version {
                found,
                expected: PIPELINE_FORMAT_VERSION,
            });
        }
        let p: Pipeline = serde_json::from_value(value)?;
        if p.factors.len() != p.train.len() || p.learner.n_features() != p.n_features() + 1 {
            return Err(Error::Schema("pipeline parts disagree on sizes".into()));
        }
        Ok(p)
    }
}

/// Plain learner on untransformed data, for comparison with a pipeline.
pub fn plain_fit(data: &SpatialDataset, spec: &LearnerSpec) -> Result<FittedLearner> {
    Ok(learners::fit(spec, data.design().view(), &data.response)?.0)
}

/// Predictions of `fitted` on raw query features.
pub fn plain_predict(fitted: &FittedLearner, query: &QuerySet) -> Result<Vec<f64>> {
    fitted.predict(query.design().view())
}
