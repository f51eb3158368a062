//! Regression learners fitted on (transformed) design matrices.
//!
//! Inputs always include the intercept column as an ordinary feature; no
//! learner adds intercept handling of its own.

mod forest;
mod knn;
mod linear;

pub use forest::BaggedTrees;
pub use knn::KnnRegressor;
pub use linear::LinearModel;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TREES: usize = 64;

/// Learner family and hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    Linear,
    Knn {
        k: usize,
    },
    BaggedTrees {
        trees: usize,
        min_leaf: usize,
        /// Features considered per split; clamped to the feature count.
        mtry: usize,
        seed: u64,
    },
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::InvalidParameter(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        match *self {
            LearnerSpec::Linear => Ok(()),
            LearnerSpec::Knn { k } => positive("k", k),
            LearnerSpec::BaggedTrees {
                trees, min_leaf, mtry, ..
            } => {
                positive("trees", trees)?;
                positive("min_leaf", min_leaf)?;
                positive("mtry", mtry)
            }
        }
    }

    /// Short family name: `linear`, `knn` or `bagged_trees`.
    pub fn family(&self) -> &'static str {
        match self {
            LearnerSpec::Linear => "linear",
            LearnerSpec::Knn { .. } => "knn",
            LearnerSpec::BaggedTrees { .. } => "bagged_trees",
        }
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerSpec::Linear => write!(f, "linear"),
            LearnerSpec::Knn { k } => write!(f, "knn:k={k}"),
            LearnerSpec::BaggedTrees {
                trees,
                min_leaf,
                mtry,
                seed,
            } => write!(f, "bagged_trees:trees={trees},min_leaf={min_leaf},mtry={mtry},seed={seed}"),
        }
    }
}

/// Parses `linear`, `knn:k=10`, `trees:trees=64,min_leaf=5,mtry=3,seed=1`.
/// Omitted hyperparameters take their defaults.
impl FromStr for LearnerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut kv = Vec::new();
        for part in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("expected key=value in {part:?}")))?;
            let v: u64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("{k} must be a non-negative integer")))?;
            kv.push((k.trim().to_string(), v));
        }
        let mut take = |key: &str, default: u64| -> u64 {
            match kv.iter().position(|(k, _)| k == key) {
                Some(i) => kv.remove(i).1,
                None => default,
            }
        };
        let spec = match name {
            "linear" | "lm" => LearnerSpec::Linear,
            "knn" => LearnerSpec::Knn {
                k: take("k", 10) as usize,
            },
            "trees" | "bagged_trees" | "rf" => LearnerSpec::BaggedTrees {
                trees: take("trees", DEFAULT_TREES as u64) as usize,
                min_leaf: take("min_leaf", 5) as usize,
                mtry: take("mtry", 4) as usize,
                seed: take("seed", 0),
            },
            other => return Err(Error::InvalidParameter(format!("unknown learner {other:?}"))),
        };
        if let Some((k, _)) = kv.first() {
            return Err(Error::InvalidParameter(format!("unknown hyperparameter {k:?} for {name}")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Fitted state of one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedLearner {
    Linear(LinearModel),
    Knn(KnnRegressor),
    BaggedTrees(BaggedTrees),
}

impl FittedLearner {
    pub fn n_features(&self) -> usize {
        match self {
            FittedLearner::Linear(m) => m.coefficients().len(),
            FittedLearner::Knn(m) => m.n_features(),
            FittedLearner::BaggedTrees(m) => m.n_features(),
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            FittedLearner::Linear(m) => m.predict_row(x),
            FittedLearner::Knn(m) => m.predict_row(x),
            FittedLearner::BaggedTrees(m) => m.predict_row(x),
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                context: "prediction features",
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        Ok(x.rows()
            .into_iter()
            .map(|r| match r.as_slice() {
                Some(s) => self.predict_row(s),
                None => self.predict_row(&r.to_vec()),
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub train_rmse: f64,
    pub learner: LearnerSpec,
    pub wall_time_secs: f64,
}

/// Fit `spec` on `(x, y)`. Requires at least two rows.
pub fn fit(spec: &LearnerSpec, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<(FittedLearner, FitReport)> {
    let start = Instant::now();
    let fitted = fit_model(spec, x, y)?;
    let wall_time_secs = start.elapsed().as_secs_f64();
    let pred = fitted.predict(x)?;
    let report = FitReport {
        train_rmse: rmse(y, &pred),
        learner: *spec,
        wall_time_secs,
    };
    Ok((fitted, report))
}

/// [`fit`] without the training-set report.
pub fn fit_model(spec: &LearnerSpec, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<FittedLearner> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "training rows",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(Error::InvalidParameter("need at least two training rows".into()));
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidParameter("need at least one feature column".into()));
    }
    Ok(match *spec {
        LearnerSpec::Linear => FittedLearner::Linear(LinearModel::fit(x, y)?),
        LearnerSpec::Knn { k } => FittedLearner::Knn(KnnRegressor::fit(x, y, k)),
        LearnerSpec::BaggedTrees {
            trees,
            min_leaf,
            mtry,
            seed,
        } => FittedLearner::BaggedTrees(BaggedTrees::fit(x, y, trees, min_leaf, mtry, seed)),
    })
}

/// A learner that may or may not have been fitted yet.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    spec: LearnerSpec,
    fitted: Option<FittedLearner>,
}

impl Learner {
    pub fn new(spec: LearnerSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Learner { spec, fitted: None })
    }

    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn fit(&mut self, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<FitReport> {
        let (fitted, report) = fit(&self.spec, x, y)?;
        self.fitted = Some(fitted);
        Ok(report)
    }

    pub fn fitted(&self) -> Option<&FittedLearner> {
        self.fitted.as_ref()
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.fitted.as_ref().ok_or(Error::Unfitted)?.predict(x)
    }
}

pub fn rmse(y: &[f64], pred: &[f64]) -> f64 {
    assert_eq!(y.len(), pred.len());
    if y.is_empty() {
        return 0.0;
    }
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    (sse / y.len() as f64).sqrt()
}
