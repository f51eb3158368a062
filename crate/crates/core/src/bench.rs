//! Replicated comparison of the spatial pipeline against the same learners
//! with the spatial adjustment switched off (nugget fixed at one).

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::QuerySet;
use crate::error::{Error, Result};
use crate::kernel::Family;
use crate::learners::{rmse, LearnerSpec};
use crate::simgen::{generate_scenario, Scenario, SimulationConfig};
use crate::tune::{cross_validate, default_ranges, final_fit, CellResult, CvOptions, TuningGrid, DEFAULT_NUGGETS, DEFAULT_RANGE_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub scenario: Scenario,
    pub replicates: usize,
    pub n: usize,
    /// Replicate `r` simulates with seed `seed + r`.
    pub seed: u64,
    pub neighbors: usize,
    pub folds: usize,
    pub family: Family,
    pub nuggets: Vec<f64>,
    /// Explicit ranges; when absent, the default log-spaced ranges of each
    /// replicate's training locations.
    pub ranges: Option<Vec<f64>>,
    /// Candidate learners. Specs sharing a family form one tuned learner.
    pub learners: Vec<LearnerSpec>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            scenario: Scenario::SpatialLinear,
            replicates: 10,
            n: 2_000,
            seed: 0,
            neighbors: crate::vecchia::DEFAULT_NEIGHBORS,
            folds: 5,
            family: Family::Exponential,
            nuggets: DEFAULT_NUGGETS.to_vec(),
            ranges: None,
            learners: default_learners(),
        }
    }
}

/// Linear model, KNN with `k` in {5, 10, 20}, and a 32-tree ensemble with
/// `mtry` in {3, 6}.
pub fn default_learners() -> Vec<LearnerSpec> {
    let mut v = vec![LearnerSpec::Linear];
    v.extend([5, 10, 20].map(|k| LearnerSpec::Knn { k }));
    v.extend([3, 6].map(|mtry| LearnerSpec::BaggedTrees {
        trees: 32,
        min_leaf: 5,
        mtry,
        seed: 0,
    }));
    v
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be positive".into()));
        }
        if self.learners.is_empty() || self.nuggets.is_empty() {
            return Err(Error::InvalidParameter("learner and nugget lists must be nonempty".into()));
        }
        if !self.nuggets.contains(&1.0) {
            return Err(Error::InvalidParameter(
                "nuggets must include 1 for the non-spatial comparison".into(),
            ));
        }
        if matches!(&self.ranges, Some(r) if r.is_empty()) {
            return Err(Error::InvalidParameter("ranges must be nonempty".into()));
        }
        for l in &self.learners {
            l.validate()?;
        }
        Ok(())
    }

    fn families(&self) -> Vec<&'static str> {
        let mut f = Vec::new();
        for l in &self.learners {
            if !f.contains(&l.family()) {
                f.push(l.family());
            }
        }
        f
    }
}

/// Selected cell and test RMSE of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub nugget: f64,
    pub range: f64,
    pub learner: LearnerSpec,
    pub cv_rmse: f64,
    pub test_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub seed: u64,
    pub spatial: ArmResult,
    pub non_spatial: ArmResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSummary {
    pub family: String,
    pub spatial_mean_rmse: f64,
    pub non_spatial_mean_rmse: f64,
    /// Replicates where the spatial arm had strictly lower test RMSE.
    pub spatial_wins: usize,
    pub replicates: Vec<ReplicateResult>,
}

impl LearnerSummary {
    pub fn ratio(&self) -> f64 {
        self.spatial_mean_rmse / self.non_spatial_mean_rmse
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub replicates: usize,
    pub learners: Vec<LearnerSummary>,
    pub replicate_secs: Vec<f64>,
    pub wall_time_secs: f64,
}

impl BenchmarkReport {
    pub fn learner(&self, family: &str) -> Option<&LearnerSummary> {
        self.learners.iter().find(|l| l.family == family)
    }
}

/// Simulate, tune and score every replicate, then aggregate per learner family.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let start = Instant::now();
    let families = cfg.families();
    let per_rep: Vec<(Vec<ReplicateResult>, f64)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, &families, cfg.seed + r as u64))
        .collect::<Result<_>>()?;

    let learners = families
        .iter()
        .enumerate()
        .map(|(f, name)| {
            let reps: Vec<ReplicateResult> = per_rep.iter().map(|(v, _)| v[f].clone()).collect();
            let mean = |g: fn(&ReplicateResult) -> f64| reps.iter().map(g).sum::<f64>() / reps.len() as f64;
            LearnerSummary {
                family: name.to_string(),
                spatial_mean_rmse: mean(|r| r.spatial.test_rmse),
                non_spatial_mean_rmse: mean(|r| r.non_spatial.test_rmse),
                spatial_wins: reps
                    .iter()
                    .filter(|r| r.spatial.test_rmse < r.non_spatial.test_rmse)
                    .count(),
                replicates: reps,
            }
        })
        .collect();
    Ok(BenchmarkReport {
        config: cfg.clone(),
        replicates: cfg.replicates,
        learners,
        replicate_secs: per_rep.iter().map(|(_, t)| *t).collect(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn run_replicate(cfg: &BenchmarkConfig, families: &[&str], seed: u64) -> Result<(Vec<ReplicateResult>, f64)> {
    let start = Instant::now();
    let sim = generate_scenario(&SimulationConfig {
        n: cfg.n,
        scenario: cfg.scenario,
        seed,
        ..Default::default()
    })?;
    let train = sim.train_set();
    let test = sim.test_set();
    let query = QuerySet::from(&test);
    let grid = TuningGrid {
        family: cfg.family,
        nuggets: cfg.nuggets.clone(),
        ranges: cfg
            .ranges
            .clone()
            .unwrap_or_else(|| default_ranges(&train.locations, DEFAULT_RANGE_COUNT)),
        learners: cfg.learners.clone(),
    };
    let opts = CvOptions {
        folds: cfg.folds,
        seed,
        neighbors: cfg.neighbors,
        ..Default::default()
    };
    let cv = cross_validate(&train, &grid, &opts)?;

    let arm = |cell: &CellResult| -> Result<ArmResult> {
        let model = grid.model(cell.nugget, cell.range)?;
        let (pipeline, _) = final_fit(&train, &model, cfg.neighbors, &cell.learner)?;
        let pred = pipeline.predict(&query)?;
        Ok(ArmResult {
            nugget: cell.nugget,
            range: cell.range,
            learner: cell.learner,
            cv_rmse: cell.mean_rmse,
            test_rmse: rmse(&test.response, &pred),
        })
    };
    let results = families
        .iter()
        .map(|fam| {
            let spatial = cv.best_where(|c| c.learner.family() == *fam).expect("family in grid");
            let plain = cv
                .best_where(|c| c.learner.family() == *fam && c.nugget == 1.0)
                .expect("nugget one in grid");
            let spatial = arm(&cv.cells[spatial])?;
            let non_spatial = arm(&cv.cells[plain])?;
            Ok(ReplicateResult {
                seed,
                spatial,
                non_spatial,
            })
        })
        .collect::<Result<_>>()?;
    let secs = start.elapsed().as_secs_f64();
    log::info!("benchmark replicate seed={seed} done in {secs:.1}s");
    Ok((results, secs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_benchmark_runs() {
        let cfg = BenchmarkConfig {
            replicates: 2,
            n: 150,
            folds: 3,
            nuggets: vec![0.25, 1.0],
            ranges: Some(vec![0.2]),
            learners: vec![LearnerSpec::Linear, LearnerSpec::Knn { k: 5 }],
            ..Default::default()
        };
        let rep = run_benchmark(&cfg).unwrap();
        assert_eq!(rep.replicates, 2);
        assert_eq!(rep.learners.len(), 2);
        for l in &rep.learners {
            assert_eq!(l.replicates.len(), 2);
            assert!(l.spatial_mean_rmse >= 0.0 && l.non_spatial_mean_rmse >= 0.0);
            for r in &l.replicates {
                assert_eq!(r.non_spatial.nugget, 1.0);
            }
        }
        assert_eq!(rep.learner("knn").unwrap().family, "knn");
    }

    #[test]
    fn nugget_one_required() {
        let cfg = BenchmarkConfig {
            nuggets: vec![0.0, 0.5],
            ..Default::default()
        };
        assert!(run_benchmark(&cfg).is_err());
    }
}
