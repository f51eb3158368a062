//! Seeded generators for the three benchmark scenarios.
//!
//! * `IndepLinear`: `y = X beta + e`, `e ~ N(0, sill I)`.
//! * `SpatialLinear`: `y = X beta + e`, `e ~ N(0, sill R)` with an
//!   exponential spatial correlation.
//! * `SpatialNonlinear`: `y = f + e` with `f ~ N(0, function_sill M)`, where
//!   `M` is a Matérn correlation over the first two features, and `e` as in
//!   `SpatialLinear`.
//!
//! Locations are uniform on the unit square and features are iid standard
//! normal. Coefficients are iid `N(0, 5^2)` and `J ~ Binomial(P, 1/2)` of
//! them are zeroed. The function variance `function_sill` defaults to 100,
//! the same scale as the noise sill.

use std::fmt;
use std::str::FromStr;

use log::warn;
use ndarray::Array2;
use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::SpatialDataset;
use crate::error::{Error, Result};
use crate::geom::LocationSet;
use crate::kernel::CorrelationModel;
use crate::linalg::Cholesky;
use crate::vecchia::{compute_factors, DEFAULT_NEIGHBORS};

pub const DEFAULT_DENSE_CAP: usize = 5_000;
/// Diagonal jitter ladder tried when a dense correlation matrix is numerically singular.
const DENSE_JITTER: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    IndepLinear,
    SpatialLinear,
    SpatialNonlinear,
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "indep_linear" => Ok(Scenario::IndepLinear),
            "2" | "spatial_linear" => Ok(Scenario::SpatialLinear),
            "3" | "spatial_nonlinear" => Ok(Scenario::SpatialNonlinear),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario {other:?} (expected 1, 2, 3 or a scenario name)"
            ))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::IndepLinear => "indep_linear",
            Scenario::SpatialLinear => "spatial_linear",
            Scenario::SpatialNonlinear => "spatial_nonlinear",
        })
    }
}

/// How Gaussian process draws are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Dense up to the cap, sequential nearest-neighbor conditionals above it.
    Auto,
    Dense,
    /// Approximate: draws each value from its conditional on the nearest
    /// earlier neighbors in max-min order.
    Vecchia,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n: usize,
    pub scenario: Scenario,
    pub features: usize,
    pub sill: f64,
    pub spatial: CorrelationModel,
    pub feature_model: CorrelationModel,
    pub function_sill: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub sampler: Sampler,
    pub dense_cap: usize,
    pub vecchia_neighbors: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: 2_000,
            scenario: Scenario::SpatialLinear,
            features: 10,
            sill: 100.0,
            spatial: CorrelationModel::exponential(0.236, 0.25).expect("valid"),
            feature_model: CorrelationModel::matern(2.1, 0.842, 0.0).expect("valid"),
            function_sill: 100.0,
            train_fraction: 0.8,
            seed: 0,
            sampler: Sampler::Auto,
            dense_cap: DEFAULT_DENSE_CAP,
            vecchia_neighbors: DEFAULT_NEIGHBORS,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n < 1 {
            return bad("n must be >= 1".into());
        }
        if !(self.sill > 0.0) || !self.sill.is_finite() {
            return bad(format!("sill must be positive, got {}", self.sill));
        }
        if !(self.function_sill > 0.0) || !self.function_sill.is_finite() {
            return bad(format!("function_sill must be positive, got {}", self.function_sill));
        }
        if self.scenario == Scenario::SpatialNonlinear && self.features < 2 {
            return bad("the nonlinear scenario needs at least two features".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad(format!("train_fraction must be in (0, 1], got {}", self.train_fraction));
        }
        self.spatial.validated()?;
        self.feature_model.validated()?;
        Ok(())
    }
}

/// Ground truth behind a simulated response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// Feature coefficients (empty for the nonlinear scenario).
    pub beta: Vec<f64>,
    /// Indices of the coefficients forced to zero.
    pub zeroed: Vec<usize>,
    /// Noise-free mean of each row: `X beta` or `f(x_1, x_2)`.
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub data: SpatialDataset,
    pub truth: Truth,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub config: SimulationConfig,
}

impl SimulatedDataset {
    pub fn train_set(&self) -> SpatialDataset {
        self.data.select(&self.train)
    }

    pub fn test_set(&self) -> SpatialDataset {
        self.data.select(&self.test)
    }
}

/// `n` iid uniform points on `[0, 1]^2`.
pub fn sample_locations(n: usize, seed: u64) -> Result<LocationSet> {
    let mut rng = rng_from_seed(seed);
    uniform_locations(n, &mut rng)
}

fn uniform_locations<R: Rng>(n: usize, rng: &mut R) -> Result<LocationSet> {
    if n < 1 {
        return Err(Error::Empty("location count"));
    }
    let flat: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
    LocationSet::new(Array2::from_shape_vec((n, 2), flat).expect("n x 2"))
}

/// Exact `N(0, sill R)` sampler built from one dense Cholesky factorization.
#[derive(Debug, Clone)]
pub struct GpSampler {
    n: usize,
    // None when R is exactly the identity (pure nugget)
    chol: Option<Cholesky>,
    scale: f64,
}

impl GpSampler {
    pub fn new(locs: &LocationSet, model: &CorrelationModel, sill: f64, dense_cap: usize) -> Result<Self> {
        if !(sill > 0.0) || !sill.is_finite() {
            return Err(Error::InvalidParameter(format!("sill must be positive, got {sill}")));
        }
        let n = locs.len();
        if n > dense_cap {
            return Err(Error::DenseCapExceeded { n, cap: dense_cap });
        }
        let model = model.validated()?;
        if model.nugget == 1.0 {
            return Ok(GpSampler {
                n,
                chol: None,
                scale: sill.sqrt(),
            });
        }
        let points: Vec<usize> = (0..n).collect();
        let mut r = Vec::new();
        model.block_into(locs, &points, &mut r);
        let mut last = None;
        for jitter in DENSE_JITTER {
            match Cholesky::factor(&r, n, jitter) {
                Ok(chol) => {
                    if jitter > 0.0 {
                        warn!("dense GP correlation needed diagonal jitter {jitter:e}");
                    }
                    return Ok(GpSampler {
                        n,
                        chol: Some(chol),
                        scale: sill.sqrt(),
                    });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        let z = match &self.chol {
            Some(chol) => chol.mul_lower(&z),
            None => z,
        };
        z.into_iter().map(|v| v * self.scale).collect()
    }
}

/// One draw from `N(0, sill R)` using a dense factorization; rejects sets
/// larger than `dense_cap`.
pub fn sample_gp(locs: &LocationSet, model: &CorrelationModel, sill: f64, seed: u64, dense_cap: usize) -> Result<Vec<f64>> {
    let sampler = GpSampler::new(locs, model, sill, dense_cap)?;
    Ok(sampler.draw(&mut rng_from_seed(seed)))
}

/// Approximate draw: each value, in max-min order, is sampled from its
/// Gaussian conditional on the nearest earlier neighbors.
pub fn sample_gp_vecchia(
    locs: &LocationSet,
    model: &CorrelationModel,
    sill: f64,
    neighbors: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(sill > 0.0) || !sill.is_finite() {
        return Err(Error::InvalidParameter(format!("sill must be positive, got {sill}")));
    }
    let f = compute_factors(locs, model, neighbors)?;
    let mut rng = rng_from_seed(seed);
    let mut y = vec![0.0; locs.len()];
    let ord = f.ordering();
    for pos in 0..f.len() {
        let lag: f64 = f
            .sets()
            .get(pos)
            .iter()
            .zip(f.weights(pos))
            .map(|(&p, &b)| b * y[ord.original(p)])
            .sum();
        let z: f64 = rng.sample(StandardNormal);
        y[ord.original(pos)] = lag + (f.variance(pos) * sill).sqrt() * z;
    }
    Ok(y)
}

fn gp_draw(cfg: &SimulationConfig, locs: &LocationSet, model: &CorrelationModel, sill: f64, seed: u64) -> Result<Vec<f64>> {
    let dense = match cfg.sampler {
        Sampler::Dense => true,
        Sampler::Vecchia => false,
        Sampler::Auto => locs.len() <= cfg.dense_cap || model.nugget == 1.0,
    };
    if dense {
        let cap = if model.nugget == 1.0 { usize::MAX } else { cfg.dense_cap };
        sample_gp(locs, model, sill, seed, cap)
    } else {
        sample_gp_vecchia(locs, model, sill, cfg.vecchia_neighbors, seed)
    }
}

/// Generate one dataset. Identical configs give bit-identical output.
pub fn generate_scenario(cfg: &SimulationConfig) -> Result<SimulatedDataset> {
    cfg.validate()?;
    let n = cfg.n;
    let p = cfg.features;
    let mut rng = rng_from_seed(cfg.seed);

    let locations = uniform_locations(n, &mut rng)?;
    let features = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));

    let coef = Normal::new(0.0, 5.0).expect("valid normal");
    let mut beta: Vec<f64> = (0..p).map(|_| coef.sample(&mut rng)).collect();
    let j = Binomial::new(p as u64, 0.5).expect("valid binomial").sample(&mut rng) as usize;
    let mut zeroed = sample_indices(&mut rng, p, j).into_vec();
    zeroed.sort_unstable();
    for &k in &zeroed {
        beta[k] = 0.0;
    }

    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let n_train = ((n as f64) * cfg.train_fraction).round() as usize;
    let mut train = rows[..n_train].to_vec();
    let mut test = rows[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();

    let noise_seed = rng.next_u64();
    let function_seed = rng.next_u64();

    let linear_mean = || -> Vec<f64> { features.dot(&ndarray::Array1::from(beta.clone())).to_vec() };
    // the iid case shares the spatial path with a pure nugget
    let noise_model = match cfg.scenario {
        Scenario::IndepLinear => cfg.spatial.with_nugget(1.0)?,
        _ => cfg.spatial,
    };
    let noise = gp_draw(cfg, &locations, &noise_model, cfg.sill, noise_seed)?;

    let (mean, beta) = match cfg.scenario {
        Scenario::IndepLinear | Scenario::SpatialLinear => (linear_mean(), beta),
        Scenario::SpatialNonlinear => {
            let fx = LocationSet::new(features.slice(ndarray::s![.., 0..2]).to_owned())?;
            let f = gp_draw(cfg, &fx, &cfg.feature_model, cfg.function_sill, function_seed)?;
            zeroed.clear();
            (f, Vec::new())
        }
    };
    let response: Vec<f64> = mean.iter().zip(&noise).map(|(m, e)| m + e).collect();

    Ok(SimulatedDataset {
        data: SpatialDataset::new(locations, features, response)?,
        truth: Truth { beta, zeroed, mean },
        train,
        test,
        config: cfg.clone(),
    })
}
