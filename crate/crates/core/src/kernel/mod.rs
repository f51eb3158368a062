//! Stationary correlation functions with a multiplicative nugget.
//!
//! The correlation between two distinct observations at distance `d` is
//! `(1 - nugget) * rho(d)`; every observation has unit self-correlation.
//! The Matérn family is parameterized as
//! `rho(d) = 2^(1-nu) / Gamma(nu) * (d/range)^nu * K_nu(d/range)`
//! with no `sqrt(2 nu)` rescaling of the argument.

mod bessel;

pub use bessel::{bessel_k, bessel_k_scaled};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geom::{sq_dist, LocationSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Exponential,
    Matern { smoothness: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    #[serde(flatten)]
    pub family: Family,
    pub range: f64,
    pub nugget: f64,
}

impl CorrelationModel {
    pub fn exponential(range: f64, nugget: f64) -> Result<Self> {
        CorrelationModel {
            family: Family::Exponential,
            range,
            nugget,
        }
        .validated()
    }

    pub fn matern(smoothness: f64, range: f64, nugget: f64) -> Result<Self> {
        CorrelationModel {
            family: Family::Matern { smoothness },
            range,
            nugget,
        }
        .validated()
    }

    /// Same family and range with a different nugget.
    pub fn with_nugget(self, nugget: f64) -> Result<Self> {
        CorrelationModel { nugget, ..self }.validated()
    }

    pub fn with_range(self, range: f64) -> Result<Self> {
        CorrelationModel { range, ..self }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.range > 0.0) || !self.range.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "range must be positive, got {}",
                self.range
            )));
        }
        if !(0.0..=1.0).contains(&self.nugget) {
            return Err(Error::InvalidParameter(format!(
                "nugget must lie in [0, 1], got {}",
                self.nugget
            )));
        }
        if let Family::Matern { smoothness } = self.family {
            if !(smoothness > 0.0) || !smoothness.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "Matérn smoothness must be positive, got {smoothness}"
                )));
            }
        }
        Ok(self)
    }

    /// Pre-nugget correlation at distance `d`.
    pub fn correlation(&self, d: f64) -> Result<f64> {
        if !(d >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "distance must be non-negative, got {d}"
            )));
        }
        Ok(self.rho(d))
    }

    /// Unchecked `rho(d)` for `d >= 0`.
    #[inline]
    pub(crate) fn rho(&self, d: f64) -> f64 {
        if d == 0.0 {
            return 1.0;
        }
        let t = d / self.range;
        match self.family {
            Family::Exponential => (-t).exp(),
            Family::Matern { smoothness: nu } => {
                let ln = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * t.ln()
                    + bessel_k_scaled(nu, t).ln()
                    - t;
                ln.exp().clamp(0.0, 1.0)
            }
        }
    }

    /// Correlation between two distinct observations at distance `d`.
    #[inline]
    pub(crate) fn cross(&self, d: f64) -> f64 {
        (1.0 - self.nugget) * self.rho(d)
    }

    /// Fill `out` (row-major `k x k`) with the correlation matrix of `points`.
    pub(crate) fn block_into(&self, locs: &LocationSet, points: &[usize], out: &mut Vec<f64>) {
        let k = points.len();
        out.clear();
        out.resize(k * k, 0.0);
        for a in 0..k {
            out[a * k + a] = 1.0;
            let pa = locs.point(points[a]);
            for b in 0..a {
                let v = self.cross(sq_dist(pa, locs.point(points[b])).sqrt());
                out[a * k + b] = v;
                out[b * k + a] = v;
            }
        }
    }

    /// Fill `out` with correlations between `target` and each of `points`.
    pub(crate) fn cross_into(&self, target: &[f64], locs: &LocationSet, points: &[usize], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            points
                .iter()
                .map(|&j| self.cross(sq_dist(target, locs.point(j)).sqrt())),
        );
    }
}

/// Correlation matrix among `points`: unit diagonal, `(1 - nugget) rho(d)` off it.
pub fn correlation_block(points: &[usize], locs: &LocationSet, model: &CorrelationModel) -> Result<Array2<f64>> {
    check_indices(points, locs)?;
    let mut buf = Vec::new();
    model.block_into(locs, points, &mut buf);
    Ok(Array2::from_shape_vec((points.len(), points.len()), buf).expect("k x k buffer"))
}

/// Correlations between an arbitrary `target` and each of `points`.
///
/// A target that coincides with one of the points still gets `1 - nugget`:
/// this is a cross-correlation, never a self-correlation.
pub fn cross_correlation(
    target: &[f64],
    points: &[usize],
    locs: &LocationSet,
    model: &CorrelationModel,
) -> Result<Vec<f64>> {
    check_indices(points, locs)?;
    if target.len() != locs.dim() {
        return Err(Error::DimensionMismatch {
            context: "target location",
            expected: locs.dim(),
            got: target.len(),
        });
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("target location is not finite".into()));
    }
    let mut out = Vec::new();
    model.cross_into(target, locs, points, &mut out);
    Ok(out)
}

fn check_indices(points: &[usize], locs: &LocationSet) -> Result<()> {
    if let Some(&bad) = points.iter().find(|&&p| p >= locs.len()) {
        return Err(Error::InvalidParameter(format!(
            "point index {bad} out of range for {} locations",
            locs.len()
        )));
    }
    Ok(())
}
