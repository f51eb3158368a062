use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{dot, Cholesky};

const RIDGE: f64 = 1e-8;

/// Ordinary least squares through the normal equations.
///
/// A rank-deficient design gets a ridge of `1e-8` times the mean diagonal of
/// `X'X` on a retry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[f64]) -> Result<Self> {
        let p = x.ncols();
        let mut gram = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        for (row, &yi) in x.rows().into_iter().zip(y) {
            for a in 0..p {
                let xa = row[a];
                rhs[a] += xa * yi;
                for b in 0..=a {
                    gram[a * p + b] += xa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[b * p + a] = gram[a * p + b];
            }
        }
        let chol = match Cholesky::factor(&gram, p, 0.0) {
            Ok(c) => c,
            Err(_) => {
                let scale = (0..p).map(|a| gram[a * p + a]).sum::<f64>() / p as f64;
                Cholesky::factor(&gram, p, RIDGE * scale.max(1.0))?
            }
        };
        chol.solve(&mut rhs);
        Ok(LinearModel { coefficients: rhs })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        dot(x, &self.coefficients)
    }
}
