//! Small dense linear algebra on row-major buffers.

use crate::error::{Error, Result};

/// Lower Cholesky factor `L` of a symmetric positive definite matrix, `A = L L'`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    // row-major, only the lower triangle is meaningful
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor the `n x n` row-major matrix `a`, adding `jitter` to its diagonal.
    pub fn factor(a: &[f64], n: usize, jitter: f64) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix buffer size");
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                let dot: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
                if i == j {
                    let d = a[i * n + i] + jitter - dot;
                    if !(d > 0.0) || !d.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i });
                    }
                    l[i * n + i] = d.sqrt();
                } else {
                    l[i * n + j] = (a[i * n + j] - dot) / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)` of `L`.
    pub fn l(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.l[i * self.n + j]
        }
    }

    /// Solve `L x = b` in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(x, y)| x * y).sum();
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// Solve `L' x = b` in place.
    pub fn solve_upper(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            b[i] /= self.l[i * n + i];
            let bi = b[i];
            let row = &self.l[i * n..i * n + i];
            for (bj, lij) in b[..i].iter_mut().zip(row) {
                *bj -= lij * bi;
            }
        }
    }

    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lower(b);
        self.solve_upper(b);
    }

    /// `y = L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.l[i * n..i * n + i + 1]
                    .iter()
                    .zip(z)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve_small_spd() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let ch = Cholesky::factor(&a, 3, 0.0).unwrap();
        let x_true = [1.0, -2.0, 0.5];
        let mut b: Vec<f64> = (0..3).map(|i| dot(&a[i * 3..i * 3 + 3], &x_true)).collect();
        ch.solve(&mut b);
        for (x, t) in b.iter().zip(x_true) {
            assert!((x - t).abs() < 1e-14);
        }
        // L L' reproduces A
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| ch.l(i, k) * ch.l(j, k)).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_matrix_rejected_then_jitter_rescues() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(matches!(
            Cholesky::factor(&a, 2, 0.0),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
        assert!(Cholesky::factor(&a, 2, 1e-10).is_ok());
    }

    #[test]
    fn empty_matrix_is_trivial() {
        let ch = Cholesky::factor(&[], 0, 0.0).unwrap();
        let mut b: Vec<f64> = vec![];
        ch.solve(&mut b);
        assert_eq!(ch.dim(), 0);
    }
}
