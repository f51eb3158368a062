//! Spatial geometry: point sets, exact nearest neighbors, max-min ordering
//! and nearest-earlier-neighbor conditioning sets.

mod kdtree;
mod maxmin;

pub use kdtree::{Neighbor, SpatialIndex};
pub use maxmin::maxmin_order;

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared Euclidean distance. Every distance comparison in the crate goes
/// through this function so that tie rules are applied consistently.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `n` points in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Array2<f64>", into = "Array2<f64>")]
pub struct LocationSet {
    coords: Array2<f64>,
}

impl LocationSet {
    pub fn new(coords: Array2<f64>) -> Result<Self> {
        if coords.nrows() == 0 {
            return Err(Error::Empty("location set"));
        }
        if coords.ncols() == 0 {
            return Err(Error::InvalidParameter("locations need at least one coordinate".into()));
        }
        if let Some(row) = coords
            .axis_iter(Axis(0))
            .position(|r| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFiniteCoordinate { row });
        }
        let coords = if coords.is_standard_layout() {
            coords
        } else {
            coords.as_standard_layout().into_owned()
        };
        Ok(LocationSet { coords })
    }

    pub fn from_rows<const D: usize>(rows: &[[f64; D]]) -> Result<Self> {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let coords = Array2::from_shape_vec((rows.len(), D), flat)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Self::new(coords)
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.as_flat()[i * d..(i + 1) * d]
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.coords.row(i)
    }

    pub fn as_flat(&self) -> &[f64] {
        self.coords
            .as_slice()
            .expect("locations are kept in standard layout")
    }

    pub fn coords(&self) -> &Array2<f64> {
        &self.coords
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.point(i), self.point(j)).sqrt()
    }

    /// Rows `indices` as a new location set.
    pub fn select(&self, indices: &[usize]) -> LocationSet {
        LocationSet {
            coords: self.coords.select(Axis(0), indices),
        }
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim())
            .map(|k| self.coords.column(k).sum() / n)
            .collect()
    }
}

impl TryFrom<Array2<f64>> for LocationSet {
    type Error = Error;
    fn try_from(coords: Array2<f64>) -> Result<Self> {
        LocationSet::new(coords)
    }
}

impl From<LocationSet> for Array2<f64> {
    fn from(locs: LocationSet) -> Self {
        locs.coords
    }
}

/// A permutation: `perm[position]` is the original index placed at `position`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ordering {
    perm: Vec<usize>,
    rank: Vec<usize>,
}

impl Ordering {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut rank = vec![usize::MAX; n];
        for (pos, &orig) in perm.iter().enumerate() {
            if orig >= n || rank[orig] != usize::MAX {
                return Err(Error::InvalidParameter(format!(
                    "ordering is not a permutation of 0..{n}"
                )));
            }
            rank[orig] = pos;
        }
        Ok(Ordering { perm, rank })
    }

    pub fn identity(n: usize) -> Self {
        Ordering {
            perm: (0..n).collect(),
            rank: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Original index at ordered `position`.
    pub fn original(&self, position: usize) -> usize {
        self.perm[position]
    }

    /// Ordered position of original index `index`.
    pub fn position(&self, index: usize) -> usize {
        self.rank[index]
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn ranks(&self) -> &[usize] {
        &self.rank
    }
}

impl TryFrom<Vec<usize>> for Ordering {
    type Error = Error;
    fn try_from(perm: Vec<usize>) -> Result<Self> {
        Ordering::new(perm)
    }
}

impl From<Ordering> for Vec<usize> {
    fn from(o: Ordering) -> Self {
        o.perm
    }
}

/// For each ordered position, the ordered positions of its nearest earlier
/// neighbors (nearest first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningSets {
    sets: Vec<Vec<usize>>,
    cap: usize,
}

impl ConditioningSets {
    /// Position `i` gets the `min(i, cap)` nearest points among positions
    /// `0..i`. Distance ties go to the lower original index.
    pub fn build(locs: &LocationSet, ord: &Ordering, cap: usize) -> Result<Self> {
        if cap < 1 {
            return Err(Error::InvalidParameter("conditioning set size must be >= 1".into()));
        }
        if ord.len() != locs.len() {
            return Err(Error::DimensionMismatch {
                context: "ordering length",
                expected: locs.len(),
                got: ord.len(),
            });
        }
        let index = SpatialIndex::build_ranked(locs, ord.ranks());
        let sets = (0..locs.len())
            .into_par_iter()
            .map(|pos| {
                let k = pos.min(cap);
                index
                    .knn_ranked(locs.point(ord.original(pos)), k, pos)
                    .into_iter()
                    .map(|nb| ord.position(nb.id))
                    .collect()
            })
            .collect();
        Ok(ConditioningSets { sets, cap })
    }

    pub fn from_parts(sets: Vec<Vec<usize>>, cap: usize) -> Result<Self> {
        for (i, s) in sets.iter().enumerate() {
            if s.len() != i.min(cap) || s.iter().any(|&j| j >= i) {
                return Err(Error::InvalidParameter(format!(
                    "conditioning set {i} violates the earlier-neighbor rule"
                )));
            }
        }
        Ok(ConditioningSets { sets, cap })
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, position: usize) -> &[usize] {
        &self.sets[position]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.sets.iter().map(Vec::as_slice)
    }
}
