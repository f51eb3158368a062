//! Spatial datasets and their CSV form.
//!
//! Training files carry the header `loc_1,..,loc_d,x_1,..,x_P,y`; query files
//! drop the `y` column. The intercept is never stored: [`SpatialDataset::design`]
//! prepends it.

use std::io::{Read, Write};

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::LocationSet;

/// Locations, raw features (no intercept) and a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialDataset {
    pub locations: LocationSet,
    pub features: Array2<f64>,
    pub response: Vec<f64>,
}

impl SpatialDataset {
    pub fn new(locations: LocationSet, features: Array2<f64>, response: Vec<f64>) -> Result<Self> {
        let n = locations.len();
        if features.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "feature rows",
                expected: n,
                got: features.nrows(),
            });
        }
        if response.len() != n {
            return Err(Error::DimensionMismatch {
                context: "response length",
                expected: n,
                got: response.len(),
            });
        }
        Ok(SpatialDataset {
            locations,
            features,
            response,
        })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    /// Number of raw features `P`.
    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Features with the all-ones intercept column prepended, `n x (P+1)`.
    pub fn design(&self) -> Array2<f64> {
        with_intercept(self.features.view())
    }

    pub fn select(&self, rows: &[usize]) -> SpatialDataset {
        SpatialDataset {
            locations: self.locations.select(rows),
            features: self.features.select(Axis(0), rows),
            response: rows.iter().map(|&i| self.response[i]).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_table(
            writer,
            self.locations.coords().view(),
            self.features.view(),
            Some(&self.response),
        )
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let t = read_table(reader, true)?;
        let locations = LocationSet::new(t.coords).map_err(|e| match e {
            Error::NonFiniteCoordinate { row } => Error::Data {
                row: row + 1,
                column: "loc".into(),
                message: "non-finite coordinate".into(),
            },
            other => other,
        })?;
        SpatialDataset::new(locations, t.features, t.response.expect("response requested"))
    }
}

/// Query rows: locations and features. May be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    pub coords: Array2<f64>,
    pub features: Array2<f64>,
}

impl QuerySet {
    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn design(&self) -> Array2<f64> {
        with_intercept(self.features.view())
    }

    /// Reads a query file. A trailing `y` column, as in training files, is
    /// accepted and ignored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let t = read_table(reader, false)?;
        Ok(QuerySet {
            coords: t.coords,
            features: t.features,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_table(writer, self.coords.view(), self.features.view(), None)
    }
}

impl From<&SpatialDataset> for QuerySet {
    fn from(d: &SpatialDataset) -> Self {
        QuerySet {
            coords: d.locations.coords().clone(),
            features: d.features.clone(),
        }
    }
}

/// `x` with an all-ones first column, in standard (row-major) layout.
pub fn with_intercept(x: ArrayView2<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((x.nrows(), x.ncols() + 1), |(i, j)| if j == 0 { 1.0 } else { x[[i, j - 1]] })
}

/// Format with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Table {
    coords: Array2<f64>,
    features: Array2<f64>,
    response: Option<Vec<f64>>,
}

fn header(d: usize, p: usize, with_y: bool) -> Vec<String> {
    let mut h: Vec<String> = (1..=d).map(|i| format!("loc_{i}")).collect();
    h.extend((1..=p).map(|i| format!("x_{i}")));
    if with_y {
        h.push("y".into());
    }
    h
}

fn write_table<W: Write>(
    writer: W,
    coords: ArrayView2<'_, f64>,
    features: ArrayView2<'_, f64>,
    response: Option<&[f64]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(coords.ncols(), features.ncols(), response.is_some()))?;
    for i in 0..coords.nrows() {
        let mut rec: Vec<String> = coords.row(i).iter().map(|&v| format_f64(v)).collect();
        rec.extend(features.row(i).iter().map(|&v| format_f64(v)));
        if let Some(y) = response {
            rec.push(format_f64(y[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Without `require_y` a trailing `y` column is optional.
fn read_table<R: Read>(reader: R, require_y: bool) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let names: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let d = names.iter().take_while(|s| s.starts_with("loc_")).count();
    let p = names[d..].iter().take_while(|s| s.starts_with("x_")).count();
    let with_y = require_y || (names.len() == d + p + 1 && names[d + p] == "y");
    let expected = header(d, p, with_y);
    if d == 0 || names != expected {
        return Err(Error::Schema(format!(
            "expected header {} but found {}",
            if d == 0 { "loc_1,..".to_string() } else { expected.join(",") },
            names.join(",")
        )));
    }

    let width = names.len();
    let mut coords = Vec::new();
    let mut features = Vec::new();
    let mut response = Vec::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Data {
                row,
                column: "*".into(),
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Data {
                row,
                column: names[c].clone(),
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Data {
                    row,
                    column: names[c].clone(),
                    message: "value is not finite".into(),
                });
            }
            if c < d {
                coords.push(v);
            } else if c < d + p {
                features.push(v);
            } else {
                response.push(v);
            }
        }
        rows += 1;
    }
    Ok(Table {
        coords: Array2::from_shape_vec((rows, d), coords).expect("row-major coords"),
        features: Array2::from_shape_vec((rows, p), features).expect("row-major features"),
        response: with_y.then_some(response),
    })
}
