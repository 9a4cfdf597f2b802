//! Datasets, ground-truth models and the CSV exchange format.
//!
//! A [`Dataset`] is a response vector plus an `n x p` covariate matrix. No
//! intercept column is ever added; callers that need a centered response
//! center it before building the dataset.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Name of the response column in the CSV format.
pub const RESPONSE_COLUMN: &str = "y";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    standardized: bool,
    names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "design must be at least 1x1, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} rows but design has {}",
                y.len(),
                x.nrows()
            )));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite value in data".into()));
        }
        Ok(Dataset {
            y,
            x,
            standardized: false,
            names: None,
        })
    }

    /// Builds a dataset from row-major covariate rows.
    pub fn from_rows(y: &[f64], rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("ragged covariate rows".into()));
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Dataset::new(DVector::from_column_slice(y), x)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} covariates",
                names.len(),
                self.p()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Covariate name; falls back to `x{j+1}` when the dataset has no names.
    pub fn name(&self, j: usize) -> String {
        match &self.names {
            Some(names) => names[j].clone(),
            None => format!("x{}", j + 1),
        }
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Column-wise affine rescaling to mean 0 and variance 1, using the
    /// denominator-`n` variance. Row order is preserved.
    pub fn standardize(&self) -> Result<Dataset> {
        let n = self.n() as f64;
        let mut x = self.x.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            // Relative to the column's magnitude so that large constant
            // columns are still caught.
            if var <= 1e-24 * (1.0 + mean * mean) {
                return Err(Error::ConstantColumn(j));
            }
            let sd = var.sqrt();
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        }
        Ok(Dataset {
            y: self.y.clone(),
            x,
            standardized: true,
            names: self.names.clone(),
        })
    }

    /// Sub-dataset on the given rows, in the given order. The result is not
    /// flagged as standardized.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let x = self.x.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        Dataset {
            y,
            x,
            standardized: false,
            names: self.names.clone(),
        }
    }

    /// All rows except `row`.
    pub fn without_row(&self, row: usize) -> Dataset {
        let keep: Vec<usize> = (0..self.n()).filter(|&i| i != row).collect();
        self.select_rows(&keep)
    }

    /// Dataset with the response replaced.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Dataset> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} rows but design has {}",
                y.len(),
                self.n()
            )));
        }
        Ok(Dataset {
            y,
            ..self.clone()
        })
    }

    /// Subtracts the response mean.
    pub fn center_response(&self) -> Dataset {
        let mean = self.y.mean();
        Dataset {
            y: self.y.map(|v| v - mean),
            ..self.clone()
        }
    }

    /// Reads the CSV format: header row, a `y` column, every other column a
    /// covariate in file order.
    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let y_col = headers
            .iter()
            .position(|h| h == RESPONSE_COLUMN)
            .ok_or_else(|| Error::MissingColumn(RESPONSE_COLUMN.into()))?;
        let names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != y_col)
            .map(|(_, h)| h.to_string())
            .collect();
        if names.is_empty() {
            return Err(Error::DimensionMismatch("no covariate columns".into()));
        }

        let mut y = Vec::new();
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::Parse(format!(
                    "record {} has {} fields, expected {}",
                    line + 1,
                    record.len(),
                    headers.len()
                )));
            }
            let mut row = Vec::with_capacity(names.len());
            for (i, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!(
                        "record {}, column `{}`: cannot parse `{}`",
                        line + 1,
                        &headers[i],
                        field
                    ))
                })?;
                if i == y_col {
                    y.push(v);
                } else {
                    row.push(v);
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::TooFewRows { needed: 1, found: 0 });
        }
        Dataset::from_rows(&y, &rows)?.with_names(names)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        Dataset::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the CSV format with `y` as the first column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec![RESPONSE_COLUMN.to_string()];
        header.extend((0..self.p()).map(|j| self.name(j)));
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = Vec::with_capacity(self.p() + 1);
            rec.push(self.y[i].to_string());
            rec.extend(self.x.row(i).iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Ground truth for simulated data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    beta: DVector<f64>,
    support: Vec<usize>,
    sigma: f64,
}

impl TrueModel {
    pub fn new(beta: DVector<f64>, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sd must be >= 0, got {sigma}")));
        }
        let support = beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect();
        Ok(TrueModel {
            beta,
            support,
            sigma,
        })
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// The nonzero index set D.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn s(&self) -> usize {
        self.support.len()
    }

    /// Smallest nonzero |beta_j|; `None` for the null model.
    pub fn psi(&self) -> Option<f64> {
        self.support
            .iter()
            .map(|&j| self.beta[j].abs())
            .min_by(f64::total_cmp)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn contains(&self, j: usize) -> bool {
        self.support.binary_search(&j).is_ok()
    }
}
