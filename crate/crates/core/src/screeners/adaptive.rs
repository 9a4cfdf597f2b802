//! Weighted lasso with weights `w_j = 1 / |pilot_j|`, solved by rescaling
//! each column by `|pilot_j|` and running the plain solver. Columns with a
//! zero pilot coefficient carry infinite weight and are dropped up front.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::lasso::{CdSettings, CoordinateDescent, LassoSolution};

/// Columns of the pilot support, rescaled by `|pilot_j|`.
#[derive(Debug, Clone)]
pub struct AdaptiveDesign {
    pub support: Vec<usize>,
    pub scale: Vec<f64>,
    pub x: DMatrix<f64>,
}

impl AdaptiveDesign {
    pub fn new(x: &DMatrix<f64>, pilot: &[f64]) -> Result<Self> {
        if pilot.len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "pilot has {} coefficients for {} columns",
                pilot.len(),
                x.ncols()
            )));
        }
        let support: Vec<usize> = (0..pilot.len()).filter(|&j| pilot[j] != 0.0).collect();
        if support.is_empty() {
            return Err(Error::EmptyPilot);
        }
        let scale: Vec<f64> = support.iter().map(|&j| pilot[j].abs()).collect();
        let mut xs = x.select_columns(&support);
        for (k, mut col) in xs.column_iter_mut().enumerate() {
            col *= scale[k];
        }
        Ok(AdaptiveDesign {
            support,
            scale,
            x: xs,
        })
    }

    /// Rows restricted to `rows`, keeping the column scaling.
    pub fn select_rows(&self, rows: &[usize]) -> AdaptiveDesign {
        AdaptiveDesign {
            support: self.support.clone(),
            scale: self.scale.clone(),
            x: self.x.select_rows(rows),
        }
    }

    /// Maps a solution in the rescaled coordinates back to length `p`.
    pub fn to_original(&self, sol: LassoSolution, p: usize) -> LassoSolution {
        let mut beta = DVector::zeros(p);
        for (k, &j) in self.support.iter().enumerate() {
            beta[j] = sol.beta[k] * self.scale[k];
        }
        let active = sol.active.iter().map(|&k| self.support[k]).collect();
        LassoSolution {
            beta,
            active,
            ..sol
        }
    }

    pub(crate) fn solver<'a>(&'a self, y: &'a DVector<f64>) -> CoordinateDescent<'a> {
        CoordinateDescent::new(&self.x, y, CdSettings::default())
    }
}

/// Minimizes `sum_i (y_i - x_i'b)^2 + lambda * sum_j |b_j| / |pilot_j|`.
pub fn adaptive_lasso_fit(data: &Dataset, pilot: &[f64], lambda: f64) -> Result<LassoSolution> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let design = AdaptiveDesign::new(data.x(), pilot)?;
    let sol = design.solver(data.y()).solve(lambda)?;
    Ok(design.to_original(sol, data.p()))
}
