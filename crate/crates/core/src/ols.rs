//! Least squares on a column subset, and the per-coefficient t-statistics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Smallest admissible eigenvalue of `X_M'X_M / n`.
pub const SINGULAR_THRESHOLD: f64 = 1e-10;

/// Residual sums of squares below this fraction of `|y|^2` count as zero.
const EXACT_FIT_RATIO: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Column indices of the model, in the order given by the caller.
    pub model: Vec<usize>,
    /// Coefficients aligned with `model`.
    pub coefficients: DVector<f64>,
    /// Residual standard deviation with `df` degrees of freedom.
    pub sigma_hat: f64,
    /// `(X_M'X_M)^-1`.
    pub cov_scale: DMatrix<f64>,
    pub df: usize,
    pub rss: f64,
    pub residuals: DVector<f64>,
}

impl OlsFit {
    /// Coefficients expanded to length `p`, zero outside the model.
    pub fn full_coefficients(&self, p: usize) -> DVector<f64> {
        let mut beta = DVector::zeros(p);
        for (k, &j) in self.model.iter().enumerate() {
            beta[j] = self.coefficients[k];
        }
        beta
    }

    /// `T_j = b_j / (sigma_hat * sqrt([(X'X)^-1]_jj))`, aligned with `model`.
    pub fn t_statistics(&self) -> Result<Vec<f64>> {
        t_statistics(self)
    }
}

/// Smallest and largest eigenvalue of `X_M'X_M / n` for the given columns.
pub(crate) fn gram_of(data: &Dataset, model: &[usize]) -> DMatrix<f64> {
    let xm = data.x().select_columns(model);
    xm.tr_mul(&xm)
}

/// Least squares of `y` on the columns in `model` (no intercept).
pub fn ols_fit(data: &Dataset, model: &[usize]) -> Result<OlsFit> {
    let n = data.n();
    let m = model.len();
    if let Some(&bad) = model.iter().find(|&&j| j >= data.p()) {
        return Err(Error::InvalidArgument(format!(
            "column {bad} out of range for p = {}",
            data.p()
        )));
    }
    if m >= n {
        return Err(Error::ModelTooLarge { size: m, n });
    }

    if m == 0 {
        let rss = data.y().norm_squared();
        return Ok(OlsFit {
            model: Vec::new(),
            coefficients: DVector::zeros(0),
            sigma_hat: (rss / n as f64).sqrt(),
            cov_scale: DMatrix::zeros(0, 0),
            df: n,
            rss,
            residuals: data.y().clone(),
        });
    }

    let xm = data.x().select_columns(model);
    let gram = xm.tr_mul(&xm);
    let scaled = &gram / n as f64;
    let min_eig = SymmetricEigen::new(scaled)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min_eig >= SINGULAR_THRESHOLD) {
        return Err(Error::SingularGram {
            min_eigenvalue: min_eig,
        });
    }
    let chol = gram.clone().cholesky().ok_or(Error::SingularGram {
        min_eigenvalue: min_eig,
    })?;
    let xty = xm.tr_mul(data.y());
    let coefficients = chol.solve(&xty);
    let cov_scale = chol.inverse();
    let residuals = data.y() - &xm * &coefficients;
    let mut rss = residuals.norm_squared();
    // An exact fit leaves only round-off; report it as exactly zero.
    if rss <= EXACT_FIT_RATIO * data.y().norm_squared() {
        rss = 0.0;
    }
    let df = n - m;
    Ok(OlsFit {
        model: model.to_vec(),
        coefficients,
        sigma_hat: (rss / df as f64).sqrt(),
        cov_scale,
        df,
        rss,
        residuals,
    })
}

pub fn t_statistics(fit: &OlsFit) -> Result<Vec<f64>> {
    if fit.df == 0 {
        return Err(Error::ModelTooLarge {
            size: fit.model.len(),
            n: fit.model.len(),
        });
    }
    if fit.sigma_hat == 0.0 {
        return Err(Error::ZeroResidualVariance);
    }
    Ok(fit
        .coefficients
        .iter()
        .enumerate()
        .map(|(k, b)| b / (fit.sigma_hat * fit.cov_scale[(k, k)].sqrt()))
        .collect())
}
