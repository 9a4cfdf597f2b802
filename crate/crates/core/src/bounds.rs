//! Exhaustive check of the loss bounds for least-squares fits on small
//! models, used to sanity-check simulation designs.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TrueModel};
use crate::eigen::{binomial, restricted_eigen, MAX_SUBSETS};
use crate::error::{Error, Result};
use crate::ols::ols_fit;
use crate::selection::oracle_loss;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBoundReport {
    pub m: usize,
    pub s: usize,
    /// Number of models with a well-defined least-squares fit.
    pub models_checked: usize,
    /// Models skipped because their Gram matrix is singular.
    pub models_singular: usize,
    /// Largest loss over models of size at most `m` that contain the support.
    pub sup_containing: Option<f64>,
    /// `4 m sigma^2 ln p / (n phi_n(m))`.
    pub upper_bound: f64,
    /// Smallest loss over models of size at most `m` that miss part of the
    /// support.
    pub inf_missing: Option<f64>,
    /// `psi^2 phi_n(min(m + s, n, p))`; absent when the support is empty.
    pub lower_bound: Option<f64>,
    pub phi_m: f64,
    pub phi_m_plus_s: Option<f64>,
}

impl LossBoundReport {
    pub fn upper_violated(&self) -> bool {
        self.sup_containing.is_some_and(|v| v > self.upper_bound)
    }

    pub fn lower_violated(&self) -> bool {
        match (self.inf_missing, self.lower_bound) {
            (Some(v), Some(b)) => v < b,
            _ => false,
        }
    }
}

/// Fits every model of size `0..=m` by least squares and compares the
/// extreme oracle losses with the two bounds. Violations are reported, not
/// raised: the bounds hold only with probability tending to one.
pub fn check_loss_bounds(data: &Dataset, truth: &TrueModel, m: usize) -> Result<LossBoundReport> {
    let (n, p) = (data.n(), data.p());
    if truth.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "true model has {} coefficients for {p} columns",
            truth.p()
        )));
    }
    if m == 0 || m >= n || m > p {
        return Err(Error::InvalidArgument(format!(
            "model size bound {m} must be in 1..=min(p, n - 1)"
        )));
    }
    let total: u128 = (0..=m).map(|k| binomial(p, k)).sum();
    if total > MAX_SUBSETS {
        return Err(Error::TooManySubsets { count: total });
    }
    let s = truth.s();
    let phi_m = restricted_eigen(data, m)?.0;
    let phi_m_plus_s = if s > 0 {
        // A model plus the support never spans more than min(n, p) columns.
        Some(restricted_eigen(data, (m + s).min(n).min(p))?.0)
    } else {
        None
    };
    let sigma2 = truth.sigma().powi(2);
    let upper_bound = 4.0 * m as f64 * sigma2 * (p as f64).ln() / (n as f64 * phi_m);
    let lower_bound = match (truth.psi(), phi_m_plus_s) {
        (Some(psi), Some(phi)) => Some(psi * psi * phi),
        _ => None,
    };

    let mut report = LossBoundReport {
        m,
        s,
        models_checked: 0,
        models_singular: 0,
        sup_containing: None,
        upper_bound,
        inf_missing: None,
        lower_bound,
        phi_m,
        phi_m_plus_s,
    };
    for size in 0..=m {
        for model in (0..p).combinations(size) {
            let fit = match ols_fit(data, &model) {
                Ok(f) => f,
                Err(Error::SingularGram { .. }) => {
                    report.models_singular += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            report.models_checked += 1;
            let loss = oracle_loss(&fit.full_coefficients(p), truth, data)?;
            if truth.support().iter().all(|j| model.contains(j)) {
                report.sup_containing = Some(report.sup_containing.map_or(loss, |v| v.max(loss)));
            } else {
                report.inf_missing = Some(report.inf_missing.map_or(loss, |v| v.min(loss)));
            }
        }
    }
    Ok(report)
}
