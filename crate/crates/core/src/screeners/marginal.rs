//! Marginal regression screening: rank columns by `|<Y, X_j>| / n`.

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::{PathEntry, ScreenPath, Screener};

/// Marginal coefficients `mu_j = <Y, X_j> / n`.
pub fn marginal_coefficients(data: &Dataset) -> Vec<f64> {
    let n = data.n() as f64;
    data.x()
        .column_iter()
        .map(|c| c.dot(data.y()) / n)
        .collect()
}

/// Column indices ordered by decreasing `|mu_j|`, lowest index first on ties.
pub fn rank_by_magnitude(mu: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| mu[b].abs().total_cmp(&mu[a].abs()).then(a.cmp(&b)));
    order
}

/// Path whose `m`-th entry (m = 1..=k_n) keeps the top-`m` columns, with
/// lambda equal to the `m`-th largest `|mu_j|`.
pub fn marginal_path(data: &Dataset, k_n: usize) -> Result<ScreenPath> {
    if k_n == 0 || k_n > data.p() {
        return Err(Error::InvalidArgument(format!(
            "marginal screening needs 1 <= k_n <= p (k_n = {k_n}, p = {})",
            data.p()
        )));
    }
    let mu = marginal_coefficients(data);
    let order = rank_by_magnitude(&mu);
    let entries = (1..=k_n)
        .map(|m| {
            let mut selected = order[..m].to_vec();
            selected.sort_unstable();
            PathEntry {
                lambda: mu[order[m - 1]].abs(),
                coefficients: selected.iter().map(|&j| mu[j]).collect(),
                selected,
            }
        })
        .collect();
    Ok(ScreenPath {
        method: Screener::Marginal,
        entries,
        k_n,
    })
}
