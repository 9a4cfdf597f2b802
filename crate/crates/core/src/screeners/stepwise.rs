//! Forward stepwise regression: repeatedly add the column with the largest
//! absolute inner product with the current residual, then refit least
//! squares on the enlarged set.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ols::ols_fit;

use super::{PathEntry, ScreenPath, Screener};

/// Stepwise path with entries for 0, 1, ..., `k_n` steps.
pub fn stepwise_path(data: &Dataset, k_n: usize) -> Result<ScreenPath> {
    let n = data.n();
    let p = data.p();
    if k_n == 0 || k_n >= n || k_n > p {
        return Err(Error::InvalidArgument(format!(
            "stepwise needs 1 <= k_n < n and k_n <= p (k_n = {k_n}, n = {n}, p = {p})"
        )));
    }

    let mut entries = Vec::with_capacity(k_n + 1);
    entries.push(PathEntry {
        lambda: 0.0,
        selected: Vec::new(),
        coefficients: Vec::new(),
    });

    let mut order: Vec<usize> = Vec::with_capacity(k_n);
    let mut in_model = vec![false; p];
    let mut resid = data.y().clone();
    for step in 1..=k_n {
        let next = best_column(data, &resid, &in_model);
        order.push(next);
        in_model[next] = true;

        let fit = ols_fit(data, &order)?;
        resid = fit.residuals.clone();

        let mut pairs: Vec<(usize, f64)> = order
            .iter()
            .copied()
            .zip(fit.coefficients.iter().copied())
            .collect();
        pairs.sort_unstable_by_key(|&(j, _)| j);
        entries.push(PathEntry {
            lambda: step as f64,
            selected: pairs.iter().map(|&(j, _)| j).collect(),
            coefficients: pairs.iter().map(|&(_, b)| b).collect(),
        });
    }

    Ok(ScreenPath {
        method: Screener::Stepwise,
        entries,
        k_n,
    })
}

/// `argmax_j |<X_j, res>| / n` over columns not yet in the model; the lowest
/// index wins ties.
fn best_column(data: &Dataset, resid: &nalgebra::DVector<f64>, in_model: &[bool]) -> usize {
    let n = data.n() as f64;
    let mut best = usize::MAX;
    let mut best_val = f64::NEG_INFINITY;
    for (j, col) in data.x().column_iter().enumerate() {
        if in_model[j] {
            continue;
        }
        let mu = (col.dot(resid) / n).abs();
        if mu > best_val {
            best_val = mu;
            best = j;
        }
    }
    best
}

/// The variable added at each step, in order.
pub fn entry_order(path: &ScreenPath) -> Vec<usize> {
    path.entries
        .windows(2)
        .filter_map(|w| {
            w[1].selected
                .iter()
                .find(|j| w[0].selected.binary_search(j).is_err())
                .copied()
        })
        .collect()
}
