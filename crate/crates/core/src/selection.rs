//! Stage two: least-squares refits of the screened models, scoring by
//! held-out or leave-one-out prediction error, and the simulation-only
//! oracle loss.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TrueModel};
use crate::error::{Error, Result};
use crate::ols::ols_fit;
use crate::screeners::lasso::lasso_walk;
use crate::screeners::lasso_path_on_grid;
use crate::screeners::{marginal_path, screen, stepwise_path, PathEntry, ScreenPath, Screener};

/// Least-squares refit of one path entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RefitEntry {
    /// Position on the originating path.
    pub index: usize,
    pub lambda: f64,
    pub selected: Vec<usize>,
    /// OLS coefficients aligned with `selected`.
    pub coefficients: Vec<f64>,
}

impl RefitEntry {
    pub fn predict_row(&self, x: &DMatrix<f64>, row: usize) -> f64 {
        self.selected
            .iter()
            .zip(&self.coefficients)
            .map(|(&j, b)| b * x[(row, j)])
            .sum()
    }

    pub fn full_coefficients(&self, p: usize) -> DVector<f64> {
        let mut beta = DVector::zeros(p);
        for (&j, &b) in self.selected.iter().zip(&self.coefficients) {
            beta[j] = b;
        }
        beta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refits {
    pub entries: Vec<RefitEntry>,
    /// Path positions whose refit failed, with the reason.
    pub dropped: Vec<(usize, String)>,
}

/// OLS refit on every path entry. Entries whose design is singular or too
/// large for the training rows are dropped and reported in `dropped`.
pub fn refit_on_path(train: &Dataset, path: &ScreenPath) -> Result<Refits> {
    let mut cache: HashMap<&[usize], Option<Vec<f64>>> = HashMap::new();
    let mut entries = Vec::with_capacity(path.entries.len());
    let mut dropped = Vec::new();
    for (index, e) in path.entries.iter().enumerate() {
        let coefs = match cache.get(e.selected.as_slice()) {
            Some(c) => c.clone(),
            None => {
                let c = match ols_fit(train, &e.selected) {
                    Ok(fit) => Some(fit.coefficients.as_slice().to_vec()),
                    Err(err @ (Error::SingularGram { .. } | Error::ModelTooLarge { .. })) => {
                        dropped.push((index, err.to_string()));
                        None
                    }
                    Err(other) => return Err(other),
                };
                cache.insert(&e.selected, c.clone());
                c
            }
        };
        match coefs {
            Some(coefficients) => entries.push(RefitEntry {
                index,
                lambda: e.lambda,
                selected: e.selected.clone(),
                coefficients,
            }),
            None if !dropped.iter().any(|(i, _)| *i == index) => {
                dropped.push((index, "singular refit".into()))
            }
            None => {}
        }
    }
    Ok(Refits { entries, dropped })
}

/// Score of one candidate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub index: usize,
    pub lambda: f64,
    /// Mean squared prediction error on the validation rows.
    pub l_hat: f64,
    pub selected: Vec<usize>,
    /// Refit coefficients aligned with `selected`.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub chosen: CvScore,
    pub curve: Vec<CvScore>,
}

/// Mean squared residual of a sparse coefficient vector on `data`.
pub fn holdout_loss(selected: &[usize], coefficients: &[f64], data: &Dataset) -> f64 {
    let x = data.x();
    let y = data.y();
    let n = data.n();
    let mut fitted = vec![0.0; n];
    for (&j, &b) in selected.iter().zip(coefficients) {
        for (f, xi) in fitted.iter_mut().zip(x.column(j).iter()) {
            *f += b * xi;
        }
    }
    fitted
        .iter()
        .zip(y.iter())
        .map(|(f, yi)| (yi - f).powi(2))
        .sum::<f64>()
        / n as f64
}

/// Index of the best score: smallest loss, then fewer variables, then the
/// earlier path position.
fn argmin_score(curve: &[CvScore]) -> Option<usize> {
    (0..curve.len()).min_by(|&a, &b| {
        let (sa, sb) = (&curve[a], &curve[b]);
        sa.l_hat
            .total_cmp(&sb.l_hat)
            .then(sa.selected.len().cmp(&sb.selected.len()))
            .then(sa.index.cmp(&sb.index))
    })
}

/// Picks the refit with the smallest held-out mean squared error.
pub fn cv_select(refits: &Refits, holdout: &Dataset) -> Result<CvOutcome> {
    if refits.entries.is_empty() {
        return Err(Error::EmptyPath);
    }
    if let Some(max) = refits.entries.iter().flat_map(|e| e.selected.iter()).max() {
        if *max >= holdout.p() {
            return Err(Error::DimensionMismatch(format!(
                "holdout has {} columns but the path uses column {max}",
                holdout.p()
            )));
        }
    }
    let curve: Vec<CvScore> = refits
        .entries
        .iter()
        .map(|e| CvScore {
            index: e.index,
            lambda: e.lambda,
            l_hat: holdout_loss(&e.selected, &e.coefficients, holdout),
            selected: e.selected.clone(),
            coefficients: e.coefficients.clone(),
        })
        .collect();
    let best = argmin_score(&curve).ok_or(Error::EmptyPath)?;
    Ok(CvOutcome {
        chosen: curve[best].clone(),
        curve,
    })
}

/// How leave-one-out folds obtain their candidate models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LooMode {
    /// Each fold re-runs the screener on its `n - 1` rows and refits the
    /// candidate sets by least squares. The lasso reuses the full-data
    /// lambda grid; stepwise and marginal candidates are matched by model
    /// size.
    #[default]
    Rescreen,
    /// Each fold refits the full-data candidate sets.
    FrozenPath,
    /// Each fold re-runs the screener and predicts with the screener's own
    /// coefficients (the lasso's shrunken estimates, marginal slopes) rather
    /// than a least-squares refit.
    Penalized,
}

/// Candidate entries of one fold, aligned with the full-data path positions.
fn fold_entries(fold: &Dataset, path: &ScreenPath, mode: LooMode) -> Option<Vec<PathEntry>> {
    if mode == LooMode::FrozenPath {
        return Some(path.entries.clone());
    }
    let entries = match path.method {
        Screener::Lasso => lasso_path_on_grid(fold, &path.lambdas(), usize::MAX).ok()?.entries,
        Screener::Stepwise => stepwise_path(fold, path.k_n).ok()?.entries,
        Screener::Marginal => marginal_path(fold, path.k_n).ok()?.entries,
    };
    (entries.len() == path.entries.len()).then_some(entries)
}

/// Leave-one-out scores for every position of `path`, computed on `data`.
/// Folds whose refit is singular predict zero at the left-out row.
pub fn loo_scores(data: &Dataset, path: &ScreenPath, mode: LooMode) -> Vec<f64> {
    let n = data.n();
    let positions = path.entries.len();
    let mut sums = vec![0.0; positions];
    for i in 0..n {
        let fold = data.without_row(i);
        let y_i = data.y()[i];
        let x_i = |j: usize| data.x()[(i, j)];
        let candidates = fold_entries(&fold, path, mode);
        let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
        for t in 0..positions {
            let err = match &candidates {
                None => y_i * y_i,
                Some(entries) if mode == LooMode::Penalized => {
                    let e = &entries[t];
                    let pred: f64 = e.selected.iter().zip(&e.coefficients).map(|(&j, b)| b * x_i(j)).sum();
                    (y_i - pred).powi(2)
                }
                Some(entries) => {
                    let set = &entries[t].selected;
                    *cache.entry(set.clone()).or_insert_with(|| match ols_fit(&fold, set) {
                        Ok(fit) => {
                            let pred: f64 = set.iter().zip(fit.coefficients.iter()).map(|(&j, b)| b * x_i(j)).sum();
                            (y_i - pred).powi(2)
                        }
                        Err(_) => y_i * y_i,
                    })
                }
            };
            sums[t] += err;
        }
    }
    sums.into_iter().map(|s| s / n as f64).collect()
}

/// Screens `data`, scores each candidate by leave-one-out prediction error
/// and returns the winner refit on all of `data`.
pub fn loo_cv_select(
    data: &Dataset,
    screener: Screener,
    k_n: usize,
    mode: LooMode,
) -> Result<CvOutcome> {
    if data.n() < 3 {
        return Err(Error::TooFewRows {
            needed: 3,
            found: data.n(),
        });
    }
    let path = screen(data, screener, k_n)?;
    loo_select_on_path(data, &path, mode)
}

pub fn loo_select_on_path(data: &Dataset, path: &ScreenPath, mode: LooMode) -> Result<CvOutcome> {
    if path.entries.is_empty() {
        return Err(Error::EmptyPath);
    }
    let scores = loo_scores(data, path, mode);
    let refits = refit_on_path(data, path)?;
    let curve: Vec<CvScore> = refits
        .entries
        .into_iter()
        .map(|e| CvScore {
            index: e.index,
            lambda: e.lambda,
            l_hat: scores[e.index],
            selected: e.selected,
            coefficients: e.coefficients,
        })
        .collect();
    let best = argmin_score(&curve).ok_or(Error::EmptyPath)?;
    Ok(CvOutcome {
        chosen: curve[best].clone(),
        curve,
    })
}

/// Leave-one-out tuning of a penalized fit scored by its own predictions
/// (no least-squares refit). `grid` must be descending; ties go to the
/// earlier (larger) lambda.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedLoo {
    pub grid: Vec<f64>,
    pub scores: Vec<f64>,
    pub best: usize,
}

pub fn loo_penalized(x: &DMatrix<f64>, y: &DVector<f64>, grid: &[f64]) -> Result<PenalizedLoo> {
    let n = x.nrows();
    if n < 3 {
        return Err(Error::TooFewRows { needed: 3, found: n });
    }
    if grid.is_empty() {
        return Err(Error::EmptyPath);
    }
    let mut sums = vec![0.0; grid.len()];
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
        let xf = x.select_rows(&keep);
        let yf = DVector::from_iterator(n - 1, keep.iter().map(|&r| y[r]));
        let sols = lasso_walk(&xf, &yf, grid, None)?;
        for (t, sol) in sols.iter().enumerate() {
            let pred: f64 = sol.active.iter().map(|&j| sol.beta[j] * x[(i, j)]).sum();
            sums[t] += (y[i] - pred).powi(2);
        }
    }
    let scores: Vec<f64> = sums.into_iter().map(|s| s / n as f64).collect();
    let best = (0..scores.len())
        .min_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)))
        .ok_or(Error::EmptyPath)?;
    Ok(PenalizedLoo {
        grid: grid.to_vec(),
        scores,
        best,
    })
}

/// `L(b) = (b - beta)' (X'X / n) (b - beta)`, evaluated as a quadratic form
/// over the coordinates where `b` and `beta` differ.
pub fn oracle_loss(beta_hat: &DVector<f64>, truth: &TrueModel, data: &Dataset) -> Result<f64> {
    if beta_hat.len() != data.p() || truth.p() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {} coefficients, truth {}, design {}",
            beta_hat.len(),
            truth.p(),
            data.p()
        )));
    }
    let diff = beta_hat - truth.beta();
    let nz: Vec<usize> = (0..diff.len()).filter(|&j| diff[j] != 0.0).collect();
    if nz.is_empty() {
        return Ok(0.0);
    }
    let xs = data.x().select_columns(&nz);
    let gram = xs.tr_mul(&xs) / data.n() as f64;
    let d = DVector::from_iterator(nz.len(), nz.iter().map(|&j| diff[j]));
    Ok(d.dot(&(&gram * &d)).max(0.0))
}
