//! Coordinate-descent lasso for `sum_i (y_i - x_i'b)^2 + lambda * |b|_1`.
//!
//! Columns need not be standardized: each coordinate update divides by the
//! column's own squared norm, so the same solver serves folds of a
//! standardized split and the column-rescaled adaptive lasso.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::{PathEntry, ScreenPath, Screener};

/// Convergence and iteration limits for coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdSettings {
    /// Stop once the largest coefficient change in a full sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Accepted KKT residual, as a multiple of `n`.
    pub kkt_tol_per_row: f64,
}

impl Default for CdSettings {
    fn default() -> Self {
        CdSettings {
            tol: 1e-8,
            max_sweeps: 10_000,
            kkt_tol_per_row: 1e-6,
        }
    }
}

/// Active-set sweeps between attempts to solve the optimality conditions
/// directly.
const POLISH_EVERY: usize = 50;

/// Points on the default log-spaced lambda grid.
pub const LASSO_GRID_SIZE: usize = 100;
/// Smallest grid lambda as a fraction of `lambda_max`.
pub const LASSO_GRID_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub lambda: f64,
    /// Full-length coefficient vector.
    pub beta: DVector<f64>,
    /// `{j : beta_j != 0}`, ascending.
    pub active: Vec<usize>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub sweeps: usize,
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Warm-startable coordinate-descent state over one design.
pub(crate) struct CoordinateDescent<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    col_sq: Vec<f64>,
    beta: Vec<f64>,
    resid: Vec<f64>,
    settings: CdSettings,
    trace: Option<Vec<f64>>,
}

impl<'a> CoordinateDescent<'a> {
    pub(crate) fn new(x: &'a DMatrix<f64>, y: &'a DVector<f64>, settings: CdSettings) -> Self {
        let n = x.nrows();
        let col_sq = (0..x.ncols())
            .map(|j| {
                let c = &x.as_slice()[j * n..(j + 1) * n];
                dot(c, c)
            })
            .collect();
        CoordinateDescent {
            x,
            y,
            col_sq,
            beta: vec![0.0; x.ncols()],
            resid: y.as_slice().to_vec(),
            settings,
            trace: None,
        }
    }

    fn column(&self, j: usize) -> &[f64] {
        let n = self.x.nrows();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    fn objective(&self, lambda: f64) -> f64 {
        let rss: f64 = self.resid.iter().map(|r| r * r).sum();
        rss + lambda * self.beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Largest violation of the lasso optimality conditions.
    fn kkt_residual(&self, lambda: f64) -> f64 {
        (0..self.beta.len())
            .map(|j| {
                let g = 2.0 * dot(self.column(j), &self.resid);
                let b = self.beta[j];
                if b != 0.0 {
                    (g - lambda * b.signum()).abs()
                } else {
                    (g.abs() - lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// One pass over `coords`; returns the largest absolute change.
    fn sweep(&mut self, lambda: f64, coords: impl Iterator<Item = usize>) -> f64 {
        let n = self.x.nrows();
        let half = 0.5 * lambda;
        let mut max_change: f64 = 0.0;
        for j in coords {
            let c = self.col_sq[j];
            if c == 0.0 {
                continue;
            }
            let old = self.beta[j];
            let col = &self.x.as_slice()[j * n..(j + 1) * n];
            let g = dot(col, &self.resid) + c * old;
            let new = soft_threshold(g, half) / c;
            if new != old {
                let delta = new - old;
                for (r, xi) in self.resid.iter_mut().zip(col) {
                    *r -= delta * xi;
                }
                self.beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    fn record(&mut self, lambda: f64) {
        if self.trace.is_some() {
            let obj = self.objective(lambda);
            if let Some(t) = self.trace.as_mut() {
                t.push(obj);
            }
        }
    }

    /// Minimizes at `lambda`, starting from the current coefficients.
    pub(crate) fn solve(&mut self, lambda: f64) -> Result<LassoSolution> {
        let p = self.beta.len();
        let kkt_tol = self.settings.kkt_tol_per_row * self.x.nrows() as f64;
        let max = self.settings.max_sweeps;
        let mut sweeps = 0;
        let mut prev_obj = self.objective(lambda);
        loop {
            // Full sweep, then iterate on the active set until it settles.
            let change = self.sweep(lambda, 0..p);
            sweeps += 1;
            self.record(lambda);
            self.check_monotone(lambda, &mut prev_obj);
            if change <= self.settings.tol || sweeps >= max {
                if self.kkt_residual(lambda) <= kkt_tol || self.polish(lambda, kkt_tol, &mut prev_obj) {
                    break;
                }
                if sweeps >= max {
                    return Err(Error::NoConvergence {
                        sweeps,
                        kkt_residual: self.kkt_residual(lambda),
                    });
                }
                continue;
            }
            let active: Vec<usize> = (0..p).filter(|&j| self.beta[j] != 0.0).collect();
            let mut since_polish = 0usize;
            while sweeps < max {
                let change = self.sweep(lambda, active.iter().copied());
                sweeps += 1;
                self.record(lambda);
                self.check_monotone(lambda, &mut prev_obj);
                if change <= self.settings.tol {
                    break;
                }
                since_polish += 1;
                if since_polish == POLISH_EVERY {
                    // Either done, or the active set may have changed.
                    self.polish(lambda, kkt_tol, &mut prev_obj);
                    break;
                }
            }
        }

        let beta = DVector::from_column_slice(&self.beta);
        let active = (0..p).filter(|&j| self.beta[j] != 0.0).collect();
        Ok(LassoSolution {
            lambda,
            beta,
            active,
            objective: self.objective(lambda),
            kkt_residual: self.kkt_residual(lambda),
            sweeps,
        })
    }

    /// Coordinate descent crawls when active columns are nearly collinear
    /// or outnumber the rows. With the active set and signs held fixed the
    /// objective is `|y - X_A b|^2 + lambda s'b`, a convex quadratic plus a
    /// linear term. While `|A| > n`, moving along the projection of `-s` on
    /// the null space of `X_A` lowers it linearly without changing the fit,
    /// until a coefficient reaches zero and is dropped. Once `|A| <= n` the
    /// restricted optimum solves `X_A'X_A b = X_A'y - (lambda/2) s`; moves
    /// toward it, again dropping any coefficient that reaches zero on the
    /// way. Every step keeps the signs, so each lowers the true objective.
    /// Returns true once the full KKT conditions hold; otherwise the
    /// improved point is kept and coordinate descent carries on from it.
    fn polish(&mut self, lambda: f64, kkt_tol: f64, prev_obj: &mut f64) -> bool {
        let p = self.beta.len();
        let start_obj = self.objective(lambda);
        let saved = self.beta.clone();
        let mut beta = self.beta.clone();
        let mut active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        while active.len() > self.x.nrows() {
            let xa = self.x.select_columns(&active);
            let Some(chol) = (&xa * xa.transpose()).cholesky() else {
                break;
            };
            let signs = DVector::from_iterator(active.len(), active.iter().map(|&j| beta[j].signum()));
            let row_part = xa.tr_mul(&chol.solve(&(&xa * &signs)));
            let dir = row_part - &signs;
            if dir.norm() <= 1e-10 * signs.norm() || dir.iter().any(|v| !v.is_finite()) {
                break;
            }
            let mut step = f64::INFINITY;
            let mut blocking = None;
            for (k, &j) in active.iter().enumerate() {
                if dir[k] * signs[k] < 0.0 {
                    let t = -beta[j] / dir[k];
                    if t < step {
                        step = t;
                        blocking = Some(k);
                    }
                }
            }
            let Some(k) = blocking else {
                break;
            };
            for (i, &j) in active.iter().enumerate() {
                beta[j] += step * dir[i];
            }
            beta[active[k]] = 0.0;
            active.remove(k);
        }
        while !active.is_empty() && active.len() <= self.x.nrows() {
            let xa = self.x.select_columns(&active);
            let Some(chol) = xa.tr_mul(&xa).cholesky() else {
                break;
            };
            let signs = DVector::from_iterator(active.len(), active.iter().map(|&j| beta[j].signum()));
            let b = chol.solve(&(xa.tr_mul(self.y) - signs.scale(0.5 * lambda)));
            if b.iter().any(|v| !v.is_finite()) {
                break;
            }
            // Largest step along the segment that keeps every sign.
            let mut step = 1.0;
            let mut blocking = None;
            for (k, &j) in active.iter().enumerate() {
                if b[k].signum() != signs[k] || b[k] == 0.0 {
                    let t = beta[j] / (beta[j] - b[k]);
                    if t < step {
                        step = t;
                        blocking = Some(k);
                    }
                }
            }
            for (k, &j) in active.iter().enumerate() {
                beta[j] += step * (b[k] - beta[j]);
            }
            match blocking {
                Some(k) => {
                    beta[active[k]] = 0.0;
                    active.remove(k);
                }
                None => break,
            }
        }
        self.set_beta(&beta);
        let obj = self.objective(lambda);
        if obj > start_obj + 1e-12 * (1.0 + start_obj.abs()) {
            self.set_beta(&saved);
            return false;
        }
        *prev_obj = obj;
        self.kkt_residual(lambda) <= kkt_tol
    }

    fn check_monotone(&self, lambda: f64, prev: &mut f64) {
        let obj = self.objective(lambda);
        debug_assert!(
            obj <= *prev + 1e-9 * (1.0 + prev.abs()),
            "lasso objective increased: {prev} -> {obj}"
        );
        *prev = obj;
    }

    pub(crate) fn set_beta(&mut self, beta: &[f64]) {
        let n = self.x.nrows();
        self.beta.copy_from_slice(beta);
        self.resid.copy_from_slice(self.y.as_slice());
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                let col = &self.x.as_slice()[j * n..(j + 1) * n];
                for (r, xi) in self.resid.iter_mut().zip(col) {
                    *r -= b * xi;
                }
            }
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Lasso fit at a single `lambda`.
pub fn lasso_fit(data: &Dataset, lambda: f64) -> Result<LassoSolution> {
    lasso_fit_with(data, lambda, CdSettings::default())
}

pub fn lasso_fit_with(data: &Dataset, lambda: f64, settings: CdSettings) -> Result<LassoSolution> {
    check_lambda(lambda)?;
    CoordinateDescent::new(data.x(), data.y(), settings).solve(lambda)
}

/// Objective values after every coordinate-descent sweep, from a cold start.
pub fn lasso_objective_trace(data: &Dataset, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let mut cd = CoordinateDescent::new(data.x(), data.y(), CdSettings::default());
    cd.trace = Some(vec![cd.objective(lambda)]);
    cd.solve(lambda)?;
    Ok(cd.trace.unwrap_or_default())
}

/// Smallest lambda at which the lasso solution is identically zero.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let n = x.nrows();
    (0..x.ncols())
        .map(|j| 2.0 * dot(&x.as_slice()[j * n..(j + 1) * n], y.as_slice()).abs())
        .fold(0.0, f64::max)
}

/// Log-spaced descending grid from `lambda_max` to `ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, size: usize, ratio: f64) -> Vec<f64> {
    if lambda_max <= 0.0 || size == 0 {
        return vec![0.0];
    }
    if size == 1 {
        return vec![lambda_max];
    }
    let step = ratio.ln() / (size - 1) as f64;
    (0..size)
        .map(|k| lambda_max * (step * k as f64).exp())
        .collect()
}

/// Warm-started fits along a descending grid. With `cap = Some(k)` the walk
/// stops at the first lambda whose active set exceeds `k`, and that lambda
/// is not returned.
pub(crate) fn lasso_walk(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &[f64],
    cap: Option<usize>,
) -> Result<Vec<LassoSolution>> {
    let mut cd = CoordinateDescent::new(x, y, CdSettings::default());
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let sol = cd.solve(lambda)?;
        if cap.is_some_and(|k| sol.active.len() > k) {
            break;
        }
        out.push(sol);
    }
    Ok(out)
}

fn entry_from(sol: &LassoSolution) -> PathEntry {
    PathEntry {
        lambda: sol.lambda,
        selected: sol.active.clone(),
        coefficients: sol.active.iter().map(|&j| sol.beta[j]).collect(),
    }
}

/// Lasso screening path on a `grid_size`-point grid from `lambda_max` down
/// to `1e-3 * lambda_max`, truncated to models of at most `k_n` variables.
pub fn lasso_path(data: &Dataset, k_n: usize, grid_size: usize) -> Result<ScreenPath> {
    if k_n == 0 {
        return Err(Error::InvalidArgument("k_n must be >= 1".into()));
    }
    let grid = lambda_grid(lambda_max(data.x(), data.y()), grid_size, LASSO_GRID_RATIO);
    lasso_path_on_grid(data, &grid, k_n)
}

/// Lasso screening path on a caller-supplied descending grid.
pub fn lasso_path_on_grid(data: &Dataset, grid: &[f64], k_n: usize) -> Result<ScreenPath> {
    let sols = lasso_walk(data.x(), data.y(), grid, Some(k_n))?;
    Ok(ScreenPath {
        method: Screener::Lasso,
        entries: sols.iter().map(entry_from).collect(),
        k_n,
    })
}
