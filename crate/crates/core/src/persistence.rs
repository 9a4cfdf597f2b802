//! Predictive risk without assuming a linear model: the lasso constrained
//! to an l1 ball, cross-validated choice of the ball's radius, and the gap
//! between the chosen fit's risk and the best risk along the radius grid.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ols::ols_fit;
use crate::rng::derive_seed;
use crate::screeners::lasso::{lambda_max, CdSettings, CoordinateDescent};
use crate::simulation::{ModelKind, SimModel};
use crate::split::{split, SplitMode};

/// Relative tolerance on the l1 norm when matching a radius.
pub const RADIUS_REL_TOL: f64 = 1e-4;
/// Default number of radii on the cross-validation grid.
pub const RADIUS_GRID_SIZE: usize = 50;
/// Smallest penalty tried, as a fraction of `lambda_max`.
const LAMBDA_FLOOR: f64 = 1e-9;
const MAX_BISECTIONS: usize = 200;
const PSD_TOL: f64 = 1e-8;

/// Second-moment matrix `Gamma = E(Z Z')` of `Z = (Y, X_1, ..., X_p)`. The
/// predictive risk of `beta` is `gamma' Gamma gamma` with
/// `gamma = (-1, beta_1, ..., beta_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskModel {
    gamma: DMatrix<f64>,
}

impl RiskModel {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        if gamma.nrows() != gamma.ncols() || gamma.nrows() < 1 {
            return Err(Error::DimensionMismatch(format!(
                "risk matrix must be square, got {}x{}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        let scale = gamma.amax().max(1.0);
        let max_asymmetry = (&gamma - gamma.transpose()).amax();
        if max_asymmetry > PSD_TOL * scale {
            return Err(Error::NotSymmetric { max_asymmetry });
        }
        let min_eig = SymmetricEigen::new(gamma.clone()).eigenvalues.min();
        if min_eig < -PSD_TOL * scale {
            return Err(Error::DomainError(format!(
                "risk matrix is not positive semidefinite (smallest eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(RiskModel { gamma })
    }

    /// Population matrix of a simulation model.
    pub fn population(model: &SimModel) -> Result<Self> {
        model.validate()?;
        RiskModel::new(model.gamma())
    }

    /// Sample analogue `n^-1 sum_i Z_i Z_i'`; its risk is the mean squared
    /// residual.
    pub fn empirical(data: &Dataset) -> Self {
        let (n, p) = (data.n(), data.p());
        let mut z = DMatrix::zeros(n, p + 1);
        z.set_column(0, data.y());
        z.view_mut((0, 1), (n, p)).copy_from(data.x());
        let mut gamma = z.tr_mul(&z) / n as f64;
        // Exact symmetry, regardless of summation order.
        gamma = (&gamma + gamma.transpose()) * 0.5;
        RiskModel { gamma }
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.gamma.nrows() - 1
    }
}

/// `R(beta) = gamma' Gamma gamma`.
pub fn predictive_risk(beta: &DVector<f64>, risk: &RiskModel) -> Result<f64> {
    if beta.len() != risk.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a risk model over {} covariates",
            beta.len(),
            risk.p()
        )));
    }
    let mut g = DVector::zeros(beta.len() + 1);
    g[0] = -1.0;
    g.rows_mut(1, beta.len()).copy_from(beta);
    Ok(g.dot(&(&risk.gamma * &g)))
}

/// Least squares over the ball `|beta|_1 <= omega`, through the penalized
/// form. Returns the least-squares fit when it exists and already lies in
/// the ball; otherwise bisects (geometrically) on the penalty until the
/// solution's l1 norm lies in `[omega (1 - 1e-4), omega]`, then solves the
/// optimality conditions on that active set with the norm pinned to
/// `omega` exactly, keeping that refinement only when it is valid. The
/// result is always feasible.
pub fn constrained_lasso(data: &Dataset, omega: f64) -> Result<DVector<f64>> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "radius must be finite and >= 0, got {omega}"
        )));
    }
    let p = data.p();
    let lmax = lambda_max(data.x(), data.y());
    if omega == 0.0 || lmax == 0.0 {
        return Ok(DVector::zeros(p));
    }
    if data.n() > p {
        let all: Vec<usize> = (0..p).collect();
        match ols_fit(data, &all) {
            Ok(fit) if fit.coefficients.lp_norm(1) <= omega => return Ok(fit.coefficients),
            Ok(_) | Err(Error::SingularGram { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let mut cd = CoordinateDescent::new(data.x(), data.y(), CdSettings::default());
    let (mut lo, mut hi) = (lmax * LAMBDA_FLOOR, lmax);
    let mut best = DVector::zeros(p);
    let mut best_lambda = hi;
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        let sol = cd.solve(mid)?;
        let norm = sol.beta.lp_norm(1);
        if norm > omega {
            lo = mid;
        } else {
            hi = mid;
            best = sol.beta;
            best_lambda = mid;
            if norm >= omega * (1.0 - RADIUS_REL_TOL) {
                break;
            }
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok(refine_on_boundary(data, &best, omega, best_lambda).unwrap_or(best))
}

/// With the active set `A` and signs `s` of `beta` fixed, the constrained
/// optimum on the boundary solves `G b = X_A'y - (lambda/2) s` with
/// `s'b = omega`, `G = X_A'X_A`: linear in `(b, lambda)`. Returns `None`
/// unless the solution keeps the signs, has a positive penalty and
/// satisfies the optimality conditions off the active set.
fn refine_on_boundary(data: &Dataset, beta: &DVector<f64>, omega: f64, lambda_hint: f64) -> Option<DVector<f64>> {
    let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    if active.is_empty() || active.len() >= data.n() {
        return None;
    }
    let xa = data.x().select_columns(&active);
    let chol = xa.tr_mul(&xa).cholesky()?;
    let s = DVector::from_iterator(active.len(), active.iter().map(|&j| beta[j].signum()));
    let u = chol.solve(&xa.tr_mul(data.y()));
    let v = chol.solve(&s);
    let half_lambda = (s.dot(&u) - omega) / s.dot(&v);
    if !(half_lambda > 0.0 && half_lambda.is_finite()) {
        return None;
    }
    let b = u - v * half_lambda;
    if b.iter().zip(s.iter()).any(|(bj, sj)| bj.signum() != *sj || *bj == 0.0) {
        return None;
    }
    let mut full = DVector::zeros(beta.len());
    for (k, &j) in active.iter().enumerate() {
        full[j] = b[k];
    }
    let norm = full.lp_norm(1);
    if norm > omega {
        full *= omega / norm;
    }
    let resid = data.y() - data.x() * &full;
    let grad = data.x().tr_mul(&resid) * 2.0;
    let lambda = 2.0 * half_lambda;
    let slack = 1e-6 * (data.n() as f64).max(lambda_hint);
    let inactive_ok = (0..beta.len())
        .filter(|&j| full[j] == 0.0)
        .all(|j| grad[j].abs() <= lambda + slack);
    inactive_ok.then_some(full)
}

/// Uniform grid of `size` radii on `[0, omega_max]`.
pub fn radius_grid(omega_max: f64, size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(Error::InvalidArgument(format!("radius grid needs >= 2 points, got {size}")));
    }
    if !(omega_max >= 0.0 && omega_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "largest radius must be finite and >= 0, got {omega_max}"
        )));
    }
    Ok((0..size)
        .map(|k| omega_max * k as f64 / (size - 1) as f64)
        .collect())
}

/// One radius on the cross-validation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusFit {
    pub radius: f64,
    /// Constrained fit on the training part.
    pub beta: DVector<f64>,
    /// Mean squared prediction error on the validation part.
    pub heldout_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusSelection {
    pub fits: Vec<RadiusFit>,
    /// Index into `fits` of the chosen radius.
    pub chosen: usize,
}

impl RadiusSelection {
    pub fn chosen_fit(&self) -> &RadiusFit {
        &self.fits[self.chosen]
    }

    pub fn path(&self) -> Vec<DVector<f64>> {
        self.fits.iter().map(|f| f.beta.clone()).collect()
    }
}

fn mean_squared_error(data: &Dataset, beta: &DVector<f64>) -> f64 {
    (data.y() - data.x() * beta).norm_squared() / data.n() as f64
}

/// Fits the constrained lasso on `train` for each radius on a uniform grid
/// over `[0, omega_max]` and keeps the one with the smallest mean squared
/// error on `validate` (ties to the smaller radius).
pub fn cv_radius_select(
    train: &Dataset,
    validate: &Dataset,
    omega_max: f64,
    grid: usize,
) -> Result<RadiusSelection> {
    if train.p() != validate.p() {
        return Err(Error::DimensionMismatch(format!(
            "training part has {} columns, validation part {}",
            train.p(),
            validate.p()
        )));
    }
    let radii = radius_grid(omega_max, grid)?;
    let fits = radii
        .par_iter()
        .map(|&radius| {
            let beta = constrained_lasso(train, radius)?;
            let heldout_mse = mean_squared_error(validate, &beta);
            Ok(RadiusFit {
                radius,
                beta,
                heldout_mse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut chosen = 0;
    for (k, f) in fits.iter().enumerate() {
        if f.heldout_mse < fits[chosen].heldout_mse {
            chosen = k;
        }
    }
    Ok(RadiusSelection { fits, chosen })
}

/// `R(chosen) - min_l R(beta(l))` over the supplied path.
pub fn persistence_gap(chosen: &DVector<f64>, path: &[DVector<f64>], risk: &RiskModel) -> Result<f64> {
    let r = predictive_risk(chosen, risk)?;
    let mut best = r;
    for b in path {
        best = best.min(predictive_risk(b, risk)?);
    }
    Ok(r - best)
}

/// One row of `persistence_curve.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub radius: f64,
    /// Risk under the empirical second moments of the training part.
    pub empirical_risk: f64,
    pub population_risk: f64,
    pub l1_norm: f64,
}

pub fn risk_curve(selection: &RadiusSelection, train: &Dataset, population: &RiskModel) -> Result<Vec<CurvePoint>> {
    let empirical = RiskModel::empirical(train);
    selection
        .fits
        .iter()
        .map(|f| {
            Ok(CurvePoint {
                radius: f.radius,
                empirical_risk: predictive_risk(&f.beta, &empirical)?,
                population_risk: predictive_risk(&f.beta, population)?,
                l1_norm: f.beta.lp_norm(1),
            })
        })
        .collect()
}

/// Writes risk curves, one block of rows per sample size, with columns
/// `n, radius, empirical_risk, population_risk, l1_norm`.
pub fn write_curve_csv<W: Write>(curves: &[(usize, Vec<CurvePoint>)], header: Option<&str>, mut out: W) -> Result<()> {
    if let Some(h) = header {
        writeln!(out, "# {h}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "radius", "empirical_risk", "population_risk", "l1_norm"])?;
    for (n, points) in curves {
        for pt in points {
            w.serialize((n, pt.radius, pt.empirical_risk, pt.population_risk, pt.l1_norm))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Settings of the persistence-trend experiment: draws from a simulation
/// model without standardization (the population risk refers to the raw
/// covariates), splits each draw in half, cross-validates the radius over
/// `[0, n^exponent]` and records the gap against the population risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceConfig {
    pub kind: ModelKind,
    pub sample_sizes: Vec<usize>,
    pub p: usize,
    pub delta: f64,
    pub sigma: f64,
    pub radius_exponent: f64,
    pub grid: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for PersistenceConfig {
    fn default() -> Self {
        PersistenceConfig {
            kind: ModelKind::B,
            sample_sizes: vec![100, 400, 1600],
            p: 50,
            delta: 0.05,
            sigma: 1.0,
            radius_exponent: 0.2,
            grid: RADIUS_GRID_SIZE,
            replicates: 50,
            seed: 1,
        }
    }
}

impl PersistenceConfig {
    pub fn model(&self, n: usize) -> SimModel {
        let mut m = SimModel::new(self.kind, n, self.p).with_delta(self.delta);
        m.sigma = self.sigma;
        m
    }

    pub fn omega(&self, n: usize) -> f64 {
        (n as f64).powf(self.radius_exponent)
    }
}

/// One replicate of the experiment.
#[derive(Debug, Clone)]
pub struct PersistenceReplicate {
    pub selection: RadiusSelection,
    pub train: Dataset,
    pub gap: f64,
}

pub fn persistence_replicate(model: &SimModel, omega: f64, grid: usize, seed: u64) -> Result<PersistenceReplicate> {
    let draw = model.generate(derive_seed(seed, 0))?;
    let plan = split(draw.data.n(), SplitMode::TwoSplit, derive_seed(seed, 1))?;
    let train = draw.data.select_rows(plan.part(0));
    let validate = draw.data.select_rows(plan.part(1));
    let selection = cv_radius_select(&train, &validate, omega, grid)?;
    let risk = RiskModel::population(model)?;
    let gap = persistence_gap(&selection.chosen_fit().beta, &selection.path(), &risk)?;
    Ok(PersistenceReplicate {
        selection,
        train,
        gap,
    })
}

/// Summary of the gaps at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceRow {
    pub n: usize,
    pub omega: f64,
    pub replicates: usize,
    pub median_gap: f64,
    pub mean_gap: f64,
    pub max_gap: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

pub fn persistence_trend(cfg: &PersistenceConfig) -> Result<Vec<PersistenceRow>> {
    if cfg.replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    cfg.sample_sizes
        .iter()
        .map(|&n| {
            let model = cfg.model(n);
            model.validate()?;
            let omega = cfg.omega(n);
            let mut gaps = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| {
                    persistence_replicate(&model, omega, cfg.grid, model.replicate_seed(cfg.seed, r))
                        .map(|rep| rep.gap)
                })
                .collect::<Result<Vec<f64>>>()?;
            gaps.sort_by(f64::total_cmp);
            Ok(PersistenceRow {
                n,
                omega,
                replicates: gaps.len(),
                median_gap: median(&gaps),
                mean_gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
                max_gap: gaps[gaps.len() - 1],
            })
        })
        .collect()
}

pub fn write_trend_csv<W: Write>(rows: &[PersistenceRow], header: Option<&str>, mut out: W) -> Result<()> {
    if let Some(h) = header {
        writeln!(out, "# {h}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, beta: &[f64], sigma: f64, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let p = beta.len();
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let e = DVector::from_fn(n, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        });
        Dataset::new(&x * DVector::from_column_slice(beta) + e, x).unwrap()
    }

    #[test]
    fn risk_at_zero_is_second_moment_of_y() {
        let model = SimModel::new(ModelKind::B, 100, 20);
        let risk = RiskModel::population(&model).unwrap();
        let r = predictive_risk(&DVector::zeros(20), &risk).unwrap();
        assert_eq!(r, risk.gamma()[(0, 0)]);
    }

    #[test]
    fn identity_design_risk_is_noise_plus_distance() {
        let model = SimModel::new(ModelKind::B, 100, 15);
        let risk = RiskModel::population(&model).unwrap();
        let beta = model.beta();
        let mut rng = rng_from_seed(5);
        for _ in 0..20 {
            let b = DVector::from_fn(15, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            let closed = 1.0 + (&b - &beta).norm_squared();
            assert!((predictive_risk(&b, &risk).unwrap() - closed).abs() < 1e-9);
        }
    }

    #[test]
    fn empirical_risk_is_mean_squared_residual() {
        let d = gaussian(37, &[1.0, 0.0, -2.0], 1.0, 6);
        let risk = RiskModel::empirical(&d);
        let b = DVector::from_vec(vec![0.3, -0.1, 0.7]);
        let direct = (d.y() - d.x() * &b).norm_squared() / 37.0;
        assert!((predictive_risk(&b, &risk).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn risk_model_rejects_bad_matrices() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(RiskModel::new(asym), Err(Error::NotSymmetric { .. })));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(RiskModel::new(indefinite).is_err());
        let risk = RiskModel::new(DMatrix::identity(3, 3)).unwrap();
        assert!(predictive_risk(&DVector::zeros(3), &risk).is_err());
    }

    #[test]
    fn zero_radius_gives_zero() {
        let d = gaussian(30, &[1.0, 2.0], 1.0, 7);
        assert_eq!(constrained_lasso(&d, 0.0).unwrap(), DVector::zeros(2));
        assert!(constrained_lasso(&d, -1.0).is_err());
    }

    #[test]
    fn large_radius_gives_least_squares() {
        let d = gaussian(50, &[1.0, -0.5, 0.0, 2.0], 1.0, 8);
        let ols = ols_fit(&d, &[0, 1, 2, 3]).unwrap().coefficients;
        let b = constrained_lasso(&d, ols.lp_norm(1) * 1.5).unwrap();
        assert!((b - ols).amax() < 1e-6);
    }

    #[test]
    fn two_variable_fit_matches_grid_search() {
        let d = gaussian(40, &[1.2, -0.8], 1.0, 9);
        let omega = 1.0;
        let b = constrained_lasso(&d, omega).unwrap();
        let rss = |b0: f64, b1: f64| {
            let beta = DVector::from_vec(vec![b0, b1]);
            (d.y() - d.x() * beta).norm_squared()
        };
        // The constraint binds here, so the optimum is on the boundary;
        // search the whole ball anyway (boundary in fine steps, interior
        // on a coarser lattice).
        let step = 1e-3;
        let mut best = f64::INFINITY;
        let steps = (4.0 * omega / step) as usize;
        for k in 0..=steps {
            let t = k as f64 * step;
            let (b0, b1) = match t {
                t if t <= omega => (omega - t, t),
                t if t <= 2.0 * omega => (omega - t, 2.0 * omega - t),
                t if t <= 3.0 * omega => (t - 3.0 * omega, 2.0 * omega - t),
                t => (t - 3.0 * omega, t - 4.0 * omega),
            };
            best = best.min(rss(b0, b1));
        }
        let coarse = 0.01;
        let m = (omega / coarse) as i64;
        for i in -m..=m {
            for j in -m..=m {
                let (b0, b1) = (i as f64 * coarse, j as f64 * coarse);
                if b0.abs() + b1.abs() <= omega {
                    best = best.min(rss(b0, b1));
                }
            }
        }
        let ours = rss(b[0], b[1]);
        assert!(b.lp_norm(1) <= omega + 1e-9);
        // The grid can only do worse than the true optimum.
        assert!(ours <= best + 1e-5, "{ours} vs {best}");
        assert!(best - ours < 1e-2, "{ours} vs {best}");
    }

    #[test]
    fn grid_of_two_picks_better_endpoint() {
        let train = gaussian(60, &[1.0, 0.0, 0.5], 1.0, 10);
        let validate = gaussian(60, &[1.0, 0.0, 0.5], 1.0, 11);
        let sel = cv_radius_select(&train, &validate, 5.0, 2).unwrap();
        assert_eq!(sel.fits.len(), 2);
        let want = if sel.fits[1].heldout_mse < sel.fits[0].heldout_mse { 1 } else { 0 };
        assert_eq!(sel.chosen, want);
        assert!(cv_radius_select(&train, &validate, 5.0, 1).is_err());
    }

    #[test]
    fn pure_noise_keeps_small_norm() {
        let train = gaussian(200, &[0.0; 5], 1.0, 12);
        let validate = gaussian(200, &[0.0; 5], 1.0, 13);
        let sel = cv_radius_select(&train, &validate, 3.0, 31).unwrap();
        let chosen = sel.chosen_fit();
        let var_y = {
            let y = validate.y();
            let mean = y.mean();
            y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64
        };
        assert!(chosen.beta.lp_norm(1) < 1.0);
        assert!(chosen.heldout_mse <= 1.1 * var_y);
    }

    #[test]
    fn signal_captured_below_largest_radius() {
        let beta = [1.0, 0.5, 0.0, 0.0, 0.0, 0.0];
        let train = gaussian(400, &beta, 1.0, 14);
        let validate = gaussian(400, &beta, 1.0, 15);
        let sel = cv_radius_select(&train, &validate, 20.0, 41).unwrap();
        // Exhaustive oracle over the same grid.
        let oracle = sel
            .fits
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.heldout_mse.total_cmp(&b.1.heldout_mse).then(a.0.cmp(&b.0)))
            .unwrap()
            .0;
        assert_eq!(sel.chosen, oracle);
        assert!(sel.chosen_fit().radius < 5.0);
        assert!((sel.chosen_fit().heldout_mse - 1.0).abs() < 0.2);
    }

    #[test]
    fn training_risk_decreases_with_radius() {
        let train = gaussian(80, &[1.0, -1.0, 0.5, 0.0, 0.0], 1.0, 16);
        let validate = gaussian(80, &[1.0, -1.0, 0.5, 0.0, 0.0], 1.0, 17);
        let sel = cv_radius_select(&train, &validate, 4.0, 25).unwrap();
        let empirical = RiskModel::empirical(&train);
        let risks: Vec<f64> = sel
            .fits
            .iter()
            .map(|f| predictive_risk(&f.beta, &empirical).unwrap())
            .collect();
        for w in risks.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{risks:?}");
        }
    }

    #[test]
    fn gap_properties() {
        let model = SimModel::new(ModelKind::B, 100, 12).with_delta(0.1);
        let risk = RiskModel::population(&model).unwrap();
        let path: Vec<DVector<f64>> = (0..5).map(|k| model.beta() * (k as f64 / 4.0)).collect();
        // The truth is the risk minimizer along the path.
        assert_eq!(persistence_gap(&path[4], &path, &risk).unwrap(), 0.0);
        let gap = persistence_gap(&path[1], &path, &risk).unwrap();
        // Sigma = I: R(b) = sigma^2 + |b - beta|^2.
        let closed = (&path[1] - model.beta()).norm_squared();
        assert!((gap - closed).abs() < 1e-8);
        // A dominated extra point leaves the minimum alone.
        let mut extended = path.clone();
        extended.push(model.beta() * 3.0);
        assert_eq!(persistence_gap(&path[1], &extended, &risk).unwrap(), gap);
    }

    #[test]
    fn noiseless_gap_vanishes() {
        let cfg = PersistenceConfig {
            sigma: 0.0,
            sample_sizes: vec![100, 400],
            replicates: 3,
            ..PersistenceConfig::default()
        };
        for row in persistence_trend(&cfg).unwrap() {
            assert!(row.max_gap <= 1e-6, "{row:?}");
        }
    }

    #[test]
    fn trend_is_deterministic() {
        let cfg = PersistenceConfig {
            sample_sizes: vec![100],
            replicates: 4,
            grid: 10,
            ..PersistenceConfig::default()
        };
        assert_eq!(persistence_trend(&cfg).unwrap(), persistence_trend(&cfg).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn constrained_fit_is_feasible(seed in 0u64..1000, omega in 0.0f64..4.0) {
            let d = gaussian(30, &[1.0, -2.0, 0.5, 0.0], 1.0, seed);
            let b = constrained_lasso(&d, omega).unwrap();
            prop_assert!(b.lp_norm(1) <= omega + 1e-6);
        }
    }
}
