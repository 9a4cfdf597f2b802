//! Simulation models A–D, the size / power / false-positive metrics, and the
//! Monte Carlo runner behind the two result tables.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cleaner::covers;
use crate::data::{Dataset, TrueModel};
use crate::error::{Error, Result};
use crate::pipeline::{run_adaptive_lasso, run_screen_and_clean, CompetitorConfig, KRule, PipelineConfig, SplitScheme};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::screeners::Screener;
use crate::selection::LooMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// Null model, `beta = 0`, independent covariates.
    A,
    /// Triangle coefficients `beta_j = delta (10 - j)`, independent covariates.
    B,
    /// Triangle coefficients with AR(1) covariates.
    C,
    /// Two large opposite coefficients among nearly collinear covariates.
    D,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::A, ModelKind::B, ModelKind::C, ModelKind::D];

    fn index(self) -> u64 {
        self as u64
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ModelKind::A),
            "B" => Ok(ModelKind::B),
            "C" => Ok(ModelKind::C),
            "D" => Ok(ModelKind::D),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimModel {
    pub kind: ModelKind,
    pub n: usize,
    pub p: usize,
    /// Slope of the triangle coefficients (B, C).
    pub delta: f64,
    /// AR coefficient (C) or collinearity coefficient (D).
    pub rho: f64,
    /// Innovation scale of the collinear columns (D).
    pub tau: f64,
    pub sigma: f64,
}

impl SimModel {
    /// Standard parameters: `delta = 0.5` for `p <= 100` and `1.5` above,
    /// `rho = 0.5` for C and `0.95` for D, `tau = 0.01`, `sigma = 1`.
    pub fn new(kind: ModelKind, n: usize, p: usize) -> Self {
        SimModel {
            kind,
            n,
            p,
            delta: if p > 100 { 1.5 } else { 0.5 },
            rho: if kind == ModelKind::D { 0.95 } else { 0.5 },
            tau: 0.01,
            sigma: 1.0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("n must be >= 2, got {}", self.n)));
        }
        let min_p = match self.kind {
            ModelKind::A => 1,
            ModelKind::B | ModelKind::C => 9,
            ModelKind::D => 4,
        };
        if self.p < min_p {
            return Err(Error::InvalidArgument(format!(
                "model {} needs p >= {min_p}, got {}",
                self.kind, self.p
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite())
            || !self.delta.is_finite()
            || !(self.rho.abs() <= 1.0)
            || !(self.tau >= 0.0 && self.tau.is_finite())
        {
            return Err(Error::InvalidArgument(format!("invalid model parameters {self:?}")));
        }
        Ok(())
    }

    pub fn beta(&self) -> DVector<f64> {
        let mut beta = DVector::zeros(self.p);
        match self.kind {
            ModelKind::A => {}
            ModelKind::B | ModelKind::C => {
                for j in 0..self.p.min(10) {
                    beta[j] = self.delta * (9 - j) as f64;
                }
            }
            ModelKind::D => {
                beta[0] = 10.0;
                beta[1] = -10.0;
            }
        }
        beta
    }

    pub fn truth(&self) -> Result<TrueModel> {
        TrueModel::new(self.beta(), self.sigma)
    }

    /// Covariates as a linear map of independent standard normals,
    /// `X = A z`; `A` is `p x (p + extra)`.
    fn loading(&self) -> DMatrix<f64> {
        let p = self.p;
        match self.kind {
            ModelKind::A | ModelKind::B => DMatrix::identity(p, p),
            ModelKind::C => {
                let mut a = DMatrix::zeros(p, p);
                a[(0, 0)] = 1.0;
                let innov = (1.0 - self.rho * self.rho).sqrt();
                for j in 1..p {
                    let prev = a.row(j - 1).clone_owned();
                    a.set_row(j, &(prev * self.rho));
                    a[(j, j)] = innov;
                }
                a
            }
            ModelKind::D => {
                let mut a = DMatrix::zeros(p, p + 3);
                for j in 0..p {
                    if j == 0 || j >= 4 {
                        a[(j, j)] = 1.0;
                    }
                }
                let row0 = a.row(0).clone_owned();
                a.set_row(1, &(&row0 * self.rho));
                a[(1, p)] = self.tau;
                a.set_row(2, &(&row0 * self.rho));
                a[(2, p + 1)] = self.tau;
                let row1 = a.row(1).clone_owned();
                a.set_row(3, &(row1 * self.rho));
                a[(3, p + 2)] = self.tau;
                a
            }
        }
    }

    /// Population covariance of the covariates.
    pub fn covariance(&self) -> DMatrix<f64> {
        let a = self.loading();
        &a * a.transpose()
    }

    /// Population second-moment matrix of `(Y, X_1, ..., X_p)`.
    pub fn gamma(&self) -> DMatrix<f64> {
        let sigma = self.covariance();
        let beta = self.beta();
        let sb = &sigma * &beta;
        let p = self.p;
        let mut g = DMatrix::zeros(p + 1, p + 1);
        g[(0, 0)] = beta.dot(&sb) + self.sigma * self.sigma;
        for j in 0..p {
            g[(0, j + 1)] = sb[j];
            g[(j + 1, 0)] = sb[j];
        }
        g.view_mut((1, 1), (p, p)).copy_from(&sigma);
        g
    }

    /// Population marginal regression coefficients of `Y` on each
    /// standardized covariate, `cov(X_j, Y) / sd(X_j)`.
    pub fn population_marginal(&self) -> DVector<f64> {
        let sigma = self.covariance();
        let sb = &sigma * self.beta();
        DVector::from_fn(self.p, |j, _| sb[j] / sigma[(j, j)].sqrt())
    }

    /// One draw of `n` rows.
    pub fn generate(&self, seed: u64) -> Result<SimDraw> {
        self.validate()?;
        let mut rng = rng_from_seed(seed);
        let x = self.draw_covariates(&mut rng);
        let beta = self.beta();
        let noise = DVector::from_fn(self.n, |_, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            self.sigma * e
        });
        let y = &x * &beta + noise;
        let data = Dataset::new(y, x)?;
        Ok(SimDraw {
            truth: TrueModel::new(beta, self.sigma)?,
            data,
        })
    }

    fn draw_covariates(&self, rng: &mut Rng) -> DMatrix<f64> {
        let (n, p) = (self.n, self.p);
        let mut normal = || -> f64 { StandardNormal.sample(&mut *rng) };
        // Column-major fill, one column at a time.
        let mut x = DMatrix::from_fn(n, p, |_, _| 0.0);
        match self.kind {
            ModelKind::A | ModelKind::B => {
                x.iter_mut().for_each(|v| *v = normal());
            }
            ModelKind::C => {
                let innov = (1.0 - self.rho * self.rho).sqrt();
                for i in 0..n {
                    x[(i, 0)] = normal();
                }
                for j in 1..p {
                    for i in 0..n {
                        x[(i, j)] = self.rho * x[(i, j - 1)] + innov * normal();
                    }
                }
            }
            ModelKind::D => {
                for j in (0..p).filter(|&j| j == 0 || j >= 4) {
                    for i in 0..n {
                        x[(i, j)] = normal();
                    }
                }
                for (target, source) in [(1, 0), (2, 0), (3, 1)] {
                    for i in 0..n {
                        x[(i, target)] = self.rho * x[(i, source)] + self.tau * normal();
                    }
                }
            }
        }
        x
    }

    fn seed_key(&self) -> u64 {
        (self.kind.index() << 56) ^ ((self.n as u64) << 28) ^ self.p as u64
    }

    /// Seed of replicate `r` for this model: depends only on the master
    /// seed, the model and `r`, so every method sees the same datasets.
    pub fn replicate_seed(&self, master: u64, r: usize) -> u64 {
        derive_seed(derive_seed(master, self.seed_key()), r as u64)
    }
}

impl std::fmt::Display for SimModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} n={} p={}", self.kind, self.n, self.p)
    }
}

/// A simulated dataset with its generating truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDraw {
    /// Unstandardized draw.
    pub data: Dataset,
    pub truth: TrueModel,
}

impl SimDraw {
    pub fn standardized(&self) -> Result<Dataset> {
        self.data.standardize()
    }
}

/// Selected sets from one replicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    /// Final set.
    pub d_hat: Vec<usize>,
    /// Screened superset, when the method has one.
    pub s_hat: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Fraction of replicates with at least one false positive.
    pub size: f64,
    pub size_se: f64,
    /// Average over true variables of the fraction of replicates selecting it.
    pub power: f64,
    pub power_se: f64,
    /// Mean fraction of null variables selected.
    pub fpr: f64,
    pub fpr_se: f64,
    /// Fraction with `D_hat ⊆ D ⊆ S_hat`, when screened sets are available.
    pub coverage: Option<f64>,
    pub coverage_se: Option<f64>,
    pub replicates: usize,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Size, average power, false-positive rate and sandwich coverage with
/// Monte Carlo standard errors.
pub fn metrics(outcomes: &[Selection], truth: &TrueModel) -> Result<Metrics> {
    if outcomes.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one replicate".into()));
    }
    let s = truth.s();
    let nulls = truth.p() - s;
    let mut any_fp = Vec::with_capacity(outcomes.len());
    let mut power = Vec::with_capacity(outcomes.len());
    let mut fpr = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let fp = o.d_hat.iter().filter(|&&j| !truth.contains(j)).count();
        let tp = o.d_hat.len() - fp;
        any_fp.push(if fp > 0 { 1.0 } else { 0.0 });
        power.push(if s > 0 { tp as f64 / s as f64 } else { 0.0 });
        fpr.push(if nulls > 0 { fp as f64 / nulls as f64 } else { 0.0 });
    }
    let (size, size_se) = mean_se(&any_fp);
    let (power, power_se) = mean_se(&power);
    let (fpr, fpr_se) = mean_se(&fpr);
    let (coverage, coverage_se) = if outcomes.iter().all(|o| o.s_hat.is_some()) {
        let hits: Vec<f64> = outcomes
            .iter()
            .map(|o| {
                let upper = o.s_hat.as_deref().unwrap_or_default();
                if covers(&o.d_hat, upper, truth) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let (c, se) = mean_se(&hits);
        (Some(c), Some(se))
    } else {
        (None, None)
    };
    Ok(Metrics {
        size,
        size_se,
        power,
        power_se,
        fpr,
        fpr_se,
        coverage,
        coverage_se,
        replicates: outcomes.len(),
    })
}

/// A selection procedure evaluated in the tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    ScreenClean { screener: Screener, scheme: SplitScheme },
    AdaptiveLasso,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::ScreenClean { screener, scheme } => write!(f, "{screener}/{scheme}"),
            Method::AdaptiveLasso => f.write_str("adaptive-lasso"),
        }
    }
}

/// Knobs shared by every cell of a table run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub replicates: usize,
    pub master_seed: u64,
    pub alpha: f64,
    pub k_rule: KRule,
    pub loo_mode: LooMode,
}

impl SimSettings {
    pub fn new(replicates: usize, master_seed: u64) -> Self {
        SimSettings {
            replicates,
            master_seed,
            alpha: 0.05,
            k_rule: KRule::SqrtN,
            loo_mode: LooMode::Rescreen,
        }
    }
}

/// Runs `method` on one dataset. `seed` drives the random split.
pub fn run_method(method: Method, data: &Dataset, seed: u64, settings: &SimSettings) -> Result<Selection> {
    match method {
        Method::ScreenClean { screener, scheme } => {
            let cfg = PipelineConfig {
                alpha: settings.alpha,
                k_rule: settings.k_rule,
                loo_mode: settings.loo_mode,
                ..PipelineConfig::new(screener, scheme, seed)
            };
            let run = run_screen_and_clean(data, &cfg)?;
            Ok(Selection {
                d_hat: run.clean.d_hat,
                s_hat: Some(run.clean.s_hat),
            })
        }
        Method::AdaptiveLasso => {
            let run = run_adaptive_lasso(data, &CompetitorConfig::new(seed))?;
            Ok(Selection {
                d_hat: run.selected,
                s_hat: None,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: SimModel,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: Cell,
    /// `None` when every replicate failed.
    pub metrics: Option<Metrics>,
    pub failures: usize,
    pub first_failure: Option<String>,
    pub master_seed: u64,
}

/// Runs every cell for `settings.replicates` replicates. Cells sharing a
/// model share datasets; replicates run in parallel. Failed replicates are
/// counted and excluded from the rates.
pub fn run_table(cells: &[Cell], settings: &SimSettings) -> Result<Vec<CellReport>> {
    if settings.replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    for c in cells {
        c.model.validate()?;
    }
    let mut models: Vec<SimModel> = Vec::new();
    for c in cells {
        if !models.contains(&c.model) {
            models.push(c.model);
        }
    }
    let mut outcomes: Vec<Vec<Result<Selection>>> = (0..cells.len()).map(|_| Vec::new()).collect();
    for model in &models {
        let members: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].model == *model).collect();
        let per_rep: Vec<Vec<Result<Selection>>> = (0..settings.replicates)
            .into_par_iter()
            .map(|r| {
                let seed = model.replicate_seed(settings.master_seed, r);
                match model.generate(derive_seed(seed, 0)) {
                    Ok(draw) => members
                        .iter()
                        .map(|&i| run_method(cells[i].method, &draw.data, derive_seed(seed, 1), settings))
                        .collect(),
                    Err(e) => {
                        let msg = e.to_string();
                        members.iter().map(|_| Err(Error::InvalidArgument(msg.clone()))).collect()
                    }
                }
            })
            .collect();
        for rep in per_rep {
            for (k, res) in rep.into_iter().enumerate() {
                outcomes[members[k]].push(res);
            }
        }
    }
    cells
        .iter()
        .zip(outcomes)
        .map(|(cell, results)| {
            let truth = cell.model.truth()?;
            let mut ok = Vec::new();
            let mut failures = 0;
            let mut first_failure = None;
            for r in results {
                match r {
                    Ok(sel) => ok.push(sel),
                    Err(e) => {
                        failures += 1;
                        first_failure.get_or_insert_with(|| e.to_string());
                    }
                }
            }
            let metrics = if ok.is_empty() {
                None
            } else {
                Some(metrics(&ok, &truth)?)
            };
            Ok(CellReport {
                cell: *cell,
                metrics,
                failures,
                first_failure,
                master_seed: settings.master_seed,
            })
        })
        .collect()
}

/// The eight `(n, p, model)` rows shared by both tables.
pub fn table_models() -> Vec<SimModel> {
    let mut rows = Vec::new();
    for (p, d_n) in [(100, 100), (1000, 1000)] {
        for kind in [ModelKind::A, ModelKind::B, ModelKind::C] {
            rows.push(SimModel::new(kind, 100, p));
        }
        rows.push(SimModel::new(ModelKind::D, d_n, 10));
    }
    rows
}

/// Cells of the screen-and-clean table: both split schemes, all three
/// screeners, every row model.
pub fn table1_cells(models: &[SimModel]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for scheme in [SplitScheme::TwoSplitLoo, SplitScheme::TriSplit] {
        for model in models {
            for screener in Screener::ALL {
                cells.push(Cell {
                    model: *model,
                    method: Method::ScreenClean { screener, scheme },
                });
            }
        }
    }
    cells
}

pub fn table2_cells(models: &[SimModel]) -> Vec<Cell> {
    models
        .iter()
        .map(|m| Cell {
            model: *m,
            method: Method::AdaptiveLasso,
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Wide layout: one line per `(splits, n, p, model)` with size and power
/// per screener, followed by standard errors, FPR, coverage and failures.
pub fn write_table1_csv<W: Write>(reports: &[CellReport], mut out: W) -> Result<()> {
    let names = ["lasso", "step", "marg"];
    let mut header = vec!["splits", "n", "p", "model", "replicates"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for stat in ["size", "power", "size_se", "power_se", "fpr", "coverage", "failures"] {
        for m in names {
            header.push(format!("{stat}_{m}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    let mut keys: Vec<(SplitScheme, SimModel)> = Vec::new();
    for r in reports {
        if let Method::ScreenClean { scheme, .. } = r.cell.method {
            if !keys.contains(&(scheme, r.cell.model)) {
                keys.push((scheme, r.cell.model));
            }
        }
    }
    for (scheme, model) in keys {
        let find = |s: Screener| {
            reports.iter().find(|r| {
                r.cell.model == model && r.cell.method == Method::ScreenClean { screener: s, scheme }
            })
        };
        let cols: Vec<Option<&CellReport>> = Screener::ALL.iter().map(|&s| find(s)).collect();
        let reps = cols
            .iter()
            .flatten()
            .filter_map(|r| r.metrics.map(|m| m.replicates))
            .max()
            .unwrap_or(0);
        let splits = scheme.split_mode().parts();
        let mut row = vec![
            splits.to_string(),
            model.n.to_string(),
            model.p.to_string(),
            model.kind.to_string(),
            reps.to_string(),
        ];
        let pick = |f: &dyn Fn(&Metrics) -> Option<f64>| -> Vec<String> {
            cols.iter()
                .map(|c| fmt_opt(c.and_then(|r| r.metrics.as_ref()).and_then(f)))
                .collect()
        };
        row.extend(pick(&|m| Some(m.size)));
        row.extend(pick(&|m| Some(m.power)));
        row.extend(pick(&|m| Some(m.size_se)));
        row.extend(pick(&|m| Some(m.power_se)));
        row.extend(pick(&|m| Some(m.fpr)));
        row.extend(pick(&|m| m.coverage));
        row.extend(cols.iter().map(|c| c.map(|r| r.failures.to_string()).unwrap_or_default()));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// One line per `(n, p, model)` for the adaptive lasso competitor.
pub fn write_table2_csv<W: Write>(reports: &[CellReport], mut out: W) -> Result<()> {
    writeln!(
        out,
        "n,p,model,replicates,size,power,fpr,size_se,power_se,fpr_se,failures"
    )?;
    for r in reports.iter().filter(|r| r.cell.method == Method::AdaptiveLasso) {
        let m = &r.cell.model;
        let met = r.metrics.as_ref();
        let f = |g: fn(&Metrics) -> f64| fmt_opt(met.map(g));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            m.n,
            m.p,
            m.kind,
            met.map(|x| x.replicates).unwrap_or(0),
            f(|x| x.size),
            f(|x| x.power),
            f(|x| x.fpr),
            f(|x| x.size_se),
            f(|x| x.power_se),
            f(|x| x.fpr_se),
            r.failures
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sel(d: &[usize], s: Option<&[usize]>) -> Selection {
        Selection {
            d_hat: d.to_vec(),
            s_hat: s.map(<[usize]>::to_vec),
        }
    }

    #[test]
    fn model_a_is_null() {
        let t = SimModel::new(ModelKind::A, 100, 100).truth().unwrap();
        assert_eq!(t.s(), 0);
        assert!(t.beta().iter().all(|b| *b == 0.0));
    }

    #[test]
    fn model_b_triangle() {
        let m = SimModel::new(ModelKind::B, 100, 100);
        let t = m.truth().unwrap();
        let expected: Vec<f64> = (1..=10).map(|j| 0.5 * (10 - j) as f64).collect();
        assert_eq!(&t.beta().as_slice()[..10], expected.as_slice());
        assert_eq!(t.support(), (0..9).collect::<Vec<_>>().as_slice());
        assert_eq!(t.psi(), Some(0.5));
        assert_eq!(SimModel::new(ModelKind::B, 100, 1000).delta, 1.5);
    }

    #[test]
    fn model_d_columns_nearly_collinear() {
        let m = SimModel::new(ModelKind::D, 1000, 10);
        let d = m.generate(1).unwrap().data.standardize().unwrap();
        let r = d.x().column(0).dot(&d.x().column(1)) / 1000.0;
        assert!(r > 0.99, "{r}");
        let sigma = m.covariance();
        let oracle = 0.95 / (0.95f64.powi(2) + 1e-4).sqrt();
        assert!((sigma[(0, 1)] / (sigma[(0, 0)] * sigma[(1, 1)]).sqrt() - oracle).abs() < 1e-12);
    }

    #[test]
    fn covariance_formulas() {
        let c = SimModel::new(ModelKind::C, 10, 12).covariance();
        for j in 0..12 {
            for k in 0..12 {
                let e = 0.5f64.powi((j as i32 - k as i32).abs());
                assert!((c[(j, k)] - e).abs() < 1e-12);
            }
        }
        let (rho, tau) = (0.95, 0.01);
        let d = SimModel::new(ModelKind::D, 10, 10).covariance();
        let v2 = rho * rho + tau * tau;
        assert!((d[(1, 1)] - v2).abs() < 1e-14);
        assert!((d[(1, 2)] - rho * rho).abs() < 1e-14);
        assert!((d[(0, 3)] - rho * rho).abs() < 1e-14);
        assert!((d[(1, 3)] - rho * v2).abs() < 1e-14);
        assert!((d[(3, 3)] - (rho * rho * v2 + tau * tau)).abs() < 1e-14);
        assert_eq!(d[(4, 4)], 1.0);
        assert_eq!(d[(0, 4)], 0.0);
    }

    #[test]
    fn generator_moments_match_population() {
        for kind in [ModelKind::C, ModelKind::D] {
            let m = SimModel::new(kind, 100_000, 10);
            let d = m.generate(5).unwrap().data;
            let sigma = m.covariance();
            let x = d.x();
            for j in 0..10 {
                let col = x.column(j);
                let mean = col.mean();
                assert!(mean.abs() < 0.02, "{kind} mean {j}: {mean}");
                for k in 0..10 {
                    let cov = col.dot(&x.column(k)) / 1e5;
                    assert!((cov - sigma[(j, k)]).abs() < 0.02, "{kind} ({j},{k})");
                }
            }
        }
        let m = SimModel::new(ModelKind::C, 100_000, 10);
        let d = m.generate(6).unwrap().data;
        for j in 0..9 {
            let r = d.x().column(j).dot(&d.x().column(j + 1)) / 1e5;
            assert!((r - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn gamma_matches_sample_moments() {
        let m = SimModel::new(ModelKind::D, 200_000, 10);
        let draw = m.generate(9).unwrap();
        let g = m.gamma();
        let y = draw.data.y();
        assert!((y.norm_squared() / 2e5 / g[(0, 0)] - 1.0).abs() < 0.02);
        for j in 0..4 {
            let c = draw.data.x().column(j).dot(y) / 2e5;
            assert!((c - g[(0, j + 1)]).abs() < 0.03, "{j}: {c} vs {}", g[(0, j + 1)]);
        }
    }

    #[test]
    fn marginal_regression_cannot_separate_model_d() {
        // Exact covariance algebra: every population marginal coefficient
        // of the first four columns is about 0.5 although beta_1 = 10 and
        // beta_2 = -10, and the second true variable ranks only third.
        let mu = SimModel::new(ModelKind::D, 100, 10).population_marginal();
        let expected = [0.5, 0.474 / 0.9026f64.sqrt(), 0.475 / 0.9026f64.sqrt()];
        for (j, e) in expected.iter().enumerate() {
            assert!((mu[j] - e).abs() < 1e-9, "{j}: {}", mu[j]);
        }
        assert!(mu.iter().all(|m| m.abs() <= 0.5 + 1e-12));
        assert!(mu.iter().skip(4).all(|m| *m == 0.0));
        let top2 = &crate::screeners::rank_by_magnitude(mu.as_slice())[..2];
        assert_eq!(top2, &[0, 2]);
    }

    #[test]
    fn metrics_perfect_recovery() {
        let t = SimModel::new(ModelKind::B, 100, 100).truth().unwrap();
        let d: Vec<usize> = (0..9).collect();
        let m = metrics(&vec![sel(&d, Some(&d)); 5], &t).unwrap();
        assert_eq!((m.size, m.power, m.fpr, m.coverage), (0.0, 1.0, 0.0, Some(1.0)));
    }

    #[test]
    fn metrics_single_false_positive() {
        let mut beta = DVector::zeros(100);
        beta[0] = 1.0;
        let t = TrueModel::new(beta, 1.0).unwrap();
        let m = metrics(&[sel(&[0, 50], None)], &t).unwrap();
        assert_eq!(m.size, 1.0);
        assert!((m.fpr - 1.0 / 99.0).abs() < 1e-15);
        assert_eq!(m.coverage, None);
    }

    #[test]
    fn metrics_null_conventions() {
        let t = SimModel::new(ModelKind::A, 100, 100).truth().unwrap();
        let m = metrics(&vec![sel(&[], Some(&[])); 3], &t).unwrap();
        assert_eq!((m.size, m.power), (0.0, 0.0));
        assert!(metrics(&[], &t).is_err());
    }

    #[test]
    fn replicate_seeds_are_shared_across_methods_and_distinct_across_models() {
        let b = SimModel::new(ModelKind::B, 100, 100);
        let c = SimModel::new(ModelKind::C, 100, 100);
        assert_eq!(b.replicate_seed(1, 3), b.replicate_seed(1, 3));
        assert_ne!(b.replicate_seed(1, 3), c.replicate_seed(1, 3));
        assert_ne!(b.replicate_seed(1, 3), b.replicate_seed(1, 4));
    }

    #[test]
    fn table_layouts() {
        let rows = table_models();
        assert_eq!(rows.len(), 8);
        assert_eq!(table1_cells(&rows).len(), 48);
        assert_eq!(table2_cells(&rows).len(), 8);
        assert_eq!(rows[3].n, 100);
        assert_eq!(rows[7].n, 1000);
        assert_eq!(rows[4].delta, 1.5);
    }

    #[test]
    fn small_run_table_writes_csv() {
        let model = SimModel::new(ModelKind::B, 60, 20);
        let mut cells = table1_cells(&[model]);
        cells.extend(table2_cells(&[model]));
        let settings = SimSettings::new(4, 42);
        let reports = run_table(&cells, &settings).unwrap();
        assert_eq!(reports.len(), 7);
        let again = run_table(&cells, &settings).unwrap();
        assert_eq!(reports, again);
        let mut buf = Vec::new();
        write_table1_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("2,60,20,B,4,"));
        let mut buf = Vec::new();
        write_table2_csv(&reports, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn metrics_permutation_invariant_and_fpr_below_size(
            sets in prop::collection::vec(prop::collection::btree_set(0usize..20, 0..6), 1..12),
            rot in 0usize..12,
        ) {
            let mut beta = DVector::zeros(20);
            for j in 0..4 { beta[j] = 1.0; }
            let t = TrueModel::new(beta, 1.0).unwrap();
            let outs: Vec<Selection> = sets.iter().map(|s| {
                let v: Vec<usize> = s.iter().copied().collect();
                sel(&v, Some(&v))
            }).collect();
            let mut rotated = outs.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            let a = metrics(&outs, &t).unwrap();
            let b = metrics(&rotated, &t).unwrap();
            prop_assert!((a.size - b.size).abs() < 1e-12);
            prop_assert!((a.power - b.power).abs() < 1e-12);
            prop_assert!((a.fpr - b.fpr).abs() < 1e-12);
            prop_assert!(a.fpr <= a.size + 1e-12);
            for v in [a.size, a.power, a.fpr, a.coverage.unwrap()] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
