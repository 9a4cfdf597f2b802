//! End-to-end procedures: screen and clean under the three split schemes,
//! and the two-stage adaptive lasso used as a competitor.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cleaner::{clean, CleanResult, Threshold};
use crate::data::Dataset;
use crate::error::{Error, Result, Stage, StageExt};
use crate::normal::CriticalKind;
use crate::ols::ols_fit;
use crate::screeners::adaptive::AdaptiveDesign;
use crate::screeners::lasso::{lambda_grid, lambda_max, lasso_walk, LASSO_GRID_RATIO, LASSO_GRID_SIZE};
use crate::screeners::{lasso_path, screen, ScreenPath, Screener};
use crate::selection::{cv_select, loo_penalized, loo_select_on_path, refit_on_path, CvOutcome, LooMode};
use crate::split::{split, SplitMode, SplitPlan};

/// How the sample is divided among the three stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitScheme {
    /// Screen on the first third, choose the model on the second, clean on
    /// the third with `z_{alpha/(2m)}`.
    TriSplit,
    /// Screen on the first half; choose the model and clean on the second
    /// half with the conservative `ln(ln n) sqrt(2 k ln 2p) / alpha`.
    TwoSplitConservative,
    /// Screen and choose by leave-one-out on the first half, clean on the
    /// second with `z_{alpha/(2m)}`.
    TwoSplitLoo,
}

impl SplitScheme {
    pub const ALL: [SplitScheme; 3] = [
        SplitScheme::TriSplit,
        SplitScheme::TwoSplitConservative,
        SplitScheme::TwoSplitLoo,
    ];

    pub fn split_mode(self) -> SplitMode {
        match self {
            SplitScheme::TriSplit => SplitMode::TriSplit,
            SplitScheme::TwoSplitConservative | SplitScheme::TwoSplitLoo => SplitMode::TwoSplit,
        }
    }

    pub fn default_critical(self) -> CriticalKind {
        match self {
            SplitScheme::TwoSplitConservative => CriticalKind::TwoSplit,
            SplitScheme::TriSplit | SplitScheme::TwoSplitLoo => CriticalKind::Normal,
        }
    }
}

impl std::fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitScheme::TriSplit => "tri-split",
            SplitScheme::TwoSplitConservative => "two-split-conservative",
            SplitScheme::TwoSplitLoo => "two-split-loo",
        })
    }
}

impl std::str::FromStr for SplitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "tri-split" | "trisplit" | "3" => Ok(SplitScheme::TriSplit),
            "two-split-conservative" | "conservative" => Ok(SplitScheme::TwoSplitConservative),
            "two-split-loo" | "loo" | "2" => Ok(SplitScheme::TwoSplitLoo),
            other => Err(Error::InvalidArgument(format!("unknown split scheme '{other}'"))),
        }
    }
}

/// Rule for the cap `k_n` on the number of screened variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum KRule {
    /// `floor(sqrt(n))`.
    SqrtN,
    /// `floor(a ln n)`.
    ALogN { a: f64 },
}

impl Default for KRule {
    fn default() -> Self {
        KRule::SqrtN
    }
}

impl KRule {
    pub const DEFAULT_A: f64 = 5.0;

    /// The nominal cap for a total sample size of `n`.
    pub fn k(&self, n: usize) -> Result<usize> {
        let k = match *self {
            KRule::SqrtN => (n as f64).sqrt().floor(),
            KRule::ALogN { a } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "k_n constant must be positive, got {a}"
                    )));
                }
                (a * (n as f64).ln()).floor()
            }
        };
        Ok((k as usize).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub screener: Screener,
    pub scheme: SplitScheme,
    pub alpha: f64,
    pub k_rule: KRule,
    pub seed: u64,
    /// Overrides the scheme's default threshold. Pairing the normal
    /// threshold with `TwoSplitConservative` is experimental.
    pub critical: Option<CriticalKind>,
    pub loo_mode: LooMode,
    /// Standardize each split's covariates before use.
    pub standardize: bool,
    pub grid_size: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            screener: Screener::Lasso,
            scheme: SplitScheme::TriSplit,
            alpha: 0.05,
            k_rule: KRule::SqrtN,
            seed: 0,
            critical: None,
            loo_mode: LooMode::Rescreen,
            standardize: true,
            grid_size: LASSO_GRID_SIZE,
        }
    }
}

impl PipelineConfig {
    pub fn new(screener: Screener, scheme: SplitScheme, seed: u64) -> Self {
        PipelineConfig {
            screener,
            scheme,
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.grid_size == 0 {
            return Err(Error::InvalidArgument("grid size must be >= 1".into()));
        }
        Ok(())
    }

    /// Effective cap: the rule's value, limited by `p` and by the smallest
    /// split so that every stage can still fit a model of that size with
    /// at least one residual degree of freedom to spare.
    pub fn effective_k(&self, n_total: usize, p: usize) -> Result<usize> {
        let parts = self.scheme.split_mode().parts();
        let smallest = n_total / parts;
        if smallest < 3 {
            return Err(Error::TooFewRows {
                needed: 3 * parts,
                found: n_total,
            });
        }
        Ok(self.k_rule.k(n_total)?.min(p).min(smallest - 2).max(1))
    }
}

/// Everything a screen-and-clean run produced, kept for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub plan: SplitPlan,
    pub k_n: usize,
    pub path: ScreenPath,
    pub cv: CvOutcome,
    /// Path positions dropped from model choice because their refit was
    /// singular.
    pub dropped: Vec<(usize, String)>,
    pub clean: CleanResult,
}

fn prepare(data: &Dataset, rows: &[usize], standardize: bool, stage: Stage) -> Result<Dataset> {
    let part = data.select_rows(rows);
    if standardize {
        part.standardize().stage(stage)
    } else {
        Ok(part)
    }
}

/// Runs the full procedure. Deterministic given `data` and `cfg`.
pub fn run_screen_and_clean(data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let n = data.n();
    let p = data.p();
    let k_n = cfg.effective_k(n, p)?;
    let plan = split(n, cfg.scheme.split_mode(), cfg.seed).stage(Stage::Split)?;
    debug_assert!(plan.is_partition(n));

    let screen_rows = plan.part(0);
    let d1 = prepare(data, screen_rows, cfg.standardize, Stage::Standardize)?;
    let path = match cfg.screener {
        Screener::Lasso => lasso_path(&d1, k_n, cfg.grid_size),
        other => screen(&d1, other, k_n),
    }
    .stage(Stage::Screen)?;

    let clean_rows = plan.part(plan.parts.len() - 1);
    let d_clean = prepare(data, clean_rows, cfg.standardize, Stage::Standardize)?;

    let (cv, dropped) = match cfg.scheme {
        SplitScheme::TriSplit => {
            let refits = refit_on_path(&d1, &path).stage(Stage::Select)?;
            let d2 = prepare(data, plan.part(1), cfg.standardize, Stage::Standardize)?;
            (cv_select(&refits, &d2).stage(Stage::Select)?, refits.dropped)
        }
        SplitScheme::TwoSplitConservative => {
            let refits = refit_on_path(&d1, &path).stage(Stage::Select)?;
            (cv_select(&refits, &d_clean).stage(Stage::Select)?, refits.dropped)
        }
        SplitScheme::TwoSplitLoo => {
            let cv = loo_select_on_path(&d1, &path, cfg.loo_mode).stage(Stage::Select)?;
            let kept: Vec<usize> = cv.curve.iter().map(|c| c.index).collect();
            let dropped = (0..path.entries.len())
                .filter(|i| !kept.contains(i))
                .map(|i| (i, "singular refit".to_string()))
                .collect();
            (cv, dropped)
        }
    };

    let threshold = match cfg.critical.unwrap_or(cfg.scheme.default_critical()) {
        CriticalKind::Normal => Threshold::Normal,
        CriticalKind::StudentT => Threshold::StudentT,
        CriticalKind::TwoSplit => Threshold::TwoSplit { n, p, k: k_n },
    };
    let fit = ols_fit(&d_clean, &cv.chosen.selected).stage(Stage::Clean)?;
    let result = clean(&fit, cfg.alpha, threshold).stage(Stage::Clean)?;
    Ok(PipelineRun {
        plan,
        k_n,
        path,
        cv,
        dropped,
        clean: result,
    })
}

/// Serializable digest of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub screener: Screener,
    pub scheme: SplitScheme,
    pub alpha: f64,
    pub seed: u64,
    pub k_n: usize,
    pub split_sizes: Vec<usize>,
    pub chosen_index: usize,
    pub chosen_lambda: f64,
    pub cv_loss: f64,
    /// 1-based variable indices.
    pub screened: Vec<usize>,
    pub cleaned: Vec<usize>,
    pub screened_names: Vec<String>,
    pub cleaned_names: Vec<String>,
    pub critical: Option<f64>,
    pub perfect_fit: bool,
    pub dropped_path_entries: Vec<usize>,
}

impl PipelineRun {
    pub fn summary(&self, data: &Dataset, cfg: &PipelineConfig) -> RunSummary {
        let names = |set: &[usize]| set.iter().map(|&j| data.name(j)).collect();
        RunSummary {
            screener: cfg.screener,
            scheme: cfg.scheme,
            alpha: cfg.alpha,
            seed: cfg.seed,
            k_n: self.k_n,
            split_sizes: self.plan.parts.iter().map(Vec::len).collect(),
            chosen_index: self.cv.chosen.index,
            chosen_lambda: self.cv.chosen.lambda,
            cv_loss: self.cv.chosen.l_hat,
            screened: self.clean.s_hat.iter().map(|j| j + 1).collect(),
            cleaned: self.clean.d_hat.iter().map(|j| j + 1).collect(),
            screened_names: names(&self.clean.s_hat),
            cleaned_names: names(&self.clean.d_hat),
            critical: self.clean.critical,
            perfect_fit: self.clean.perfect_fit,
            dropped_path_entries: self.dropped.iter().map(|(i, _)| *i).collect(),
        }
    }

    /// Writes `clean_table.csv` and `summary.json` into `dir`, plus
    /// `screen_path.csv` and `cv_curve.csv` when `intermediates` is set.
    /// Each CSV starts with `header` as a `#` comment line when given.
    pub fn write_bundle(
        &self,
        dir: &Path,
        data: &Dataset,
        cfg: &PipelineConfig,
        header: Option<&str>,
        intermediates: bool,
    ) -> Result<()> {
        fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<fs::File> {
            use std::io::Write;
            let mut f = fs::File::create(dir.join(name))?;
            if let Some(h) = header {
                writeln!(f, "# {h}")?;
            }
            Ok(f)
        };
        self.clean.write_csv(open("clean_table.csv")?, |j| data.name(j))?;
        if intermediates {
            self.path.write_csv(open("screen_path.csv")?)?;
            self.cv.write_csv(open("cv_curve.csv")?)?;
        }
        let json = serde_json::to_string_pretty(&self.summary(data, cfg))
            .map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(dir.join("summary.json"), json + "\n")?;
        Ok(())
    }
}

impl CvOutcome {
    /// Rows of `index,lambda,size,l_hat,selected` (variables 1-based).
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "lambda", "size", "l_hat", "selected", "chosen"])?;
        for c in &self.curve {
            let sel: Vec<String> = c.selected.iter().map(|j| (j + 1).to_string()).collect();
            w.write_record([
                c.index.to_string(),
                c.lambda.to_string(),
                c.selected.len().to_string(),
                c.l_hat.to_string(),
                sel.join(";"),
                (c.index == self.chosen.index).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Settings for the two-stage adaptive lasso competitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorConfig {
    pub seed: u64,
    pub grid_size: usize,
    pub standardize: bool,
}

impl CompetitorConfig {
    pub fn new(seed: u64) -> Self {
        CompetitorConfig {
            seed,
            grid_size: LASSO_GRID_SIZE,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetitorRun {
    pub plan: SplitPlan,
    /// Stage-one lasso coefficients at the leave-one-out choice of lambda.
    pub pilot: DVector<f64>,
    pub stage1_lambda: f64,
    /// `None` when the pilot is empty and stage two is skipped.
    pub stage2_lambda: Option<f64>,
    /// Variables with a nonzero stage-two coefficient, ascending.
    pub selected: Vec<usize>,
}

/// Leave-one-out tuned lasso on `x, y`: returns the chosen lambda and the
/// full-data solution there. The grid is cut where the full-data active set
/// first exceeds `n - 2`, beyond which leave-one-out fits interpolate.
fn loo_tuned_lasso(
    x: &nalgebra::DMatrix<f64>,
    y: &DVector<f64>,
    grid_size: usize,
) -> Result<(f64, crate::screeners::LassoSolution)> {
    let n = x.nrows();
    let grid = lambda_grid(lambda_max(x, y), grid_size, LASSO_GRID_RATIO);
    let full = lasso_walk(x, y, &grid, Some(n.saturating_sub(2).max(1)))?;
    if full.is_empty() {
        return Err(Error::EmptyPath);
    }
    let usable = &grid[..full.len()];
    let loo = loo_penalized(x, y, usable)?;
    Ok((usable[loo.best], full[loo.best].clone()))
}

/// Stage one: leave-one-out lasso on the first half gives a pilot. Stage
/// two: adaptive lasso with weights `1/|pilot_j|` on the second half, its
/// lambda again chosen by leave-one-out. Returns the stage-two support.
pub fn run_adaptive_lasso(data: &Dataset, cfg: &CompetitorConfig) -> Result<CompetitorRun> {
    if data.n() < 8 {
        return Err(Error::TooFewRows {
            needed: 8,
            found: data.n(),
        });
    }
    let plan = split(data.n(), SplitMode::TwoSplit, cfg.seed).stage(Stage::Split)?;
    let d1 = prepare(data, plan.part(0), cfg.standardize, Stage::Standardize)?;
    let (stage1_lambda, sol1) = loo_tuned_lasso(d1.x(), d1.y(), cfg.grid_size).stage(Stage::Screen)?;
    let pilot = sol1.beta;
    if pilot.iter().all(|b| *b == 0.0) {
        return Ok(CompetitorRun {
            plan,
            pilot,
            stage1_lambda,
            stage2_lambda: None,
            selected: Vec::new(),
        });
    }
    let d2 = prepare(data, plan.part(1), cfg.standardize, Stage::Standardize)?;
    let design = AdaptiveDesign::new(d2.x(), pilot.as_slice()).stage(Stage::Clean)?;
    let (stage2_lambda, sol2) = loo_tuned_lasso(&design.x, d2.y(), cfg.grid_size).stage(Stage::Clean)?;
    let selected = design.to_original(sol2, data.p()).active;
    Ok(CompetitorRun {
        plan,
        pilot,
        stage1_lambda,
        stage2_lambda: Some(stage2_lambda),
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use nalgebra::DMatrix;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, beta: &[f64], noise: f64, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let mut b = DVector::zeros(p);
        b.as_mut_slice()[..beta.len()].copy_from_slice(beta);
        let e = DVector::from_fn(n, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            noise * z
        });
        Dataset::new(&x * b + e, x).unwrap()
    }

    #[test]
    fn k_rules() {
        assert_eq!(KRule::SqrtN.k(100).unwrap(), 10);
        assert_eq!(KRule::SqrtN.k(99).unwrap(), 9);
        assert_eq!(KRule::ALogN { a: 5.0 }.k(100).unwrap(), 23);
        assert!(KRule::ALogN { a: -1.0 }.k(100).is_err());
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.effective_k(100, 100).unwrap(), 10);
        assert_eq!(cfg.effective_k(100, 4).unwrap(), 4);
        assert_eq!(cfg.effective_k(30, 100).unwrap(), 5);
        assert!(cfg.effective_k(8, 100).is_err());
    }

    #[test]
    fn scheme_parsing_round_trips() {
        for s in SplitScheme::ALL {
            assert_eq!(s.to_string().parse::<SplitScheme>().unwrap(), s);
        }
        assert!("four".parse::<SplitScheme>().is_err());
    }

    #[test]
    fn dominant_signal_is_the_only_survivor() {
        let d = gaussian(300, 10, &[10.0], 0.0, 1);
        // A tiny amount of noise keeps the cleaning fit away from a perfect fit.
        let noise = gaussian(300, 1, &[], 1e-3, 2).y().clone();
        let d = d.with_response(d.y() + noise).unwrap();
        for s in Screener::ALL {
            for scheme in SplitScheme::ALL {
                // Raw columns: centering X inside a split without an
                // intercept would turn 10 * mean(x1) into residual noise.
                let mut cfg = PipelineConfig::new(s, scheme, 7);
                cfg.standardize = false;
                let run = run_screen_and_clean(&d, &cfg).unwrap();
                assert_eq!(run.clean.d_hat, vec![0], "{s} {scheme}");
            }
        }
    }

    #[test]
    fn deterministic_and_stage_isolated() {
        let d = gaussian(90, 30, &[1.0, -1.0, 0.5], 1.0, 3);
        for scheme in SplitScheme::ALL {
            let cfg = PipelineConfig::new(Screener::Lasso, scheme, 11);
            let a = run_screen_and_clean(&d, &cfg).unwrap();
            let b = run_screen_and_clean(&d, &cfg).unwrap();
            assert_eq!(a, b);
            assert!(a.plan.is_partition(90));
            let clean_rows = a.plan.parts.last().unwrap();
            for part in &a.plan.parts[..a.plan.parts.len() - 1] {
                assert!(part.iter().all(|i| !clean_rows.contains(i)));
            }
            assert!(a.clean.d_hat.iter().all(|j| a.clean.s_hat.contains(j)));
        }
    }

    #[test]
    fn smaller_alpha_never_adds_variables() {
        let d = gaussian(120, 20, &[0.6, -0.4, 0.3], 1.0, 4);
        for s in Screener::ALL {
            let mut cfg = PipelineConfig::new(s, SplitScheme::TriSplit, 5);
            cfg.alpha = 0.2;
            let loose = run_screen_and_clean(&d, &cfg).unwrap();
            cfg.alpha = 0.01;
            let tight = run_screen_and_clean(&d, &cfg).unwrap();
            assert!(tight.clean.d_hat.iter().all(|j| loose.clean.d_hat.contains(j)));
        }
    }

    #[test]
    fn errors_carry_stage() {
        let mut x = DMatrix::from_fn(30, 3, |i, j| (i * (j + 1)) as f64);
        x.column_mut(2).fill(1.0);
        let d = Dataset::new(DVector::from_element(30, 1.0), x).unwrap();
        let err = run_screen_and_clean(&d, &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: Stage::Standardize, .. }));
        assert!(matches!(err.root(), Error::ConstantColumn(2)));
        assert!(err.is_input_error());

        let mut cfg = PipelineConfig::default();
        cfg.alpha = 1.5;
        assert!(run_screen_and_clean(&gaussian(30, 3, &[], 1.0, 1), &cfg).is_err());
    }

    #[test]
    fn bundle_files() {
        let d = gaussian(60, 8, &[1.0], 1.0, 5);
        let cfg = PipelineConfig::default();
        let run = run_screen_and_clean(&d, &cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("screenclean-bundle-{}", std::process::id()));
        run.write_bundle(&dir, &d, &cfg, Some("test header"), true).unwrap();
        for f in ["clean_table.csv", "screen_path.csv", "cv_curve.csv", "summary.json"] {
            assert!(dir.join(f).exists(), "{f}");
        }
        let table = fs::read_to_string(dir.join("clean_table.csv")).unwrap();
        assert!(table.starts_with("# test header\nvariable,"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn competitor_support_within_pilot() {
        let d = gaussian(100, 20, &[1.5, -1.0, 0.8], 1.0, 6);
        let run = run_adaptive_lasso(&d, &CompetitorConfig::new(3)).unwrap();
        for j in &run.selected {
            assert!(run.pilot[*j] != 0.0);
        }
    }

    #[test]
    fn competitor_with_no_signal_in_first_half() {
        let d = gaussian(40, 5, &[], 1.0, 7);
        let zero = d.with_response(DVector::zeros(40)).unwrap();
        let run = run_adaptive_lasso(&zero, &CompetitorConfig::new(1)).unwrap();
        assert!(run.selected.is_empty());
        assert_eq!(run.stage2_lambda, None);
    }

    #[test]
    fn competitor_recovers_strong_orthogonal_pair() {
        // Independent columns are nearly orthogonal at this n; with tiny noise
        // both signals dwarf any leave-one-out choice of threshold while the
        // noise columns carry pilot weights in the hundreds.
        let d = gaussian(400, 6, &[3.0, -3.0], 0.05, 8);
        let run = run_adaptive_lasso(&d, &CompetitorConfig::new(2)).unwrap();
        assert_eq!(run.selected, vec![0, 1]);
    }
}
