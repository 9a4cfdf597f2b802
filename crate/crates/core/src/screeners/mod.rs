//! Stage-one screeners. Each produces a [`ScreenPath`]: a sequence of
//! candidate variable sets indexed by a tuning value, every set holding at
//! most `k_n` variables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub mod adaptive;
pub mod lasso;
pub mod marginal;
pub mod stepwise;

pub use adaptive::{adaptive_lasso_fit, AdaptiveDesign};
pub use lasso::{
    lambda_grid, lambda_max, lasso_fit, lasso_path, lasso_path_on_grid, CdSettings,
    LassoSolution, LASSO_GRID_RATIO, LASSO_GRID_SIZE,
};
pub use marginal::{marginal_coefficients, marginal_path, rank_by_magnitude};
pub use stepwise::stepwise_path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Screener {
    Lasso,
    Stepwise,
    Marginal,
}

impl Screener {
    pub const ALL: [Screener; 3] = [Screener::Lasso, Screener::Stepwise, Screener::Marginal];
}

impl fmt::Display for Screener {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Screener::Lasso => "lasso",
            Screener::Stepwise => "stepwise",
            Screener::Marginal => "marginal",
        })
    }
}

impl FromStr for Screener {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(Screener::Lasso),
            "stepwise" | "step" => Ok(Screener::Stepwise),
            "marginal" | "marg" => Ok(Screener::Marginal),
            other => Err(Error::InvalidArgument(format!("unknown screener `{other}`"))),
        }
    }
}

/// One candidate model on a screening path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry {
    /// Tuning value: the lasso penalty, the stepwise step count, or the
    /// marginal threshold.
    pub lambda: f64,
    /// Selected columns, ascending.
    pub selected: Vec<usize>,
    /// Screening coefficients aligned with `selected`.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenPath {
    pub method: Screener,
    pub entries: Vec<PathEntry>,
    pub k_n: usize,
}

impl ScreenPath {
    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    pub fn respects_cap(&self) -> bool {
        self.entries.iter().all(|e| e.selected.len() <= self.k_n)
    }

    /// CSV rows `lambda,size,selected,coefficients` with `;`-joined lists.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["index", "lambda", "size", "selected", "coefficients"])?;
        for (i, e) in self.entries.iter().enumerate() {
            let sel = e
                .selected
                .iter()
                .map(|j| (j + 1).to_string())
                .collect::<Vec<_>>()
                .join(";");
            let coef = e
                .coefficients
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(";");
            wtr.write_record([
                i.to_string(),
                e.lambda.to_string(),
                e.selected.len().to_string(),
                sel,
                coef,
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs `method` on `data` with model-size cap `k_n`.
pub fn screen(data: &Dataset, method: Screener, k_n: usize) -> Result<ScreenPath> {
    match method {
        Screener::Lasso => lasso_path(data, k_n, LASSO_GRID_SIZE),
        Screener::Stepwise => stepwise_path(data, k_n),
        Screener::Marginal => marginal_path(data, k_n),
    }
}
