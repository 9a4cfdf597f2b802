//! Stage three: test every screened variable on fresh rows and keep those
//! whose t-statistic clears a multiplicity-corrected threshold.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::TrueModel;
use crate::error::{Error, Result};
use crate::normal::{critical_student_t, critical_trisplit, critical_twosplit};
use crate::ols::OlsFit;

/// Threshold rule for the cleaning step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Threshold {
    /// `z_{alpha/(2m)}` with `m = |S|`.
    Normal,
    /// `t_{df, alpha/(2m)}` using the cleaning fit's residual degrees of
    /// freedom.
    StudentT,
    /// `ln(ln n) sqrt(2 k ln(2p)) / alpha`.
    TwoSplit { n: usize, p: usize, k: usize },
}

impl Threshold {
    /// Critical value for a model of size `m` fitted with `df` residual
    /// degrees of freedom.
    pub fn value(&self, alpha: f64, m: usize, df: usize) -> Result<f64> {
        match *self {
            Threshold::Normal => critical_trisplit(alpha, m),
            Threshold::StudentT => critical_student_t(alpha, m, df),
            Threshold::TwoSplit { n, p, k } => critical_twosplit(n, p, k, alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanResult {
    /// Screened set `S`, ascending.
    pub s_hat: Vec<usize>,
    /// Cleaned set `D = {j in S : |T_j| > c}`, ascending.
    pub d_hat: Vec<usize>,
    /// Least-squares coefficients on the cleaning rows, aligned with `s_hat`.
    pub coefficients: Vec<f64>,
    /// t-statistics aligned with `s_hat`; NaN on a perfect fit.
    pub t_values: Vec<f64>,
    /// `None` when `S` is empty and nothing was tested.
    pub critical: Option<f64>,
    pub alpha: f64,
    pub threshold: Threshold,
    /// Set when the cleaning fit has zero residual variance. Every screened
    /// variable is then retained.
    pub perfect_fit: bool,
}

impl CleanResult {
    /// The confidence sandwich `(lower, upper) = (D, S)`.
    pub fn sandwich(&self) -> (&[usize], &[usize]) {
        (&self.d_hat, &self.s_hat)
    }

    /// Whether `lower ⊆ truth support ⊆ upper`.
    pub fn covers(&self, truth: &TrueModel) -> bool {
        covers(&self.d_hat, &self.s_hat, truth)
    }

    pub fn kept(&self, j: usize) -> bool {
        self.d_hat.binary_search(&j).is_ok()
    }

    /// Rows of `variable,name,coefficient,t,critical,kept` (1-based index).
    pub fn write_csv<W: Write>(&self, writer: W, name: impl Fn(usize) -> String) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["variable", "name", "coefficient", "t", "critical", "kept"])?;
        let critical = self.critical.map(|c| c.to_string()).unwrap_or_default();
        for (k, &j) in self.s_hat.iter().enumerate() {
            w.write_record([
                (j + 1).to_string(),
                name(j),
                self.coefficients[k].to_string(),
                self.t_values[k].to_string(),
                critical.clone(),
                self.kept(j).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `lower ⊆ D ⊆ upper` for the support `D` of `truth`.
pub fn covers(lower: &[usize], upper: &[usize], truth: &TrueModel) -> bool {
    lower.iter().all(|&j| truth.contains(j)) && truth.support().iter().all(|j| upper.contains(j))
}

/// Tests each coefficient of `fit` against the threshold.
pub fn clean(fit: &OlsFit, alpha: f64, threshold: Threshold) -> Result<CleanResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::DomainError(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let mut order: Vec<usize> = (0..fit.model.len()).collect();
    order.sort_by_key(|&k| fit.model[k]);
    let s_hat: Vec<usize> = order.iter().map(|&k| fit.model[k]).collect();
    let coefficients: Vec<f64> = order.iter().map(|&k| fit.coefficients[k]).collect();

    if s_hat.is_empty() {
        return Ok(CleanResult {
            s_hat,
            d_hat: Vec::new(),
            coefficients,
            t_values: Vec::new(),
            critical: None,
            alpha,
            threshold,
            perfect_fit: false,
        });
    }

    let critical = threshold.value(alpha, s_hat.len(), fit.df)?;
    let (t_values, d_hat, perfect_fit) = match fit.t_statistics() {
        Ok(t) => {
            let t: Vec<f64> = order.iter().map(|&k| t[k]).collect();
            let d = s_hat
                .iter()
                .zip(&t)
                .filter(|(_, tj)| tj.abs() > critical)
                .map(|(&j, _)| j)
                .collect();
            (t, d, false)
        }
        Err(Error::ZeroResidualVariance) => (vec![f64::NAN; s_hat.len()], s_hat.clone(), true),
        Err(e) => return Err(e),
    };
    debug_assert!(d_hat.iter().all(|j| s_hat.contains(j)));
    Ok(CleanResult {
        s_hat,
        d_hat,
        coefficients,
        t_values,
        critical: Some(critical),
        alpha,
        threshold,
        perfect_fit,
    })
}
