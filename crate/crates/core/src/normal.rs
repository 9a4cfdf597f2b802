//! Standard normal quantiles and the cleaning thresholds built on them.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

// Coefficients of Wichura's AS 241 rational approximations, highest degree
// first.
const CENTRAL_NUM: [f64; 8] = [
    2509.0809287301226727,
    33430.575583588128105,
    67265.770927008700853,
    45921.953931549871457,
    13731.693765509461125,
    1971.5909503065514427,
    133.14166789178437745,
    3.387132872796366608,
];
const CENTRAL_DEN: [f64; 8] = [
    5226.495278852545925,
    28729.085735721942674,
    39307.89580009271061,
    21213.794301586595867,
    5394.1960214247511077,
    687.1870074920579083,
    42.313330701600911252,
    1.0,
];
const NEAR_NUM: [f64; 8] = [
    7.7454501427834140764e-4,
    0.0227238449892691845833,
    0.24178072517745061177,
    1.27045825245236838258,
    3.64784832476320460504,
    5.7694972214606914055,
    4.6303378461565452959,
    1.42343711074968357734,
];
const NEAR_DEN: [f64; 8] = [
    1.05075007164441684324e-9,
    5.475938084995344946e-4,
    0.0151986665636164571966,
    0.14810397642748007459,
    0.68976733498510000455,
    1.6763848301838038494,
    2.05319162663775882187,
    1.0,
];
const FAR_NUM: [f64; 8] = [
    2.01033439929228813265e-7,
    2.71155556874348757815e-5,
    0.0012426609473880784386,
    0.026532189526576123093,
    0.29656057182850489123,
    1.7848265399172913358,
    5.4637849111641143699,
    6.6579046435011037772,
];
const FAR_DEN: [f64; 8] = [
    2.04426310338993978564e-15,
    1.4215117583164458887e-7,
    1.8463183175100546818e-5,
    7.868691311456132591e-4,
    0.0148753612908506148525,
    0.13692988092273580531,
    0.59983220655588793769,
    1.0,
];

fn horner(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Inverse of the standard normal CDF (Wichura's AS 241, relative accuracy
/// about 1e-16).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DomainError(format!(
            "normal quantile needs 0 < p < 1, got {p}"
        )));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * horner(&CENTRAL_NUM, r) / horner(&CENTRAL_DEN, r));
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        horner(&NEAR_NUM, r) / horner(&NEAR_DEN, r)
    } else {
        let r = r - 5.0;
        horner(&FAR_NUM, r) / horner(&FAR_DEN, r)
    };
    Ok(if q < 0.0 { -z } else { z })
}

/// Upper `a`-quantile `z_a`, i.e. `P(Z > z_a) = a`.
pub fn upper_normal(a: f64) -> Result<f64> {
    normal_quantile(a).map(|z| -z)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::DomainError(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Bonferroni normal threshold `z_{alpha / (2m)}` for a cleaning step that
/// tests `m` coefficients.
pub fn critical_trisplit(alpha: f64, m: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if m == 0 {
        return Err(Error::EmptyModel);
    }
    upper_normal(alpha / (2.0 * m as f64))
}

/// Student-t analogue of [`critical_trisplit`] with `df` degrees of freedom.
pub fn critical_student_t(alpha: f64, m: usize, df: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if m == 0 {
        return Err(Error::EmptyModel);
    }
    if df == 0 {
        return Err(Error::DomainError("t threshold needs df >= 1".into()));
    }
    let t = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::DomainError(e.to_string()))?;
    Ok(t.inverse_cdf(1.0 - alpha / (2.0 * m as f64)))
}

/// Threshold for the two-split scheme that cleans on the validation half:
/// `ln(ln n) * sqrt(2 k ln(2p)) / alpha`.
pub fn critical_twosplit(n: usize, p: usize, k: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    // ln(ln n) is positive only once n exceeds e^e (about 15.2).
    if n < 16 {
        return Err(Error::DomainError(format!(
            "the two-split threshold needs n >= 16, got {n}"
        )));
    }
    if p == 0 || k == 0 {
        return Err(Error::DomainError("p and k must be positive".into()));
    }
    let n = n as f64;
    Ok(n.ln().ln() * (2.0 * k as f64 * (2.0 * p as f64).ln()).sqrt() / alpha)
}

/// Which threshold family the cleaning step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    /// `z_{alpha/(2m)}`.
    Normal,
    /// Student t with the cleaning fit's residual degrees of freedom.
    StudentT,
    /// `ln(ln n) sqrt(2 k ln(2p)) / alpha`.
    TwoSplit,
}
