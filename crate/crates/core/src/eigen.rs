//! Eigenvalue diagnostics: extreme eigenvalues of a symmetric matrix and the
//! restricted extremes over all size-`k` column subsets of a design.

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ols::gram_of;

/// Largest number of subsets [`restricted_eigen`] will enumerate.
pub const MAX_SUBSETS: u128 = 1_000_000;

const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// `(smallest, largest)` eigenvalue of a symmetric matrix.
pub fn eigen_extremes(gram: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !gram.is_square() || gram.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "expected a non-empty square matrix, got {}x{}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    let asym = (gram - gram.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric {
            max_asymmetry: asym,
        });
    }
    let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub(crate) fn check_subset_count(p: usize, k: usize) -> Result<()> {
    let count = binomial(p, k);
    if count > MAX_SUBSETS {
        return Err(Error::TooManySubsets { count });
    }
    Ok(())
}

/// Exact `(phi_n(k), Phi_n(k))`: the extreme eigenvalues of `X_M'X_M / n`
/// over every column subset `M` of size `k`.
pub fn restricted_eigen(data: &Dataset, k: usize) -> Result<(f64, f64)> {
    if k == 0 || k > data.n().min(data.p()) {
        return Err(Error::InvalidArgument(format!(
            "subset size {k} must be in 1..={}",
            data.n().min(data.p())
        )));
    }
    check_subset_count(data.p(), k)?;
    let n = data.n() as f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for subset in (0..data.p()).combinations(k) {
        let gram = gram_of(data, &subset) / n;
        let (a, b) = eigen_extremes(&gram)?;
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((lo, hi))
}
