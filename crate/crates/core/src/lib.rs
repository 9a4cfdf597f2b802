//! Screen-and-clean variable selection for sparse high-dimensional linear
//! regression.
//!
//! The procedure splits the sample, screens candidate variables with the
//! lasso, forward stepwise regression or marginal regression, chooses the
//! screened model by cross-validation, and finally cleans it by keeping only
//! the variables whose least-squares t-statistics survive a
//! multiplicity-corrected threshold on rows not used for screening.

pub mod bounds;
pub mod cleaner;
pub mod data;
pub mod eigen;
pub mod error;
pub mod normal;
pub mod ols;
pub mod persistence;
pub mod pipeline;
pub mod rng;
pub mod screeners;
pub mod selection;
pub mod simulation;
pub mod split;

pub use data::{Dataset, TrueModel};
pub use error::{Error, Result, Stage};
pub use screeners::{screen, PathEntry, ScreenPath, Screener};
