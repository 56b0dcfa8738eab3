//! Estimation of an outcome mean under missing-not-at-random missingness by
//! fusing a primary (MNAR) dataset with an auxiliary (MAR) dataset.
//!
//! Two identification models are supported. In the first, missingness in the
//! primary domain depends on the covariates and a possibly-missing auxiliary
//! variable `M`; in the second, it depends on the outcome itself through an
//! odds-ratio tilt, with `M` acting as a shadow variable. Both come with
//! inverse-probability-weighted estimators, MAR/MCAR baselines, bootstrap
//! intervals, the reference simulation designs, and an exact finite-support
//! oracle for the identification formulas.

pub mod csv_io;
pub mod data;
pub mod error;
pub mod estimate;
pub mod fixture;
pub mod inference;
pub mod ingest;
pub mod models;
pub mod oracle;
pub mod simulation;
pub mod solver;

pub use error::{Error, Result};
