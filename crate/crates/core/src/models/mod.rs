//! Working models used as nuisance components: feature bases, linear and
//! logistic coefficient models, and the parametric odds ratio.

pub mod basis;
pub mod linear;
pub mod odds_ratio;

pub use basis::{BasisSpec, Term, Var};
pub use linear::{fit_least_squares, logistic, logit, CoefficientModel, Link};
pub use odds_ratio::{model2_weight, recovered_propensity, OddsRatioModel, Weight, WeightPolicy};
