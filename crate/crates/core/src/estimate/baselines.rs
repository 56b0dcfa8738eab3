//! Naive comparators that ignore the auxiliary domain.

use super::{check_x_only, EstimateReport, Prepared};
use crate::data::PooledDataset;
use crate::error::{Error, Result};
use crate::models::linear::fit_least_squares;
use crate::models::BasisSpec;

/// Primary-domain complete-case mean of `Y`.
pub fn mcar_estimate(dataset: &PooledDataset) -> Result<EstimateReport> {
    let prep = Prepared::new(dataset)?;
    let ys: Vec<f64> = prep.complete().map(|(_, _, y)| y).collect();
    if ys.is_empty() {
        return Err(Error::InsufficientData("no complete cases in the primary domain".into()));
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    Ok(EstimateReport::simple("mcar", mean, prep.counts))
}

/// Regression of `Y` on `x_basis(X)` over primary complete cases, averaged
/// over the covariates of every primary row.
pub fn mar_estimate(dataset: &PooledDataset, x_basis: &BasisSpec) -> Result<EstimateReport> {
    check_x_only(x_basis, "MAR regression basis")?;
    let prep = Prepared::new(dataset)?;
    let mut rows = Vec::with_capacity(prep.counts.primary_complete);
    for (x, _, y) in prep.complete() {
        rows.push((x_basis.evaluate(x, None, None)?, y));
    }
    if rows.len() < x_basis.len() {
        return Err(Error::InsufficientData(format!(
            "{} primary complete cases for a {}-term regression",
            rows.len(),
            x_basis.len()
        )));
    }
    let fit = fit_least_squares(x_basis, &rows)?;
    let mut total = 0.0;
    for row in &prep.primary {
        total += fit.predict(&row.x, None, None)?;
    }
    let mut report = EstimateReport::simple("mar", total / prep.n_primary(), prep.counts);
    report.nuisance.outcome = Some(fit);
    Ok(report)
}
