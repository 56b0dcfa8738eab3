//! Model 1: primary-domain missingness depends on `(X, M)` only.
//!
//! The propensity `p(R=1 | X, M) = logistic(alpha . b(X, M))` is fitted by
//! matching `(1/n1) sum_{G=1} q R h(X, M)` to the primary-domain average of
//! `E[h(X, M) | X, R=1, G=aux]`, then `beta = (1/n1) sum_{G=1} q R Y`.

use serde::{Deserialize, Serialize};

use super::{aux_targets_prepared, check_x_only, EstimateReport, EstimatorConfig, Prepared, WeightStats};
use crate::data::{PooledDataset, VariableSchema};
use crate::error::{Error, Result};
use crate::models::linear::{fit_least_squares, logistic, logit};
use crate::models::{BasisSpec, CoefficientModel, Link};
use crate::solver::MomentSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model1Spec {
    pub propensity_basis: BasisSpec,
    pub h_basis: BasisSpec,
    pub aux_regression_basis: BasisSpec,
    /// Regression of `Y` on `(X, M)` used only by the plug-in estimator.
    pub outcome_basis: BasisSpec,
}

impl Model1Spec {
    pub fn default_for(schema: &VariableSchema) -> Self {
        let lin = BasisSpec::linear_x_m(schema.n_covariates(), schema.m_width());
        Model1Spec {
            propensity_basis: lin.clone(),
            h_basis: lin.clone(),
            aux_regression_basis: BasisSpec::polynomial_x(schema.n_covariates(), 2),
            outcome_basis: lin,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.h_basis.len() < self.propensity_basis.len() {
            return Err(Error::InvalidBasis(format!(
                "h basis `{}` has fewer terms than propensity basis `{}`",
                self.h_basis, self.propensity_basis
            )));
        }
        for (b, what) in [(&self.propensity_basis, "propensity basis"), (&self.h_basis, "h basis"), (&self.outcome_basis, "outcome basis")] {
            if b.uses_y() {
                return Err(Error::InvalidBasis(format!("{what} `{b}` may not use y")));
            }
        }
        check_x_only(&self.aux_regression_basis, "auxiliary regression basis")
    }
}

/// Starting point: intercept at the logit of the primary response rate.
fn initial_alpha(prep: &Prepared, p: usize) -> Vec<f64> {
    let rate = prep.counts.primary_complete as f64 / prep.n_primary();
    let mut a = vec![0.0; p];
    a[0] = logit(rate.clamp(1e-3, 1.0 - 1e-3));
    a
}

pub fn estimate_model1(dataset: &PooledDataset, spec: &Model1Spec, config: &EstimatorConfig) -> Result<EstimateReport> {
    spec.check()?;
    let prep = Prepared::new(dataset)?;
    if prep.counts.primary_complete == 0 {
        return Err(Error::InsufficientData("no complete cases in the primary domain".into()));
    }
    let (targets, _) = aux_targets_prepared(&prep, &spec.h_basis, &spec.aux_regression_basis)?;
    let k = spec.h_basis.len();
    let n1 = prep.n_primary();
    let mut target_mean = vec![0.0; k];
    for t in &targets {
        for (a, v) in target_mean.iter_mut().zip(t) {
            *a += v / n1;
        }
    }

    let mut rows = Vec::with_capacity(prep.counts.primary_complete);
    for (x, m, y) in prep.complete() {
        rows.push((spec.propensity_basis.evaluate(x, Some(m), None)?, spec.h_basis.evaluate(x, Some(m), None)?, y));
    }
    let policy = config.weights;
    let weight = |alpha: &[f64], b: &[f64]| {
        let eta: f64 = alpha.iter().zip(b).map(|(a, v)| a * v).sum();
        policy.inverse_propensity(logistic(eta))
    };
    let residual = |alpha: &[f64]| {
        let mut acc = vec![0.0; k];
        for (b, h, _) in &rows {
            let q = weight(alpha, b).value;
            for (a, hv) in acc.iter_mut().zip(h) {
                *a += q * hv;
            }
        }
        acc.iter().zip(&target_mean).map(|(a, t)| a / n1 - t).collect()
    };
    let p = spec.propensity_basis.len();
    let system = MomentSystem::new(residual, initial_alpha(&prep, p), config.solver.clone());
    let sol = system.solve()?;
    if !sol.converged() {
        return Err(Error::SolverFailed { status: sol.status, residual_norm: sol.final_residual_norm });
    }

    let mut stats = WeightStats::new();
    let mut total = 0.0;
    for (b, _, y) in &rows {
        let w = weight(&sol.theta_hat, b);
        stats.push(w);
        total += w.value * y;
    }
    let mut report = EstimateReport::simple("model1_ipw", total / n1, prep.counts);
    stats.apply(&mut report.diagnostics);
    report.nuisance.alpha =
        Some(CoefficientModel::new(spec.propensity_basis.clone(), sol.theta_hat.clone(), Link::Logistic)?);
    report.solver = Some(sol);
    Ok(report)
}

/// Outcome-regression plug-in of the identification functional, also
/// returning the fitted primary-domain outcome regression.
pub(crate) fn plugin_with_outcome(dataset: &PooledDataset, spec: &Model1Spec) -> Result<(f64, CoefficientModel)> {
    spec.check()?;
    let prep = Prepared::new(dataset)?;
    let mut rows = Vec::with_capacity(prep.counts.primary_complete);
    for (x, m, y) in prep.complete() {
        rows.push((spec.outcome_basis.evaluate(x, Some(m), None)?, y));
    }
    if rows.len() < spec.outcome_basis.len() {
        return Err(Error::InsufficientData(format!(
            "{} primary complete cases for a {}-term outcome regression",
            rows.len(),
            spec.outcome_basis.len()
        )));
    }
    let outcome = fit_least_squares(&spec.outcome_basis, &rows)?;
    let mut aux_rows = Vec::with_capacity(prep.aux_complete.len());
    for (x, m) in &prep.aux_complete {
        aux_rows.push((spec.aux_regression_basis.evaluate(x, None, None)?, outcome.predict(x, Some(m), None)?));
    }
    if aux_rows.is_empty() {
        return Err(Error::InsufficientData("no complete cases in the auxiliary domain".into()));
    }
    if aux_rows.len() < spec.aux_regression_basis.len() {
        return Err(Error::InsufficientData(format!(
            "{} auxiliary complete cases for a {}-term regression",
            aux_rows.len(),
            spec.aux_regression_basis.len()
        )));
    }
    let inner = fit_least_squares(&spec.aux_regression_basis, &aux_rows)?;
    let mut total = 0.0;
    for row in &prep.primary {
        total += inner.predict(&row.x, None, None)?;
    }
    Ok((total / prep.n_primary(), outcome))
}

pub fn identify_beta_model1_plugin(dataset: &PooledDataset, spec: &Model1Spec) -> Result<f64> {
    plugin_with_outcome(dataset, spec).map(|(b, _)| b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UnitRecord;
    use crate::simulation::{generate_model1, Model1Design, Setting};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize, seed: u64, y_of: impl Fn(f64, f64) -> f64) -> PooledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut recs = Vec::new();
        for i in 0..n {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let m: f64 = x + rng.gen_range(-1.0..1.0);
            if i % 2 == 0 {
                recs.push(UnitRecord::primary_complete(vec![x], m, y_of(x, m)));
            } else {
                recs.push(UnitRecord::primary_missing(vec![x]));
            }
            let xa: f64 = rng.gen_range(-1.0..1.0);
            recs.push(UnitRecord::auxiliary(vec![xa], (i % 3 != 0).then(|| xa + rng.gen_range(-1.0..1.0))));
        }
        PooledDataset::new(recs, VariableSchema::scalar())
    }

    fn intercept_spec() -> Model1Spec {
        Model1Spec {
            propensity_basis: BasisSpec::intercept(),
            h_basis: BasisSpec::intercept(),
            aux_regression_basis: BasisSpec::intercept(),
            outcome_basis: BasisSpec::intercept(),
        }
    }

    #[test]
    fn intercept_only_is_complete_case_mean() {
        let ds = toy(301, 3, |x, m| 2.0 * x - m + 0.5);
        let rep = estimate_model1(&ds, &intercept_spec(), &EstimatorConfig::default()).unwrap();
        let ys: Vec<f64> = ds.records.iter().filter_map(|r| if r.is_primary() { r.y } else { None }).collect();
        let cc = ys.iter().sum::<f64>() / ys.len() as f64;
        assert!((rep.beta_hat - cc).abs() < 1e-12 * cc.abs().max(1.0), "{} vs {cc}", rep.beta_hat);
        let q = 301.0 / ys.len() as f64;
        assert!((rep.diagnostics.max_weight.unwrap() - q).abs() < 1e-10);
    }

    #[test]
    fn moments_vanish_at_solution() {
        let sim = generate_model1(&Model1Design::new(2000, Setting::T), 17);
        let rep = estimate_model1(&sim.dataset, &Model1Spec::default_for(&sim.dataset.schema), &EstimatorConfig::default())
            .unwrap();
        let sol = rep.solver.unwrap();
        assert!(sol.converged());
        assert!(sol.criterion < 1e-8);
        assert_eq!(sol.theta_hat.len(), 3);
        assert!((rep.beta_hat - 1.8).abs() < 0.3, "{}", rep.beta_hat);
    }

    #[test]
    fn shuffling_rows_leaves_estimate_unchanged() {
        let sim = generate_model1(&Model1Design::new(1000, Setting::T), 4);
        let spec = Model1Spec::default_for(&sim.dataset.schema);
        let cfg = EstimatorConfig::default();
        let a = estimate_model1(&sim.dataset, &spec, &cfg).unwrap().beta_hat;
        let mut shuffled = sim.dataset.clone();
        shuffled.records.reverse();
        shuffled.records.rotate_left(313);
        let b = estimate_model1(&shuffled, &spec, &cfg).unwrap().beta_hat;
        // summation order differs, so agreement is to rounding
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn all_missing_primary_is_an_error() {
        let recs = vec![
            UnitRecord::primary_missing(vec![0.0]),
            UnitRecord::primary_missing(vec![1.0]),
            UnitRecord::auxiliary(vec![0.0], Some(1.0)),
        ];
        let ds = PooledDataset::new(recs, VariableSchema::scalar());
        assert!(matches!(
            estimate_model1(&ds, &intercept_spec(), &EstimatorConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn underidentified_spec_rejected() {
        let mut spec = Model1Spec::default_for(&VariableSchema::scalar());
        spec.h_basis = BasisSpec::parse("1,x").unwrap();
        assert!(spec.check().is_err());
    }

    #[test]
    fn plugin_constant_outcome() {
        let ds = toy(200, 9, |_, _| 4.25);
        let spec = Model1Spec::default_for(&ds.schema);
        let b = identify_beta_model1_plugin(&ds, &spec).unwrap();
        assert!((b - 4.25).abs() < 1e-10, "{b}");
    }

    #[test]
    fn plugin_near_truth_on_reference_design() {
        let sim = generate_model1(&Model1Design::new(2000, Setting::T), 21);
        let b = identify_beta_model1_plugin(&sim.dataset, &Model1Spec::default_for(&sim.dataset.schema)).unwrap();
        assert!((b - 1.8).abs() < 0.1, "{b}");
    }
}
