//! Model 2: primary-domain missingness depends on `(X, Y)`, with `M` as a
//! shadow variable.
//!
//! The weight `w = 1 + OR(X, Y) exp(-alpha . b(X))` comes from a logistic
//! baseline propensity at `Y = 0` and the odds-ratio model. `(alpha, gamma)`
//! solve the same moment-matching system as Model 1, and
//! `beta = (1/n1) sum_{G=1} w R Y`. Incomplete rows carry `R = 0` and so drop
//! out of every sum even though `w` needs `Y`.

use serde::{Deserialize, Serialize};

use super::{aux_targets_prepared, check_x_only, EstimateReport, EstimatorConfig, Prepared, WeightStats};
use crate::data::{PooledDataset, VariableSchema};
use crate::error::{Error, Result};
use crate::models::linear::logistic;
use crate::models::{BasisSpec, CoefficientModel, Link, OddsRatioModel};
use crate::solver::{MomentSystem, SolverConfig};

pub use crate::models::recovered_propensity;

/// Share of complete cases hitting the weight cap above which a weak-overlap
/// warning is attached to the report.
const CAP_WARNING_SHARE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model2Spec {
    pub baseline_basis: BasisSpec,
    /// Adds one `x_j * y` slope per covariate to the odds ratio.
    #[serde(default)]
    pub or_x_interaction: bool,
    /// Holds `gamma` at this value instead of estimating it.
    #[serde(default)]
    pub fixed_gamma: Option<f64>,
    pub h_basis: BasisSpec,
    pub aux_regression_basis: BasisSpec,
}

impl Model2Spec {
    pub fn default_for(schema: &VariableSchema) -> Self {
        let d = schema.n_covariates();
        Model2Spec {
            baseline_basis: BasisSpec::polynomial_x(d, 1),
            or_x_interaction: false,
            fixed_gamma: None,
            h_basis: BasisSpec::linear_x_m(d, schema.m_width()),
            aux_regression_basis: BasisSpec::polynomial_x(d, 2),
        }
    }

    fn n_or_params(&self, d: usize) -> usize {
        usize::from(self.fixed_gamma.is_none()) + if self.or_x_interaction { d } else { 0 }
    }

    pub fn check(&self, d: usize) -> Result<()> {
        check_x_only(&self.baseline_basis, "baseline basis")?;
        check_x_only(&self.aux_regression_basis, "auxiliary regression basis")?;
        if self.h_basis.uses_y() {
            return Err(Error::InvalidBasis(format!("h basis `{}` may not use y", self.h_basis)));
        }
        let need = self.baseline_basis.len() + self.n_or_params(d);
        if self.h_basis.len() < need {
            return Err(Error::InvalidBasis(format!(
                "h basis `{}` has {} terms for {need} parameters",
                self.h_basis,
                self.h_basis.len()
            )));
        }
        Ok(())
    }

    fn odds_ratio(&self, or_params: &[f64], d: usize) -> OddsRatioModel {
        let (gamma, rest) = match self.fixed_gamma {
            Some(g) => (g, or_params),
            None => (or_params[0], &or_params[1..]),
        };
        let x_slopes = if self.or_x_interaction { rest[..d].to_vec() } else { Vec::new() };
        OddsRatioModel { gamma, x_slopes }
    }
}

/// Logistic regression of `R` on the baseline basis over all primary rows,
/// by solving the score equations.
fn logistic_init(prep: &Prepared, basis: &BasisSpec, solver: &SolverConfig) -> Result<Vec<f64>> {
    let mut rows = Vec::with_capacity(prep.primary.len());
    for row in &prep.primary {
        rows.push((basis.evaluate(&row.x, None, None)?, row.y.is_some() as u8 as f64));
    }
    let p = basis.len();
    let n = rows.len() as f64;
    let score = |a: &[f64]| {
        let mut s = vec![0.0; p];
        for (b, r) in &rows {
            let eta: f64 = a.iter().zip(b).map(|(u, v)| u * v).sum();
            let e = r - logistic(eta);
            for (acc, bv) in s.iter_mut().zip(b) {
                *acc += e * bv / n;
            }
        }
        s
    };
    let sol = MomentSystem::new(score, vec![0.0; p], solver.clone()).solve()?;
    if !sol.converged() {
        // Separation or a degenerate design: fall back to the neutral start.
        return Ok(vec![0.0; p]);
    }
    Ok(sol.theta_hat)
}

pub fn estimate_model2(dataset: &PooledDataset, spec: &Model2Spec, config: &EstimatorConfig) -> Result<EstimateReport> {
    let d = dataset.schema.n_covariates();
    spec.check(d)?;
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

    struct Row {
        x: Vec<f64>,
        b: Vec<f64>,
        h: Vec<f64>,
        y: f64,
    }
    let mut rows = Vec::with_capacity(prep.counts.primary_complete);
    for (x, m, y) in prep.complete() {
        rows.push(Row {
            x: x.to_vec(),
            b: spec.baseline_basis.evaluate(x, None, None)?,
            h: spec.h_basis.evaluate(x, Some(m), None)?,
            y,
        });
    }
    let pa = spec.baseline_basis.len();
    let policy = config.weights;
    let weight = |theta: &[f64], row: &Row| {
        let (alpha, or_params) = theta.split_at(pa);
        let or = spec.odds_ratio(or_params, d);
        let eta: f64 = alpha.iter().zip(&row.b).map(|(a, v)| a * v).sum();
        policy.odds_ratio_weight(eta, or.log_or(&row.x, row.y))
    };
    let residual = |theta: &[f64]| {
        let mut acc = vec![0.0; k];
        for row in &rows {
            let w = weight(theta, row).value;
            for (a, hv) in acc.iter_mut().zip(&row.h) {
                *a += w * hv;
            }
        }
        acc.iter().zip(&target_mean).map(|(a, t)| a / n1 - t).collect()
    };
    let mut init = logistic_init(&prep, &spec.baseline_basis, &config.solver)?;
    init.resize(pa + spec.n_or_params(d), 0.0);
    let sol = MomentSystem::new(residual, init, config.solver.clone()).solve()?;
    if !sol.converged() {
        return Err(Error::SolverFailed { status: sol.status, residual_norm: sol.final_residual_norm });
    }

    let mut stats = WeightStats::new();
    let mut total = 0.0;
    for row in &rows {
        let w = weight(&sol.theta_hat, row);
        stats.push(w);
        total += w.value * row.y;
    }
    let mut report = EstimateReport::simple("model2_ipw", total / n1, prep.counts);
    stats.apply(&mut report.diagnostics);
    if stats.capped as f64 > CAP_WARNING_SHARE * rows.len() as f64 {
        report.diagnostics.warnings.push(format!(
            "weak overlap: {} of {} complete-case weights hit the cap",
            stats.capped,
            rows.len()
        ));
    }
    let (alpha, or_params) = sol.theta_hat.split_at(pa);
    report.nuisance.alpha = Some(CoefficientModel::new(spec.baseline_basis.clone(), alpha.to_vec(), Link::Logistic)?);
    report.nuisance.odds_ratio = Some(spec.odds_ratio(or_params, d));
    report.solver = Some(sol);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UnitRecord;
    use crate::simulation::{generate_model2, Model2Design, Setting};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Primary rows respond with probability depending on x only.
    fn mar_in_x(n: usize, seed: u64) -> PooledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut recs = Vec::new();
        for _ in 0..n {
            let x: f64 = rng.gen_range(-1.5..1.5);
            let m = x + rng.gen_range(-1.0..1.0);
            if rng.gen::<f64>() < logistic(0.3 + 0.8 * x) {
                recs.push(UnitRecord::primary_complete(vec![x], m, m + rng.gen_range(-1.0..1.0)));
            } else {
                recs.push(UnitRecord::primary_missing(vec![x]));
            }
            let xa: f64 = rng.gen_range(-1.5..1.5);
            recs.push(UnitRecord::auxiliary(vec![xa], Some(xa + rng.gen_range(-1.0..1.0))));
        }
        PooledDataset::new(recs, VariableSchema::scalar())
    }

    #[test]
    fn fixed_zero_gamma_is_horvitz_thompson_in_x() {
        let ds = mar_in_x(800, 2);
        let spec = Model2Spec {
            baseline_basis: BasisSpec::parse("1,x").unwrap(),
            or_x_interaction: false,
            fixed_gamma: Some(0.0),
            h_basis: BasisSpec::parse("1,x").unwrap(),
            aux_regression_basis: BasisSpec::parse("1,x").unwrap(),
        };
        let rep = estimate_model2(&ds, &spec, &EstimatorConfig::default()).unwrap();
        let alpha = rep.nuisance.alpha.as_ref().unwrap();
        let n1 = ds.records.iter().filter(|r| r.is_primary()).count() as f64;
        let ht: f64 = ds
            .records
            .iter()
            .filter(|r| r.is_primary())
            .filter_map(|r| r.y.map(|y| y / alpha.predict(&r.x, None, None).unwrap()))
            .sum::<f64>()
            / n1;
        assert!((rep.beta_hat - ht).abs() < 1e-12, "{} vs {ht}", rep.beta_hat);
        assert_eq!(rep.nuisance.odds_ratio.as_ref().unwrap().gamma, 0.0);
    }

    #[test]
    fn fixed_zero_gamma_intercept_is_complete_case_mean() {
        let ds = mar_in_x(500, 8);
        let spec = Model2Spec {
            baseline_basis: BasisSpec::intercept(),
            or_x_interaction: false,
            fixed_gamma: Some(0.0),
            h_basis: BasisSpec::intercept(),
            aux_regression_basis: BasisSpec::intercept(),
        };
        let rep = estimate_model2(&ds, &spec, &EstimatorConfig::default()).unwrap();
        let ys: Vec<f64> = ds.records.iter().filter(|r| r.is_primary()).filter_map(|r| r.y).collect();
        let cc = ys.iter().sum::<f64>() / ys.len() as f64;
        assert!((rep.beta_hat - cc).abs() < 1e-10, "{} vs {cc}", rep.beta_hat);
    }

    #[test]
    fn default_spec_converges_on_reference_design() {
        let sim = generate_model2(&Model2Design::new(2000, Setting::T), 5);
        let spec = Model2Spec::default_for(&sim.dataset.schema);
        let rep = estimate_model2(&sim.dataset, &spec, &EstimatorConfig::default()).unwrap();
        let sol = rep.solver.as_ref().unwrap();
        assert!(sol.converged() && sol.criterion < 1e-8);
        assert_eq!(sol.theta_hat.len(), 3);
        assert!((rep.beta_hat + 0.659).abs() < 0.4, "{}", rep.beta_hat);
        assert!(rep.diagnostics.min_weight.unwrap() >= 1.0);
    }

    #[test]
    fn interaction_adds_parameters() {
        let mut spec = Model2Spec::default_for(&VariableSchema::scalar());
        spec.or_x_interaction = true;
        assert!(spec.check(1).is_err());
        spec.h_basis = BasisSpec::parse("1,x,m,x*m").unwrap();
        assert!(spec.check(1).is_ok());
        let or = spec.odds_ratio(&[0.3, -0.1], 1);
        assert_eq!(or.x_slopes, vec![-0.1]);
    }
}
