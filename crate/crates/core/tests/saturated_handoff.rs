//! With saturated bases on binary `(X, M, Y)` laws, each estimator's
//! estimating equations reduce to the identification formula evaluated on
//! the sample's empirical law.

use mnar_fusion::estimate::{estimate_model1, estimate_model2, identify_beta_model1_plugin, EstimatorConfig, Model1Spec, Model2Spec};
use mnar_fusion::models::BasisSpec;
use mnar_fusion::oracle::*;

fn basis(text: &str) -> BasisSpec {
    BasisSpec::parse(text).unwrap()
}

fn model1_spec() -> Model1Spec {
    Model1Spec {
        propensity_basis: basis("1,x,m,x*m"),
        h_basis: basis("1,x,m,x*m"),
        aux_regression_basis: basis("1,x"),
        outcome_basis: basis("1,x,m,x*m"),
    }
}

fn model2_spec() -> Model2Spec {
    Model2Spec {
        baseline_basis: basis("1,x"),
        or_x_interaction: true,
        fixed_gamma: None,
        h_basis: basis("1,x,m,x*m"),
        aux_regression_basis: basis("1,x"),
    }
}

const SUPPORT: [f64; 2] = [0.0, 1.0];

#[test]
fn fixture_laws_satisfy_their_assumptions() {
    assert!(check_assumptions(&binary_model1_law()).model1_holds());
    let c = check_assumptions(&binary_model2_law());
    assert!(c.model2_holds(), "{c:?}");
    let or = recover_odds_ratio(&observed_law(&binary_model2_law())).unwrap();
    assert!((or.get(0, 1).unwrap() - (-0.3f64).exp()).abs() < 1e-10);
    assert!((or.get(1, 1).unwrap() - (-0.6f64).exp()).abs() < 1e-10);
}

#[test]
fn model1_estimators_equal_empirical_identification() {
    let ds = sample_dataset(&binary_model1_law(), 100_000, 11).unwrap();
    let emp = empirical_law(&ds, &SUPPORT, &SUPPORT, &SUPPORT).unwrap();
    let oracle = identify_model1(&emp).unwrap();
    let ipw = estimate_model1(&ds, &model1_spec(), &EstimatorConfig::default()).unwrap().beta_hat;
    let plugin = identify_beta_model1_plugin(&ds, &model1_spec()).unwrap();
    assert!((ipw - oracle).abs() < 1e-6, "{ipw} vs {oracle}");
    assert!((plugin - oracle).abs() < 1e-6, "{plugin} vs {oracle}");
}

#[test]
fn model2_estimator_equals_empirical_identification() {
    let ds = sample_dataset(&binary_model2_law(), 100_000, 12).unwrap();
    let emp = empirical_law(&ds, &SUPPORT, &SUPPORT, &SUPPORT).unwrap();
    let oracle = identify_model2(&emp).unwrap();
    let ipw = estimate_model2(&ds, &model2_spec(), &EstimatorConfig::default()).unwrap().beta_hat;
    assert!((ipw - oracle).abs() < 1e-6, "{ipw} vs {oracle}");
}

#[test]
fn sampler_matches_law_frequencies() {
    let law = binary_model2_law();
    let ds = sample_dataset(&law, 200_000, 3).unwrap();
    let emp = empirical_law(&ds, &SUPPORT, &SUPPORT, &SUPPORT).unwrap();
    let exact = observed_law(&law);
    for (a, b) in emp.cells().iter().zip(exact.cells()) {
        // binomial standard error is at most sqrt(0.25 / n) ~ 1.1e-3
        assert!((a.probability - b.probability).abs() < 5e-3);
    }
}
