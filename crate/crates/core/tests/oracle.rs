use mnar_fusion::oracle::*;
use mnar_fusion::Error;
use proptest::prelude::*;

fn truth_vs(law: &DiscreteFullLaw, f: fn(&ObservedLaw) -> mnar_fusion::Result<f64>) -> (f64, f64) {
    (f(&observed_law(law)).unwrap(), law.true_beta())
}

#[test]
fn first_model_matches_full_law_truth() {
    for seed in 0..20 {
        let law = random_model1_law(&mut seeded(seed));
        law.validate().unwrap();
        assert!(check_assumptions(&law).model1_holds());
        let (est, truth) = truth_vs(&law, identify_model1);
        assert!((est - truth).abs() < 1e-12, "seed {seed}: {est} vs {truth}");
    }
}

#[test]
fn first_model_reduces_to_complete_case_mean_when_missing_completely_at_random() {
    let law = DiscreteFullLaw::from_fn(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0, 3.0], |g, x, m, y, r| {
        let px = [[0.3, 0.7], [0.6, 0.4]][g][x];
        let pm = [[0.25, 0.75], [0.5, 0.5]][x][m];
        let py = [[0.2, 0.3, 0.5], [0.6, 0.1, 0.3]][m][y];
        0.5 * px * pm * py * if r == 1 { 0.65 } else { 0.35 }
    });
    let obs = observed_law(&law);
    let est = identify_model1(&obs).unwrap();
    assert!((est - complete_case_mean(&obs)).abs() < 1e-12);
}

#[test]
fn first_model_is_biased_when_m_law_differs_across_domains() {
    let law = DiscreteFullLaw::from_fn(vec![0.0], vec![0.0, 1.0], vec![0.0, 1.0], |g, _, m, y, r| {
        let pm = [[0.3, 0.7], [0.7, 0.3]][g][m];
        let py = [[0.8, 0.2], [0.1, 0.9]][m][y];
        let pr1 = [[0.4, 0.8], [0.6, 0.6]][g][m];
        0.5 * pm * py * if r == 1 { pr1 } else { 1.0 - pr1 }
    });
    law.validate().unwrap();
    assert!(!check_assumptions(&law).selection_at_random.holds);
    let (est, truth) = truth_vs(&law, identify_model1);
    assert!((est - truth).abs() > 0.01, "{est} vs {truth}");
}

#[test]
fn first_model_names_zero_denominator_cell() {
    // m = 1 never seen among primary complete cases but present in the auxiliary domain
    let law = DiscreteFullLaw::from_fn(vec![0.0], vec![0.0, 1.0], vec![0.0, 1.0], |g, _, m, _, r| {
        let primary_complete_m1 = g == PRIMARY && m == 1 && r == 1;
        if primary_complete_m1 {
            0.0
        } else {
            1.0 / 15.0
        }
    });
    match identify_model1(&observed_law(&law)) {
        Err(Error::ZeroDenominator(cell)) => assert!(cell.contains("m=1"), "{cell}"),
        other => panic!("expected zero-denominator error, got {other:?}"),
    }
}

#[test]
fn known_odds_ratio_is_recovered() {
    let law = known_odds_ratio_law(0.3);
    law.validate().unwrap();
    let or = recover_odds_ratio(&observed_law(&law)).unwrap();
    assert_eq!(or.reference, 0);
    assert!(or.reference_is_zero);
    for x in 0..2 {
        for (y, &yv) in or.ys.iter().enumerate() {
            let got = or.get(x, y).unwrap();
            assert!((got - (-0.3 * yv).exp()).abs() < 1e-10, "x={x} y={yv}: {got}");
        }
    }
}

#[test]
fn odds_ratio_is_one_when_missing_at_random_given_x() {
    let or = recover_odds_ratio(&observed_law(&known_odds_ratio_law(0.0))).unwrap();
    for row in or.values.iter().flatten() {
        for v in row {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn single_m_level_is_a_completeness_error() {
    let law = DiscreteFullLaw::from_fn(vec![0.0], vec![0.0], vec![0.0, 1.0], |g, _, _, y, r| {
        let pr1 = if g == PRIMARY { [0.6, 0.4][y] } else { 0.5 };
        0.25 * if r == 1 { pr1 } else { 1.0 - pr1 }
    });
    assert!(!check_assumptions(&law).completeness.holds);
    assert!(matches!(
        recover_odds_ratio(&observed_law(&law)),
        Err(Error::Completeness { rank: 1, needed: 2, .. })
    ));
}

#[test]
fn reference_level_falls_back_to_smallest_support_point() {
    let base = known_odds_ratio_law(0.3);
    let shifted = DiscreteFullLaw::from_fn(base.xs.clone(), base.ms.clone(), vec![1.0, 2.0], |g, x, m, y, r| base.p(g, x, m, y, r));
    let or = recover_odds_ratio(&observed_law(&shifted)).unwrap();
    assert!(!or.reference_is_zero);
    assert_eq!(or.reference, 0);
    assert!((or.get(0, 1).unwrap() - (-0.3f64).exp()).abs() < 1e-10);
}

#[test]
fn second_model_matches_full_law_truth() {
    let law = known_odds_ratio_law(0.3);
    let c = check_assumptions(&law);
    assert!(c.model2_holds(), "{c:?}");
    let (est, truth) = truth_vs(&law, identify_model2);
    assert!((est - truth).abs() < 1e-10, "{est} vs {truth}");
}

#[test]
fn second_model_without_missingness_is_complete_case_mean() {
    let law = DiscreteFullLaw::from_fn(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0], |g, x, m, y, r| {
        let pm = [[0.3, 0.7], [0.6, 0.4]][x][m];
        let py = [[0.9, 0.1], [0.3, 0.7]][m][y];
        let pr1 = if g == PRIMARY { 1.0 } else { 0.5 };
        0.25 * pm * py * if r == 1 { pr1 } else { 1.0 - pr1 }
    });
    let obs = observed_law(&law);
    let est = identify_model2(&obs).unwrap();
    assert!((est - complete_case_mean(&obs)).abs() < 1e-12);
    assert!(recover_odds_ratio(&obs).unwrap().values.iter().all(Option::is_none));
}

#[test]
fn odds_ratio_identities_hold_on_shadow_variable_laws() {
    for seed in 0..20 {
        let (law, _) = random_model2_law(&mut seeded(seed));
        let res = verify_prop1(&law);
        assert!(res.max() < 1e-12, "seed {seed}: {res:?}");
        assert!(bridge_residual(&law) < 1e-12);
    }
    assert!(verify_prop1(&known_odds_ratio_law(0.3)).max() < 1e-12);
}

#[test]
fn m_dependent_response_breaks_odds_ratio_invariance() {
    let law = shadow_violation_law(0.8);
    law.validate().unwrap();
    assert!(!check_assumptions(&law).shadow_variable.holds);
    assert!(verify_prop1(&law).or_m_invariance > 1e-3);
    let failed: Vec<Check> = model2_checks(&law).into_iter().filter(|c| !c.passed()).map(|c| c.check).collect();
    assert!(failed.contains(&Check::OrMInvariance), "{failed:?}");
    assert!(model2_checks(&known_odds_ratio_law(0.3)).iter().all(CheckResult::passed));
}

#[test]
fn bridge_identity_on_first_model_laws() {
    for seed in 100..120 {
        assert!(bridge_residual(&random_model1_law(&mut seeded(seed))) < 1e-12);
    }
}

#[test]
fn randomized_battery() {
    let report = run_battery(100, 2024);
    assert!(report.passed(), "{:?}", report.failures);
    assert!(report.max_residual(Check::Model2Identification) < 1e-8);
    assert!(report.max_residual(Check::OddsRatioRecovery) < 1e-10);
    assert_eq!(report, run_battery(100, 2024));
}

#[test]
fn law_text_fixture_round_trips_through_identification() {
    let law = known_odds_ratio_law(0.3);
    let back = DiscreteFullLaw::from_text(&law.to_text()).unwrap();
    let a = identify_model2(&observed_law(&law)).unwrap();
    let b = identify_model2(&observed_law(&back)).unwrap();
    assert!((a - b).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observed_law_preserves_mass(seed in any::<u64>()) {
        let law = random_model1_law(&mut seeded(seed));
        prop_assert!((observed_law(&law).total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn violations_are_non_negative(seed in any::<u64>()) {
        let (law, _) = random_model2_law(&mut seeded(seed));
        let c = check_assumptions(&law);
        for s in [c.auxiliary_mar, c.selection_at_random, c.outcome_ignorable_given_m, c.shadow_variable, c.completeness] {
            prop_assert!(s.violation >= 0.0);
        }
        prop_assert!(c.model2_holds());
    }
}
