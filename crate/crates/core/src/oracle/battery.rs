use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::identify::{identify_model1, identify_model2_with, recover_odds_ratio};
use super::law::DiscreteFullLaw;
use super::observed::observed_law;
use super::prop1::{bridge_residual, true_odds_ratio, verify_prop1};
use super::random::{random_model1_law, random_model2_law, seeded};
use crate::simulation::derive_seed;

/// Tolerance on identified-versus-truth differences.
pub const IDENTIFICATION_TOL: f64 = 1e-8;
/// Tolerance on the odds-ratio identities and the bridge.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Tolerance on recovered versus true odds ratios.
pub const ODDS_RATIO_TOL: f64 = 1e-10;

/// Which relation a check evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Model1Identification,
    Model2Identification,
    OddsRatioRecovery,
    OrMInvariance,
    OutcomeTilt,
    InversePropensity,
    BaselinePropensity,
    TildeOrMoment,
    Bridge,
}

impl Check {
    pub fn tolerance(self) -> f64 {
        match self {
            Check::Model1Identification | Check::Model2Identification => IDENTIFICATION_TOL,
            Check::OddsRatioRecovery => ODDS_RATIO_TOL,
            _ => IDENTITY_TOL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Check::Model1Identification => "model1_identification",
            Check::Model2Identification => "model2_identification",
            Check::OddsRatioRecovery => "odds_ratio_recovery",
            Check::OrMInvariance => "or_m_invariance",
            Check::OutcomeTilt => "outcome_tilt",
            Check::InversePropensity => "inverse_propensity",
            Check::BaselinePropensity => "baseline_propensity",
            Check::TildeOrMoment => "tilde_or_moment",
            Check::Bridge => "bridge",
        }
    }
}

/// Outcome of one check on one law. `value` is the residual, or infinite
/// when the computation itself failed (see `error`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: Check,
    pub value: f64,
    pub error: Option<String>,
}

impl CheckResult {
    fn value(check: Check, value: f64) -> Self {
        CheckResult { check, value, error: None }
    }

    fn failed(check: Check, e: impl ToString) -> Self {
        CheckResult { check, value: f64::INFINITY, error: Some(e.to_string()) }
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.value <= self.check.tolerance()
    }
}

/// Checks behind the first identification result.
pub fn model1_checks(law: &DiscreteFullLaw) -> Vec<CheckResult> {
    let m1 = match identify_model1(&observed_law(law)) {
        Ok(v) => CheckResult::value(Check::Model1Identification, (v - law.true_beta()).abs()),
        Err(e) => CheckResult::failed(Check::Model1Identification, e),
    };
    vec![m1, CheckResult::value(Check::Bridge, bridge_residual(law))]
}

/// Checks behind the second identification result: odds-ratio identities,
/// recovery of the odds ratio, the bridge, and the identified target.
pub fn model2_checks(law: &DiscreteFullLaw) -> Vec<CheckResult> {
    let res = verify_prop1(law);
    let mut out = vec![
        CheckResult::value(Check::OrMInvariance, res.or_m_invariance),
        CheckResult::value(Check::OutcomeTilt, res.outcome_tilt),
        CheckResult::value(Check::InversePropensity, res.inverse_propensity),
        CheckResult::value(Check::BaselinePropensity, res.baseline_propensity),
        CheckResult::value(Check::TildeOrMoment, res.tilde_or_moment),
        CheckResult::value(Check::Bridge, bridge_residual(law)),
    ];
    let obs = observed_law(law);
    match recover_odds_ratio(&obs) {
        Ok(or) => {
            let truth = true_odds_ratio(law);
            let mut worst: f64 = 0.0;
            for (x, row) in or.values.iter().enumerate() {
                if let (Some(row), Some(t)) = (row, &truth[x]) {
                    worst = row.iter().zip(t).fold(worst, |w, (a, b)| w.max((a - b).abs()));
                }
            }
            out.push(CheckResult::value(Check::OddsRatioRecovery, worst));
            out.push(match identify_model2_with(&obs, &or) {
                Ok(v) => CheckResult::value(Check::Model2Identification, (v - law.true_beta()).abs()),
                Err(e) => CheckResult::failed(Check::Model2Identification, e),
            });
        }
        Err(e) => {
            out.push(CheckResult::failed(Check::OddsRatioRecovery, &e));
            out.push(CheckResult::failed(Check::Model2Identification, e));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryFailure {
    /// Seed the failing law was drawn from.
    pub law_seed: u64,
    pub model: u8,
    pub check: Check,
    pub value: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub n_laws: usize,
    pub seed: u64,
    /// Largest residual per check over all laws, in [`Check`] order.
    pub max_residuals: Vec<(Check, f64)>,
    /// Second-model draws discarded for poor conditioning.
    pub model2_rejections: usize,
    pub failures: Vec<BatteryFailure>,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn max_residual(&self, check: Check) -> f64 {
        self.max_residuals.iter().filter(|(c, _)| *c == check).map(|(_, v)| *v).fold(0.0, f64::max)
    }
}

/// Runs `n_laws` random laws of each model. Law `i` of model `k` is drawn
/// from `derive_seed(seed, 2i + k - 1)`, so the report does not depend on
/// the thread count.
pub fn run_battery(n_laws: usize, seed: u64) -> BatteryReport {
    let per_law: Vec<(Vec<BatteryFailure>, Vec<CheckResult>, usize)> = (0..n_laws)
        .into_par_iter()
        .map(|i| {
            let s1 = derive_seed(seed, 2 * i as u64);
            let s2 = derive_seed(seed, 2 * i as u64 + 1);
            let law1 = random_model1_law(&mut seeded(s1));
            let (law2, rejected) = random_model2_law(&mut seeded(s2));
            let c1 = model1_checks(&law1);
            let c2 = model2_checks(&law2);
            let mut failures = Vec::new();
            for (law_seed, model, checks) in [(s1, 1u8, &c1), (s2, 2, &c2)] {
                for c in checks.iter().filter(|c| !c.passed()) {
                    failures.push(BatteryFailure { law_seed, model, check: c.check, value: c.value, error: c.error.clone() });
                }
            }
            (failures, c1.into_iter().chain(c2).collect(), rejected)
        })
        .collect();
    let order = [
        Check::Model1Identification,
        Check::Model2Identification,
        Check::OddsRatioRecovery,
        Check::OrMInvariance,
        Check::OutcomeTilt,
        Check::InversePropensity,
        Check::BaselinePropensity,
        Check::TildeOrMoment,
        Check::Bridge,
    ];
    let max_residuals = order
        .iter()
        .map(|&check| {
            let worst = per_law.iter().flat_map(|(_, c, _)| c).filter(|c| c.check == check).map(|c| c.value).fold(0.0, f64::max);
            (check, worst)
        })
        .collect();
    BatteryReport {
        n_laws,
        seed,
        max_residuals,
        model2_rejections: per_law.iter().map(|(_, _, r)| r).sum(),
        failures: per_law.into_iter().flat_map(|(f, _, _)| f).collect(),
    }
}
