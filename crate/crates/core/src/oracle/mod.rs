//! Exact identification machinery on finite-support laws of
//! `(G, X, M, Y, R)`. Everything here is arithmetic on probability tables;
//! no sampling except in the random-law generators.

mod assumptions;
mod battery;
mod identify;
mod law;
mod observed;
mod prop1;
mod random;
mod sample;

pub use assumptions::{check_assumptions, AssumptionCheckResult, AssumptionStatus, CI_TOL, RANK_TOL};
pub use battery::{
    model1_checks, model2_checks, run_battery, BatteryFailure, BatteryReport, Check, CheckResult, IDENTIFICATION_TOL, IDENTITY_TOL,
    ODDS_RATIO_TOL,
};
pub use identify::{
    bridge_missing_mass, complete_case_mean, identify_model1, identify_model2, identify_model2_with, recover_odds_ratio,
    OddsRatioTable,
};
pub use law::{ksum, DiscreteFullLaw, AUXILIARY, PRIMARY};
pub use observed::{observed_law, ObservedCell, ObservedLaw};
pub use prop1::{bridge_residual, true_odds_ratio, verify_prop1, OddsRatioResiduals};
pub use random::{known_odds_ratio_law, random_model1_law, random_model2_law, seeded, shadow_violation_law, MIN_SINGULAR_VALUE};
pub use sample::{binary_model1_law, binary_model2_law, empirical_law, sample_dataset};
