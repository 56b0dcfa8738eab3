use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::law::{DiscreteFullLaw, AUXILIARY, PRIMARY};

/// Cell tolerance for the conditional-independence checks.
pub const CI_TOL: f64 = 1e-12;
/// Singular values at or below this count as zero in the completeness check.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionStatus {
    pub holds: bool,
    /// Largest cell-level deviation (conditional-independence checks) or
    /// largest rank deficit (completeness).
    pub violation: f64,
}

impl AssumptionStatus {
    fn from_violation(violation: f64) -> Self {
        AssumptionStatus { holds: violation <= CI_TOL, violation }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheckResult {
    /// `M` independent of `R` given `X` in the auxiliary domain.
    pub auxiliary_mar: AssumptionStatus,
    /// `M` independent of the domain given `X`.
    pub selection_at_random: AssumptionStatus,
    /// `Y` independent of `R` given `(X, M)` in the primary domain.
    pub outcome_ignorable_given_m: AssumptionStatus,
    /// `M` independent of `R` given `(X, Y)` in the primary domain, and `M`
    /// associated with `Y` given `X` among primary complete cases.
    pub shadow_variable: AssumptionStatus,
    /// Full column rank of `[p(y | R=1, x, m)]` for every primary `x`.
    pub completeness: AssumptionStatus,
}

impl AssumptionCheckResult {
    /// Assumptions behind the first identification result.
    pub fn model1_holds(&self) -> bool {
        self.auxiliary_mar.holds && self.selection_at_random.holds && self.outcome_ignorable_given_m.holds
    }

    /// Assumptions behind the second identification result.
    pub fn model2_holds(&self) -> bool {
        self.auxiliary_mar.holds && self.selection_at_random.holds && self.shadow_variable.holds && self.completeness.holds
    }
}

/// `max_c max_{a,b} |p(a,b|c) - p(a|c) p(b|c)|` over conditioning cells with
/// positive mass.
fn ci_violation(na: usize, nb: usize, nc: usize, joint: impl Fn(usize, usize, usize) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..nc {
        let cell: Vec<Vec<f64>> = (0..na).map(|a| (0..nb).map(|b| joint(a, b, c)).collect()).collect();
        let pc: f64 = super::law::ksum(cell.iter().flatten().copied());
        if pc <= 0.0 {
            continue;
        }
        let pa: Vec<f64> = cell.iter().map(|row| super::law::ksum(row.iter().copied())).collect();
        let pb: Vec<f64> = (0..nb).map(|b| super::law::ksum(cell.iter().map(|row| row[b]))).collect();
        for a in 0..na {
            for b in 0..nb {
                let d = (cell[a][b] / pc - (pa[a] / pc) * (pb[b] / pc)).abs();
                worst = worst.max(d);
            }
        }
    }
    worst
}

/// Singular values of `[p(y | R=1, x, m, G=1)]_{m,y}`; rows with no mass are zero.
pub(crate) fn outcome_matrix(law: &DiscreteFullLaw, x: usize) -> DMatrix<f64> {
    let (_, nm, ny) = law.dims();
    DMatrix::from_fn(nm, ny, |m, y| {
        let pm = law.marginal(Some(PRIMARY), Some(x), Some(m), None, Some(1));
        if pm > 0.0 {
            law.p(PRIMARY, x, m, y, 1) / pm
        } else {
            0.0
        }
    })
}

pub(crate) fn numerical_rank(mat: &DMatrix<f64>) -> usize {
    mat.clone().svd(false, false).singular_values.iter().filter(|s| **s > RANK_TOL).count()
}

pub fn check_assumptions(law: &DiscreteFullLaw) -> AssumptionCheckResult {
    let (nx, nm, ny) = law.dims();
    let auxiliary_mar = ci_violation(nm, 2, nx, |m, r, x| law.marginal(Some(AUXILIARY), Some(x), Some(m), None, Some(r)));
    let selection = ci_violation(nm, 2, nx, |m, g, x| law.marginal(Some(g), Some(x), Some(m), None, None));
    let outcome = ci_violation(ny, 2, nx * nm, |y, r, c| law.p(PRIMARY, c / nm, c % nm, y, r));
    let shadow = ci_violation(nm, 2, nx * ny, |m, r, c| law.p(PRIMARY, c / ny, m, c % ny, r));
    let relevant = (0..nx).all(|x| {
        law.marginal(Some(PRIMARY), Some(x), None, None, Some(1)) <= 0.0
            || ci_violation(nm, ny, 1, |m, y, _| law.p(PRIMARY, x, m, y, 1)) > CI_TOL
    });
    let mut deficit = 0usize;
    for x in 0..nx {
        if law.marginal(Some(PRIMARY), Some(x), None, None, Some(1)) > 0.0 {
            deficit = deficit.max(ny.saturating_sub(numerical_rank(&outcome_matrix(law, x))));
        }
    }
    let mut shadow_variable = AssumptionStatus::from_violation(shadow);
    shadow_variable.holds &= relevant;
    AssumptionCheckResult {
        auxiliary_mar: AssumptionStatus::from_violation(auxiliary_mar),
        selection_at_random: AssumptionStatus::from_violation(selection),
        outcome_ignorable_given_m: AssumptionStatus::from_violation(outcome),
        shadow_variable,
        completeness: AssumptionStatus { holds: deficit == 0, violation: deficit as f64 },
    }
}
