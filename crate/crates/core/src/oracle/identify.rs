use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::assumptions::RANK_TOL;
use super::law::{ksum, reference_index};
use super::observed::ObservedLaw;
use crate::error::{Error, Result};

/// Target functional under the first model:
/// `sum_{x,m,y} y p(y | x, m, R=1, G=1) p(m | x, R=1, G=2) p(x | G=1)`.
pub fn identify_model1(obs: &ObservedLaw) -> Result<f64> {
    let (nx, nm, ny) = (obs.xs.len(), obs.ms.len(), obs.ys.len());
    let p_g1 = obs.primary_mass();
    if p_g1 <= 0.0 {
        return Err(Error::ZeroDenominator("p(G=1)".into()));
    }
    let mut terms = Vec::new();
    for x in 0..nx {
        let px = obs.primary_x(x);
        if px <= 0.0 {
            continue;
        }
        let aux_x = obs.auxiliary_complete_x(x);
        if aux_x <= 0.0 {
            return Err(Error::ZeroDenominator(format!("p(x={}, R=1, G=2)", obs.xs[x])));
        }
        for m in 0..nm {
            let pm_aux = obs.auxiliary_complete[x][m] / aux_x;
            if pm_aux == 0.0 {
                continue;
            }
            let pxm = obs.primary_complete_xm(x, m);
            if pxm <= 0.0 {
                return Err(Error::ZeroDenominator(format!("p(x={}, m={}, R=1, G=1)", obs.xs[x], obs.ms[m])));
            }
            for y in 0..ny {
                terms.push(obs.ys[y] * (obs.primary_complete[x][m][y] / pxm) * pm_aux * (px / p_g1));
            }
        }
    }
    Ok(ksum(terms))
}

/// Odds ratio `OR(x, y)` recovered from an observed law, anchored at
/// `OR(x, y_ref) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioTable {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Index of the anchoring level in `ys`.
    pub reference: usize,
    /// False when 0 is not in the outcome support and the smallest level was used.
    pub reference_is_zero: bool,
    /// `values[x][y]`; `None` for strata with no primary missingness, where
    /// the odds ratio does not enter the target.
    pub values: Vec<Option<Vec<f64>>>,
}

impl OddsRatioTable {
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.values[x].as_ref().map(|v| v[y])
    }
}

/// `p(m | x, R=0, G=1) p(R=0 | x, G=1)` from the auxiliary bridge,
/// `p(m | x, R=1, G=2) - p(m, R=1 | x, G=1)`.
pub fn bridge_missing_mass(obs: &ObservedLaw, x: usize) -> Result<Vec<f64>> {
    let aux_x = obs.auxiliary_complete_x(x);
    if aux_x <= 0.0 {
        return Err(Error::ZeroDenominator(format!("p(x={}, R=1, G=2)", obs.xs[x])));
    }
    let px = obs.primary_x(x);
    Ok((0..obs.ms.len())
        .map(|m| obs.auxiliary_complete[x][m] / aux_x - obs.primary_complete_xm(x, m) / px)
        .collect())
}

/// Solves, for each primary `x` with missingness,
/// `sum_y p(m, y | x, R=1, G=1) ORt(x, y) = p(m | x, R=0, G=1)` for the
/// normalised odds ratio `ORt`, then rescales so the reference level is 1.
pub fn recover_odds_ratio(obs: &ObservedLaw) -> Result<OddsRatioTable> {
    let (nx, nm, ny) = (obs.xs.len(), obs.ms.len(), obs.ys.len());
    let reference = reference_index(&obs.ys);
    let mut values = Vec::with_capacity(nx);
    for x in 0..nx {
        let px = obs.primary_x(x);
        let p_missing = obs.primary_missing[x];
        if px <= 0.0 || p_missing <= 0.0 {
            values.push(None);
            continue;
        }
        let complete = obs.primary_complete_x(x);
        let a = DMatrix::from_fn(nm, ny, |m, y| obs.primary_complete[x][m][y] / complete);
        let svd = a.clone().svd(true, true);
        let rank = svd.singular_values.iter().filter(|s| **s > RANK_TOL).count();
        if rank < ny {
            return Err(Error::Completeness { x: obs.xs[x], rank, needed: ny });
        }
        let r0 = p_missing / px;
        let b = DVector::from_iterator(nm, bridge_missing_mass(obs, x)?.into_iter().map(|v| v / r0));
        let tilde = svd.solve(&b, RANK_TOL).map_err(|e| Error::Oracle(e.to_string()))?;
        let anchor = tilde[reference];
        if !(anchor.is_finite() && anchor > 0.0) {
            return Err(Error::Oracle(format!("normalised odds ratio at the reference level is {anchor} for x={}", obs.xs[x])));
        }
        values.push(Some(tilde.iter().map(|v| v / anchor).collect()));
    }
    Ok(OddsRatioTable {
        xs: obs.xs.clone(),
        ys: obs.ys.clone(),
        reference,
        reference_is_zero: obs.ys[reference] == 0.0,
        values,
    })
}

/// Target functional under the second model: complete cases enter
/// directly; the missing stratum of each `x` is the complete-case outcome
/// law tilted by the recovered odds ratio and weighted by the bridged
/// `p(m | x, R=0, G=1)`. Strata with `p(R=0 | x, G=1) = 0` contribute only
/// their complete cases.
pub fn identify_model2(obs: &ObservedLaw) -> Result<f64> {
    let or = recover_odds_ratio(obs)?;
    identify_model2_with(obs, &or)
}

pub fn identify_model2_with(obs: &ObservedLaw, or: &OddsRatioTable) -> Result<f64> {
    let (nx, nm, ny) = (obs.xs.len(), obs.ms.len(), obs.ys.len());
    let p_g1 = obs.primary_mass();
    if p_g1 <= 0.0 {
        return Err(Error::ZeroDenominator("p(G=1)".into()));
    }
    let mut terms = Vec::new();
    for x in 0..nx {
        let px = obs.primary_x(x);
        if px <= 0.0 {
            continue;
        }
        let missing = obs.primary_missing[x];
        let bridge = if missing > 0.0 { Some(bridge_missing_mass(obs, x)?) } else { None };
        for m in 0..nm {
            let pxm = obs.primary_complete_xm(x, m);
            // complete-case part: sum_y y p(x, m, y, R=1 | G=1)
            for y in 0..ny {
                terms.push(obs.ys[y] * obs.primary_complete[x][m][y] / p_g1);
            }
            let (Some(bridge), Some(or_x)) = (&bridge, &or.values[x]) else { continue };
            if bridge[m] == 0.0 {
                continue;
            }
            if pxm <= 0.0 {
                return Err(Error::ZeroDenominator(format!("p(x={}, m={}, R=1, G=1)", obs.xs[x], obs.ms[m])));
            }
            let cond: Vec<f64> = (0..ny).map(|y| obs.primary_complete[x][m][y] / pxm).collect();
            let mean_or = ksum((0..ny).map(|y| cond[y] * or_x[y]));
            if mean_or <= 0.0 {
                return Err(Error::ZeroDenominator(format!("E[OR | x={}, m={}, R=1, G=1]", obs.xs[x], obs.ms[m])));
            }
            // bridge[m] * p(x | G=1) = p(m | x, R=0, G=1) p(x, R=0 | G=1) / p(R=0 | x, G=1) * p(R=0 | x, G=1)
            let weight = bridge[m] * px / p_g1;
            for y in 0..ny {
                terms.push(obs.ys[y] * cond[y] * or_x[y] / mean_or * weight);
            }
        }
    }
    Ok(ksum(terms))
}

/// Complete-case mean of `Y` in the primary domain.
pub fn complete_case_mean(obs: &ObservedLaw) -> f64 {
    let (nx, nm, ny) = (obs.xs.len(), obs.ms.len(), obs.ys.len());
    let total = ksum((0..nx).map(|x| obs.primary_complete_x(x)));
    let mut terms = Vec::new();
    for x in 0..nx {
        for m in 0..nm {
            for y in 0..ny {
                terms.push(obs.ys[y] * obs.primary_complete[x][m][y]);
            }
        }
    }
    ksum(terms) / total
}
