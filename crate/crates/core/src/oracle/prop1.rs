use serde::{Deserialize, Serialize};

use super::law::{ksum, DiscreteFullLaw, AUXILIARY, PRIMARY};

/// Largest absolute residual of each odds-ratio identity, evaluated on the
/// full law of the primary domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioResiduals {
    /// Odds ratio computed within each `m` stratum versus from `p(R | x, y)`.
    pub or_m_invariance: f64,
    /// `p(y | R=0, x, m)` versus the odds-ratio tilt of `p(y | R=1, x, m)`.
    pub outcome_tilt: f64,
    /// `1 / p(R=1 | x, y)` versus its odds-ratio and baseline form.
    pub inverse_propensity: f64,
    /// Baseline propensity `p(R=1 | x, y_ref)` versus its closed form.
    pub baseline_propensity: f64,
    /// `E[ORt | R=1, x, m]` versus `p(m | x, R=0) / p(m | x, R=1)`.
    pub tilde_or_moment: f64,
}

impl OddsRatioResiduals {
    pub fn max(&self) -> f64 {
        [self.or_m_invariance, self.outcome_tilt, self.inverse_propensity, self.baseline_propensity, self.tilde_or_moment]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

struct Primary<'a> {
    law: &'a DiscreteFullLaw,
}

impl Primary<'_> {
    fn xmyr(&self, x: usize, m: Option<usize>, y: Option<usize>, r: Option<usize>) -> f64 {
        self.law.marginal(Some(PRIMARY), Some(x), m, y, r)
    }

    /// `p(R=r | x, y)`.
    fn propensity(&self, x: usize, y: usize, r: usize) -> Option<f64> {
        let d = self.xmyr(x, None, Some(y), None);
        (d > 0.0).then(|| self.xmyr(x, None, Some(y), Some(r)) / d)
    }

    /// `OR(x, y)` from the propensity, anchored at `y_ref`.
    fn odds_ratio(&self, x: usize, y: usize, y_ref: usize) -> Option<f64> {
        let (r0, r1) = (self.propensity(x, y, 0)?, self.propensity(x, y, 1)?);
        let (b0, b1) = (self.propensity(x, y_ref, 0)?, self.propensity(x, y_ref, 1)?);
        (r1 > 0.0 && b0 > 0.0).then(|| (r0 / r1) * (b1 / b0))
    }

    /// `p(y | R=r, x, m)`.
    fn outcome(&self, x: usize, m: usize, y: usize, r: usize) -> Option<f64> {
        let d = self.xmyr(x, Some(m), None, Some(r));
        (d > 0.0).then(|| self.law.p(PRIMARY, x, m, y, r) / d)
    }
}

pub fn verify_prop1(law: &DiscreteFullLaw) -> OddsRatioResiduals {
    let (nx, nm, ny) = law.dims();
    let y_ref = law.reference_y();
    let p = Primary { law };
    let mut res = OddsRatioResiduals {
        or_m_invariance: 0.0,
        outcome_tilt: 0.0,
        inverse_propensity: 0.0,
        baseline_propensity: 0.0,
        tilde_or_moment: 0.0,
    };
    let bump = |slot: &mut f64, a: f64, b: f64| *slot = slot.max((a - b).abs());
    for x in 0..nx {
        let or: Option<Vec<f64>> = (0..ny).map(|y| p.odds_ratio(x, y, y_ref)).collect();
        let Some(or) = or else { continue };
        let complete_x = p.xmyr(x, None, None, Some(1));
        let missing_x = p.xmyr(x, None, None, Some(0));
        if complete_x <= 0.0 {
            continue;
        }
        let mean_or_x = ksum((0..ny).map(|y| p.xmyr(x, None, Some(y), Some(1)) / complete_x * or[y]));

        for m in 0..nm {
            let conds: Option<Vec<(f64, f64)>> =
                (0..ny).map(|y| Some((p.outcome(x, m, y, 0)?, p.outcome(x, m, y, 1)?))).collect();
            let Some(conds) = conds else { continue };
            let (ref0, ref1) = conds[y_ref];
            if ref0 > 0.0 {
                for y in 0..ny {
                    let (c0, c1) = conds[y];
                    if c1 > 0.0 {
                        bump(&mut res.or_m_invariance, (c0 / c1) * (ref1 / ref0), or[y]);
                    }
                }
            }
            let mean_or_xm = ksum((0..ny).map(|y| conds[y].1 * or[y]));
            for y in 0..ny {
                bump(&mut res.outcome_tilt, conds[y].0, conds[y].1 * or[y] / mean_or_xm);
            }
            let pm1 = p.xmyr(x, Some(m), None, Some(1)) / complete_x;
            if missing_x > 0.0 && pm1 > 0.0 {
                let pm0 = p.xmyr(x, Some(m), None, Some(0)) / missing_x;
                bump(&mut res.tilde_or_moment, mean_or_xm / mean_or_x, pm0 / pm1);
            }
        }

        let (Some(b0), Some(b1)) = (p.propensity(x, y_ref, 0), p.propensity(x, y_ref, 1)) else { continue };
        for y in 0..ny {
            if let Some(r1) = p.propensity(x, y, 1) {
                bump(&mut res.inverse_propensity, 1.0 / r1, 1.0 + or[y] * b0 / b1);
            }
        }
        let odds_missing = missing_x / complete_x;
        bump(&mut res.baseline_propensity, b1, mean_or_x / (mean_or_x + odds_missing));
    }
    res
}

/// `OR(x, y)` computed from the primary propensity `p(R | x, y)` of the full
/// law, anchored at the reference level; `None` where a needed
/// probability vanishes.
pub fn true_odds_ratio(law: &DiscreteFullLaw) -> Vec<Option<Vec<f64>>> {
    let (nx, _, ny) = law.dims();
    let y_ref = law.reference_y();
    let p = Primary { law };
    (0..nx).map(|x| (0..ny).map(|y| p.odds_ratio(x, y, y_ref)).collect()).collect()
}

/// Largest cell residual of the auxiliary bridge,
/// `p(m | x, R=1, G=2) - p(m, R=1 | x, G=1) - p(m | x, R=0, G=1) p(R=0 | x, G=1)`.
pub fn bridge_residual(law: &DiscreteFullLaw) -> f64 {
    let (nx, nm, _) = law.dims();
    let mut worst: f64 = 0.0;
    for x in 0..nx {
        let aux = law.marginal(Some(AUXILIARY), Some(x), None, None, Some(1));
        let px = law.marginal(Some(PRIMARY), Some(x), None, None, None);
        if aux <= 0.0 || px <= 0.0 {
            continue;
        }
        for m in 0..nm {
            let lhs = law.marginal(Some(AUXILIARY), Some(x), Some(m), None, Some(1)) / aux
                - law.marginal(Some(PRIMARY), Some(x), Some(m), None, Some(1)) / px;
            let rhs = law.marginal(Some(PRIMARY), Some(x), Some(m), None, Some(0)) / px;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}
