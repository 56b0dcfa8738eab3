//! Parametric odds-ratio model and the inverse-probability weights built
//! from it.
//!
//! The odds ratio is `OR(x, y) = exp(-(gamma + sum_j delta_j x_j) * y)`,
//! anchored at `OR(x, 0) = 1`. The `delta` slopes are off unless requested.
//! With a logistic baseline propensity `p(R=1 | x, y=0) = logistic(eta(x))`
//! the full propensity is `p(R=1 | x, y) = logistic(eta(x) - log OR(x, y))`
//! and its reciprocal is `w = 1 + OR(x, y) * exp(-eta(x))`.

use serde::{Deserialize, Serialize};

use super::linear::{logistic, CoefficientModel};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioModel {
    pub gamma: f64,
    /// Optional covariate interactions with `y`; empty by default.
    #[serde(default)]
    pub x_slopes: Vec<f64>,
}

impl OddsRatioModel {
    pub fn new(gamma: f64) -> Self {
        OddsRatioModel { gamma, x_slopes: Vec::new() }
    }

    pub fn n_params(&self) -> usize {
        1 + self.x_slopes.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = vec![self.gamma];
        v.extend(&self.x_slopes);
        v
    }

    pub fn from_params(params: &[f64]) -> Self {
        OddsRatioModel { gamma: params[0], x_slopes: params[1..].to_vec() }
    }

    pub fn log_or(&self, x: &[f64], y: f64) -> f64 {
        let slope = self.gamma + self.x_slopes.iter().zip(x).map(|(d, xv)| d * xv).sum::<f64>();
        -slope * y
    }

    pub fn odds_ratio(&self, x: &[f64], y: f64) -> f64 {
        self.log_or(x, y).exp()
    }
}

/// Weight cap and propensity floor applied to every inverse-probability
/// weight. Each application is counted by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPolicy {
    pub w_max: f64,
    pub propensity_floor: f64,
}

impl Default for WeightPolicy {
    fn default() -> Self {
        WeightPolicy { w_max: 1e6, propensity_floor: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    pub value: f64,
    pub capped: bool,
}

impl WeightPolicy {
    /// `1 / max(p, floor)`, additionally capped at `w_max`.
    pub fn inverse_propensity(&self, p: f64) -> Weight {
        let floored = p < self.propensity_floor || !p.is_finite();
        let q = 1.0 / if floored { self.propensity_floor } else { p };
        self.cap(q, floored)
    }

    pub fn cap(&self, w: f64, already: bool) -> Weight {
        if !w.is_finite() || w > self.w_max {
            Weight { value: self.w_max, capped: true }
        } else {
            Weight { value: w, capped: already }
        }
    }

    /// Reciprocal odds-ratio propensity from a baseline linear predictor.
    pub fn odds_ratio_weight(&self, eta: f64, log_or: f64) -> Weight {
        self.cap(1.0 + (log_or - eta).exp(), false)
    }
}

/// Reciprocal of `p(R=1 | x, y)` under the baseline-propensity and
/// odds-ratio working models, subject to the weight cap.
pub fn model2_weight(
    x: &[f64],
    y: f64,
    alpha: &CoefficientModel,
    or_model: &OddsRatioModel,
    policy: &WeightPolicy,
) -> Result<Weight> {
    let eta = alpha.linear_predictor(x, None, None)?;
    Ok(policy.odds_ratio_weight(eta, or_model.log_or(x, y)))
}

/// `p(R=1 | x, y) = 1 / w`, computed directly through the logistic so the
/// baseline case `y = 0` reproduces the baseline model exactly.
pub fn recovered_propensity(x: &[f64], y: f64, alpha: &CoefficientModel, or_model: &OddsRatioModel) -> Result<f64> {
    let eta = alpha.linear_predictor(x, None, None)?;
    Ok(logistic(eta - or_model.log_or(x, y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::basis::BasisSpec;
    use crate::models::linear::Link;
    use proptest::prelude::*;

    fn alpha(a0: f64, a1: f64) -> CoefficientModel {
        CoefficientModel::new(BasisSpec::parse("1,x").unwrap(), vec![a0, a1], Link::Logistic).unwrap()
    }

    #[test]
    fn mar_point_weight_is_two() {
        let w = model2_weight(&[0.7], 1.3, &alpha(0.0, 0.0), &OddsRatioModel::new(0.0), &WeightPolicy::default()).unwrap();
        assert_eq!(w.value, 2.0);
    }

    #[test]
    fn zero_gamma_depends_on_x_only() {
        let a = alpha(0.2, -0.6);
        let or = OddsRatioModel::new(0.0);
        let p = WeightPolicy::default();
        for x in [-1.0, 0.0, 2.5] {
            let w1 = model2_weight(&[x], -3.0, &a, &or, &p).unwrap().value;
            let w2 = model2_weight(&[x], 4.0, &a, &or, &p).unwrap().value;
            assert_eq!(w1, w2);
            assert!((w1 - 1.0 / logistic(0.2 - 0.6 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_scalar_evaluation() {
        // w = 1 + exp(0.3 * 1 - 0.5)
        let w = model2_weight(&[0.0], 1.0, &alpha(0.5, 0.4), &OddsRatioModel::new(-0.3), &WeightPolicy::default())
            .unwrap();
        assert!((w.value - (1.0 + (-0.2f64).exp())).abs() < 1e-12);
        assert!((w.value - 1.8187).abs() < 1e-4);
    }

    #[test]
    fn cap_events_are_flagged() {
        let w = model2_weight(&[0.0], 0.0, &alpha(-40.0, 0.0), &OddsRatioModel::new(0.0), &WeightPolicy::default())
            .unwrap();
        assert!(w.capped);
        assert_eq!(w.value, 1e6);
        let q = WeightPolicy::default().inverse_propensity(1e-9);
        assert!(q.capped && q.value == 1e6);
        let ok = WeightPolicy::default().inverse_propensity(0.25);
        assert!(!ok.capped && ok.value == 4.0);
    }

    #[test]
    fn recovered_propensity_cases() {
        let a = alpha(0.5, 0.4);
        let or = OddsRatioModel::new(0.3);
        // y = 0 reproduces the baseline model exactly
        for x in [-2.0, 0.0, 1.0, 3.3] {
            assert_eq!(recovered_propensity(&[x], 0.0, &a, &or).unwrap(), logistic(0.5 + 0.4 * x));
        }
        // eta = 0.9, log OR = -0.6: p = 1 / (1 + exp(-0.6 - 0.9))
        let p = recovered_propensity(&[1.0], 2.0, &a, &or).unwrap();
        assert!((p - 1.0 / (1.0 + (-1.5f64).exp())).abs() < 1e-12);
        assert!((p - 0.8176).abs() < 1e-4);
        let flat = OddsRatioModel::new(0.0);
        assert_eq!(recovered_propensity(&[1.0], 2.0, &a, &flat).unwrap(), recovered_propensity(&[1.0], -7.0, &a, &flat).unwrap());
    }

    proptest! {
        #[test]
        fn weight_at_least_one(a0 in -20.0f64..20.0, a1 in -5.0f64..5.0, g in -3.0f64..3.0, x in -4.0f64..4.0, y in -6.0f64..6.0) {
            let w = model2_weight(&[x], y, &alpha(a0, a1), &OddsRatioModel::new(g), &WeightPolicy::default()).unwrap();
            prop_assert!(w.value >= 1.0);
            let p = recovered_propensity(&[x], y, &alpha(a0, a1), &OddsRatioModel::new(g)).unwrap();
            prop_assert!(p > 0.0 && p <= 1.0);
            if !w.capped {
                prop_assert!((w.value * p - 1.0).abs() < 1e-9);
            }
        }
    }
}
