//! Estimators of `beta = E[Y | G = primary]`: the two IPW estimators, the
//! outcome-regression plug-in, and the MAR/MCAR baselines.

pub mod baselines;
pub mod model1;
pub mod model2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{expand_m, DomainCounts, DomainTag, PooledDataset, VariableSchema};
use crate::error::{Error, Result};
use crate::models::linear::least_squares_multi;
use crate::models::{BasisSpec, CoefficientModel, Link, OddsRatioModel, WeightPolicy};
use crate::solver::{SolverConfig, SolverResult};

pub use baselines::{mar_estimate, mcar_estimate};
pub use model1::{estimate_model1, identify_beta_model1_plugin, Model1Spec};
pub use model2::{estimate_model2, recovered_propensity, Model2Spec};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub solver: SolverConfig,
    pub weights: WeightPolicy,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Nuisance {
    /// Propensity (Model 1) or baseline propensity (Model 2) coefficients.
    pub alpha: Option<CoefficientModel>,
    pub odds_ratio: Option<OddsRatioModel>,
    /// Outcome regression used by the plug-in and MAR estimators.
    pub outcome: Option<CoefficientModel>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub counts: DomainCounts,
    /// Weights hit by the cap or the propensity floor.
    pub weight_cap_count: usize,
    pub min_weight: Option<f64>,
    pub max_weight: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub level: f64,
    pub method: String,
    pub resamples: usize,
    pub n_failed: usize,
    /// The point estimate falls outside the interval.
    pub excludes_estimate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: String,
    pub beta_hat: f64,
    pub nuisance: Nuisance,
    pub solver: Option<SolverResult>,
    pub diagnostics: Diagnostics,
    pub ci: Option<ConfidenceInterval>,
}

impl EstimateReport {
    pub(crate) fn simple(estimator: &str, beta_hat: f64, counts: DomainCounts) -> Self {
        EstimateReport {
            estimator: estimator.to_string(),
            beta_hat,
            nuisance: Nuisance::default(),
            solver: None,
            diagnostics: Diagnostics { counts, ..Default::default() },
            ci: None,
        }
    }
}

/// The estimators selectable from configuration and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Model1Ipw(Model1Spec),
    Model1Plugin(Model1Spec),
    Model2Ipw(Model2Spec),
    Mar { x_basis: BasisSpec },
    Mcar,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Model1Ipw(_) => "model1_ipw",
            Estimator::Model1Plugin(_) => "model1_plugin",
            Estimator::Model2Ipw(_) => "model2_ipw",
            Estimator::Mar { .. } => "mar",
            Estimator::Mcar => "mcar",
        }
    }

    pub fn model1(schema: &VariableSchema) -> Self {
        Estimator::Model1Ipw(Model1Spec::default_for(schema))
    }

    pub fn model2(schema: &VariableSchema) -> Self {
        Estimator::Model2Ipw(Model2Spec::default_for(schema))
    }

    pub fn mar(schema: &VariableSchema) -> Self {
        Estimator::Mar { x_basis: BasisSpec::polynomial_x(schema.n_covariates(), 1) }
    }

    pub fn estimate(&self, dataset: &PooledDataset, config: &EstimatorConfig) -> Result<EstimateReport> {
        match self {
            Estimator::Model1Ipw(spec) => estimate_model1(dataset, spec, config),
            Estimator::Model1Plugin(spec) => {
                let counts = dataset.ensure_estimable()?;
                let (beta, outcome) = model1::plugin_with_outcome(dataset, spec)?;
                let mut rep = EstimateReport::simple(self.name(), beta, counts);
                rep.nuisance.outcome = Some(outcome);
                Ok(rep)
            }
            Estimator::Model2Ipw(spec) => estimate_model2(dataset, spec, config),
            Estimator::Mar { x_basis } => mar_estimate(dataset, x_basis),
            Estimator::Mcar => mcar_estimate(dataset),
        }
    }
}

pub(crate) struct PrimaryRow {
    pub x: Vec<f64>,
    pub m: Option<Vec<f64>>,
    pub y: Option<f64>,
}

/// Dataset split into numeric rows, with M already expanded.
pub(crate) struct Prepared {
    pub counts: DomainCounts,
    pub primary: Vec<PrimaryRow>,
    pub aux_complete: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Prepared {
    pub fn new(dataset: &PooledDataset) -> Result<Self> {
        let counts = dataset.ensure_estimable()?;
        let schema = &dataset.schema;
        let mut primary = Vec::with_capacity(counts.n_primary);
        let mut aux_complete = Vec::with_capacity(counts.auxiliary_complete);
        for rec in &dataset.records {
            let m = rec.m.as_ref().map(|m| expand_m(m, schema)).transpose()?;
            match rec.g {
                DomainTag::Primary => primary.push(PrimaryRow { x: rec.x.clone(), m, y: rec.y }),
                DomainTag::Auxiliary => {
                    if let Some(m) = m {
                        aux_complete.push((rec.x.clone(), m));
                    }
                }
            }
        }
        Ok(Prepared { counts, primary, aux_complete })
    }

    pub fn n_primary(&self) -> f64 {
        self.primary.len() as f64
    }

    pub fn complete(&self) -> impl Iterator<Item = (&[f64], &[f64], f64)> {
        self.primary.iter().filter_map(|r| match (&r.m, r.y) {
            (Some(m), Some(y)) => Some((r.x.as_slice(), m.as_slice(), y)),
            _ => None,
        })
    }
}

/// Fitted auxiliary-domain regressions of each `h` component on
/// `aux_regression_basis(X)`, evaluated at every primary-domain row.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxTargets {
    /// Per-primary-row predicted `E[h(X, M) | X, R=1, G=aux]`, in the order
    /// primary rows appear in the dataset.
    pub targets: Vec<Vec<f64>>,
    /// Dataset index of each primary row.
    pub primary_index: Vec<usize>,
    /// One identity-link model per `h` component.
    pub regressions: Vec<CoefficientModel>,
}

impl AuxTargets {
    /// Average of the targets over the primary domain.
    pub fn mean(&self) -> Vec<f64> {
        let k = self.regressions.len();
        let n = self.targets.len() as f64;
        let mut acc = vec![0.0; k];
        for t in &self.targets {
            for (a, v) in acc.iter_mut().zip(t) {
                *a += v;
            }
        }
        acc.into_iter().map(|a| a / n).collect()
    }
}

fn check_x_only(basis: &BasisSpec, what: &str) -> Result<()> {
    if basis.uses_m() || basis.uses_y() {
        return Err(Error::InvalidBasis(format!("{what} `{basis}` may only use covariates")));
    }
    Ok(())
}

pub(crate) fn aux_targets_prepared(
    prep: &Prepared,
    h_basis: &BasisSpec,
    aux_basis: &BasisSpec,
) -> Result<(Vec<Vec<f64>>, Vec<CoefficientModel>)> {
    check_x_only(aux_basis, "auxiliary regression basis")?;
    let n_aux = prep.aux_complete.len();
    if n_aux == 0 {
        return Err(Error::InsufficientData("no complete cases in the auxiliary domain".into()));
    }
    let p = aux_basis.len();
    if n_aux < p {
        return Err(Error::InsufficientData(format!(
            "{n_aux} auxiliary complete cases for a {p}-term regression"
        )));
    }
    let k = h_basis.len();
    let mut design = DMatrix::zeros(n_aux, p);
    let mut targets = DMatrix::zeros(n_aux, k);
    let mut buf = Vec::new();
    for (i, (x, m)) in prep.aux_complete.iter().enumerate() {
        aux_basis.evaluate_into(x, None, None, &mut buf)?;
        design.row_mut(i).copy_from_slice(&buf);
        h_basis.evaluate_into(x, Some(m), None, &mut buf)?;
        targets.row_mut(i).copy_from_slice(&buf);
    }
    let names: Vec<String> = (0..p).map(|j| aux_basis.term_name(j)).collect();
    let coef = least_squares_multi(&design, &targets, &names)?;
    let regressions = (0..k)
        .map(|c| CoefficientModel::new(aux_basis.clone(), coef.column(c).iter().copied().collect(), Link::Identity))
        .collect::<Result<Vec<_>>>()?;
    let mut per_row = Vec::with_capacity(prep.primary.len());
    for row in &prep.primary {
        aux_basis.evaluate_into(&row.x, None, None, &mut buf)?;
        per_row.push((0..k).map(|c| buf.iter().zip(coef.column(c).iter()).map(|(a, b)| a * b).sum()).collect());
    }
    Ok((per_row, regressions))
}

/// Least-squares fits of each `h(X, M)` component on the auxiliary complete
/// cases, predicted at every primary-domain covariate row.
pub fn fit_aux_moment_targets(dataset: &PooledDataset, h_basis: &BasisSpec, aux_basis: &BasisSpec) -> Result<AuxTargets> {
    let prep = Prepared::new(dataset)?;
    let (targets, regressions) = aux_targets_prepared(&prep, h_basis, aux_basis)?;
    let primary_index = dataset
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.g == DomainTag::Primary)
        .map(|(i, _)| i)
        .collect();
    Ok(AuxTargets { targets, primary_index, regressions })
}

pub(crate) struct WeightStats {
    pub capped: usize,
    pub min: f64,
    pub max: f64,
}

impl WeightStats {
    pub fn new() -> Self {
        WeightStats { capped: 0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    pub fn push(&mut self, w: crate::models::Weight) {
        self.capped += w.capped as usize;
        self.min = self.min.min(w.value);
        self.max = self.max.max(w.value);
    }

    pub fn apply(&self, diag: &mut Diagnostics) {
        diag.weight_cap_count = self.capped;
        if self.min.is_finite() {
            diag.min_weight = Some(self.min);
            diag.max_weight = Some(self.max);
        }
    }
}
