use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DomainTag, PooledDataset};
use crate::error::{Error, Result};
use crate::estimate::{ConfidenceInterval, EstimateReport, Estimator, EstimatorConfig};
use crate::simulation::derive_seed;

/// Largest tolerated share of resamples on which the estimator fails.
const MAX_FAILED_SHARE: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub k: usize,
    /// Resample within each domain, keeping domain sizes fixed.
    pub stratified_by_domain: bool,
    pub ci_level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { k: 1000, stratified_by_domain: true, ci_level: 0.95, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOutcome {
    /// Point estimate on the original data, with `ci` filled in.
    pub report: EstimateReport,
    /// Resample estimates in resample order; `None` where the estimator failed.
    pub resamples: Vec<Option<f64>>,
}

/// Linear-interpolation quantile (the "type 7" definition) of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Row indices of one bootstrap resample.
pub fn resample_indices(dataset: &PooledDataset, stratified: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = dataset.len();
    if !stratified {
        return (0..n).map(|_| rng.gen_range(0..n)).collect();
    }
    let mut out = Vec::with_capacity(n);
    for tag in [DomainTag::Primary, DomainTag::Auxiliary] {
        let stratum: Vec<usize> = (0..n).filter(|&i| dataset.records[i].g == tag).collect();
        if stratum.is_empty() {
            continue;
        }
        out.extend((0..stratum.len()).map(|_| stratum[rng.gen_range(0..stratum.len())]));
    }
    out
}

/// Percentile bootstrap interval around `estimator` on `dataset`. Resamples
/// run in parallel; each uses a seed derived from the master seed and its
/// index, so results do not depend on the worker count.
pub fn bootstrap_ci(
    dataset: &PooledDataset,
    estimator: &Estimator,
    est_config: &EstimatorConfig,
    config: &BootstrapConfig,
) -> Result<BootstrapOutcome> {
    if config.k < 2 {
        return Err(Error::Config(format!("bootstrap needs at least 2 resamples, got {}", config.k)));
    }
    if !(config.ci_level > 0.0 && config.ci_level < 1.0) {
        return Err(Error::Config(format!("confidence level must lie in (0, 1), got {}", config.ci_level)));
    }
    let mut report = estimator.estimate(dataset, est_config)?;
    let resamples: Vec<Option<f64>> = (0..config.k)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, b as u64));
            let idx = resample_indices(dataset, config.stratified_by_domain, &mut rng);
            let boot = PooledDataset::new(idx.iter().map(|&i| dataset.records[i].clone()).collect(), dataset.schema.clone());
            estimator.estimate(&boot, est_config).ok().map(|r| r.beta_hat).filter(|b| b.is_finite())
        })
        .collect();
    let mut ok: Vec<f64> = resamples.iter().flatten().copied().collect();
    let n_failed = config.k - ok.len();
    if n_failed as f64 > MAX_FAILED_SHARE * config.k as f64 || ok.is_empty() {
        return Err(Error::BootstrapFailures { failed: n_failed, total: config.k });
    }
    ok.sort_by(f64::total_cmp);
    let tail = (1.0 - config.ci_level) / 2.0;
    let lo = percentile(&ok, tail);
    let hi = percentile(&ok, 1.0 - tail);
    let beta = report.beta_hat;
    report.ci = Some(ConfidenceInterval {
        lo,
        hi,
        width: hi - lo,
        level: config.ci_level,
        method: if config.stratified_by_domain { "percentile, stratified by domain" } else { "percentile" }.to_string(),
        resamples: config.k,
        n_failed,
        excludes_estimate: beta < lo || beta > hi,
    });
    if n_failed > 0 {
        report.diagnostics.warnings.push(format!("{n_failed} of {} bootstrap resamples failed", config.k));
    }
    Ok(BootstrapOutcome { report, resamples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{UnitRecord, VariableSchema};
    use crate::models::BasisSpec;
    use crate::simulation::{generate_model1, Model1Design, Setting};
    use proptest::prelude::*;

    #[test]
    fn percentile_type7() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 1.0), 5.0);
        assert!((percentile(&v, 0.1) - 1.4).abs() < 1e-12);
        assert!((percentile(&[0.0, 10.0], 0.025) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn repeated_row_gives_zero_width() {
        let mut recs = vec![UnitRecord::primary_complete(vec![0.5], 1.0, 2.0); 30];
        recs.extend(vec![UnitRecord::auxiliary(vec![0.5], Some(1.0)); 10]);
        let ds = PooledDataset::new(recs, VariableSchema::scalar());
        let cfg = BootstrapConfig { k: 50, ..Default::default() };
        let out = bootstrap_ci(&ds, &Estimator::Mcar, &EstimatorConfig::default(), &cfg).unwrap();
        let ci = out.report.ci.unwrap();
        assert_eq!(ci.width, 0.0);
        assert_eq!(ci.lo, 2.0);
        assert!(!ci.excludes_estimate);
    }

    #[test]
    fn deterministic_for_seed() {
        let sim = generate_model1(&Model1Design::new(400, Setting::T), 3);
        let est = Estimator::model1(&sim.dataset.schema);
        let cfg = BootstrapConfig { k: 40, seed: 9, ..Default::default() };
        let a = bootstrap_ci(&sim.dataset, &est, &EstimatorConfig::default(), &cfg).unwrap();
        let b = bootstrap_ci(&sim.dataset, &est, &EstimatorConfig::default(), &cfg).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_ci(&sim.dataset, &est, &EstimatorConfig::default(), &BootstrapConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.resamples, c.resamples);
    }

    #[test]
    fn too_many_failures_is_an_error() {
        // Three auxiliary rows fit the quadratic auxiliary regression only
        // when a resample draws all three distinct rows (2 in 9 chance).
        let mut recs = Vec::new();
        for i in 0..40 {
            let x = i as f64 / 20.0 - 1.0;
            if i % 3 == 0 {
                recs.push(UnitRecord::primary_missing(vec![x]));
            } else {
                recs.push(UnitRecord::primary_complete(vec![x], x * x + (i % 5) as f64 * 0.1, x + 1.0));
            }
        }
        for x in [-1.0, 0.0, 1.0] {
            recs.push(UnitRecord::auxiliary(vec![x], Some(0.4 * x * x)));
        }
        let ds = PooledDataset::new(recs, VariableSchema::scalar());
        let est = Estimator::Model1Ipw(crate::estimate::Model1Spec {
            propensity_basis: BasisSpec::intercept(),
            h_basis: BasisSpec::intercept(),
            aux_regression_basis: BasisSpec::polynomial_x(1, 2),
            outcome_basis: BasisSpec::intercept(),
        });
        est.estimate(&ds, &EstimatorConfig::default()).unwrap();
        let cfg = BootstrapConfig { k: 100, ..Default::default() };
        let err = bootstrap_ci(&ds, &est, &EstimatorConfig::default(), &cfg).unwrap_err();
        assert!(matches!(err, Error::BootstrapFailures { total: 100, .. }), "{err}");
    }

    #[test]
    fn rejects_single_resample() {
        let sim = generate_model1(&Model1Design::new(50, Setting::T), 1);
        let cfg = BootstrapConfig { k: 1, ..Default::default() };
        assert!(bootstrap_ci(&sim.dataset, &Estimator::Mcar, &EstimatorConfig::default(), &cfg).is_err());
    }

    proptest! {
        #[test]
        fn stratified_resample_keeps_domain_sizes(seed in 0u64..200, n in 10usize..200) {
            let sim = generate_model1(&Model1Design::new(n, Setting::T), seed);
            let ds = &sim.dataset;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = resample_indices(ds, true, &mut rng);
            let np = idx.iter().filter(|&&i| ds.records[i].is_primary()).count();
            prop_assert_eq!(idx.len(), ds.len());
            prop_assert_eq!(np, ds.counts().n_primary);
        }
    }
}
