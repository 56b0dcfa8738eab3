use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimate::{Estimator, EstimatorConfig};
use crate::simulation::{derive_seed, Design, Setting};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    pub model: u8,
    pub settings: Vec<Setting>,
    pub n_values: Vec<usize>,
    pub n_reps: usize,
    pub seed: u64,
}

/// Aggregate over the replicates of one (estimator, setting, n) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub estimator: String,
    pub model: u8,
    pub setting: Setting,
    pub n: usize,
    pub true_beta: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    /// `bias / true_beta`, in percent.
    pub pct_bias: f64,
    /// Mean of `(estimate - true_beta)^2`.
    pub mse: f64,
    /// Unbiased sample variance of the estimates.
    pub variance: f64,
    pub n_reps: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEstimate {
    pub estimator: String,
    pub model: u8,
    pub setting: Setting,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    /// `None` when the estimator failed on this replicate.
    pub estimate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub rows: Vec<ReplicationRow>,
    pub replicates: Vec<ReplicateEstimate>,
}

/// Seed of replicate `rep` in cell `(setting, n)`.
pub fn replicate_seed(master: u64, setting: Setting, n: usize, rep: usize) -> u64 {
    let s = derive_seed(master, setting as u64);
    derive_seed(derive_seed(s, n as u64), rep as u64)
}

fn summarize(estimates: &[f64], truth: f64) -> (f64, f64, f64) {
    let k = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / k;
    let mse = estimates.iter().map(|b| (b - truth).powi(2)).sum::<f64>() / k;
    let variance = if estimates.len() < 2 {
        0.0
    } else {
        estimates.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (k - 1.0)
    };
    (mean, mse, variance)
}

/// Runs every estimator on `n_reps` generated datasets per (setting, n).
/// All estimators see the same dataset within a replicate. `true_beta`
/// supplies the reference value for a design; pass `Design::true_beta` to
/// use the built-in values.
pub fn replicate(
    plan: &ReplicationPlan,
    estimators: &[(String, Estimator)],
    config: &EstimatorConfig,
    true_beta: impl Fn(&Design) -> f64,
) -> Result<ReplicationReport> {
    let mut report = ReplicationReport::default();
    if plan.n_reps == 0 {
        return Ok(report);
    }
    let mut truths: HashMap<Setting, f64> = HashMap::new();
    for &setting in &plan.settings {
        for &n in &plan.n_values {
            let design = Design::new(plan.model, n, setting)?;
            let truth = *truths.entry(setting).or_insert_with(|| true_beta(&design));
            let per_rep: Vec<(u64, Vec<Option<f64>>)> = (0..plan.n_reps)
                .into_par_iter()
                .map(|rep| {
                    let seed = replicate_seed(plan.seed, setting, n, rep);
                    let sim = design.generate(seed);
                    let est = estimators
                        .iter()
                        .map(|(_, e)| e.estimate(&sim.dataset, config).ok().map(|r| r.beta_hat).filter(|b| b.is_finite()))
                        .collect();
                    (seed, est)
                })
                .collect();
            for (j, (name, _)) in estimators.iter().enumerate() {
                let ok: Vec<f64> = per_rep.iter().filter_map(|(_, e)| e[j]).collect();
                for (rep, (seed, e)) in per_rep.iter().enumerate() {
                    report.replicates.push(ReplicateEstimate {
                        estimator: name.clone(),
                        model: plan.model,
                        setting,
                        n,
                        replicate: rep,
                        seed: *seed,
                        estimate: e[j],
                    });
                }
                let (mean, mse, variance) =
                    if ok.is_empty() { (f64::NAN, f64::NAN, f64::NAN) } else { summarize(&ok, truth) };
                let bias = mean - truth;
                report.rows.push(ReplicationRow {
                    estimator: name.clone(),
                    model: plan.model,
                    setting,
                    n,
                    true_beta: truth,
                    mean_estimate: mean,
                    bias,
                    pct_bias: 100.0 * bias / truth,
                    mse,
                    variance,
                    n_reps: plan.n_reps,
                    n_failed: plan.n_reps - ok.len(),
                });
            }
        }
    }
    Ok(report)
}

const SUMMARY_HEADER: [&str; 12] =
    ["estimator", "model", "setting", "n", "true_beta", "mean_estimate", "bias", "pct_bias", "mse", "variance", "n_reps", "n_failed"];

fn summary_fields(r: &ReplicationRow) -> [String; 12] {
    [
        r.estimator.clone(),
        r.model.to_string(),
        r.setting.to_string(),
        r.n.to_string(),
        r.true_beta.to_string(),
        r.mean_estimate.to_string(),
        r.bias.to_string(),
        r.pct_bias.to_string(),
        r.mse.to_string(),
        r.variance.to_string(),
        r.n_reps.to_string(),
        r.n_failed.to_string(),
    ]
}

pub fn write_report_csv<W: Write>(report: &ReplicationReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    for r in &report.rows {
        w.write_record(summary_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Replicate-level estimates, one row per (estimator, replicate).
pub fn write_long_csv<W: Write>(report: &ReplicationReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["estimator", "model", "setting", "n", "replicate", "seed", "estimate"])?;
    for r in &report.replicates {
        w.write_record([
            r.estimator.clone(),
            r.model.to_string(),
            r.setting.to_string(),
            r.n.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            r.estimate.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width table with four decimals for the statistics.
pub fn write_report_text<W: Write>(report: &ReplicationReport, mut writer: W) -> Result<()> {
    let rows: Vec<[String; 11]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.estimator.clone(),
                r.model.to_string(),
                r.setting.to_string(),
                r.n.to_string(),
                format!("{:.4}", r.true_beta),
                format!("{:.4}", r.bias),
                format!("{:.2}", r.pct_bias),
                format!("{:.4}", r.mse),
                format!("{:.4}", r.variance),
                r.n_reps.to_string(),
                r.n_failed.to_string(),
            ]
        })
        .collect();
    let header = ["estimator", "model", "setting", "n", "true_beta", "bias", "%bias", "mse", "var", "reps", "failed"];
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    writeln!(writer, "{}", line(header.to_vec()))?;
    for row in &rows {
        writeln!(writer, "{}", line(row.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}
