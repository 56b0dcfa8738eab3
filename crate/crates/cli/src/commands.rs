use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mnar_fusion::csv_io::{read_dataset_path, write_dataset_path, write_truth, CsvOptions};
use mnar_fusion::data::{PooledDataset, VariableSchema};
use mnar_fusion::estimate::{EstimateReport, Estimator, EstimatorConfig, Model1Spec, Model2Spec};
use mnar_fusion::fixture;
use mnar_fusion::inference::{bootstrap_ci, replicate as run_replicate, write_long_csv, write_report_csv, write_report_text};
use mnar_fusion::inference::{BootstrapConfig, ReplicationPlan};
use mnar_fusion::ingest::{ingest_external_path, missing_rate_summary, SchemaMap};
use mnar_fusion::models::BasisSpec;
use mnar_fusion::oracle::{known_odds_ratio_law, model1_checks, model2_checks, run_battery, shadow_violation_law};
use mnar_fusion::oracle::{CheckResult, DiscreteFullLaw};
use mnar_fusion::simulation::{Design, Setting};

use crate::config::{EstimateConfig, FixtureConfig, IngestConfig, OracleConfig, ReplicateConfig, SimulateConfig};
use crate::{usage, EstimateArgs, FixtureArgs, IngestArgs, OracleArgs, ReplicateArgs, SimulateArgs};

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("missing required option --{flag}")))
}

fn check_model(model: u8) -> Result<u8> {
    if model == 1 || model == 2 {
        Ok(model)
    } else {
        Err(usage(format!("--model must be 1 or 2, got {model}")))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn existing(path: PathBuf, what: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

pub fn simulate(a: SimulateArgs, cfg: &SimulateConfig, out_dir: &Path) -> Result<()> {
    let model = check_model(required(a.model.or(cfg.model), "model")?)?;
    let setting = a.setting.or(cfg.setting).unwrap_or(Setting::T);
    let n = required(a.n.or(cfg.n), "n")?;
    if n == 0 {
        return Err(usage("--n must be positive"));
    }
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let prefix = a.prefix.or_else(|| cfg.prefix.clone()).unwrap_or_else(|| format!("model{model}_{setting}_n{n}_seed{seed}"));
    let sim = Design::new(model, n, setting)?.generate(seed);
    let data_path = out_dir.join(format!("{prefix}.csv"));
    let truth_path = out_dir.join(format!("{prefix}_truth.csv"));
    write_dataset_path(&sim.dataset, &data_path)?;
    write_truth(&sim.dataset, &sim.truth, create(&truth_path)?)?;
    let c = sim.dataset.counts();
    println!("wrote {} ({})", data_path.display(), missing_rate_summary(&c));
    println!("wrote {}", truth_path.display());
    Ok(())
}

fn parse_basis(text: Option<&String>) -> Result<Option<BasisSpec>> {
    Ok(match text {
        Some(t) => Some(BasisSpec::parse(t)?),
        None => None,
    })
}

struct BasisOverrides {
    propensity: Option<BasisSpec>,
    h: Option<BasisSpec>,
    aux: Option<BasisSpec>,
    outcome: Option<BasisSpec>,
    baseline: Option<BasisSpec>,
}

fn model1_spec(schema: &VariableSchema, o: &BasisOverrides) -> Model1Spec {
    let mut spec = Model1Spec::default_for(schema);
    if let Some(b) = &o.propensity {
        spec.propensity_basis = b.clone();
    }
    if let Some(b) = &o.h {
        spec.h_basis = b.clone();
    }
    if let Some(b) = &o.aux {
        spec.aux_regression_basis = b.clone();
    }
    if let Some(b) = &o.outcome {
        spec.outcome_basis = b.clone();
    }
    spec
}

fn build_estimator(name: &str, schema: &VariableSchema, o: &BasisOverrides, or_x: bool, gamma: Option<f64>) -> Result<Estimator> {
    Ok(match name {
        "1" | "model1" | "ipw1" => Estimator::Model1Ipw(model1_spec(schema, o)),
        "plugin" => Estimator::Model1Plugin(model1_spec(schema, o)),
        "2" | "model2" | "ipw2" => {
            let mut spec = Model2Spec::default_for(schema);
            if let Some(b) = &o.baseline {
                spec.baseline_basis = b.clone();
            }
            if let Some(b) = &o.h {
                spec.h_basis = b.clone();
            }
            if let Some(b) = &o.aux {
                spec.aux_regression_basis = b.clone();
            }
            spec.or_x_interaction = or_x;
            spec.fixed_gamma = gamma;
            Estimator::Model2Ipw(spec)
        }
        "mar" => match &o.outcome {
            Some(b) => Estimator::Mar { x_basis: b.clone() },
            None => Estimator::mar(schema),
        },
        "mcar" => Estimator::Mcar,
        other => return Err(usage(format!("unknown estimator `{other}` (expected 1, 2, plugin, mar or mcar)"))),
    })
}

fn print_report(rep: &EstimateReport) {
    let c = &rep.diagnostics.counts;
    println!("estimator: {}", rep.estimator);
    println!("beta_hat: {:.6}", rep.beta_hat);
    println!("{}", missing_rate_summary(c));
    if let Some(ci) = &rep.ci {
        println!(
            "{:.0}% {} interval: [{:.6}, {:.6}] (width {:.6}, {} resamples, {} failed)",
            100.0 * ci.level,
            ci.method,
            ci.lo,
            ci.hi,
            ci.width,
            ci.resamples,
            ci.n_failed
        );
    }
    if let Some(s) = &rep.solver {
        println!("solver: {:?} after {} iterations, residual norm {:.3e}", s.status, s.iterations, s.final_residual_norm);
    }
    if rep.diagnostics.weight_cap_count > 0 {
        println!("weights capped or floored: {}", rep.diagnostics.weight_cap_count);
    }
    for w in &rep.diagnostics.warnings {
        println!("warning: {w}");
    }
}

pub fn estimate(a: EstimateArgs, cfg: &EstimateConfig, out_dir: &Path) -> Result<()> {
    let data = existing(required(a.data.or_else(|| cfg.data.clone()), "data")?, "data file")?;
    let model = required(a.model.or_else(|| cfg.model.clone()), "model")?;
    let dataset: PooledDataset = match a.schema_map.or_else(|| cfg.schema_map.clone()) {
        Some(map_path) => {
            let map = SchemaMap::from_path(existing(map_path, "schema map")?)?;
            ingest_external_path(&data, &map)?
        }
        None => {
            let mut opts = CsvOptions::default();
            if let Some(t) = a.missing_token.or_else(|| cfg.missing_token.clone()) {
                opts.missing_token = t;
            }
            read_dataset_path(&data, &opts)?
        }
    };
    let overrides = BasisOverrides {
        propensity: parse_basis(a.propensity_basis.as_ref().or(cfg.propensity_basis.as_ref()))?,
        h: parse_basis(a.h_basis.as_ref().or(cfg.h_basis.as_ref()))?,
        aux: parse_basis(a.aux_basis.as_ref().or(cfg.aux_basis.as_ref()))?,
        outcome: parse_basis(a.outcome_basis.as_ref().or(cfg.outcome_basis.as_ref()))?,
        baseline: parse_basis(a.baseline_basis.as_ref().or(cfg.baseline_basis.as_ref()))?,
    };
    let estimator = build_estimator(
        &model,
        &dataset.schema,
        &overrides,
        a.or_x_interaction || cfg.or_x_interaction,
        a.fixed_gamma.or(cfg.fixed_gamma),
    )?;
    let est_cfg = EstimatorConfig::default();
    let report = match a.bootstrap.or(cfg.bootstrap) {
        Some(k) => {
            let boot = BootstrapConfig {
                k,
                stratified_by_domain: !(a.unstratified || cfg.unstratified),
                ci_level: a.ci_level.or(cfg.ci_level).unwrap_or(0.95),
                seed: a.bootstrap_seed.or(cfg.bootstrap_seed).unwrap_or(0),
            };
            bootstrap_ci(&dataset, &estimator, &est_cfg, &boot)?.report
        }
        None => estimator.estimate(&dataset, &est_cfg)?,
    };
    print_report(&report);
    let path = a
        .report
        .or_else(|| cfg.report.clone())
        .unwrap_or_else(|| out_dir.join(format!("estimate_{}.json", estimator.name())));
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn replicate(a: ReplicateArgs, cfg: &ReplicateConfig, out_dir: &Path) -> Result<()> {
    let model = check_model(required(a.model.or(cfg.model), "model")?)?;
    let settings = a.setting.or_else(|| cfg.setting.clone()).unwrap_or_else(|| vec![Setting::T, Setting::F]);
    let n_values = required(a.n.or_else(|| cfg.n.clone()), "n")?;
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(usage("--n needs positive sample sizes"));
    }
    let names = a
        .estimators
        .or_else(|| cfg.estimators.clone())
        .unwrap_or_else(|| vec!["ipw".into(), "mar".into(), "mcar".into()]);
    let schema = VariableSchema::scalar();
    let overrides = BasisOverrides { propensity: None, h: None, aux: None, outcome: None, baseline: None };
    let mut estimators = Vec::new();
    for name in &names {
        let key = match name.as_str() {
            "ipw" => model.to_string(),
            "plugin" if model == 2 => bail!(usage("the plug-in estimator applies to model 1 only")),
            other => other.to_string(),
        };
        estimators.push((name.clone(), build_estimator(&key, &schema, &overrides, false, None)?));
    }
    let plan = ReplicationPlan {
        model,
        settings,
        n_values,
        n_reps: a.reps.or(cfg.reps).unwrap_or(1000),
        seed: a.seed.or(cfg.seed).unwrap_or(0),
    };
    let report = run_replicate(&plan, &estimators, &EstimatorConfig::default(), |d| d.true_beta().value)?;
    let summary = out_dir.join(format!("replicate_model{model}.csv"));
    let long = out_dir.join(format!("replicate_model{model}_long.csv"));
    write_report_csv(&report, create(&summary)?)?;
    write_long_csv(&report, create(&long)?)?;
    write_report_text(&report, std::io::stdout().lock())?;
    println!("wrote {} and {}", summary.display(), long.display());
    Ok(())
}

fn write_check_rows(w: &mut csv::Writer<BufWriter<File>>, source: &str, checks: &[CheckResult]) -> Result<()> {
    for c in checks {
        w.write_record([
            source.to_string(),
            c.check.name().to_string(),
            c.value.to_string(),
            c.check.tolerance().to_string(),
            c.passed().to_string(),
        ])?;
    }
    Ok(())
}

pub fn oracle_check(a: OracleArgs, cfg: &OracleConfig, out_dir: &Path) -> Result<()> {
    let laws = a.laws.or(cfg.laws).unwrap_or(if a.law.is_empty() && cfg.law.is_empty() { 100 } else { 0 });
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let law_model = check_model(a.law_model.or(cfg.law_model).unwrap_or(2))?;
    let files = if a.law.is_empty() { cfg.law.clone() } else { a.law };
    let out_path = out_dir.join("oracle_check.csv");
    let mut w = csv::Writer::from_writer(create(&out_path)?);
    w.write_record(["source", "check", "value", "tolerance", "passed"])?;
    let mut n_failed = 0usize;

    if laws > 0 {
        let report = run_battery(laws, seed);
        for (check, value) in &report.max_residuals {
            w.write_record([
                "battery".to_string(),
                check.name().to_string(),
                value.to_string(),
                check.tolerance().to_string(),
                (*value <= check.tolerance()).to_string(),
            ])?;
        }
        println!(
            "battery: {laws} laws per model from seed {seed}, {} ill-conditioned draws replaced",
            report.model2_rejections
        );
        for (check, value) in &report.max_residuals {
            println!("  {:<24} max residual {value:.3e} (tolerance {:.0e})", check.name(), check.tolerance());
        }
        for f in &report.failures {
            println!(
                "FAIL model {} law seed {}: {} residual {:.3e}{}",
                f.model,
                f.law_seed,
                f.check.name(),
                f.value,
                f.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
            );
        }
        n_failed += report.failures.len();
    }

    for path in files {
        let path = existing(path, "law file")?;
        let text = std::fs::read_to_string(&path)?;
        let law = DiscreteFullLaw::from_text(&text).with_context(|| format!("reading law {}", path.display()))?;
        law.validate().with_context(|| format!("law {}", path.display()))?;
        let checks = if law_model == 1 { model1_checks(&law) } else { model2_checks(&law) };
        let source = path.display().to_string();
        write_check_rows(&mut w, &source, &checks)?;
        for c in &checks {
            let status = if c.passed() { "ok  " } else { "FAIL" };
            let detail = c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default();
            println!("{status} {source}: {} residual {:.3e}{detail}", c.check.name(), c.value);
        }
        n_failed += checks.iter().filter(|c| !c.passed()).count();
    }
    w.flush()?;
    println!("wrote {}", out_path.display());
    if n_failed > 0 {
        bail!("{n_failed} oracle check(s) failed");
    }
    Ok(())
}

pub fn ingest(a: IngestArgs, cfg: &IngestConfig, out_dir: &Path) -> Result<()> {
    let data = existing(required(a.data.or_else(|| cfg.data.clone()), "data")?, "data file")?;
    let map_path = existing(required(a.schema_map.or_else(|| cfg.schema_map.clone()), "schema-map")?, "schema map")?;
    let map = SchemaMap::from_path(&map_path)?;
    let dataset = ingest_external_path(&data, &map)?;
    let stem = data.file_stem().and_then(|s| s.to_str()).unwrap_or("ingested");
    let output = a.output.or_else(|| cfg.output.clone()).unwrap_or_else(|| out_dir.join(format!("{stem}_pooled.csv")));
    println!("{}", missing_rate_summary(&dataset.counts()));
    write_dataset_path(&dataset, &output)?;
    println!("wrote {}", output.display());
    Ok(())
}

/// Odds-ratio slope of the bundled law satisfying the shadow-variable
/// assumptions, and response tilt of the bundled law violating them.
const SHADOW_LAW_SLOPE: f64 = 0.3;
const VIOLATION_TILT: f64 = 0.8;

pub fn fixture(a: FixtureArgs, cfg: &FixtureConfig, out_dir: &Path) -> Result<()> {
    let n_primary = a.n_primary.or(cfg.n_primary).unwrap_or(3000);
    let n_auxiliary = a.n_auxiliary.or(cfg.n_auxiliary).unwrap_or(2000);
    let seed = a.seed.or(cfg.seed).unwrap_or(1);
    if n_primary == 0 || n_auxiliary == 0 {
        return Err(usage("fixture sizes must be positive"));
    }
    let files = [
        (out_dir.join("covid_like.csv"), fixture::generate_fixture_csv(n_primary, n_auxiliary, seed)),
        (out_dir.join("covid_like_schema.toml"), fixture::SCHEMA_MAP.to_string()),
        (out_dir.join("laws/shadow_variable_law.csv"), known_odds_ratio_law(SHADOW_LAW_SLOPE).to_text()),
        (out_dir.join("laws/shadow_violation_law.csv"), shadow_violation_law(VIOLATION_TILT).to_text()),
    ];
    for (path, text) in &files {
        let mut w = create(path)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        println!("wrote {}", path.display());
    }
    let (mp, ma) = fixture::fixture_missing_rates();
    println!(
        "population truth {:.6}; expected missing rates {:.1}% primary, {:.1}% auxiliary",
        fixture::fixture_true_beta(),
        100.0 * mp,
        100.0 * ma
    );
    Ok(())
}
