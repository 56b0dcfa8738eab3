//! Generators for the four reference designs (two models, each with a
//! correctly specified `T` and a misspecified `F` setting) and their true
//! `beta` values.
//!
//! Every generator is a pure function of `(design, seed)`. Rows are drawn
//! sequentially from a ChaCha8 stream seeded with `seed`; per-replicate seeds
//! come from [`derive_seed`], a SplitMix64 mix of the master seed and the
//! replicate index.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv_io::TruthRow;
use crate::data::{PooledDataset, UnitRecord, VariableSchema};
use crate::error::{Error, Result};
use crate::models::linear::logistic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    /// Generating law matches the estimator's working models.
    T,
    /// Generating propensity outside the working model.
    F,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::T => "T",
            Setting::F => "F",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "T" | "t" => Ok(Setting::T),
            "F" | "f" => Ok(Setting::F),
            other => Err(Error::Config(format!("setting must be T or F, got `{other}`"))),
        }
    }
}

/// SplitMix64 finalizer applied to `master + (index + 1) * golden-ratio`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn quad(c: &[f64; 3], x: f64) -> f64 {
    c[0] + c[1] * x + c[2] * x * x
}

/// A generated pooled dataset plus the pre-masking `(M, Y)` of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub dataset: PooledDataset,
    pub truth: Vec<TruthRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model1Design {
    pub n: usize,
    pub setting: Setting,
    /// `E[M | X] = b0 + b1 X + b2 X^2` in both domains.
    pub beta_m: [f64; 3],
    /// `E[Y | X, M]` coefficients on `(1, X, X^2, M)`.
    pub beta_y: [f64; 4],
    /// Primary propensity `logistic(a0 + a1 X + a2 M + a3 M^2)`.
    pub alpha: [f64; 4],
    /// Auxiliary propensity `logistic(b0 + b1 X)`.
    pub aux_propensity: [f64; 2],
    pub mean_x_primary: f64,
    pub mean_x_auxiliary: f64,
}

impl Model1Design {
    pub fn new(n: usize, setting: Setting) -> Self {
        // The misspecified setting replaces the linear M term by -M^2.
        let (a2, a3) = match setting {
            Setting::T => (1.0, 0.0),
            Setting::F => (0.0, -1.0),
        };
        Model1Design {
            n,
            setting,
            beta_m: [0.0, 0.0, 0.4],
            beta_y: [0.0, 1.0, 0.0, 1.0],
            alpha: [0.3, 0.1, a2, a3],
            aux_propensity: [1.4, 1.0],
            mean_x_primary: 1.0,
            mean_x_auxiliary: 0.0,
        }
    }

    pub fn primary_propensity(&self, x: f64, m: f64) -> f64 {
        let a = &self.alpha;
        logistic(a[0] + a[1] * x + a[2] * m + a[3] * m * m)
    }
}

pub fn generate_model1(design: &Model1Design, seed: u64) -> SimulatedData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(design.n);
    let mut truth = Vec::with_capacity(design.n);
    let by = &design.beta_y;
    for _ in 0..design.n {
        let primary = rng.gen_bool(0.5);
        let mu_x = if primary { design.mean_x_primary } else { design.mean_x_auxiliary };
        let x = mu_x + normal(&mut rng);
        let m = quad(&design.beta_m, x) + normal(&mut rng);
        if primary {
            let y = by[0] + by[1] * x + by[2] * x * x + by[3] * m + normal(&mut rng);
            let r = rng.gen::<f64>() < design.primary_propensity(x, m);
            records.push(if r { UnitRecord::primary_complete(vec![x], m, y) } else { UnitRecord::primary_missing(vec![x]) });
            truth.push(TruthRow { m_full: m, y_full: Some(y) });
        } else {
            let b = &design.aux_propensity;
            let r = rng.gen::<f64>() < logistic(b[0] + b[1] * x);
            records.push(UnitRecord::auxiliary(vec![x], r.then_some(m)));
            truth.push(TruthRow { m_full: m, y_full: None });
        }
    }
    SimulatedData { dataset: PooledDataset::new(records, VariableSchema::scalar()), truth }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model2Design {
    pub n: usize,
    pub setting: Setting,
    /// `E[M | X, R=1]` on `(1, X, X^2)`.
    pub beta_m: [f64; 3],
    /// `E[Y | X, M, R=1]` on `(1, X, X^2, M)`.
    pub beta_y: [f64; 4],
    /// Baseline `logit p(R=1 | X, Y=0)` on `(1, X, X^2)`.
    pub alpha: [f64; 3],
    /// Odds ratio `exp(-gamma Y)`.
    pub gamma: f64,
    /// Auxiliary propensity `logistic(c0 + c1 X)`.
    pub aux_propensity: [f64; 2],
    pub mean_x_primary: f64,
    pub mean_x_auxiliary: f64,
}

impl Model2Design {
    pub fn new(n: usize, setting: Setting) -> Self {
        let a2 = match setting {
            Setting::T => 0.0,
            Setting::F => 0.4,
        };
        Model2Design {
            n,
            setting,
            beta_m: [0.0, 0.0, -0.4],
            beta_y: [0.0, 1.0, 0.0, 1.0],
            alpha: [0.5, 0.4, a2],
            gamma: 0.3,
            aux_propensity: [0.0, 1.0],
            mean_x_primary: 0.0,
            mean_x_auxiliary: 1.0,
        }
    }

    /// `logit p(R=1 | X)` after integrating `Y` and `M` out of the
    /// odds-ratio-tilted normal law.
    pub fn marginal_logit(&self, x: f64) -> f64 {
        let g = self.gamma;
        let b3 = self.beta_y[3];
        let mu_y_tilde = quad(&[self.beta_y[0], self.beta_y[1], self.beta_y[2]], x);
        let mu_m = quad(&self.beta_m, x);
        mu_y_tilde * g - g * g / 2.0 + mu_m * b3 * g - b3 * b3 * g * g / 2.0 + quad(&self.alpha, x)
    }

    /// True `p(R=1 | X, Y)` in the primary domain.
    pub fn primary_propensity(&self, x: f64, y: f64) -> f64 {
        logistic(quad(&self.alpha, x) + self.gamma * y)
    }

    /// Draws `(R, M, Y)` in the order `R -> M -> Y` given `X`.
    fn draw_rmy(&self, x: f64, rng: &mut ChaCha8Rng) -> (bool, f64, f64) {
        let r = rng.gen::<f64>() < logistic(self.marginal_logit(x));
        let shift = if r { 0.0 } else { 1.0 };
        let b = &self.beta_y;
        let m = quad(&self.beta_m, x) - shift * b[3] * self.gamma + normal(rng);
        let y = b[0] + b[1] * x + b[2] * x * x + b[3] * m - shift * self.gamma + normal(rng);
        (r, m, y)
    }
}

pub fn generate_model2(design: &Model2Design, seed: u64) -> SimulatedData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(design.n);
    let mut truth = Vec::with_capacity(design.n);
    for _ in 0..design.n {
        let primary = rng.gen_bool(0.5);
        let mu_x = if primary { design.mean_x_primary } else { design.mean_x_auxiliary };
        let x = mu_x + normal(&mut rng);
        // In the auxiliary domain the drawn indicator is only a device for
        // giving M the same law given X as in the primary domain.
        let (r_tmp, m, y) = design.draw_rmy(x, &mut rng);
        if primary {
            records.push(if r_tmp { UnitRecord::primary_complete(vec![x], m, y) } else { UnitRecord::primary_missing(vec![x]) });
            truth.push(TruthRow { m_full: m, y_full: Some(y) });
        } else {
            let c = &design.aux_propensity;
            let r = rng.gen::<f64>() < logistic(c[0] + c[1] * x);
            records.push(UnitRecord::auxiliary(vec![x], r.then_some(m)));
            truth.push(TruthRow { m_full: m, y_full: None });
        }
    }
    SimulatedData { dataset: PooledDataset::new(records, VariableSchema::scalar()), truth }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    MonteCarlo { n_trials: usize, n_per_trial: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueBeta {
    pub value: f64,
    pub provenance: Provenance,
}

/// Trial count and per-trial size of the Monte Carlo true value.
pub const TRUE_BETA_TRIALS: usize = 1000;
pub const TRUE_BETA_TRIAL_SIZE: usize = 20_000;
pub const TRUE_BETA_SEED: u64 = 20_000;

/// `E[Y | G=primary] = b0 + b1 mu + b2 E[X^2] + b3 E[M]` in closed form, with
/// `E[M] = c0 + c1 mu + c2 (1 + mu^2)` for `X ~ N(mu, 1)`.
pub fn true_beta_model1(design: &Model1Design) -> TrueBeta {
    let mu = design.mean_x_primary;
    let ex2 = 1.0 + mu * mu;
    let em = design.beta_m[0] + design.beta_m[1] * mu + design.beta_m[2] * ex2;
    let b = &design.beta_y;
    TrueBeta { value: b[0] + b[1] * mu + b[2] * ex2 + b[3] * em, provenance: Provenance::Analytic }
}

/// Average over trials of the primary-domain mean of the latent outcome.
pub fn true_beta_model2_mc(design: &Model2Design, n_trials: usize, n_per_trial: usize, seed: u64) -> TrueBeta {
    let d = Model2Design { n: n_per_trial, ..design.clone() };
    let means: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let sim = generate_model2(&d, derive_seed(seed, t as u64));
            let ys: Vec<f64> = sim.truth.iter().filter_map(|t| t.y_full).collect();
            ys.iter().sum::<f64>() / ys.len() as f64
        })
        .collect();
    TrueBeta {
        value: means.iter().sum::<f64>() / n_trials as f64,
        provenance: Provenance::MonteCarlo { n_trials, n_per_trial, seed },
    }
}

pub fn true_beta_model2(design: &Model2Design) -> TrueBeta {
    true_beta_model2_mc(design, TRUE_BETA_TRIALS, TRUE_BETA_TRIAL_SIZE, TRUE_BETA_SEED)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum Design {
    #[serde(rename = "1")]
    Model1(Model1Design),
    #[serde(rename = "2")]
    Model2(Model2Design),
}

impl Design {
    pub fn new(model: u8, n: usize, setting: Setting) -> Result<Self> {
        match model {
            1 => Ok(Design::Model1(Model1Design::new(n, setting))),
            2 => Ok(Design::Model2(Model2Design::new(n, setting))),
            other => Err(Error::Config(format!("model must be 1 or 2, got {other}"))),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Design::Model1(d) => d.n,
            Design::Model2(d) => d.n,
        }
    }

    pub fn setting(&self) -> Setting {
        match self {
            Design::Model1(d) => d.setting,
            Design::Model2(d) => d.setting,
        }
    }

    pub fn model(&self) -> u8 {
        match self {
            Design::Model1(_) => 1,
            Design::Model2(_) => 2,
        }
    }

    pub fn generate(&self, seed: u64) -> SimulatedData {
        match self {
            Design::Model1(d) => generate_model1(d, seed),
            Design::Model2(d) => generate_model2(d, seed),
        }
    }

    pub fn true_beta(&self) -> TrueBeta {
        match self {
            Design::Model1(d) => true_beta_model1(d),
            Design::Model2(d) => true_beta_model2(d),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn primary_x_mean(sim: &SimulatedData) -> f64 {
        let xs: Vec<f64> = sim.dataset.records.iter().filter(|r| r.is_primary()).map(|r| r.x[0]).collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    /// `E[f(Z)]` for `Z ~ N(mu, 1)` by the midpoint rule on `mu +- 12`.
    fn normal_expectation(mu: f64, f: impl Fn(f64) -> f64) -> f64 {
        let steps = 200_000;
        let h = 24.0 / steps as f64;
        (0..steps)
            .map(|i| {
                let z = -12.0 + (i as f64 + 0.5) * h;
                f(mu + z) * (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            * h
            / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn model1_primary_x_mean() {
        let sim = generate_model1(&Model1Design::new(2000, Setting::T), 1);
        assert!((primary_x_mean(&sim) - 1.0).abs() < 0.1);
    }

    #[test]
    fn model1_missing_fractions() {
        for setting in [Setting::T, Setting::F] {
            let sim = generate_model1(&Model1Design::new(10_000, setting), 2);
            let c = sim.dataset.counts();
            let pm = c.primary_missing_rate();
            if setting == Setting::T {
                assert!(pm > 0.20 && pm < 0.40, "{pm}");
            }
            // The auxiliary law logistic(1.4 + X), X ~ N(0, 1), leaves about
            // 23% missing; compare against quadrature of that law.
            let d = Model1Design::new(1, setting);
            let expected = normal_expectation(0.0, |x| 1.0 - logistic(d.aux_propensity[0] + d.aux_propensity[1] * x));
            assert!((c.auxiliary_missing_rate() - expected).abs() < 0.02, "{} vs {expected}", c.auxiliary_missing_rate());
        }
    }

    #[test]
    fn model1_truth_is_analytic() {
        for s in [Setting::T, Setting::F] {
            let tb = true_beta_model1(&Model1Design::new(1, s));
            assert!((tb.value - 1.8).abs() < 1e-12);
            assert_eq!(tb.provenance, Provenance::Analytic);
        }
    }

    #[test]
    fn model2_missing_fraction() {
        let sim = generate_model2(&Model2Design::new(10_000, Setting::T), 3);
        let pm = sim.dataset.counts().primary_missing_rate();
        assert!(pm > 0.40 && pm < 0.50, "{pm}");
    }

    #[test]
    fn model2_missing_m_is_shifted() {
        let d = Model2Design::new(1_000_000, Setting::T);
        let sim = generate_model2(&d, 4);
        let x0 = 0.5;
        let (mut s, mut k) = (0.0, 0);
        for (rec, t) in sim.dataset.records.iter().zip(&sim.truth) {
            if rec.is_primary() && !rec.r && (rec.x[0] - x0).abs() < 0.05 {
                s += t.m_full;
                k += 1;
            }
        }
        let mean = s / k as f64;
        assert!((mean - (-0.4 * x0 * x0 - 0.3)).abs() < 0.05, "{mean} from {k}");
    }

    #[test]
    fn model2_m_law_shared_across_domains() {
        let sim = generate_model2(&Model2Design::new(1_000_000, Setting::T), 6);
        for lo in [-0.5, 0.0, 0.5, 1.0] {
            let mut acc = [(0.0, 0usize); 2];
            for (rec, t) in sim.dataset.records.iter().zip(&sim.truth) {
                if rec.x[0] >= lo && rec.x[0] < lo + 0.25 {
                    let slot = &mut acc[usize::from(!rec.is_primary())];
                    slot.0 += t.m_full;
                    slot.1 += 1;
                }
            }
            let diff = acc[0].0 / acc[0].1 as f64 - acc[1].0 / acc[1].1 as f64;
            assert!(diff.abs() < 0.05, "bin {lo}: {diff}");
        }
    }

    #[test]
    fn model2_generator_odds_ratio() {
        // Within a narrow X bin, log odds of R=1 should rise by gamma per unit Y.
        let d = Model2Design::new(2_000_000, Setting::T);
        let sim = generate_model2(&d, 9);
        let mut cells = [[0usize; 2]; 2];
        for (rec, t) in sim.dataset.records.iter().zip(&sim.truth) {
            if !rec.is_primary() || rec.x[0].abs() > 0.1 {
                continue;
            }
            let y = t.y_full.unwrap();
            let bin = if (-1.25..-0.75).contains(&y) {
                0
            } else if (0.75..1.25).contains(&y) {
                1
            } else {
                continue;
            };
            cells[bin][usize::from(rec.r)] += 1;
        }
        let lo = |c: [usize; 2]| (c[1] as f64 / c[0] as f64).ln();
        let slope = (lo(cells[1]) - lo(cells[0])) / 2.0;
        assert!((slope - 0.3).abs() < 0.06, "{slope}");
    }

    #[test]
    fn model2_truth_matches_quadrature() {
        // E[Y | R=1, X] = X - 0.4 X^2 and E[Y | R=0, X] = that minus 0.6, so
        // beta = -0.4 - 0.6 P(R=0).
        for (s, reference) in [(Setting::T, -0.659), (Setting::F, -0.615)] {
            let d = Model2Design::new(1, s);
            let shift = d.gamma + d.beta_y[3] * d.beta_y[3] * d.gamma;
            let ey1 = normal_expectation(0.0, |x| x - 0.4 * x * x);
            let p0 = normal_expectation(0.0, |x| 1.0 - logistic(d.marginal_logit(x)));
            let oracle = ey1 - shift * p0;
            assert!((oracle - reference).abs() < 0.01, "{s}: {oracle}");
            let mc = true_beta_model2_mc(&d, 50, 20_000, 7);
            assert!((mc.value - oracle).abs() < 0.01, "{s}: {} vs {oracle}", mc.value);
        }
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let d = Design::new(2, 500, Setting::F).unwrap();
        assert_eq!(d.generate(11), d.generate(11));
        assert_ne!(d.generate(11), d.generate(12));
    }

    #[test]
    fn domain_sizes_balanced() {
        let sim = generate_model1(&Model1Design::new(2000, Setting::T), 8);
        let frac = sim.dataset.counts().n_primary as f64 / 2000.0;
        assert!(frac > 0.45 && frac < 0.55);
    }

    #[test]
    fn derived_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn setting_parses() {
        assert_eq!("T".parse::<Setting>().unwrap(), Setting::T);
        assert!("X".parse::<Setting>().is_err());
    }
}
