//! Synthetic stand-in for the hospitalization application: an externally
//! formatted CSV (period, county score, race, hospitalization) drawn from a
//! known law satisfying the first model's assumptions, plus the schema map
//! that ingests it.
//!
//! Law, identical in both periods except where noted:
//! - county score `X`: uniform on `[-1, 1]` (primary); density `(x+1)/2`
//!   (auxiliary)
//! - race `M` in {White, Black, Other}: `p(Black|x) = 0.25 + 0.10x`,
//!   `p(Other|x) = 0.15 - 0.05x`
//! - hospitalized `Y`: `logistic(0.9 + 0.6x + 0.4 Black - 0.3 Other)`
//! - primary response: `logistic(-0.98 + 0.5x + 0.6 Black - 0.4 Other)`
//! - auxiliary response: `logistic(-0.10 + 0.8x)`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::simulation::derive_seed;

pub const PRIMARY_PERIOD: &str = "2020-03";
pub const AUXILIARY_PERIOD: &str = "2023-03";
pub const RACE_LEVELS: [&str; 3] = ["White", "Black", "Other"];

pub const SCHEMA_MAP: &str = r#"[columns]
domain = "period"
x = ["county_score"]
m = "race"
y = "hospitalized"

[domain]
primary = "2020-03"
auxiliary = "2023-03"

[levels]
m = ["White", "Black", "Other"]
y = ["no", "yes"]

[options]
missing_token = "?"
"#;

const QUAD_POINTS: usize = 200_000;

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn race_probs(x: f64) -> [f64; 3] {
    let black = 0.25 + 0.10 * x;
    let other = 0.15 - 0.05 * x;
    [1.0 - black - other, black, other]
}

fn race_shift(race: usize, black: f64, other: f64) -> f64 {
    [0.0, black, other][race]
}

fn hospitalization(x: f64, race: usize) -> f64 {
    logistic(0.9 + 0.6 * x + race_shift(race, 0.4, -0.3))
}

fn primary_response(x: f64, race: usize) -> f64 {
    logistic(-0.98 + 0.5 * x + race_shift(race, 0.6, -0.4))
}

fn auxiliary_response(x: f64) -> f64 {
    logistic(-0.10 + 0.8 * x)
}

/// Midpoint rule over `[-1, 1]` against a density on that interval.
fn integrate(density: impl Fn(f64) -> f64, f: impl Fn(f64) -> f64) -> f64 {
    let h = 2.0 / QUAD_POINTS as f64;
    (0..QUAD_POINTS)
        .map(|i| {
            let x = -1.0 + (i as f64 + 0.5) * h;
            density(x) * f(x) * h
        })
        .sum()
}

/// Hospitalization rate in the primary period, by quadrature.
pub fn fixture_true_beta() -> f64 {
    integrate(|_| 0.5, |x| (0..3).map(|r| race_probs(x)[r] * hospitalization(x, r)).sum())
}

/// Expected `(primary, auxiliary)` missing rates, by quadrature.
pub fn fixture_missing_rates() -> (f64, f64) {
    let primary = integrate(|_| 0.5, |x| (0..3).map(|r| race_probs(x)[r] * (1.0 - primary_response(x, r))).sum());
    let auxiliary = integrate(|x| (x + 1.0) / 2.0, |x| 1.0 - auxiliary_response(x));
    (primary, auxiliary)
}

fn draw_race(rng: &mut ChaCha8Rng, x: f64) -> usize {
    let p = race_probs(x);
    let u: f64 = rng.gen();
    if u < p[0] {
        0
    } else if u < p[0] + p[1] {
        1
    } else {
        2
    }
}

/// External-format CSV with header `period,county_score,race,hospitalized`.
/// Primary rows come first, then auxiliary rows.
pub fn generate_fixture_csv(n_primary: usize, n_auxiliary: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let mut out = String::from("period,county_score,race,hospitalized\n");
    for _ in 0..n_primary {
        let x = 2.0 * rng.gen::<f64>() - 1.0;
        let race = draw_race(&mut rng, x);
        let y = rng.gen::<f64>() < hospitalization(x, race);
        let observed = rng.gen::<f64>() < primary_response(x, race);
        if observed {
            let y = if y { "yes" } else { "no" };
            out.push_str(&format!("{PRIMARY_PERIOD},{x},{},{y}\n", RACE_LEVELS[race]));
        } else {
            out.push_str(&format!("{PRIMARY_PERIOD},{x},?,?\n"));
        }
    }
    for _ in 0..n_auxiliary {
        let x = 2.0 * rng.gen::<f64>().sqrt() - 1.0;
        let race = draw_race(&mut rng, x);
        let observed = rng.gen::<f64>() < auxiliary_response(x);
        let race = if observed { RACE_LEVELS[race] } else { "?" };
        out.push_str(&format!("{AUXILIARY_PERIOD},{x},{race},?\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_targets() {
        let (p, a) = fixture_missing_rates();
        assert!((p - 0.70).abs() < 0.005, "{p}");
        assert!((a - 0.46).abs() < 0.005, "{a}");
        // closed-form check of the rate's race-free part: E[logistic(0.9 + 0.6X)] with X uniform
        let plain = integrate(|_| 0.5, |x| hospitalization(x, 0));
        let antiderivative = |x: f64| (1.0 + (0.9 + 0.6 * x).exp()).ln() / 0.6;
        assert!((plain - (antiderivative(1.0) - antiderivative(-1.0)) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(generate_fixture_csv(50, 40, 3), generate_fixture_csv(50, 40, 3));
        assert_ne!(generate_fixture_csv(50, 40, 3), generate_fixture_csv(50, 40, 4));
    }
}
