use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

use super::assumptions::outcome_matrix;
use super::law::{DiscreteFullLaw, PRIMARY};

/// Share of each random conditional taken from the uniform distribution, so
/// every cell stays bounded away from zero.
const UNIFORM_MIX: f64 = 0.25;
/// Smallest singular value accepted for the completeness matrix of a random
/// second-model law.
pub const MIN_SINGULAR_VALUE: f64 = 2e-2;

const Y_LEVELS: [f64; 3] = [0.0, 1.0, 2.5];

fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let draw = Dirichlet::new(&vec![1.0; n]).expect("positive concentration").sample(rng);
    draw.into_iter().map(|p| (1.0 - UNIFORM_MIX) * p + UNIFORM_MIX / n as f64).collect()
}

fn probability(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.15..0.9)
}

/// `p(y | x, m, g)` as `[g][x][m][y]`.
fn outcome_tables(rng: &mut ChaCha8Rng, nx: usize, nm: usize, ny: usize) -> Vec<Vec<Vec<Vec<f64>>>> {
    (0..2).map(|_| (0..nx).map(|_| (0..nm).map(|_| simplex(rng, ny)).collect()).collect()).collect()
}

fn levels(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

/// Pieces shared by both generators: domain weights, `p(x | g)`, and a
/// domain-free `p(m | x)`.
struct Skeleton {
    p_g: [f64; 2],
    p_x: [Vec<f64>; 2],
    p_m: Vec<Vec<f64>>,
}

impl Skeleton {
    fn draw(rng: &mut ChaCha8Rng, nx: usize, nm: usize) -> Self {
        let g1 = rng.gen_range(0.3..0.7);
        Skeleton {
            p_g: [g1, 1.0 - g1],
            p_x: [simplex(rng, nx), simplex(rng, nx)],
            p_m: (0..nx).map(|_| simplex(rng, nm)).collect(),
        }
    }

    fn weight(&self, g: usize, x: usize, m: usize) -> f64 {
        self.p_g[g] * self.p_x[g][x] * self.p_m[x][m]
    }
}

/// Random law built along `G -> X -> M -> R -> Y`: `M | X` shared across
/// domains, auxiliary response depending on `X` only, primary response on
/// `(X, M)`, and `Y` free of `R` given `(X, M, G)`.
pub fn random_model1_law(rng: &mut ChaCha8Rng) -> DiscreteFullLaw {
    let (nx, nm, ny) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(2..=3));
    let sk = Skeleton::draw(rng, nx, nm);
    let r_primary: Vec<Vec<f64>> = (0..nx).map(|_| (0..nm).map(|_| probability(rng)).collect()).collect();
    let r_aux: Vec<f64> = (0..nx).map(|_| probability(rng)).collect();
    let p_y = outcome_tables(rng, nx, nm, ny);
    DiscreteFullLaw::from_fn(levels(nx), levels(nm), Y_LEVELS[..ny].to_vec(), |g, x, m, y, r| {
        let pr1 = if g == PRIMARY { r_primary[x][m] } else { r_aux[x] };
        sk.weight(g, x, m) * if r == 1 { pr1 } else { 1.0 - pr1 } * p_y[g][x][m][y]
    })
}

/// One draw of a second-model law along `G -> X -> M -> Y -> R`, with the
/// primary response depending on `(X, Y)` and the auxiliary response on `X`.
/// May be rank-poor; see [`random_model2_law`].
fn draw_model2_law(rng: &mut ChaCha8Rng) -> DiscreteFullLaw {
    let ny = rng.gen_range(2..=3);
    let (nx, nm) = (rng.gen_range(1..=3), rng.gen_range(ny..=ny + 1));
    let sk = Skeleton::draw(rng, nx, nm);
    let r_primary: Vec<Vec<f64>> = (0..nx).map(|_| (0..ny).map(|_| probability(rng)).collect()).collect();
    let r_aux: Vec<f64> = (0..nx).map(|_| probability(rng)).collect();
    let p_y = outcome_tables(rng, nx, nm, ny);
    DiscreteFullLaw::from_fn(levels(nx), levels(nm), Y_LEVELS[..ny].to_vec(), |g, x, m, y, r| {
        let pr1 = if g == PRIMARY { r_primary[x][y] } else { r_aux[x] };
        sk.weight(g, x, m) * p_y[g][x][m][y] * if r == 1 { pr1 } else { 1.0 - pr1 }
    })
}

/// Second-model law whose completeness matrices are well conditioned.
/// Returns the law and the number of rejected draws.
pub fn random_model2_law(rng: &mut ChaCha8Rng) -> (DiscreteFullLaw, usize) {
    let mut rejected = 0;
    loop {
        let law = draw_model2_law(rng);
        let nx = law.xs.len();
        let conditioned = (0..nx).all(|x| {
            let sv = outcome_matrix(&law, x).svd(false, false).singular_values;
            sv.iter().copied().fold(f64::INFINITY, f64::min) > MIN_SINGULAR_VALUE
        });
        if conditioned {
            return (law, rejected);
        }
        rejected += 1;
    }
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Law on `X, Y in {0, 1}` and `M in {0, 1, 2}` whose primary response is
/// `logistic(a(x) + slope * y)`, so the odds ratio is `exp(-slope * y)`.
/// `slope = 0` gives a response missing at random given `X`.
pub fn known_odds_ratio_law(slope: f64) -> DiscreteFullLaw {
    let p_x = [[0.45, 0.55], [0.6, 0.4]];
    let p_m = [[0.5, 0.3, 0.2], [0.2, 0.35, 0.45]];
    let p_y1 = [[0.2, 0.5, 0.8], [0.35, 0.6, 0.9]];
    let a = [0.4, -0.2];
    let r_aux = [0.7, 0.55];
    DiscreteFullLaw::from_fn(vec![0.0, 1.0], vec![0.0, 1.0, 2.0], vec![0.0, 1.0], |g, x, m, y, r| {
        let py = if y == 1 { p_y1[x][m] } else { 1.0 - p_y1[x][m] };
        let pr1 = if g == PRIMARY { logistic(a[x] + slope * y as f64) } else { r_aux[x] };
        0.5 * p_x[g][x] * p_m[x][m] * py * if r == 1 { pr1 } else { 1.0 - pr1 }
    })
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// [`known_odds_ratio_law`] with the primary response odds multiplied by
/// `exp(tilt * m * y)`, so `M` is no longer independent of `R` given
/// `(X, Y)`.
pub fn shadow_violation_law(tilt: f64) -> DiscreteFullLaw {
    let base = known_odds_ratio_law(0.3);
    DiscreteFullLaw::from_fn(base.xs.clone(), base.ms.clone(), base.ys.clone(), |g, x, m, y, r| {
        let joint = base.p(g, x, m, y, 0) + base.p(g, x, m, y, 1);
        if g != PRIMARY {
            return base.p(g, x, m, y, r);
        }
        let pr1 = base.p(g, x, m, y, 1) / joint;
        let odds = pr1 / (1.0 - pr1) * (tilt * (m * y) as f64).exp();
        let tilted = odds / (1.0 + odds);
        joint * if r == 1 { tilted } else { 1.0 - tilted }
    })
}
