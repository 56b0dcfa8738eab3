//! Solver for stacked sample estimating equations `r(theta) = 0`.
//!
//! Just-identified systems (as many moments as parameters) are solved by
//! Newton's method with a forward-difference Jacobian and a halving line
//! search on `||r||`; convergence means `max_i |r_i| < tol`. Overdetermined
//! systems minimize `0.5 ||r||^2` by Levenberg-damped Gauss-Newton and
//! converge when `||J^T r|| < tol`. Failed attempts restart from the initial
//! point plus seeded uniform noise.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub n_restarts: usize,
    pub restart_scale: f64,
    /// Step halvings tried per Newton iteration.
    pub max_halvings: usize,
    /// Initial Marquardt damping for the overdetermined case.
    pub damping_init: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    /// Seed for restart perturbations.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_iter: 100,
            n_restarts: 5,
            restart_scale: 0.5,
            max_halvings: 40,
            damping_init: 1e-3,
            damping_up: 10.0,
            damping_down: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    MaxIter,
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub theta_hat: Vec<f64>,
    pub status: SolverStatus,
    /// Euclidean norm of the residual vector at `theta_hat`.
    pub final_residual_norm: f64,
    /// Value of the convergence criterion at `theta_hat`.
    pub criterion: f64,
    pub iterations: usize,
    pub restarts: usize,
}

impl SolverResult {
    pub fn converged(&self) -> bool {
        self.status == SolverStatus::Converged
    }
}

pub struct MomentSystem<F> {
    pub residual: F,
    pub dim_theta: usize,
    pub init: Vec<f64>,
    pub config: SolverConfig,
}

impl<F> MomentSystem<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(residual: F, init: Vec<f64>, config: SolverConfig) -> Self {
        MomentSystem { residual, dim_theta: init.len(), init, config }
    }

    pub fn solve(&self) -> Result<SolverResult> {
        solve(self)
    }
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn finite(r: &[f64]) -> bool {
    r.iter().all(|v| v.is_finite())
}

/// Forward-difference Jacobian with step `1e-6 * (1 + |theta_j|)`.
pub fn fd_jacobian<F: Fn(&[f64]) -> Vec<f64>>(residual: &F, theta: &[f64], r0: &[f64]) -> DMatrix<f64> {
    let k = r0.len();
    let p = theta.len();
    let mut jac = DMatrix::zeros(k, p);
    let mut probe = theta.to_vec();
    for j in 0..p {
        let h = 1e-6 * (1.0 + theta[j].abs());
        probe[j] = theta[j] + h;
        let rj = residual(&probe);
        probe[j] = theta[j];
        // actual step after rounding
        let step = (theta[j] + h) - theta[j];
        for i in 0..k {
            jac[(i, j)] = (rj[i] - r0[i]) / step;
        }
    }
    jac
}

struct Attempt {
    theta: Vec<f64>,
    status: SolverStatus,
    criterion: f64,
    residual_norm: f64,
    iterations: usize,
}

/// Reciprocal condition number below which a linear solve is refused.
const RCOND_MIN: f64 = 1e-14;

fn newton_attempt<F: Fn(&[f64]) -> Vec<f64>>(f: &F, start: Vec<f64>, r0: Vec<f64>, cfg: &SolverConfig) -> Attempt {
    let mut theta = start;
    let mut r = r0;
    let mut iterations = 0;
    let done = |theta: Vec<f64>, r: &[f64], status, iterations| Attempt {
        theta,
        status,
        criterion: max_abs(r),
        residual_norm: norm(r),
        iterations,
    };
    loop {
        if max_abs(&r) < cfg.tol {
            return done(theta, &r, SolverStatus::Converged, iterations);
        }
        if iterations >= cfg.max_iter {
            return done(theta, &r, SolverStatus::MaxIter, iterations);
        }
        iterations += 1;
        let jac = fd_jacobian(f, &theta, &r);
        let svd = jac.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smax > 0.0) || smin / smax < RCOND_MIN {
            return done(theta, &r, SolverStatus::Singular, iterations);
        }
        let rhs = -DVector::from_column_slice(&r);
        let delta = match jac.lu().solve(&rhs) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => return done(theta, &r, SolverStatus::Singular, iterations),
        };
        let base = norm(&r);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(a, d)| a + t * d).collect();
            let rt = f(&trial);
            if finite(&rt) && norm(&rt) < base {
                accepted = Some((trial, rt));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((th, rt)) => {
                theta = th;
                r = rt;
            }
            // no decrease along the Newton direction
            None => return done(theta, &r, SolverStatus::MaxIter, iterations),
        }
    }
}

fn gauss_newton_attempt<F: Fn(&[f64]) -> Vec<f64>>(
    f: &F,
    start: Vec<f64>,
    r0: Vec<f64>,
    cfg: &SolverConfig,
) -> Attempt {
    let mut theta = start;
    let mut r = r0;
    let mut lambda = cfg.damping_init;
    let mut iterations = 0;
    loop {
        let jac = fd_jacobian(f, &theta, &r);
        let rv = DVector::from_column_slice(&r);
        let grad = jac.transpose() * &rv;
        let gnorm = grad.norm();
        let done = |theta: Vec<f64>, r: &[f64], status, iterations| Attempt {
            theta,
            status,
            criterion: gnorm,
            residual_norm: norm(r),
            iterations,
        };
        if gnorm < cfg.tol {
            return done(theta, &r, SolverStatus::Converged, iterations);
        }
        if iterations >= cfg.max_iter {
            return done(theta, &r, SolverStatus::MaxIter, iterations);
        }
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let diag_max = jtj.diagonal().max();
        if !(diag_max > 0.0) {
            return done(theta, &r, SolverStatus::Singular, iterations);
        }
        let base = 0.5 * rv.norm_squared();
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let mut a = jtj.clone();
            for j in 0..a.ncols() {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-12 * diag_max);
            }
            let step = a.cholesky().map(|c| c.solve(&(-&grad)));
            if let Some(delta) = step.filter(|d| d.iter().all(|v| v.is_finite())) {
                let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(x, d)| x + d).collect();
                let rt = f(&trial);
                if finite(&rt) && 0.5 * norm(&rt).powi(2) < base {
                    lambda = (lambda * cfg.damping_down).max(1e-12);
                    accepted = Some((trial, rt));
                    break;
                }
            }
            lambda *= cfg.damping_up;
        }
        match accepted {
            Some((th, rt)) => {
                theta = th;
                r = rt;
            }
            None => return done(theta, &r, SolverStatus::MaxIter, iterations),
        }
    }
}

pub fn solve<F: Fn(&[f64]) -> Vec<f64>>(system: &MomentSystem<F>) -> Result<SolverResult> {
    let cfg = &system.config;
    let f = &system.residual;
    let r_init = f(&system.init);
    if !finite(&r_init) {
        return Err(Error::NonFiniteResidual { theta: system.init.clone() });
    }
    let k = r_init.len();
    let p = system.dim_theta;
    if k < p {
        return Err(Error::InsufficientData(format!("{k} moment conditions for {p} parameters")));
    }
    let run = |start: Vec<f64>, r0: Vec<f64>| {
        if k == p {
            newton_attempt(f, start, r0, cfg)
        } else {
            gauss_newton_attempt(f, start, r0, cfg)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Attempt> = None;
    let mut total_iter = 0;
    let mut restarts = 0;
    for attempt in 0..=cfg.n_restarts {
        let (start, r0) = if attempt == 0 {
            (system.init.clone(), r_init.clone())
        } else {
            restarts = attempt;
            let start: Vec<f64> =
                system.init.iter().map(|v| v + cfg.restart_scale * rng.gen_range(-1.0..1.0)).collect();
            let r0 = f(&start);
            if !finite(&r0) {
                continue;
            }
            (start, r0)
        };
        let a = run(start, r0);
        total_iter += a.iterations;
        let converged = a.status == SolverStatus::Converged;
        let better = match &best {
            None => true,
            Some(b) => rank(&a) < rank(b),
        };
        if better {
            best = Some(a);
        }
        if converged {
            break;
        }
    }
    let best = best.expect("the initial attempt always runs");
    Ok(SolverResult {
        theta_hat: best.theta,
        status: best.status,
        final_residual_norm: best.residual_norm,
        criterion: best.criterion,
        iterations: total_iter,
        restarts,
    })
}

/// Orders attempts: converged first, then by criterion value.
fn rank(a: &Attempt) -> (u8, f64) {
    let class = match a.status {
        SolverStatus::Converged => 0,
        SolverStatus::MaxIter => 1,
        SolverStatus::Singular => 2,
    };
    (class, a.criterion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::linear::logistic;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn solve_fn<F: Fn(&[f64]) -> Vec<f64>>(f: F, init: Vec<f64>) -> SolverResult {
        MomentSystem::new(f, init, SolverConfig::default()).solve().unwrap()
    }

    #[test]
    fn linear_root() {
        let res = solve_fn(|t: &[f64]| vec![t[0] - 3.0], vec![0.0]);
        assert!(res.converged());
        assert!((res.theta_hat[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn two_dim_root() {
        let res = solve_fn(|t: &[f64]| vec![t[0] - 1.0, t[1] + 2.0], vec![0.0, 0.0]);
        assert!(res.converged());
        assert!((res.theta_hat[0] - 1.0).abs() < 1e-8 && (res.theta_hat[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn singular_system_reports_singular() {
        let res = solve_fn(|t: &[f64]| vec![t[0] + t[1] - 1.0, 2.0 * t[0] + 2.0 * t[1] - 3.0], vec![0.0, 0.0]);
        assert_eq!(res.status, SolverStatus::Singular);
    }

    #[test]
    fn nan_at_init_is_an_error() {
        let err = MomentSystem::new(|t: &[f64]| vec![t[0].ln()], vec![-1.0], SolverConfig::default())
            .solve()
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteResidual { ref theta } if theta == &vec![-1.0]));
    }

    #[test]
    fn overdetermined_consistent_system() {
        let res = solve_fn(|t: &[f64]| vec![t[0] - 2.0, 2.0 * (t[0] - 2.0), t[0] * t[0] - 4.0], vec![0.5]);
        assert!(res.converged(), "{res:?}");
        assert!((res.theta_hat[0] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn overdetermined_least_squares() {
        // minimize (t-1)^2 + (t-3)^2 -> t = 2
        let res = solve_fn(|t: &[f64]| vec![t[0] - 1.0, t[0] - 3.0], vec![10.0]);
        assert!(res.converged(), "{res:?}");
        assert!((res.theta_hat[0] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn restarts_rescue_a_bad_start() {
        // zero Jacobian at the init point
        let res = solve_fn(|t: &[f64]| vec![t[0] * t[0] * t[0] - 1.0], vec![0.0]);
        assert!(res.converged(), "{res:?}");
        assert!(res.restarts >= 1);
        assert!((res.theta_hat[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn deterministic() {
        let f = |t: &[f64]| vec![t[0].sin() + t[1] - 0.3, t[0] * t[1] - 0.1];
        let a = solve_fn(f, vec![0.2, 0.1]);
        let b = solve_fn(f, vec![0.2, 0.1]);
        assert_eq!(a, b);
    }

    fn smooth_systems() -> Vec<(Box<dyn Fn(&[f64]) -> Vec<f64>>, Box<dyn Fn(&[f64]) -> DMatrix<f64>>)> {
        vec![
            (
                Box::new(|t: &[f64]| vec![t[0].exp() - t[1], t[0] * t[1] * t[1]]),
                Box::new(|t: &[f64]| DMatrix::from_row_slice(2, 2, &[t[0].exp(), -1.0, t[1] * t[1], 2.0 * t[0] * t[1]])),
            ),
            (
                Box::new(|t: &[f64]| vec![logistic(t[0] + 2.0 * t[1]), (t[0] - t[1]).sin(), t[1].powi(3)]),
                Box::new(|t: &[f64]| {
                    let p = logistic(t[0] + 2.0 * t[1]);
                    let d = p * (1.0 - p);
                    let c = (t[0] - t[1]).cos();
                    DMatrix::from_row_slice(3, 2, &[d, 2.0 * d, c, -c, 0.0, 3.0 * t[1] * t[1]])
                }),
            ),
        ]
    }

    proptest! {
        #[test]
        fn fd_jacobian_matches_analytic(a in -1.5f64..1.5, b in 0.5f64..2.0) {
            for (f, jac) in smooth_systems() {
                let theta = [a, b];
                let r0 = f(&theta);
                let fd = fd_jacobian(&f, &theta, &r0);
                let an = jac(&theta);
                for (u, v) in fd.iter().zip(an.iter()) {
                    prop_assert!((u - v).abs() <= 1e-4 * v.abs().max(1.0), "{} vs {}", u, v);
                }
            }
        }

        #[test]
        fn scale_invariance(c in 0.01f64..100.0, t0 in -2.0f64..2.0) {
            let f = move |t: &[f64]| vec![t[0].exp() - 2.0 - t0 * t[1], t[1] - 0.5 * t[0]];
            let g = move |t: &[f64]| f(t).into_iter().map(|v| c * v).collect::<Vec<_>>();
            let a = solve_fn(f, vec![0.0, 0.0]);
            let b = solve_fn(g, vec![0.0, 0.0]);
            prop_assume!(a.converged() && b.converged());
            for (u, v) in a.theta_hat.iter().zip(&b.theta_hat) {
                prop_assert!((u - v).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn logistic_score_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let data: Vec<(f64, f64)> = (0..200)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                let p = logistic(0.4 - 0.8 * x);
                (x, if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
            })
            .collect();
        let score = |t: &[f64]| {
            let mut s = vec![0.0; 2];
            for &(x, y) in &data {
                let e = y - logistic(t[0] + t[1] * x);
                s[0] += e;
                s[1] += e * x;
            }
            s
        };
        let res = solve_fn(score, vec![0.0, 0.0]);
        assert!(res.converged());

        // grid-search maximizer of the log-likelihood, coarse then fine
        let loglik = |a: f64, b: f64| -> f64 {
            data.iter()
                .map(|&(x, y)| {
                    let p = logistic(a + b * x);
                    y * p.ln() + (1.0 - y) * (1.0 - p).ln()
                })
                .sum()
        };
        let mut best = (0.0, 0.0, f64::NEG_INFINITY);
        let grid = |lo: f64, hi: f64, step: f64| {
            let n = ((hi - lo) / step).round() as usize;
            (0..=n).map(move |i| lo + i as f64 * step)
        };
        for a in grid(-3.0, 3.0, 0.02) {
            for b in grid(-3.0, 3.0, 0.02) {
                let l = loglik(a, b);
                if l > best.2 {
                    best = (a, b, l);
                }
            }
        }
        let (ca, cb) = (best.0, best.1);
        for a in grid(ca - 0.03, ca + 0.03, 0.0005) {
            for b in grid(cb - 0.03, cb + 0.03, 0.0005) {
                let l = loglik(a, b);
                if l > best.2 {
                    best = (a, b, l);
                }
            }
        }
        assert!((res.theta_hat[0] - best.0).abs() < 1e-3, "{:?} vs {:?}", res.theta_hat, best);
        assert!((res.theta_hat[1] - best.1).abs() < 1e-3, "{:?} vs {:?}", res.theta_hat, best);
    }
}
