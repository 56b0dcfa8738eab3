use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::BasisSpec;
use crate::error::{Error, Result};

/// Standard logistic function, evaluated without overflow for large |z|.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientModel {
    pub basis: BasisSpec,
    pub coefficients: Vec<f64>,
    pub link: Link,
}

impl CoefficientModel {
    pub fn new(basis: BasisSpec, coefficients: Vec<f64>, link: Link) -> Result<Self> {
        if basis.len() != coefficients.len() {
            return Err(Error::InvalidBasis(format!(
                "{basis}: {} terms but {} coefficients",
                basis.len(),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBasis(format!("{basis}: non-finite coefficient")));
        }
        Ok(CoefficientModel { basis, coefficients, link })
    }

    pub fn linear_predictor(&self, x: &[f64], m: Option<&[f64]>, y: Option<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (t, c) in self.basis.terms().iter().zip(&self.coefficients) {
            acc += c * t.eval(x, m, y)?;
        }
        Ok(acc)
    }

    pub fn predict(&self, x: &[f64], m: Option<&[f64]>, y: Option<f64>) -> Result<f64> {
        let eta = self.linear_predictor(x, m, y)?;
        Ok(match self.link {
            Link::Identity => eta,
            Link::Logistic => logistic(eta),
        })
    }
}

/// Relative threshold on |R_jj| / ||column j|| below which a column is
/// treated as dependent on the columns before it.
const RANK_TOL: f64 = 1e-10;

/// Least-squares coefficients for every column of `targets`, by Householder
/// QR of `design`. Fails naming the first column that is (numerically) a
/// linear combination of earlier ones.
pub fn least_squares_multi(design: &DMatrix<f64>, targets: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
    let (n, p) = design.shape();
    if n < p {
        return Err(Error::InsufficientData(format!("{n} rows for {p} coefficients")));
    }
    let qr = design.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let col_norm = design.column(j).norm();
        if col_norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * col_norm {
            return Err(Error::RankDeficient {
                column: j,
                name: names.get(j).cloned().unwrap_or_else(|| format!("column {j}")),
            });
        }
    }
    let mut qtb = targets.clone();
    qr.q_tr_mul(&mut qtb);
    let top = qtb.rows(0, p).into_owned();
    r.solve_upper_triangular(&top)
        .ok_or_else(|| Error::RankDeficient { column: p - 1, name: names.last().cloned().unwrap_or_default() })
}

pub fn least_squares(design: &DMatrix<f64>, target: &[f64], names: &[String]) -> Result<Vec<f64>> {
    let b = DMatrix::from_column_slice(target.len(), 1, target);
    let sol = least_squares_multi(design, &b, names)?;
    Ok(sol.column(0).iter().copied().collect())
}

/// Row-major feature rows into a column-major design matrix.
pub fn design_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let p = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j])
}

/// Fits an identity-link model on already-evaluated basis rows.
pub fn fit_least_squares(basis: &BasisSpec, rows: &[(Vec<f64>, f64)]) -> Result<CoefficientModel> {
    let p = basis.len();
    if let Some((bad, _)) = rows.iter().find(|(f, _)| f.len() != p) {
        return Err(Error::InvalidBasis(format!("{basis}: feature row of length {}", bad.len())));
    }
    let design = DMatrix::from_fn(rows.len(), p, |i, j| rows[i].0[j]);
    let target: Vec<f64> = rows.iter().map(|(_, t)| *t).collect();
    let names: Vec<String> = (0..p).map(|j| basis.term_name(j)).collect();
    let coefficients = least_squares(&design, &target, &names)?;
    CoefficientModel::new(basis.clone(), coefficients, Link::Identity)
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
