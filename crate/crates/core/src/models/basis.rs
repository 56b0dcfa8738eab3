//! Monomial feature bases over covariates `x1..xd`, the expanded `M`
//! features `m1..mk`, and the outcome `y`.
//!
//! Text form is a comma-separated term list such as `1,x1,x1^2,x1*m,m`.
//! `x` is shorthand for `x1` and `m` for `m1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Zero-based covariate index.
    X(usize),
    /// Zero-based index into the expanded M features.
    M(usize),
    Y,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term {
    /// Sorted by variable; empty means the constant term.
    factors: Vec<(Var, u32)>,
}

impl Term {
    pub fn constant() -> Self {
        Term { factors: Vec::new() }
    }

    pub fn var(v: Var) -> Self {
        Term { factors: vec![(v, 1)] }
    }

    pub fn pow(v: Var, p: u32) -> Self {
        Term { factors: vec![(v, p)] }
    }

    pub fn product(factors: impl IntoIterator<Item = (Var, u32)>) -> Self {
        let mut fs: Vec<(Var, u32)> = Vec::new();
        for (v, p) in factors {
            if p == 0 {
                continue;
            }
            match fs.iter_mut().find(|(w, _)| *w == v) {
                Some(slot) => slot.1 += p,
                None => fs.push((v, p)),
            }
        }
        fs.sort();
        Term { factors: fs }
    }

    pub fn is_constant(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn uses_m(&self) -> bool {
        self.factors.iter().any(|(v, _)| matches!(v, Var::M(_)))
    }

    pub fn uses_y(&self) -> bool {
        self.factors.iter().any(|(v, _)| *v == Var::Y)
    }

    pub fn eval(&self, x: &[f64], m: Option<&[f64]>, y: Option<f64>) -> Result<f64> {
        let mut acc = 1.0;
        for &(v, p) in &self.factors {
            let base = match v {
                Var::X(j) => *x.get(j).ok_or_else(|| self.absent("a covariate beyond the row length"))?,
                Var::M(k) => *m
                    .ok_or_else(|| self.absent("M"))?
                    .get(k)
                    .ok_or_else(|| self.absent("an M feature beyond the expansion width"))?,
                Var::Y => y.ok_or_else(|| self.absent("Y"))?,
            };
            acc *= base.powi(p as i32);
        }
        Ok(acc)
    }

    fn absent(&self, variable: &'static str) -> Error {
        Error::MissingBasisInput { term: self.to_string(), variable }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        for (i, (v, p)) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            match v {
                Var::X(j) => write!(f, "x{}", j + 1)?,
                Var::M(0) => f.write_str("m")?,
                Var::M(k) => write!(f, "m{}", k + 1)?,
                Var::Y => f.write_str("y")?,
            }
            if *p > 1 {
                write!(f, "^{p}")?;
            }
        }
        Ok(())
    }
}

fn parse_factor(tok: &str, whole: &str) -> Result<(Var, u32)> {
    let bad = || Error::InvalidBasis(whole.to_string());
    let (name, power) = match tok.split_once('^') {
        Some((n, p)) => (n.trim(), p.trim().parse::<u32>().map_err(|_| bad())?),
        None => (tok.trim(), 1),
    };
    let index = |rest: &str| -> Result<usize> {
        if rest.is_empty() {
            return Ok(0);
        }
        match rest.parse::<usize>() {
            Ok(i) if i >= 1 => Ok(i - 1),
            _ => Err(bad()),
        }
    };
    let var = if let Some(rest) = name.strip_prefix('x') {
        Var::X(index(rest)?)
    } else if let Some(rest) = name.strip_prefix('m') {
        Var::M(index(rest)?)
    } else if name == "y" {
        Var::Y
    } else {
        return Err(bad());
    };
    Ok((var, power))
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Term::constant());
        }
        let factors = s.split('*').map(|t| parse_factor(t, s)).collect::<Result<Vec<_>>>()?;
        Ok(Term::product(factors))
    }
}

/// Ordered, duplicate-free term list whose first term is the constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    terms: Vec<Term>,
}

impl BasisSpec {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let spec = BasisSpec { terms };
        if !spec.terms.first().is_some_and(Term::is_constant) {
            return Err(Error::InvalidBasis(format!("{spec}: first term must be the constant")));
        }
        for (i, t) in spec.terms.iter().enumerate() {
            if spec.terms[..i].contains(t) {
                return Err(Error::InvalidBasis(format!("{spec}: duplicate term {t}")));
            }
        }
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let terms = text
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Term>>>()?;
        Self::new(terms)
    }

    pub fn intercept() -> Self {
        BasisSpec { terms: vec![Term::constant()] }
    }

    /// `1, x1..xd` then powers up to `degree` of each covariate.
    pub fn polynomial_x(d: usize, degree: u32) -> Self {
        let mut terms = vec![Term::constant()];
        for p in 1..=degree {
            terms.extend((0..d).map(|j| Term::pow(Var::X(j), p)));
        }
        BasisSpec { terms }
    }

    /// `1, x1..xd, m1..mk`.
    pub fn linear_x_m(d: usize, m_width: usize) -> Self {
        let mut b = Self::polynomial_x(d, 1);
        b.terms.extend((0..m_width).map(|k| Term::var(Var::M(k))));
        b
    }

    pub fn with_term(mut self, t: Term) -> Result<Self> {
        self.terms.push(t);
        Self::new(self.terms)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn uses_m(&self) -> bool {
        self.terms.iter().any(Term::uses_m)
    }

    pub fn uses_y(&self) -> bool {
        self.terms.iter().any(Term::uses_y)
    }

    pub fn term_name(&self, i: usize) -> String {
        self.terms.get(i).map(ToString::to_string).unwrap_or_default()
    }

    pub fn evaluate(&self, x: &[f64], m: Option<&[f64]>, y: Option<f64>) -> Result<Vec<f64>> {
        self.terms.iter().map(|t| t.eval(x, m, y)).collect()
    }

    /// Writes into a caller buffer; the hot loops in the estimators use this.
    pub fn evaluate_into(&self, x: &[f64], m: Option<&[f64]>, y: Option<f64>, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        for t in &self.terms {
            out.push(t.eval(x, m, y)?);
        }
        Ok(())
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for BasisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for BasisSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BasisSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BasisSpec::parse(&s).map_err(serde::de::Error::custom)
    }
}
