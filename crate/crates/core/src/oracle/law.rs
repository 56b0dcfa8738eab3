use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Tolerance on the total mass of a law.
const MASS_TOL: f64 = 1e-12;

/// Neumaier-compensated sum.
pub fn ksum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Domain index into a law table: 0 is the primary domain, 1 the auxiliary.
pub const PRIMARY: usize = 0;
pub const AUXILIARY: usize = 1;

/// Joint law of `(G, X, M, Y, R)` on finite supports. `M` and `Y` are the
/// latent (pre-masking) values; the auxiliary domain carries a latent `Y`
/// too, which is never observed.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFullLaw {
    pub xs: Vec<f64>,
    pub ms: Vec<f64>,
    pub ys: Vec<f64>,
    table: Vec<f64>,
}

impl DiscreteFullLaw {
    /// `table` is laid out `[g][x][m][y][r]`, row-major.
    pub fn new(xs: Vec<f64>, ms: Vec<f64>, ys: Vec<f64>, table: Vec<f64>) -> Result<Self> {
        let law = DiscreteFullLaw { xs, ms, ys, table };
        law.validate()?;
        Ok(law)
    }

    /// Builds a law from a cell function, without validation.
    pub fn from_fn(xs: Vec<f64>, ms: Vec<f64>, ys: Vec<f64>, f: impl Fn(usize, usize, usize, usize, usize) -> f64) -> Self {
        let (nx, nm, ny) = (xs.len(), ms.len(), ys.len());
        let mut table = Vec::with_capacity(2 * nx * nm * ny * 2);
        for g in 0..2 {
            for x in 0..nx {
                for m in 0..nm {
                    for y in 0..ny {
                        for r in 0..2 {
                            table.push(f(g, x, m, y, r));
                        }
                    }
                }
            }
        }
        DiscreteFullLaw { xs, ms, ys, table }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.xs.len(), self.ms.len(), self.ys.len())
    }

    fn idx(&self, g: usize, x: usize, m: usize, y: usize, r: usize) -> usize {
        let (nx, nm, ny) = self.dims();
        (((g * nx + x) * nm + m) * ny + y) * 2 + r
    }

    /// `p(G=g, X=x, M=m, Y=y, R=r)` by support indices.
    pub fn p(&self, g: usize, x: usize, m: usize, y: usize, r: usize) -> f64 {
        self.table[self.idx(g, x, m, y, r)]
    }

    /// Sum of cells matching every `Some` index.
    pub fn marginal(&self, g: Option<usize>, x: Option<usize>, m: Option<usize>, y: Option<usize>, r: Option<usize>) -> f64 {
        let (nx, nm, ny) = self.dims();
        let range = |sel: Option<usize>, n: usize| match sel {
            Some(i) => i..i + 1,
            None => 0..n,
        };
        let mut cells = Vec::new();
        for gi in range(g, 2) {
            for xi in range(x, nx) {
                for mi in range(m, nm) {
                    for yi in range(y, ny) {
                        for ri in range(r, 2) {
                            cells.push(self.p(gi, xi, mi, yi, ri));
                        }
                    }
                }
            }
        }
        ksum(cells)
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, nm, ny) = self.dims();
        if nx == 0 || nm == 0 || ny == 0 {
            return Err(Error::Oracle("every support must be non-empty".into()));
        }
        if self.table.len() != 2 * nx * nm * ny * 2 {
            return Err(Error::Oracle(format!("table has {} cells, expected {}", self.table.len(), 4 * nx * nm * ny)));
        }
        if let Some(v) = self.table.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Oracle(format!("invalid cell probability {v}")));
        }
        let total = ksum(self.table.iter().copied());
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Oracle(format!("probabilities sum to {total}, not 1")));
        }
        for g in 0..2 {
            if self.marginal(Some(g), None, None, None, None) <= 0.0 {
                return Err(Error::Oracle(format!("domain {} has no mass", g + 1)));
            }
            for x in 0..nx {
                let px = self.marginal(Some(g), Some(x), None, None, None);
                if px > 0.0 && self.marginal(Some(g), Some(x), None, None, Some(1)) <= 0.0 {
                    return Err(Error::Oracle(format!(
                        "positivity: p(R=1 | x={}, domain {}) is zero",
                        self.xs[x],
                        g + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// `E[Y | G=primary]` computed from the full table.
    pub fn true_beta(&self) -> f64 {
        let (nx, nm, ny) = self.dims();
        let mut terms = Vec::new();
        for x in 0..nx {
            for m in 0..nm {
                for y in 0..ny {
                    for r in 0..2 {
                        terms.push(self.ys[y] * self.p(PRIMARY, x, m, y, r));
                    }
                }
            }
        }
        ksum(terms) / self.marginal(Some(PRIMARY), None, None, None, None)
    }

    /// Index of the odds-ratio reference level: `y = 0` if supported, else
    /// the smallest support point.
    pub fn reference_y(&self) -> usize {
        reference_index(&self.ys)
    }

    /// Cell-list text: a `g,x,m,y,r,probability` header and one line per
    /// non-zero cell, domains coded 1 (primary) and 2 (auxiliary).
    pub fn to_text(&self) -> String {
        let (nx, nm, ny) = self.dims();
        let mut out = String::from("g,x,m,y,r,probability\n");
        for g in 0..2 {
            for x in 0..nx {
                for m in 0..nm {
                    for y in 0..ny {
                        for r in 0..2 {
                            let p = self.p(g, x, m, y, r);
                            if p > 0.0 {
                                let _ = writeln!(out, "{},{},{},{},{},{}", g + 1, self.xs[x], self.ms[m], self.ys[y], r, p);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Inverse of [`to_text`](Self::to_text). Supports are the sorted
    /// distinct values appearing in the file; absent cells have mass zero.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with('g')) {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(parse_err(format!("expected 6 fields, found {}", fields.len())));
            }
            let num = |k: usize| fields[k].parse::<f64>().map_err(|_| parse_err(format!("bad number `{}`", fields[k])));
            let g = match fields[0] {
                "1" => PRIMARY,
                "2" => AUXILIARY,
                other => return Err(parse_err(format!("domain must be 1 or 2, got `{other}`"))),
            };
            let r = match fields[4] {
                "0" => 0,
                "1" => 1,
                other => return Err(parse_err(format!("r must be 0 or 1, got `{other}`"))),
            };
            rows.push((g, num(1)?, num(2)?, num(3)?, r, num(5)?));
        }
        let support = |k: fn(&(usize, f64, f64, f64, usize, f64)) -> f64| {
            let mut v: Vec<f64> = rows.iter().map(k).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let xs = support(|r| r.1);
        let ms = support(|r| r.2);
        let ys = support(|r| r.3);
        let mut law = DiscreteFullLaw::from_fn(xs, ms, ys, |_, _, _, _, _| 0.0);
        for (g, x, m, y, r, p) in rows {
            let pos = |v: &[f64], a: f64| v.iter().position(|b| *b == a).unwrap();
            let i = law.idx(g, pos(&law.xs, x), pos(&law.ms, m), pos(&law.ys, y), r);
            law.table[i] += p;
        }
        law.validate()?;
        Ok(law)
    }
}

pub(crate) fn reference_index(ys: &[f64]) -> usize {
    ys.iter()
        .position(|y| *y == 0.0)
        .unwrap_or_else(|| ys.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(ksum(v), 2.0);
        assert_ne!(v.iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn rejects_bad_mass() {
        let law = DiscreteFullLaw::from_fn(vec![0.0], vec![0.0], vec![0.0], |_, _, _, _, _| 0.3);
        assert!(law.validate().is_err());
        let ok = DiscreteFullLaw::from_fn(vec![0.0], vec![0.0], vec![0.0], |_, _, _, _, _| 0.25);
        assert!(ok.validate().is_ok());
        let no_response = DiscreteFullLaw::from_fn(vec![0.0], vec![0.0], vec![0.0], |_, _, _, _, r| 0.5 * (r == 0) as u8 as f64);
        assert!(no_response.validate().is_err());
    }

    #[test]
    fn text_round_trip() {
        let law = DiscreteFullLaw::from_fn(vec![-1.0, 0.5], vec![0.0, 2.0], vec![0.0, 1.0, 3.5], |g, x, m, y, r| {
            (1 + g + x + 2 * m + y + r) as f64
        });
        let total = ksum(law.table.iter().copied());
        let law = DiscreteFullLaw::from_fn(law.xs.clone(), law.ms.clone(), law.ys.clone(), |g, x, m, y, r| {
            law.p(g, x, m, y, r) / total
        });
        let back = DiscreteFullLaw::from_text(&law.to_text()).unwrap();
        assert_eq!(back, law);
    }

    #[test]
    fn reference_level() {
        assert_eq!(reference_index(&[-1.0, 0.0, 1.0]), 1);
        assert_eq!(reference_index(&[2.0, 1.0, 3.0]), 1);
    }
}
