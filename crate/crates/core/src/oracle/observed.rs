use super::law::{ksum, DiscreteFullLaw, AUXILIARY, PRIMARY};

/// Observed-data law: what remains of a full law after masking. Primary
/// complete cells keep `(x, m, y)`; auxiliary complete cells keep `(x, m)`;
/// incomplete cells keep only `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedLaw {
    pub xs: Vec<f64>,
    pub ms: Vec<f64>,
    pub ys: Vec<f64>,
    /// `p(G=1, x, m, y, R=1)` as `[x][m][y]`.
    pub primary_complete: Vec<Vec<Vec<f64>>>,
    /// `p(G=1, x, R=0)`.
    pub primary_missing: Vec<f64>,
    /// `p(G=2, x, m, R=1)` as `[x][m]`.
    pub auxiliary_complete: Vec<Vec<f64>>,
    /// `p(G=2, x, R=0)`.
    pub auxiliary_missing: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedCell {
    /// 1 for the primary domain, 2 for the auxiliary.
    pub g: u8,
    pub x: f64,
    pub m: Option<f64>,
    pub y: Option<f64>,
    pub r: bool,
    pub probability: f64,
}

pub fn observed_law(law: &DiscreteFullLaw) -> ObservedLaw {
    let (nx, nm, ny) = law.dims();
    let primary_complete = (0..nx)
        .map(|x| (0..nm).map(|m| (0..ny).map(|y| law.p(PRIMARY, x, m, y, 1)).collect()).collect())
        .collect();
    let auxiliary_complete = (0..nx)
        .map(|x| (0..nm).map(|m| law.marginal(Some(AUXILIARY), Some(x), Some(m), None, Some(1))).collect())
        .collect();
    ObservedLaw {
        xs: law.xs.clone(),
        ms: law.ms.clone(),
        ys: law.ys.clone(),
        primary_complete,
        primary_missing: (0..nx).map(|x| law.marginal(Some(PRIMARY), Some(x), None, None, Some(0))).collect(),
        auxiliary_complete,
        auxiliary_missing: (0..nx).map(|x| law.marginal(Some(AUXILIARY), Some(x), None, None, Some(0))).collect(),
    }
}

impl ObservedLaw {
    pub fn cells(&self) -> Vec<ObservedCell> {
        let mut out = Vec::new();
        for (xi, &x) in self.xs.iter().enumerate() {
            for (mi, &m) in self.ms.iter().enumerate() {
                for (yi, &y) in self.ys.iter().enumerate() {
                    out.push(ObservedCell {
                        g: 1,
                        x,
                        m: Some(m),
                        y: Some(y),
                        r: true,
                        probability: self.primary_complete[xi][mi][yi],
                    });
                }
            }
            out.push(ObservedCell { g: 1, x, m: None, y: None, r: false, probability: self.primary_missing[xi] });
            for (mi, &m) in self.ms.iter().enumerate() {
                out.push(ObservedCell { g: 2, x, m: Some(m), y: None, r: true, probability: self.auxiliary_complete[xi][mi] });
            }
            out.push(ObservedCell { g: 2, x, m: None, y: None, r: false, probability: self.auxiliary_missing[xi] });
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        ksum(self.cells().into_iter().map(|c| c.probability))
    }

    /// `p(G=1)`.
    pub fn primary_mass(&self) -> f64 {
        ksum((0..self.xs.len()).map(|x| self.primary_x(x)))
    }

    /// `p(G=1, x)`.
    pub fn primary_x(&self, x: usize) -> f64 {
        self.primary_complete_x(x) + self.primary_missing[x]
    }

    /// `p(G=1, x, R=1)`.
    pub fn primary_complete_x(&self, x: usize) -> f64 {
        ksum(self.primary_complete[x].iter().flatten().copied())
    }

    /// `p(G=1, x, m, R=1)`.
    pub fn primary_complete_xm(&self, x: usize, m: usize) -> f64 {
        ksum(self.primary_complete[x][m].iter().copied())
    }

    /// `p(G=2, x, R=1)`.
    pub fn auxiliary_complete_x(&self, x: usize) -> f64 {
        ksum(self.auxiliary_complete[x].iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> DiscreteFullLaw {
        let raw = DiscreteFullLaw::from_fn(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 2.0], |g, x, m, y, r| {
            (1 + g * 3 + x + m * 2 + y + r * 4) as f64
        });
        let total: f64 = (0..2)
            .flat_map(|g| (0..2).flat_map(move |x| (0..2).flat_map(move |m| (0..2).flat_map(move |y| (0..2).map(move |r| (g, x, m, y, r))))))
            .map(|(g, x, m, y, r)| raw.p(g, x, m, y, r))
            .sum();
        DiscreteFullLaw::from_fn(raw.xs.clone(), raw.ms.clone(), raw.ys.clone(), |g, x, m, y, r| raw.p(g, x, m, y, r) / total)
    }

    #[test]
    fn mass_preserved() {
        let l = law();
        let obs = observed_law(&l);
        assert!((obs.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn missing_cells_pool_and_complete_cells_pass_through() {
        let l = law();
        let obs = observed_law(&l);
        let pooled: f64 = (0..2).flat_map(|m| (0..2).map(move |y| (m, y))).map(|(m, y)| l.p(PRIMARY, 1, m, y, 0)).sum();
        assert!((obs.primary_missing[1] - pooled).abs() < 1e-15);
        assert_eq!(obs.primary_complete[0][1][1], l.p(PRIMARY, 0, 1, 1, 1));
        let aux = l.p(AUXILIARY, 1, 0, 0, 1) + l.p(AUXILIARY, 1, 0, 1, 1);
        assert!((obs.auxiliary_complete[1][0] - aux).abs() < 1e-15);
    }
}
