use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::law::{DiscreteFullLaw, PRIMARY};
use super::observed::ObservedLaw;
use crate::data::{MValue, PooledDataset, UnitRecord, VariableSchema};
use crate::error::{Error, Result};

/// Draws `n` i.i.d. units from the full law and masks them.
pub fn sample_dataset(law: &DiscreteFullLaw, n: usize, seed: u64) -> Result<PooledDataset> {
    let (nx, nm, ny) = law.dims();
    let mut cells = Vec::with_capacity(4 * nx * nm * ny);
    let mut weights = Vec::with_capacity(cells.capacity());
    for g in 0..2 {
        for x in 0..nx {
            for m in 0..nm {
                for y in 0..ny {
                    for r in 0..2 {
                        cells.push((g, x, m, y, r));
                        weights.push(law.p(g, x, m, y, r));
                    }
                }
            }
        }
    }
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Oracle(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|_| {
            let (g, x, m, y, r) = cells[dist.sample(&mut rng)];
            let x = vec![law.xs[x]];
            let (m, y) = (law.ms[m], law.ys[y]);
            match (g, r) {
                (PRIMARY, 1) => UnitRecord::primary_complete(x, m, y),
                (PRIMARY, _) => UnitRecord::primary_missing(x),
                _ => UnitRecord::auxiliary(x, (r == 1).then_some(m)),
            }
        })
        .collect();
    Ok(PooledDataset::new(records, VariableSchema::scalar()))
}

/// Observed law given by the empirical cell frequencies of a dataset whose
/// values lie on the given supports.
pub fn empirical_law(dataset: &PooledDataset, xs: &[f64], ms: &[f64], ys: &[f64]) -> Result<ObservedLaw> {
    let (nx, nm, ny) = (xs.len(), ms.len(), ys.len());
    let mut obs = ObservedLaw {
        xs: xs.to_vec(),
        ms: ms.to_vec(),
        ys: ys.to_vec(),
        primary_complete: vec![vec![vec![0.0; ny]; nm]; nx],
        primary_missing: vec![0.0; nx],
        auxiliary_complete: vec![vec![0.0; nm]; nx],
        auxiliary_missing: vec![0.0; nx],
    };
    let off = |row: usize, what: &str| Error::Oracle(format!("row {row}: {what} value is off the support"));
    let pos = |v: &[f64], a: f64| v.iter().position(|b| *b == a);
    let w = 1.0 / dataset.len() as f64;
    for (i, rec) in dataset.records.iter().enumerate() {
        let x = rec.x.first().and_then(|&v| pos(xs, v)).ok_or_else(|| off(i, "x"))?;
        let m = match &rec.m {
            Some(MValue::Numeric(v)) => Some(pos(ms, *v).ok_or_else(|| off(i, "m"))?),
            Some(MValue::Level(_)) => return Err(off(i, "m")),
            None => None,
        };
        match (rec.g, m) {
            (crate::data::DomainTag::Primary, Some(m)) => {
                let y = rec.y.and_then(|v| pos(ys, v)).ok_or_else(|| off(i, "y"))?;
                obs.primary_complete[x][m][y] += w;
            }
            (crate::data::DomainTag::Primary, None) => obs.primary_missing[x] += w,
            (crate::data::DomainTag::Auxiliary, Some(m)) => obs.auxiliary_complete[x][m] += w,
            (crate::data::DomainTag::Auxiliary, None) => obs.auxiliary_missing[x] += w,
        }
    }
    Ok(obs)
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Binary `(X, M, Y)` law satisfying the first model's assumptions, with a
/// primary response depending on `(X, M)` through an interaction.
pub fn binary_model1_law() -> DiscreteFullLaw {
    let p_x = [[0.45, 0.55], [0.6, 0.4]];
    let p_m1 = [0.35, 0.6];
    let p_y1 = [[[0.2, 0.55], [0.4, 0.8]], [[0.3, 0.5], [0.45, 0.7]]];
    let r_primary = [[0.8, 0.45], [0.6, 0.3]];
    let r_aux = [0.7, 0.5];
    DiscreteFullLaw::from_fn(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0], |g, x, m, y, r| {
        let pm = if m == 1 { p_m1[x] } else { 1.0 - p_m1[x] };
        let py = if y == 1 { p_y1[g][x][m] } else { 1.0 - p_y1[g][x][m] };
        let pr1 = if g == PRIMARY { r_primary[x][m] } else { r_aux[x] };
        0.5 * p_x[g][x] * pm * py * if r == 1 { pr1 } else { 1.0 - pr1 }
    })
}

/// Binary `(X, M, Y)` law satisfying the second model's assumptions, with
/// primary response `logistic(a(x) + c(x) y)`; the odds ratio is
/// `exp(-c(x) y)` with `c = (0.3, 0.6)`.
pub fn binary_model2_law() -> DiscreteFullLaw {
    let p_x = [[0.45, 0.55], [0.6, 0.4]];
    let p_m1 = [0.35, 0.6];
    let p_y1 = [[[0.25, 0.7], [0.3, 0.75]], [[0.4, 0.6], [0.35, 0.65]]];
    let a = [0.5, -0.1];
    let c = [0.3, 0.6];
    let r_aux = [0.7, 0.5];
    DiscreteFullLaw::from_fn(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0], |g, x, m, y, r| {
        let pm = if m == 1 { p_m1[x] } else { 1.0 - p_m1[x] };
        let py = if y == 1 { p_y1[g][x][m] } else { 1.0 - p_y1[g][x][m] };
        let pr1 = if g == PRIMARY { logistic(a[x] + c[x] * y as f64) } else { r_aux[x] };
        0.5 * p_x[g][x] * pm * py * if r == 1 { pr1 } else { 1.0 - pr1 }
    })
}
