//! CSV reading and writing for pooled datasets and simulator truth sidecars.
//!
//! Column order on write is fixed: `domain,r,<covariates...>,m,y`. On read,
//! `domain`, `r` and `m` are required; `y` may be absent when the file only
//! holds auxiliary rows. Every other column is a covariate, in file order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{
    validate, DomainTag, MKind, MValue, PooledDataset, UnitRecord, VariableSchema, YKind,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub missing_token: String,
    /// Fixed level list for a categorical M; `None` infers the kind.
    pub m_levels: Option<Vec<String>>,
    pub y_kind: YKind,
    /// Restrict covariates to these columns (in this order).
    pub covariates: Option<Vec<String>>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { missing_token: "?".into(), m_levels: None, y_kind: YKind::Numeric, covariates: None }
    }
}

impl CsvOptions {
    fn is_missing(&self, cell: &str) -> bool {
        let c = cell.trim();
        c.is_empty() || c == self.missing_token
    }
}

fn parse_f64(cell: &str, line: usize, column: &str) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("column `{column}`: cannot parse {cell:?} as a number"),
    })
}

pub fn read_dataset_path(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<PooledDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_dataset(file, opts)
}

/// Parses and validates a dataset. Discordant primary-domain missingness is
/// rejected as a validation error rather than repaired.
pub fn read_dataset<R: Read>(reader: R, opts: &CsvOptions) -> Result<PooledDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &'static str| {
        find(name).ok_or_else(|| Error::Parse { line: 1, message: format!("missing required column `{name}`") })
    };
    let domain_col = need("domain")?;
    let r_col = need("r")?;
    let m_col = need("m")?;
    let y_col = find("y");

    let (cov_names, cov_cols): (Vec<String>, Vec<usize>) = match &opts.covariates {
        Some(names) => {
            let mut cols = Vec::with_capacity(names.len());
            for n in names {
                cols.push(find(n).ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("missing covariate column `{n}`"),
                })?);
            }
            (names.clone(), cols)
        }
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| ![Some(domain_col), Some(r_col), Some(m_col), y_col].contains(&Some(*i)))
            .map(|(i, h)| (h.to_string(), i))
            .unzip(),
    };

    struct Raw {
        line: usize,
        g: DomainTag,
        r: bool,
        x: Vec<f64>,
        m: Option<String>,
        y: Option<f64>,
    }
    let mut raws = Vec::new();
    for result in rdr.records() {
        let rec = result?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let g = match cell(domain_col) {
            "1" => DomainTag::Primary,
            "2" => DomainTag::Auxiliary,
            other => {
                return Err(Error::Parse { line, message: format!("domain must be 1 or 2, got {other:?}") })
            }
        };
        let r = match cell(r_col) {
            "1" => true,
            "0" => false,
            other => return Err(Error::Parse { line, message: format!("r must be 0 or 1, got {other:?}") }),
        };
        let x = cov_cols
            .iter()
            .zip(&cov_names)
            .map(|(&i, name)| parse_f64(cell(i), line, name))
            .collect::<Result<Vec<_>>>()?;
        let m = (!opts.is_missing(cell(m_col))).then(|| cell(m_col).to_string());
        let y = match y_col {
            Some(i) if !opts.is_missing(cell(i)) => Some(parse_f64(cell(i), line, "y")?),
            _ => None,
        };
        raws.push(Raw { line, g, r, x, m, y });
    }

    let m_kind = match &opts.m_levels {
        Some(levels) => MKind::Categorical(levels.clone()),
        None => {
            let all_numeric = raws.iter().filter_map(|r| r.m.as_deref()).all(|s| s.parse::<f64>().is_ok());
            if all_numeric {
                MKind::Numeric
            } else {
                let mut levels: Vec<String> = raws.iter().filter_map(|r| r.m.clone()).collect();
                levels.sort();
                levels.dedup();
                MKind::Categorical(levels)
            }
        }
    };
    let schema = VariableSchema {
        covariate_names: cov_names,
        m_kind,
        y_kind: opts.y_kind,
        missing_token: opts.missing_token.clone(),
    };
    schema.check()?;

    let mut records = Vec::with_capacity(raws.len());
    for raw in raws {
        let m = match (&schema.m_kind, raw.m) {
            (MKind::Numeric, Some(s)) => Some(MValue::Numeric(parse_f64(&s, raw.line, "m")?)),
            (MKind::Categorical(_), Some(s)) => Some(MValue::Level(s)),
            (_, None) => None,
        };
        records.push(UnitRecord { g: raw.g, x: raw.x, m, y: raw.y, r: raw.r });
    }
    let dataset = PooledDataset::new(records, schema);
    let violations = validate(&dataset);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    Ok(dataset)
}

fn fmt_num(v: f64) -> String {
    // `Display` for f64 is the shortest representation that round-trips.
    format!("{v}")
}

pub fn write_dataset<W: Write>(dataset: &PooledDataset, writer: W) -> Result<()> {
    let token = &dataset.schema.missing_token;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["domain".to_string(), "r".to_string()];
    header.extend(dataset.schema.covariate_names.iter().cloned());
    header.push("m".into());
    header.push("y".into());
    w.write_record(&header)?;
    for rec in &dataset.records {
        let mut row = vec![rec.g.code().to_string(), (rec.r as u8).to_string()];
        row.extend(rec.x.iter().map(|&v| fmt_num(v)));
        row.push(match &rec.m {
            Some(MValue::Numeric(v)) => fmt_num(*v),
            Some(MValue::Level(s)) => s.clone(),
            None => token.clone(),
        });
        row.push(rec.y.map(fmt_num).unwrap_or_else(|| token.clone()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_path(dataset: &PooledDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_dataset(dataset, std::io::BufWriter::new(file))
}

/// Pre-masking latent values for one simulated unit. Estimators never read
/// these; they exist for bias computation and law checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRow {
    pub m_full: f64,
    /// Latent outcome; `None` in the auxiliary domain, which has no outcome.
    pub y_full: Option<f64>,
}

pub fn write_truth<W: Write>(dataset: &PooledDataset, truth: &[TruthRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "domain", "m_full", "y_full"])?;
    for (i, (rec, t)) in dataset.records.iter().zip(truth).enumerate() {
        w.write_record([
            i.to_string(),
            rec.g.code().to_string(),
            fmt_num(t.m_full),
            t.y_full.map(fmt_num).unwrap_or_else(|| dataset.schema.missing_token.clone()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth<R: Read>(reader: R) -> Result<Vec<TruthRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for result in rdr.records() {
        let rec = result?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let m_full = parse_f64(rec.get(2).unwrap_or(""), line, "m_full")?;
        let y_full = rec.get(3).unwrap_or("").parse::<f64>().ok();
        out.push(TruthRow { m_full, y_full });
    }
    Ok(out)
}
