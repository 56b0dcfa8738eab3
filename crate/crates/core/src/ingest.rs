//! Ingestion of externally formatted CSV files through a schema map.
//!
//! A schema map is a TOML document naming the source columns and how their
//! values translate into the pooled-dataset encoding:
//!
//! ```toml
//! [columns]
//! domain = "period"
//! x = ["county_score"]
//! m = "race"
//! y = "hospitalized"
//! # r = "observed"   # optional; when absent, r is 1 iff m is present
//!
//! [domain]
//! primary = "2020-03"
//! auxiliary = "2023-03"
//!
//! [levels]
//! m = ["White", "Black", "Other"]
//! y = ["no", "yes"]   # optional; first level codes 0, second 1
//!
//! [options]
//! missing_token = "?"
//! ```

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::csv_io::{read_dataset, CsvOptions};
use crate::data::{DomainCounts, PooledDataset, YKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub domain: String,
    #[serde(default)]
    pub r: Option<String>,
    pub x: Vec<String>,
    pub m: String,
    pub y: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainMap {
    pub primary: String,
    pub auxiliary: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelMap {
    #[serde(default)]
    pub m: Option<Vec<String>>,
    #[serde(default)]
    pub y: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestOptions {
    #[serde(default = "default_token")]
    pub missing_token: String,
    /// Values of the `r` column meaning "observed"; others mean missing.
    #[serde(default = "default_observed")]
    pub observed_values: Vec<String>,
}

fn default_token() -> String {
    "?".into()
}

fn default_observed() -> Vec<String> {
    vec!["1".into()]
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { missing_token: default_token(), observed_values: default_observed() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaMap {
    pub columns: ColumnMap,
    pub domain: DomainMap,
    #[serde(default)]
    pub levels: LevelMap,
    #[serde(default)]
    pub options: IngestOptions,
}

impl SchemaMap {
    pub fn from_toml(text: &str) -> Result<Self> {
        let map: SchemaMap = toml::from_str(text).map_err(|e| Error::Config(format!("schema map: {e}")))?;
        if let Some(levels) = &map.levels.y {
            if levels.len() != 2 {
                return Err(Error::Config(format!("schema map: y levels must list exactly 2 values, got {}", levels.len())));
            }
        }
        if map.domain.primary == map.domain.auxiliary {
            return Err(Error::Config("schema map: primary and auxiliary domain values coincide".into()));
        }
        Ok(map)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn y_kind(&self) -> YKind {
        if self.levels.y.is_some() {
            YKind::Binary
        } else {
            YKind::Numeric
        }
    }
}

/// Translates an external file into the canonical `domain,r,<x...>,m,y`
/// layout, then parses and validates it. Line numbers in errors refer to
/// the source file.
pub fn ingest_external<R: Read>(reader: R, map: &SchemaMap) -> Result<PooledDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("schema map names column `{name}`, which the file does not have")))
    };
    let domain_col = col(&map.columns.domain)?;
    let r_col = map.columns.r.as_deref().map(col).transpose()?;
    let x_cols = map.columns.x.iter().map(|n| col(n)).collect::<Result<Vec<_>>>()?;
    let m_col = col(&map.columns.m)?;
    let y_col = col(&map.columns.y)?;
    let token = &map.options.missing_token;
    let is_missing = |s: &str| s.is_empty() || s == token;

    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["domain".to_string(), "r".to_string()];
    header.extend(map.columns.x.iter().cloned());
    header.extend(["m".to_string(), "y".to_string()]);
    out.write_record(&header)?;
    for result in rdr.records() {
        let rec = result?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let domain = match cell(domain_col) {
            d if d == map.domain.primary => "1",
            d if d == map.domain.auxiliary => "2",
            other => return Err(Error::Parse { line, message: format!("unknown domain value {other:?}") }),
        };
        let m = cell(m_col);
        let r = match r_col {
            Some(i) => map.options.observed_values.iter().any(|v| v == cell(i)),
            None => !is_missing(m),
        };
        let y_raw = cell(y_col);
        let y = if is_missing(y_raw) {
            token.to_string()
        } else if let Some(levels) = &map.levels.y {
            match levels.iter().position(|l| l == y_raw) {
                Some(code) => code.to_string(),
                None => return Err(Error::Parse { line, message: format!("y value {y_raw:?} is not a listed level") }),
            }
        } else {
            y_raw.to_string()
        };
        let mut row = vec![domain.to_string(), (r as u8).to_string()];
        row.extend(x_cols.iter().map(|&i| cell(i).to_string()));
        row.push(if is_missing(m) { token.to_string() } else { m.to_string() });
        row.push(y);
        out.write_record(&row)?;
    }
    let canonical = out.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    let opts = CsvOptions {
        missing_token: token.clone(),
        m_levels: map.levels.m.clone(),
        y_kind: map.y_kind(),
        covariates: Some(map.columns.x.clone()),
    };
    read_dataset(canonical.as_slice(), &opts)
}

pub fn ingest_external_path(path: impl AsRef<std::path::Path>, map: &SchemaMap) -> Result<PooledDataset> {
    ingest_external(std::fs::File::open(path)?, map)
}

/// One-line per-domain summary of sizes and missing rates.
pub fn missing_rate_summary(counts: &DomainCounts) -> String {
    format!(
        "primary: {} rows, {:.1}% missing; auxiliary: {} rows, {:.1}% missing",
        counts.n_primary,
        100.0 * counts.primary_missing_rate(),
        counts.n_auxiliary,
        100.0 * counts.auxiliary_missing_rate()
    )
}
