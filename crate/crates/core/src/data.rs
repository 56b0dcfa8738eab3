//! Pooled two-domain dataset shared by every estimator.
//!
//! Each unit belongs either to the primary domain, where the outcome `Y` and
//! the auxiliary variable `M` are jointly missing (one indicator `r`), or to
//! the auxiliary domain, where `Y` is never recorded and `M` may be missing.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DomainTag {
    /// `G = 1`, the MNAR domain carrying the outcome.
    Primary,
    /// `G = 2`, the MAR domain without the outcome.
    Auxiliary,
}

impl DomainTag {
    /// File code: 1 for primary, 2 for auxiliary.
    pub fn code(self) -> u8 {
        match self {
            DomainTag::Primary => 1,
            DomainTag::Auxiliary => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(DomainTag::Primary),
            2 => Some(DomainTag::Auxiliary),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MValue {
    Numeric(f64),
    Level(String),
}

impl fmt::Display for MValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MValue::Numeric(v) => write!(f, "{v}"),
            MValue::Level(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitRecord {
    pub g: DomainTag,
    pub x: Vec<f64>,
    pub m: Option<MValue>,
    pub y: Option<f64>,
    pub r: bool,
}

impl UnitRecord {
    pub fn primary_complete(x: Vec<f64>, m: f64, y: f64) -> Self {
        UnitRecord { g: DomainTag::Primary, x, m: Some(MValue::Numeric(m)), y: Some(y), r: true }
    }

    pub fn primary_missing(x: Vec<f64>) -> Self {
        UnitRecord { g: DomainTag::Primary, x, m: None, y: None, r: false }
    }

    pub fn auxiliary(x: Vec<f64>, m: Option<f64>) -> Self {
        UnitRecord {
            g: DomainTag::Auxiliary,
            x,
            r: m.is_some(),
            m: m.map(MValue::Numeric),
            y: None,
        }
    }

    pub fn is_primary(&self) -> bool {
        self.g == DomainTag::Primary
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MKind {
    Numeric,
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YKind {
    Numeric,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub covariate_names: Vec<String>,
    pub m_kind: MKind,
    pub y_kind: YKind,
    pub missing_token: String,
}

impl VariableSchema {
    pub fn numeric(covariate_names: Vec<String>) -> Self {
        VariableSchema {
            covariate_names,
            m_kind: MKind::Numeric,
            y_kind: YKind::Numeric,
            missing_token: "?".to_string(),
        }
    }

    /// Scalar-covariate numeric schema with a covariate named `x`.
    pub fn scalar() -> Self {
        Self::numeric(vec!["x".to_string()])
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    /// Number of real features M expands to (L-1 indicators for L levels).
    pub fn m_width(&self) -> usize {
        match &self.m_kind {
            MKind::Numeric => 1,
            MKind::Categorical(levels) => levels.len().saturating_sub(1),
        }
    }

    /// Checks the categorical level list: nonempty, distinct.
    pub fn check(&self) -> Result<()> {
        if let MKind::Categorical(levels) = &self.m_kind {
            if levels.is_empty() {
                return Err(Error::Config("categorical M needs at least one level".into()));
            }
            for (i, a) in levels.iter().enumerate() {
                if levels[..i].contains(a) {
                    return Err(Error::Config(format!("duplicate M level {a:?}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledDataset {
    pub records: Vec<UnitRecord>,
    pub schema: VariableSchema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationRule {
    MissingMWhenObserved,
    MPresentWhenMissing,
    MissingYWhenObserved,
    YPresentWhenMissing,
    YInAuxiliary,
    CovariateDimension,
    NonFinite,
    UnknownLevel,
    MKindMismatch,
    NonBinaryY,
}

impl ViolationRule {
    pub fn describe(self) -> &'static str {
        match self {
            ViolationRule::MissingMWhenObserved => "M absent although r = 1",
            ViolationRule::MPresentWhenMissing => "M present although r = 0",
            ViolationRule::MissingYWhenObserved => "Y absent in primary domain although r = 1",
            ViolationRule::YPresentWhenMissing => "Y present in primary domain although r = 0",
            ViolationRule::YInAuxiliary => "Y present in auxiliary domain",
            ViolationRule::CovariateDimension => "covariate count does not match schema",
            ViolationRule::NonFinite => "non-finite numeric value",
            ViolationRule::UnknownLevel => "M level not in schema level list",
            ViolationRule::MKindMismatch => "M value kind does not match schema",
            ViolationRule::NonBinaryY => "Y is not 0/1 under a binary schema",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub rule: ViolationRule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.rule.describe())
    }
}

/// Returns every broken record invariant; empty means the dataset is valid.
pub fn validate(dataset: &PooledDataset) -> Vec<Violation> {
    let schema = &dataset.schema;
    let mut out = Vec::new();
    for (row, rec) in dataset.records.iter().enumerate() {
        let mut push = |rule| out.push(Violation { row, rule });
        if rec.x.len() != schema.n_covariates() {
            push(ViolationRule::CovariateDimension);
        }
        if rec.x.iter().any(|v| !v.is_finite()) || rec.y.is_some_and(|v| !v.is_finite()) {
            push(ViolationRule::NonFinite);
        }
        match (rec.r, &rec.m) {
            (true, None) => push(ViolationRule::MissingMWhenObserved),
            (false, Some(_)) => push(ViolationRule::MPresentWhenMissing),
            _ => {}
        }
        match (&rec.m, &schema.m_kind) {
            (Some(MValue::Numeric(v)), MKind::Numeric) => {
                if !v.is_finite() {
                    push(ViolationRule::NonFinite);
                }
            }
            (Some(MValue::Level(level)), MKind::Categorical(levels)) => {
                if !levels.contains(level) {
                    push(ViolationRule::UnknownLevel);
                }
            }
            (Some(_), _) => push(ViolationRule::MKindMismatch),
            (None, _) => {}
        }
        match rec.g {
            DomainTag::Primary => match (rec.r, rec.y) {
                (true, None) => push(ViolationRule::MissingYWhenObserved),
                (false, Some(_)) => push(ViolationRule::YPresentWhenMissing),
                _ => {}
            },
            DomainTag::Auxiliary => {
                if rec.y.is_some() {
                    push(ViolationRule::YInAuxiliary);
                }
            }
        }
        if schema.y_kind == YKind::Binary && rec.y.is_some_and(|v| v != 0.0 && v != 1.0) {
            push(ViolationRule::NonBinaryY);
        }
    }
    out
}

/// Order-preserving partition into (primary, auxiliary) records.
pub fn split_by_domain(dataset: &PooledDataset) -> (Vec<&UnitRecord>, Vec<&UnitRecord>) {
    dataset.records.iter().partition(|r| r.is_primary())
}

/// Real-valued expansion of M: numeric passes through, categorical becomes
/// L-1 indicators with the first level as reference.
pub fn expand_m(m: &MValue, schema: &VariableSchema) -> Result<Vec<f64>> {
    match (&schema.m_kind, m) {
        (MKind::Numeric, MValue::Numeric(v)) => Ok(vec![*v]),
        (MKind::Numeric, MValue::Level(s)) => match s.trim().parse::<f64>() {
            Ok(v) => Ok(vec![v]),
            Err(_) => Err(Error::UnseenLevel { level: s.clone(), known: Vec::new() }),
        },
        (MKind::Categorical(levels), MValue::Level(s)) => level_indicators(s, levels),
        (MKind::Categorical(levels), MValue::Numeric(v)) => level_indicators(&v.to_string(), levels),
    }
}

fn level_indicators(level: &str, levels: &[String]) -> Result<Vec<f64>> {
    let idx = levels.iter().position(|l| l == level).ok_or_else(|| Error::UnseenLevel {
        level: level.to_string(),
        known: levels.to_vec(),
    })?;
    Ok((1..levels.len()).map(|j| if j == idx { 1.0 } else { 0.0 }).collect())
}

/// Covariate row `X` followed by the expanded `M` features when M is present.
pub fn one_hot_expand(record: &UnitRecord, schema: &VariableSchema) -> Result<Vec<f64>> {
    let mut row = record.x.clone();
    if let Some(m) = &record.m {
        row.extend(expand_m(m, schema)?);
    }
    Ok(row)
}

/// Per-domain counts used in reports and ingestion summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DomainCounts {
    pub n_primary: usize,
    pub n_auxiliary: usize,
    pub primary_complete: usize,
    pub auxiliary_complete: usize,
}

impl DomainCounts {
    pub fn primary_missing_rate(&self) -> f64 {
        1.0 - self.primary_complete as f64 / self.n_primary as f64
    }

    pub fn auxiliary_missing_rate(&self) -> f64 {
        1.0 - self.auxiliary_complete as f64 / self.n_auxiliary as f64
    }
}

impl PooledDataset {
    pub fn new(records: Vec<UnitRecord>, schema: VariableSchema) -> Self {
        PooledDataset { records, schema }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn counts(&self) -> DomainCounts {
        let mut c = DomainCounts::default();
        for r in &self.records {
            match r.g {
                DomainTag::Primary => {
                    c.n_primary += 1;
                    c.primary_complete += r.r as usize;
                }
                DomainTag::Auxiliary => {
                    c.n_auxiliary += 1;
                    c.auxiliary_complete += r.r as usize;
                }
            }
        }
        c
    }

    /// Validation plus the two-domain requirement that every estimator needs.
    pub fn ensure_estimable(&self) -> Result<DomainCounts> {
        let violations = validate(self);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let c = self.counts();
        if c.n_primary == 0 {
            return Err(Error::InsufficientData("no primary-domain records".into()));
        }
        if c.n_auxiliary == 0 {
            return Err(Error::InsufficientData("no auxiliary-domain records".into()));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_rows() -> PooledDataset {
        PooledDataset::new(
            vec![
                UnitRecord::primary_complete(vec![0.5], 1.0, 2.0),
                UnitRecord::primary_missing(vec![1.5]),
                UnitRecord::auxiliary(vec![-0.2], Some(0.3)),
                UnitRecord::auxiliary(vec![0.1], None),
            ],
            VariableSchema::scalar(),
        )
    }

    #[test]
    fn consistent_dataset_has_no_violations() {
        assert!(validate(&four_rows()).is_empty());
    }

    #[test]
    fn auxiliary_y_is_a_violation() {
        let mut ds = four_rows();
        ds.records[2].y = Some(1.0);
        let v = validate(&ds);
        assert_eq!(v, vec![Violation { row: 2, rule: ViolationRule::YInAuxiliary }]);
        assert!(v[0].to_string().contains("Y present in auxiliary domain"));
    }

    #[test]
    fn m_present_with_r_zero_is_a_violation() {
        let mut ds = four_rows();
        ds.records[3].m = Some(MValue::Numeric(0.0));
        let v = validate(&ds);
        assert_eq!(v, vec![Violation { row: 3, rule: ViolationRule::MPresentWhenMissing }]);
    }

    #[test]
    fn discordant_primary_missingness_is_reported() {
        let mut ds = four_rows();
        ds.records[0].y = None;
        assert_eq!(validate(&ds)[0].rule, ViolationRule::MissingYWhenObserved);
        let mut ds = four_rows();
        ds.records[1].y = Some(0.0);
        assert_eq!(validate(&ds)[0].rule, ViolationRule::YPresentWhenMissing);
    }

    #[test]
    fn split_preserves_order() {
        let schema = VariableSchema::scalar();
        let p = |v| UnitRecord::primary_missing(vec![v]);
        let a = |v| UnitRecord::auxiliary(vec![v], None);
        let ds = PooledDataset::new(vec![p(0.0), a(1.0), p(2.0)], schema.clone());
        let (prim, aux) = split_by_domain(&ds);
        assert_eq!(prim, vec![&ds.records[0], &ds.records[2]]);
        assert_eq!(aux, vec![&ds.records[1]]);

        let all_primary = PooledDataset::new(vec![p(0.0), p(1.0)], schema.clone());
        let (prim, aux) = split_by_domain(&all_primary);
        assert_eq!((prim.len(), aux.len()), (2, 0));

        let empty = PooledDataset::new(vec![], schema);
        let (prim, aux) = split_by_domain(&empty);
        assert!(prim.is_empty() && aux.is_empty());
    }

    #[test]
    fn one_hot_reference_level() {
        let schema = VariableSchema {
            m_kind: MKind::Categorical(vec!["A".into(), "B".into(), "C".into()]),
            ..VariableSchema::scalar()
        };
        let rec = |m: &str| UnitRecord {
            g: DomainTag::Auxiliary,
            x: vec![0.25],
            m: Some(MValue::Level(m.into())),
            y: None,
            r: true,
        };
        assert_eq!(one_hot_expand(&rec("B"), &schema).unwrap(), vec![0.25, 1.0, 0.0]);
        assert_eq!(one_hot_expand(&rec("A"), &schema).unwrap(), vec![0.25, 0.0, 0.0]);
        let err = one_hot_expand(&rec("D"), &schema).unwrap_err();
        assert!(err.to_string().contains("\"D\""), "{err}");
    }

    #[test]
    fn numeric_m_passes_through() {
        let rec = UnitRecord::auxiliary(vec![1.0], Some(2.5));
        assert_eq!(one_hot_expand(&rec, &VariableSchema::scalar()).unwrap(), vec![1.0, 2.5]);
        let missing = UnitRecord::auxiliary(vec![1.0], None);
        assert_eq!(one_hot_expand(&missing, &VariableSchema::scalar()).unwrap(), vec![1.0]);
    }

    #[test]
    fn schema_rejects_duplicate_levels() {
        let schema = VariableSchema {
            m_kind: MKind::Categorical(vec!["A".into(), "A".into()]),
            ..VariableSchema::scalar()
        };
        assert!(schema.check().is_err());
        let empty = VariableSchema { m_kind: MKind::Categorical(vec![]), ..VariableSchema::scalar() };
        assert!(empty.check().is_err());
    }

    #[test]
    fn estimable_requires_both_domains() {
        let ds = PooledDataset::new(
            vec![UnitRecord::primary_missing(vec![0.0])],
            VariableSchema::scalar(),
        );
        assert!(matches!(ds.ensure_estimable(), Err(Error::InsufficientData(_))));
    }
}
