//! The 25 bias-detection metrics, grouped into five scenarios by bias type
//! (distribution or correlation) and column kinds.
//!
//! Every metric returns raw values only. Mapping a raw value onto a bias
//! level is the job of [`crate::severity`].

mod cat_cat;
mod cat_dist;
mod cat_num;
mod num_dist;
mod num_num;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tabular::{Column, ColumnKind, Table, TabularError};

pub use cat_cat::{elift_cells, Contingency};
pub use cat_dist::evaluate_counts;
pub use cat_num::Auxiliary;
pub use num_num::{equal_frequency_bins, hsic_bandwidth, hsic_statistic};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric needs at least two categories, found {0}")]
    SingleCategory(usize),
    #[error("contingency table has an empty row or column")]
    DegenerateTable,
    #[error("column {0:?} is constant")]
    ConstantColumn(String),
    #[error("interquartile range is zero")]
    DegenerateIqr,
    #[error("median absolute deviation is zero")]
    DegenerateMad,
    #[error("need at least {needed} paired observations, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("path-specific effect needs a mediator column")]
    MissingMediator,
    #[error("mediator is collinear with the treatment")]
    CollinearMediator,
    #[error("group {0:?} has fewer than two observations")]
    SingletonGroup(String),
    #[error("outcome has zero variance")]
    ZeroVariance,
    #[error("no covariate stratum contains both treatment and control")]
    NoCommonStrata,
    #[error("column {column:?} must be {expected}")]
    WrongKind { column: String, expected: ColumnKind },
    #[error("unsupported feature count {0}; expected 1 or 2")]
    UnsupportedArity(usize),
    #[error("{stated} bias cannot be assessed on {columns} column(s)")]
    BiasTypeMismatch { stated: StatedBias, columns: usize },
    #[error("unknown metric id {0:?}")]
    UnknownMetric(String),
    #[error("metric {metric} does not apply to scenario {scenario}")]
    ScenarioMismatch { metric: MetricId, scenario: Scenario },
    #[error("invalid metric options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Table(#[from] TabularError),
}

impl MetricError {
    /// True when the data does not meet the metric's preconditions, as
    /// opposed to a caller mistake. Such failures are reported but not retried.
    pub fn is_inapplicable(&self) -> bool {
        use MetricError::*;
        matches!(
            self,
            SingleCategory(_)
                | DegenerateTable
                | ConstantColumn(_)
                | DegenerateIqr
                | DegenerateMad
                | InsufficientSamples { .. }
                | MissingMediator
                | CollinearMediator
                | SingletonGroup(_)
                | ZeroVariance
                | NoCommonStrata
        )
    }
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    CatDist,
    NumDist,
    CatCat,
    CatNum,
    NumNum,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::CatDist,
        Scenario::NumDist,
        Scenario::CatCat,
        Scenario::CatNum,
        Scenario::NumNum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::CatDist => "cat_dist",
            Scenario::NumDist => "num_dist",
            Scenario::CatCat => "cat_cat",
            Scenario::CatNum => "cat_num",
            Scenario::NumNum => "num_num",
        }
    }

    pub fn is_distribution(self) -> bool {
        matches!(self, Scenario::CatDist | Scenario::NumDist)
    }

    pub fn describe(self) -> &'static str {
        match self {
            Scenario::CatDist => "distribution bias in a categorical feature",
            Scenario::NumDist => "distribution bias in a numerical feature",
            Scenario::CatCat => "correlation bias between two categorical features",
            Scenario::CatNum => "correlation bias between a categorical and a numerical feature",
            Scenario::NumNum => "correlation bias between two numerical features",
        }
    }

    pub fn metrics(self) -> [MetricId; 5] {
        use MetricId::*;
        match self {
            Scenario::CatDist => [ShannonBalance, MaxMinRatio, Entropy, Gini, RelativeRisk],
            Scenario::NumDist => [Skewness, Kurtosis, Outlier, CohensDMad, QuantileDeviation],
            Scenario::CatCat => [CramersV, Elift, StatisticalParity, Lipschitz, TotalVariation],
            Scenario::CatNum => [MaxAbsMean, CohensD, StandardizedDifference, CausalEffect, Pse],
            Scenario::NumNum => [Pearson, Nmi, HgrApproximation, Wasserstein, Hsic],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}

macro_rules! metric_ids {
    ($( $variant:ident => $id:literal, $scenario:ident, $tool:literal, $key:literal; )*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum MetricId { $( $variant, )* }

        impl MetricId {
            pub const ALL: [MetricId; 25] = [ $( MetricId::$variant, )* ];

            pub fn as_str(self) -> &'static str {
                match self { $( MetricId::$variant => $id, )* }
            }

            pub fn scenario(self) -> Scenario {
                match self { $( MetricId::$variant => Scenario::$scenario, )* }
            }

            /// Name of the detection tool that computes this metric.
            pub fn tool_name(self) -> &'static str {
                match self { $( MetricId::$variant => $tool, )* }
            }

            /// Raw value used for severity mapping.
            pub fn primary_key(self) -> &'static str {
                match self { $( MetricId::$variant => $key, )* }
            }
        }
    };
}

metric_ids! {
    ShannonBalance => "shannon_balance", CatDist, "categorical_distribution_shannon_balance", "balance";
    MaxMinRatio => "max_min_ratio", CatDist, "categorical_distribution_max_min_ratio", "ratio";
    Entropy => "entropy", CatDist, "categorical_distribution_entropy", "h_norm";
    Gini => "gini", CatDist, "categorical_distribution_gini", "g_norm";
    RelativeRisk => "relative_risk", CatDist, "categorical_distribution_relative_risk", "max_rr_deviation";
    Skewness => "skewness", NumDist, "numerical_distribution_skewness", "skewness";
    Kurtosis => "kurtosis", NumDist, "numerical_distribution_kurtosis", "excess_kurtosis";
    Outlier => "outlier", NumDist, "numerical_distribution_outlier", "outlier_fraction";
    CohensDMad => "cohens_d_mad", NumDist, "numerical_distribution_cohens_d_mad", "d";
    QuantileDeviation => "quantile_deviation", NumDist, "numerical_distribution_quantile_deviation", "deviation";
    CramersV => "cramers_v", CatCat, "categorical_categorical_correlation_cramers_v", "v";
    Elift => "elift", CatCat, "categorical_categorical_correlation_elift", "elift";
    StatisticalParity => "statistical_parity", CatCat, "categorical_categorical_correlation_statistical_parity", "delta";
    Lipschitz => "lipschitz", CatCat, "categorical_categorical_correlation_lipschitz", "lipschitz";
    TotalVariation => "total_variation", CatCat, "categorical_categorical_correlation_total_variation", "tvd";
    MaxAbsMean => "max_abs_mean", CatNum, "categorical_numerical_correlation_max_abs_mean", "n_value";
    CohensD => "cohens_d", CatNum, "categorical_numerical_correlation_cohens_d", "d";
    StandardizedDifference => "standardized_difference", CatNum, "categorical_numerical_correlation_standardized_difference", "sd";
    CausalEffect => "causal_effect", CatNum, "categorical_numerical_correlation_causal_effect", "ace_std";
    Pse => "pse", CatNum, "categorical_numerical_correlation_pse", "pse";
    Pearson => "pearson", NumNum, "numerical_numerical_correlation_pearson", "r";
    Nmi => "nmi", NumNum, "numerical_numerical_correlation_nmi", "nmi";
    HgrApproximation => "hgr_approximation", NumNum, "numerical_numerical_correlation_hgr_approximation", "hgr";
    Wasserstein => "wasserstein", NumNum, "numerical_numerical_correlation_wasserstein", "w2";
    Hsic => "hsic", NumNum, "numerical_numerical_correlation_hsic", "nhsic";
}

impl MetricId {
    pub fn from_tool_name(name: &str) -> Option<MetricId> {
        MetricId::ALL.into_iter().find(|m| m.tool_name() == name)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| MetricError::UnknownMetric(s.to_string()))
    }
}

impl Serialize for MetricId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MetricId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Raw values keyed by name. Non-finite values (the max/min-ratio sentinel)
/// serialize as the strings `"inf"` / `"-inf"`.
pub type RawValues = BTreeMap<String, f64>;

pub(crate) mod raw_serde {
    use super::RawValues;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Value {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(raw: &RawValues, s: S) -> Result<S::Ok, S::Error> {
        let m: std::collections::BTreeMap<&str, Value> = raw
            .iter()
            .map(|(k, v)| {
                let v = if v.is_finite() {
                    Value::Num(*v)
                } else if v.is_nan() {
                    Value::Text("nan".into())
                } else if *v > 0.0 {
                    Value::Text("inf".into())
                } else {
                    Value::Text("-inf".into())
                };
                (k.as_str(), v)
            })
            .collect();
        m.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RawValues, D::Error> {
        let m = std::collections::BTreeMap::<String, Value>::deserialize(d)?;
        m.into_iter()
            .map(|(k, v)| {
                let x = match v {
                    Value::Num(x) => x,
                    Value::Text(t) => match t.as_str() {
                        "inf" => f64::INFINITY,
                        "-inf" => f64::NEG_INFINITY,
                        "nan" => f64::NAN,
                        other => return Err(serde::de::Error::custom(format!("invalid raw value {other:?}"))),
                    },
                };
                Ok((k, x))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric_id: MetricId,
    pub scenario: Scenario,
    #[serde(with = "raw_serde")]
    pub raw: RawValues,
    pub n: usize,
    pub details: String,
}

impl MetricResult {
    fn new(metric: MetricId, raw: RawValues, n: usize, details: String) -> Self {
        MetricResult {
            metric_id: metric,
            scenario: metric.scenario(),
            raw,
            n,
            details,
        }
    }

    /// The designated raw scalar for severity mapping.
    pub fn primary_value(&self) -> f64 {
        self.raw.get(self.metric_id.primary_key()).copied().unwrap_or(f64::NAN)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.raw.get(key).copied()
    }
}

pub(crate) fn raw_values<const N: usize>(pairs: [(&str, f64); N]) -> RawValues {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    pub bins: usize,
    pub z_cutoff: f64,
    pub kde_grid: usize,
    /// Minimum cell count for a cell to enter the elift maximum.
    pub elift_min_support: u64,
    pub mediator: Option<String>,
    pub covariate: Option<String>,
    pub seed: u64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            bins: 10,
            z_cutoff: 3.0,
            kde_grid: 64,
            elift_min_support: 5,
            mediator: None,
            covariate: None,
            seed: 0,
        }
    }
}

impl MetricOptions {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(MetricError::InvalidOptions("bins must be at least 2".into()));
        }
        if self.kde_grid < 8 {
            return Err(MetricError::InvalidOptions("kde_grid must be at least 8".into()));
        }
        if self.elift_min_support < 1 {
            return Err(MetricError::InvalidOptions(
                "elift_min_support must be at least 1".into(),
            ));
        }
        if !(self.z_cutoff > 0.0) {
            return Err(MetricError::InvalidOptions("z_cutoff must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatedBias {
    Distribution,
    Correlation,
    Unstated,
}

impl fmt::Display for StatedBias {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatedBias::Distribution => "distribution",
            StatedBias::Correlation => "correlation",
            StatedBias::Unstated => "unstated",
        })
    }
}

/// Picks the scenario from the column kinds. An unstated bias type resolves
/// by column count: one column is a distribution question, two a correlation
/// question.
pub fn classify_scenario(kinds: &[ColumnKind], stated: StatedBias) -> Result<Scenario> {
    let scenario = match kinds {
        [ColumnKind::Categorical] => Scenario::CatDist,
        [ColumnKind::Numerical] => Scenario::NumDist,
        [ColumnKind::Categorical, ColumnKind::Categorical] => Scenario::CatCat,
        [ColumnKind::Numerical, ColumnKind::Numerical] => Scenario::NumNum,
        [_, _] => Scenario::CatNum,
        other => return Err(MetricError::UnsupportedArity(other.len())),
    };
    let consistent = match stated {
        StatedBias::Unstated => true,
        StatedBias::Distribution => scenario.is_distribution(),
        StatedBias::Correlation => !scenario.is_distribution(),
    };
    if !consistent {
        return Err(MetricError::BiasTypeMismatch {
            stated,
            columns: kinds.len(),
        });
    }
    Ok(scenario)
}

fn require_kind(col: &Column, kind: ColumnKind) -> Result<()> {
    if col.kind != kind {
        return Err(MetricError::WrongKind {
            column: col.name.clone(),
            expected: kind,
        });
    }
    Ok(())
}

fn check_scenario(metric: MetricId, scenario: Scenario) -> Result<()> {
    if metric.scenario() != scenario {
        return Err(MetricError::ScenarioMismatch { metric, scenario });
    }
    Ok(())
}

pub fn detect_cat_dist(col: &Column, metric: MetricId, opts: &MetricOptions) -> Result<MetricResult> {
    check_scenario(metric, Scenario::CatDist)?;
    opts.validate()?;
    require_kind(col, ColumnKind::Categorical)?;
    cat_dist::detect(col, metric)
}

pub fn detect_num_dist(col: &Column, metric: MetricId, opts: &MetricOptions) -> Result<MetricResult> {
    check_scenario(metric, Scenario::NumDist)?;
    opts.validate()?;
    require_kind(col, ColumnKind::Numerical)?;
    num_dist::detect(col, metric, opts)
}

/// `group` is the conditioning feature, `outcome` the feature whose
/// conditional distribution is compared across groups.
pub fn detect_cat_cat(
    group: &Column,
    outcome: &Column,
    metric: MetricId,
    opts: &MetricOptions,
) -> Result<MetricResult> {
    check_scenario(metric, Scenario::CatCat)?;
    opts.validate()?;
    require_kind(group, ColumnKind::Categorical)?;
    require_kind(outcome, ColumnKind::Categorical)?;
    let table = Contingency::from_columns(group, outcome);
    let mut result = cat_cat::evaluate(&table, metric, opts)?;
    result.details = format!("group={} outcome={}; {}", group.name, outcome.name, result.details);
    Ok(result)
}

pub fn detect_cat_num(
    group: &Column,
    outcome: &Column,
    metric: MetricId,
    opts: &MetricOptions,
    aux: &Auxiliary<'_>,
) -> Result<MetricResult> {
    check_scenario(metric, Scenario::CatNum)?;
    opts.validate()?;
    require_kind(group, ColumnKind::Categorical)?;
    require_kind(outcome, ColumnKind::Numerical)?;
    cat_num::detect(group, outcome, metric, aux)
}

pub fn detect_num_num(x: &Column, y: &Column, metric: MetricId, opts: &MetricOptions) -> Result<MetricResult> {
    check_scenario(metric, Scenario::NumNum)?;
    opts.validate()?;
    require_kind(x, ColumnKind::Numerical)?;
    require_kind(y, ColumnKind::Numerical)?;
    num_num::detect(x, y, metric, opts)
}

/// Scenario of the named features in `table`, with the columns reordered so
/// the categorical one comes first for the categorical-numerical case.
pub fn resolve_features<'t>(
    table: &'t Table,
    features: &[&str],
    stated: StatedBias,
) -> Result<(Scenario, Vec<&'t Column>)> {
    let mut cols = features
        .iter()
        .map(|f| table.column(f))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let kinds: Vec<ColumnKind> = cols.iter().map(|c| c.kind).collect();
    let scenario = classify_scenario(&kinds, stated)?;
    if scenario == Scenario::CatNum && cols[0].kind == ColumnKind::Numerical {
        cols.swap(0, 1);
    }
    Ok((scenario, cols))
}

/// Runs one metric on the named features of `table`. Mediator and covariate
/// names in `opts` are resolved against the same table.
pub fn detect(table: &Table, features: &[&str], metric: MetricId, opts: &MetricOptions) -> Result<MetricResult> {
    let (scenario, cols) = resolve_features(table, features, StatedBias::Unstated)?;
    check_scenario(metric, scenario)?;
    match scenario {
        Scenario::CatDist => detect_cat_dist(cols[0], metric, opts),
        Scenario::NumDist => detect_num_dist(cols[0], metric, opts),
        Scenario::CatCat => detect_cat_cat(cols[0], cols[1], metric, opts),
        Scenario::NumNum => detect_num_num(cols[0], cols[1], metric, opts),
        Scenario::CatNum => {
            let mediator = opts.mediator.as_deref().map(|m| table.column(m)).transpose()?;
            let covariate = opts.covariate.as_deref().map(|c| table.column(c)).transpose()?;
            let aux = Auxiliary { mediator, covariate };
            detect_cat_num(cols[0], cols[1], metric, opts, &aux)
        }
    }
}

/// A scenario with the outcome of each of its metrics.
pub type ScenarioRun = (Scenario, Vec<(MetricId, Result<MetricResult>)>);

/// All five metrics of the features' scenario, in the scenario's fixed order.
pub fn run_scenario(table: &Table, features: &[&str], stated: StatedBias, opts: &MetricOptions) -> Result<ScenarioRun> {
    let (scenario, _) = resolve_features(table, features, stated)?;
    let results = scenario
        .metrics()
        .into_iter()
        .map(|m| (m, detect(table, features, m, opts)))
        .collect();
    Ok((scenario, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_five_distinct_metrics() {
        let ids: std::collections::BTreeSet<_> = MetricId::ALL.iter().map(|m| m.as_str()).collect();
        assert_eq!(ids.len(), 25);
        for sc in Scenario::ALL {
            assert!(sc.metrics().iter().all(|m| m.scenario() == sc));
        }
        for m in MetricId::ALL {
            assert_eq!(MetricId::from_tool_name(m.tool_name()), Some(m));
            assert_eq!(m.as_str().parse::<MetricId>().unwrap(), m);
        }
    }

    #[test]
    fn scenario_classification() {
        use ColumnKind::*;
        assert_eq!(
            classify_scenario(&[Categorical], StatedBias::Unstated).unwrap(),
            Scenario::CatDist
        );
        assert_eq!(
            classify_scenario(&[Categorical, Categorical], StatedBias::Correlation).unwrap(),
            Scenario::CatCat
        );
        assert_eq!(
            classify_scenario(&[Numerical, Categorical], StatedBias::Unstated).unwrap(),
            Scenario::CatNum
        );
        assert_eq!(
            classify_scenario(&[Categorical, Numerical], StatedBias::Unstated).unwrap(),
            Scenario::CatNum
        );
        assert!(matches!(
            classify_scenario(&[Numerical; 3], StatedBias::Unstated),
            Err(MetricError::UnsupportedArity(3))
        ));
        assert!(matches!(
            classify_scenario(&[Numerical], StatedBias::Correlation),
            Err(MetricError::BiasTypeMismatch { .. })
        ));
    }

    #[test]
    fn infinite_raw_values_round_trip_through_json() {
        let r = MetricResult::new(
            MetricId::MaxMinRatio,
            raw_values([("ratio", f64::INFINITY)]),
            10,
            String::new(),
        );
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"metric_id\":\"max_min_ratio\""));
        assert!(json.contains("\"ratio\":\"inf\""));
        let back: MetricResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.primary_value(), f64::INFINITY);
    }

    #[test]
    fn options_validation() {
        let o = MetricOptions {
            bins: 1,
            ..Default::default()
        };
        assert!(o.validate().is_err());
        let o = MetricOptions {
            kde_grid: 4,
            ..Default::default()
        };
        assert!(o.validate().is_err());
        assert!(MetricOptions::default().validate().is_ok());
    }
}
