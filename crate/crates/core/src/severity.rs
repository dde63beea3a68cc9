//! Five-level bias severity: threshold tables, level mapping and calibration
//! of cut-points against graded synthetic suites.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, MetricId, MetricOptions, MetricResult, Scenario, StatedBias};
use crate::synthgen::{self, SynthSpec};

#[derive(Debug, Error)]
pub enum SeverityError {
    #[error("no threshold entry for metric {0:?}")]
    UnknownMetric(String),
    #[error("metric {metric} has no usable value for key {key:?}")]
    InvalidValue { metric: MetricId, key: String },
    #[error("cut-points for {0} must be four strictly increasing finite numbers")]
    InvalidCuts(String),
    #[error("calibration suite is insufficient: {0}")]
    InsufficientSuite(String),
    #[error("synthetic generation failed: {0}")]
    Synth(#[from] synthgen::SynthError),
    #[error("threshold file error: {0}")]
    Io(#[from] std::io::Error),
    #[error("threshold file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SeverityError> = std::result::Result<T, E>;

/// Bias severity from 1 ("most balanced") to 5 ("most biased").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct BiasLevel(u8);

impl BiasLevel {
    pub const MIN: BiasLevel = BiasLevel(1);
    pub const MAX: BiasLevel = BiasLevel(5);

    pub fn new(value: u8) -> Option<Self> {
        (1..=5).contains(&value).then_some(BiasLevel(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn label(self) -> &'static str {
        match self.0 {
            1 => "most balanced",
            2 => "balanced",
            3 => "moderately biased",
            4 => "biased",
            _ => "most biased",
        }
    }

    pub fn all() -> impl Iterator<Item = BiasLevel> {
        (1..=5).map(BiasLevel)
    }
}

impl TryFrom<u8> for BiasLevel {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        BiasLevel::new(v).ok_or_else(|| format!("bias level must be 1..=5, got {v}"))
    }
}

impl From<BiasLevel> for u8 {
    fn from(l: BiasLevel) -> u8 {
        l.0
    }
}

impl fmt::Display for BiasLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.0, self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsMoreBiased,
    /// Bias grows with |value - target|.
    DeviationFromTarget(f64),
}

impl Direction {
    pub fn transform(self, v: f64) -> f64 {
        match self {
            Direction::HigherIsMoreBiased => v,
            Direction::DeviationFromTarget(t) => (v - t).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub direction: Direction,
    pub cuts: [f64; 4],
}

impl Band {
    fn new(direction: Direction, cuts: [f64; 4]) -> Self {
        Band { direction, cuts }
    }

    fn validate(&self, metric: &str) -> Result<()> {
        let ok = self.cuts.iter().all(|c| c.is_finite()) && self.cuts.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(())
        } else {
            Err(SeverityError::InvalidCuts(metric.to_string()))
        }
    }

    /// 1 + number of cut-points strictly below the transformed value.
    pub fn level_of_transformed(&self, t: f64) -> BiasLevel {
        if t == f64::INFINITY {
            return BiasLevel::MAX;
        }
        BiasLevel(1 + self.cuts.iter().filter(|&&c| c < t).count() as u8)
    }

    pub fn level(&self, raw: f64) -> BiasLevel {
        self.level_of_transformed(self.direction.transform(raw))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub version: String,
    pub entries: BTreeMap<MetricId, Band>,
}

impl ThresholdTable {
    /// The shipped table. Only the max/min-ratio cuts at 10 and 100 come from
    /// the source method; the rest are engineering defaults meant to be
    /// refined with [`calibrate`].
    pub fn default_v1() -> Self {
        use Direction::*;
        use MetricId::*;
        let balance = [0.1, 0.25, 0.5, 0.75];
        let effect = [0.1, 0.25, 0.5, 1.0];
        let parity = [0.05, 0.1, 0.2, 0.35];
        let assoc = [0.1, 0.25, 0.45, 0.65];
        let info = [0.05, 0.15, 0.3, 0.5];
        let entries = [
            (ShannonBalance, Band::new(DeviationFromTarget(1.0), balance)),
            (Entropy, Band::new(DeviationFromTarget(1.0), balance)),
            (Gini, Band::new(DeviationFromTarget(1.0), balance)),
            (MaxMinRatio, Band::new(HigherIsMoreBiased, [1.5, 3.0, 10.0, 100.0])),
            (RelativeRisk, Band::new(HigherIsMoreBiased, [0.1, 0.25, 0.5, 1.0])),
            (Skewness, Band::new(DeviationFromTarget(0.0), [0.5, 1.0, 2.0, 3.0])),
            (Kurtosis, Band::new(DeviationFromTarget(0.0), [1.0, 2.0, 4.0, 7.0])),
            (Outlier, Band::new(HigherIsMoreBiased, [0.005, 0.01, 0.03, 0.05])),
            (CohensDMad, Band::new(DeviationFromTarget(0.0), effect)),
            (QuantileDeviation, Band::new(HigherIsMoreBiased, [0.05, 0.1, 0.2, 0.35])),
            (CramersV, Band::new(HigherIsMoreBiased, assoc)),
            (Elift, Band::new(HigherIsMoreBiased, [1.1, 1.5, 2.0, 3.0])),
            (StatisticalParity, Band::new(HigherIsMoreBiased, parity)),
            (Lipschitz, Band::new(HigherIsMoreBiased, parity)),
            (TotalVariation, Band::new(HigherIsMoreBiased, parity)),
            (MaxAbsMean, Band::new(HigherIsMoreBiased, effect)),
            (CohensD, Band::new(HigherIsMoreBiased, effect)),
            (StandardizedDifference, Band::new(HigherIsMoreBiased, effect)),
            (CausalEffect, Band::new(HigherIsMoreBiased, effect)),
            (Pse, Band::new(HigherIsMoreBiased, effect)),
            (Pearson, Band::new(DeviationFromTarget(0.0), [0.1, 0.3, 0.5, 0.7])),
            (Nmi, Band::new(HigherIsMoreBiased, info)),
            (HgrApproximation, Band::new(HigherIsMoreBiased, assoc)),
            (Wasserstein, Band::new(HigherIsMoreBiased, [0.1, 0.25, 0.5, 1.0])),
            (Hsic, Band::new(HigherIsMoreBiased, info)),
        ];
        ThresholdTable {
            version: "default-v1".to_string(),
            entries: entries.into_iter().collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (m, band) in &self.entries {
            band.validate(m.as_str())?;
        }
        Ok(())
    }

    pub fn band(&self, metric: MetricId) -> Result<&Band> {
        self.entries
            .get(&metric)
            .ok_or_else(|| SeverityError::UnknownMetric(metric.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table: ThresholdTable = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        table.validate()?;
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

impl Default for ThresholdTable {
    fn default() -> Self {
        ThresholdTable::default_v1()
    }
}

/// Severity level of one metric result under `table`.
pub fn map_to_level(metric: MetricId, result: &MetricResult, table: &ThresholdTable) -> Result<BiasLevel> {
    let band = table.band(metric)?;
    let key = metric.primary_key();
    let value = result
        .get(key)
        .filter(|v| !v.is_nan())
        .ok_or_else(|| SeverityError::InvalidValue {
            metric,
            key: key.to_string(),
        })?;
    Ok(band.level(value))
}

/// One calibration observation: a metric's raw value on a synthetic table
/// built for a known level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCase {
    pub metric: MetricId,
    pub intended: BiasLevel,
    pub raw: f64,
    pub spec: SynthSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCalibration {
    pub metric: MetricId,
    pub cases: usize,
    pub failed_cases: usize,
    pub correct_before: usize,
    pub correct_after: usize,
    pub cuts_before: [f64; 4],
    pub cuts_after: [f64; 4],
    /// True when no cut-points classify every case: raw-value ranges of
    /// adjacent levels overlap.
    pub inseparable: bool,
    pub overlaps: Vec<String>,
}

impl MetricCalibration {
    pub fn accuracy_after(&self) -> f64 {
        ratio(self.correct_after, self.cases)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub version_before: String,
    pub version_after: String,
    pub metrics: Vec<MetricCalibration>,
}

impl CalibrationReport {
    fn totals(&self, pick: impl Fn(&MetricCalibration) -> usize) -> (usize, usize) {
        self.metrics.iter().fold((0, 0), |(a, b), m| (a + pick(m), b + m.cases))
    }

    pub fn accuracy_before(&self) -> f64 {
        let (a, b) = self.totals(|m| m.correct_before);
        ratio(a, b)
    }

    pub fn accuracy_after(&self) -> f64 {
        let (a, b) = self.totals(|m| m.correct_after);
        ratio(a, b)
    }

    pub fn scenario_accuracy(&self, scenario: Scenario) -> f64 {
        let (a, b) = self
            .metrics
            .iter()
            .filter(|m| m.metric.scenario() == scenario)
            .fold((0, 0), |(a, b), m| (a + m.correct_after, b + m.cases));
        ratio(a, b)
    }

    pub fn inseparable(&self) -> Vec<MetricId> {
        self.metrics
            .iter()
            .filter(|m| m.inseparable)
            .map(|m| m.metric)
            .collect()
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "# Calibration report\n\n{} -> {}\n\nOverall accuracy: {:.1}% -> {:.1}%\n\n",
            self.version_before,
            self.version_after,
            100.0 * self.accuracy_before(),
            100.0 * self.accuracy_after()
        );
        s.push_str("| metric | cases | before | after | cuts | separable |\n|---|---|---|---|---|---|\n");
        for m in &self.metrics {
            s.push_str(&format!(
                "| {} | {} | {:.1}% | {:.1}% | {} | {} |\n",
                m.metric,
                m.cases,
                100.0 * ratio(m.correct_before, m.cases),
                100.0 * ratio(m.correct_after, m.cases),
                m.cuts_after
                    .iter()
                    .map(|c| format!("{c:.4}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                if m.inseparable { "no" } else { "yes" }
            ));
        }
        let overlaps: Vec<&String> = self.metrics.iter().flat_map(|m| &m.overlaps).collect();
        if !overlaps.is_empty() {
            s.push_str("\n## Overlapping levels\n\n");
            for o in overlaps {
                s.push_str(&format!("- {o}\n"));
            }
        }
        s
    }
}

/// Checks the suite covers levels 1..=5 with at least three replicates per
/// level for every scenario it mentions.
pub fn check_suite(suite: &[(SynthSpec, BiasLevel)]) -> Result<()> {
    if suite.is_empty() {
        return Err(SeverityError::InsufficientSuite("empty suite".into()));
    }
    let mut per: BTreeMap<Scenario, BTreeMap<BiasLevel, usize>> = BTreeMap::new();
    for (spec, level) in suite {
        *per.entry(spec.scenario).or_default().entry(*level).or_default() += 1;
    }
    for (scenario, levels) in per {
        for level in BiasLevel::all() {
            let count = levels.get(&level).copied().unwrap_or(0);
            if count < 3 {
                return Err(SeverityError::InsufficientSuite(format!(
                    "{scenario} has {count} case(s) at level {}; need at least 3",
                    level.value()
                )));
            }
        }
    }
    Ok(())
}

/// Generates every suite table and evaluates the scenario's five metrics.
/// Metric failures are counted, not fatal.
pub fn collect_cases(
    suite: &[(SynthSpec, BiasLevel)],
    opts: &MetricOptions,
) -> Result<(Vec<CalibrationCase>, BTreeMap<MetricId, usize>)> {
    let mut cases = Vec::new();
    let mut failures: BTreeMap<MetricId, usize> = BTreeMap::new();
    for (spec, level) in suite {
        let table = synthgen::generate(spec)?;
        let features = synthgen::feature_names(spec.scenario);
        let mut o = opts.clone();
        o.mediator = table.metadata.get("mediator").cloned();
        let (_, results) = metrics::run_scenario(&table, &features, StatedBias::Unstated, &o)
            .map_err(|e| SeverityError::InsufficientSuite(e.to_string()))?;
        for (metric, r) in results {
            match r {
                Ok(res) => {
                    let raw = res.primary_value();
                    if raw.is_nan() {
                        *failures.entry(metric).or_default() += 1;
                    } else {
                        cases.push(CalibrationCase {
                            metric,
                            intended: *level,
                            raw,
                            spec: spec.clone(),
                        });
                    }
                }
                Err(_) => *failures.entry(metric).or_default() += 1,
            }
        }
    }
    Ok((cases, failures))
}

/// Runs the full calibration: generate, evaluate, adjust cut-points.
pub fn calibrate(
    suite: &[(SynthSpec, BiasLevel)],
    initial: &ThresholdTable,
    opts: &MetricOptions,
) -> Result<(ThresholdTable, CalibrationReport)> {
    check_suite(suite)?;
    let (cases, failures) = collect_cases(suite, opts)?;
    calibrate_cases(&cases, &failures, initial)
}

fn correct(band: &Band, cases: &[(f64, BiasLevel)]) -> usize {
    cases
        .iter()
        .filter(|(t, l)| band.level_of_transformed(*t) == *l)
        .count()
}

/// Adjusts cut-points metric by metric. Metrics already classifying every
/// case keep their cuts; the others get a coordinate-wise search where each
/// cut moves to the best midpoint between sorted observed values that stays
/// between its neighbours. Accuracy never decreases.
pub fn calibrate_cases(
    cases: &[CalibrationCase],
    failures: &BTreeMap<MetricId, usize>,
    initial: &ThresholdTable,
) -> Result<(ThresholdTable, CalibrationReport)> {
    initial.validate()?;
    let mut by_metric: BTreeMap<MetricId, Vec<(f64, BiasLevel)>> = BTreeMap::new();
    for c in cases {
        let band = initial.band(c.metric)?;
        by_metric
            .entry(c.metric)
            .or_default()
            .push((band.direction.transform(c.raw), c.intended));
    }

    let mut table = initial.clone();
    let mut changed = false;
    let mut reports = Vec::new();
    for (metric, obs) in &by_metric {
        let before = table.band(*metric)?.clone();
        let correct_before = correct(&before, obs);
        let mut band = before.clone();
        if correct_before < obs.len() {
            search_cuts(&mut band, obs);
        }
        let correct_after = correct(&band, obs);
        if band != before {
            changed = true;
            table.entries.insert(*metric, band.clone());
        }
        reports.push(MetricCalibration {
            metric: *metric,
            cases: obs.len(),
            failed_cases: failures.get(metric).copied().unwrap_or(0),
            correct_before,
            correct_after,
            cuts_before: before.cuts,
            cuts_after: band.cuts,
            inseparable: correct_after < obs.len(),
            overlaps: overlaps(*metric, obs),
        });
    }
    for (metric, n) in failures {
        if !by_metric.contains_key(metric) {
            let band = table.band(*metric)?;
            reports.push(MetricCalibration {
                metric: *metric,
                cases: 0,
                failed_cases: *n,
                correct_before: 0,
                correct_after: 0,
                cuts_before: band.cuts,
                cuts_after: band.cuts,
                inseparable: false,
                overlaps: vec![format!("{metric}: no case could be evaluated")],
            });
        }
    }
    reports.sort_by_key(|r| r.metric);
    if changed {
        table.version = format!("{}+calibrated", initial.version);
    }
    table.validate()?;
    let report = CalibrationReport {
        version_before: initial.version.clone(),
        version_after: table.version.clone(),
        metrics: reports,
    };
    Ok((table, report))
}

fn search_cuts(band: &mut Band, obs: &[(f64, BiasLevel)]) {
    let finite: BTreeSet<u64> = obs
        .iter()
        .map(|(t, _)| *t)
        .filter(|t| t.is_finite())
        .map(f64::to_bits)
        .collect();
    let mut values: Vec<f64> = finite.into_iter().map(f64::from_bits).collect();
    values.sort_by(f64::total_cmp);
    let mut candidates: Vec<f64> = values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    if let (Some(first), Some(last)) = (values.first(), values.last()) {
        candidates.push(first - (1.0 + first.abs()));
        candidates.push(last + (1.0 + last.abs()));
    }
    candidates.extend(band.cuts);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    for _sweep in 0..16 {
        let mut moved = false;
        for j in 0..4 {
            let lo = if j == 0 { f64::NEG_INFINITY } else { band.cuts[j - 1] };
            let hi = if j == 3 { f64::INFINITY } else { band.cuts[j + 1] };
            let current = band.cuts[j];
            let mut best = correct(band, obs);
            let mut tied = vec![current];
            for &c in candidates.iter().filter(|&&c| c > lo && c < hi && c != current) {
                band.cuts[j] = c;
                let score = correct(band, obs);
                if score > best {
                    best = score;
                    tied = vec![c];
                } else if score == best {
                    tied.push(c);
                }
            }
            // Among equally good positions take the middle one, away from
            // both neighbouring clusters.
            tied.sort_by(f64::total_cmp);
            let choice = tied[tied.len() / 2];
            band.cuts[j] = choice;
            if choice != current {
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Human-readable descriptions of adjacent levels whose value ranges overlap.
fn overlaps(metric: MetricId, obs: &[(f64, BiasLevel)]) -> Vec<String> {
    let mut ranges: BTreeMap<BiasLevel, (f64, f64)> = BTreeMap::new();
    for (t, l) in obs {
        let e = ranges.entry(*l).or_insert((f64::INFINITY, f64::NEG_INFINITY));
        e.0 = e.0.min(*t);
        e.1 = e.1.max(*t);
    }
    let levels: Vec<_> = ranges.iter().collect();
    levels
        .windows(2)
        .filter(|w| w[0].1 .1 >= w[1].1 .0)
        .map(|w| {
            format!(
                "{metric}: level {} max {:.4} >= level {} min {:.4}",
                w[0].0.value(),
                w[0].1 .1,
                w[1].0.value(),
                w[1].1 .0
            )
        })
        .collect()
}
