//! Charts and the final detection report.

pub mod charts;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use charts::{render_chart, render_svg, spec_from_table, ChartData, ChartError, ChartKind, ChartSpec};

use crate::metrics::{raw_serde, MetricId, MetricResult, RawValues, Scenario, StatedBias};
use crate::severity::BiasLevel;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report has no findings")]
    NoFindings,
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

/// Formats with 4 significant digits; scientific notation outside
/// [1e-4, 1e6). Infinite values print as `inf`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mut mag = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(mag - 3);
    let rounded = (x / scale).round() * scale;
    if rounded.abs() >= 10f64.powi(mag + 1) {
        mag += 1;
    }
    if !(-4..6).contains(&mag) {
        return format!("{x:.3e}");
    }
    if mag >= 3 {
        format!("{:.0}", (x / 10f64.powi(mag - 3)).round() * 10f64.powi(mag - 3))
    } else {
        let decimals = (3 - mag) as usize;
        format!("{x:.decimals$}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub metric_id: MetricId,
    pub tool: String,
    #[serde(with = "raw_serde")]
    pub raw: RawValues,
    pub key: String,
    #[serde(with = "value_serde")]
    pub value: f64,
    pub level: BiasLevel,
    pub label: String,
    pub details: String,
}

impl Finding {
    pub fn new(result: &MetricResult, level: BiasLevel) -> Self {
        Finding {
            metric_id: result.metric_id,
            tool: result.metric_id.tool_name().to_string(),
            raw: result.raw.clone(),
            key: result.metric_id.primary_key().to_string(),
            value: result.primary_value(),
            level,
            label: level.label().to_string(),
            details: result.details.clone(),
        }
    }
}

/// An f64 that may be infinite: non-finite values travel as strings.
mod value_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            v.serialize(s)
        } else {
            super::fmt_sig(*v).serialize(s)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "NaN" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("invalid value {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFailure {
    pub metric_id: MetricId,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub dataset: String,
    pub question: String,
    pub features: Vec<String>,
    pub stated_bias: StatedBias,
    pub scenario: Option<Scenario>,
    pub rows_used: Option<usize>,
    pub rows_dropped: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartRecord {
    pub kind: ChartKind,
    pub title: String,
    /// File name relative to the report directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub task: TaskSummary,
    pub findings: Vec<Finding>,
    pub failures: Vec<MetricFailure>,
    pub headline: Option<BiasLevel>,
    pub headline_label: Option<String>,
    pub charts: Vec<ChartRecord>,
    pub recommendations: Vec<String>,
    pub citations: Vec<String>,
    pub advisory_methods: Vec<String>,
    pub threshold_version: String,
    pub complete: bool,
    pub notes: Vec<String>,
}

/// Inputs to [`assemble_report`] beyond the findings themselves.
#[derive(Debug, Clone, Default)]
pub struct ReportContext {
    pub charts: Vec<ChartRecord>,
    pub failures: Vec<MetricFailure>,
    pub citations: Vec<String>,
    pub advisory_methods: Vec<String>,
    pub threshold_version: String,
    pub notes: Vec<String>,
}

/// Builds a complete report: headline is the maximum finding level and the
/// recommendations come from [`recommendations`].
pub fn assemble_report(
    task: TaskSummary,
    findings: Vec<Finding>,
    ctx: ReportContext,
) -> Result<ReportDocument, ReportError> {
    let headline = findings.iter().map(|f| f.level).max().ok_or(ReportError::NoFindings)?;
    let recs = recommendations(task.scenario, headline);
    Ok(ReportDocument {
        task,
        findings,
        failures: ctx.failures,
        headline: Some(headline),
        headline_label: Some(headline.label().to_string()),
        charts: ctx.charts,
        recommendations: recs,
        citations: ctx.citations,
        advisory_methods: ctx.advisory_methods,
        threshold_version: ctx.threshold_version,
        complete: true,
        notes: ctx.notes,
    })
}

/// A report for a session that stopped early. Headline and
/// recommendations are filled only when some findings exist.
pub fn partial_report(task: TaskSummary, findings: Vec<Finding>, ctx: ReportContext, reason: &str) -> ReportDocument {
    let headline = findings.iter().map(|f| f.level).max();
    let mut notes = ctx.notes;
    notes.push(format!("Incomplete: {reason}"));
    ReportDocument {
        recommendations: headline.map_or_else(Vec::new, |h| recommendations(task.scenario, h)),
        task,
        findings,
        failures: ctx.failures,
        headline,
        headline_label: headline.map(|h| h.label().to_string()),
        charts: ctx.charts,
        citations: ctx.citations,
        advisory_methods: ctx.advisory_methods,
        threshold_version: ctx.threshold_version,
        complete: false,
        notes,
    }
}

/// Fixed recommendation text keyed by scenario and headline level.
pub fn recommendations(scenario: Option<Scenario>, headline: BiasLevel) -> Vec<String> {
    let level = headline.value();
    if level == 1 {
        return vec!["No action required.".to_string()];
    }
    let mut out = Vec::new();
    if level == 2 {
        out.push("Minor imbalance only; monitor this feature when the data is refreshed.".to_string());
        return out;
    }
    let specific: &[&str] = match scenario {
        Some(Scenario::CatDist) => &[
            "Collect more records for under-represented categories or reweight samples to equalize category shares.",
            "Report model performance separately for minority categories.",
        ],
        Some(Scenario::NumDist) => &[
            "Inspect the tail of the distribution for data-entry errors and sampling gaps.",
            "Consider a variance-stabilizing transform or robust statistics for downstream analysis.",
        ],
        Some(Scenario::CatCat) => &[
            "Check whether the outcome rate differences between groups are explained by legitimate factors.",
            "Consider reweighing or resampling so outcome rates are comparable across groups.",
        ],
        Some(Scenario::CatNum) => &[
            "Examine which covariates explain the group gap in the numerical feature before using it for decisions.",
            "Evaluate fairness constraints or group-aware calibration for models that use this feature.",
        ],
        Some(Scenario::NumNum) => &[
            "Check whether one feature acts as a proxy for the other before using both in a model.",
            "Consider decorrelating or dropping the proxy feature if it encodes a protected attribute.",
        ],
        None => &["Review the flagged features with a domain expert."],
    };
    out.extend(specific.iter().map(|s| s.to_string()));
    if level >= 4 {
        out.push(
            "Treat this dataset as biased: document the finding and mitigate before training or reporting.".to_string(),
        );
    }
    out
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let t = &self.task;
        let _ = writeln!(s, "# Bias detection report\n");
        if !self.complete {
            let _ = writeln!(
                s,
                "> **Incomplete report.** The session stopped before all stages finished.\n"
            );
        }
        let _ = writeln!(s, "## Task\n");
        let _ = writeln!(s, "- Dataset: `{}`", t.dataset);
        if !t.question.is_empty() {
            let _ = writeln!(s, "- Question: {}", t.question);
        }
        let _ = writeln!(s, "- Features: {}", t.features.join(", "));
        let _ = writeln!(s, "- Stated bias type: {}", t.stated_bias);
        if let Some(sc) = t.scenario {
            let _ = writeln!(s, "- Scenario: {} ({})", sc, sc.describe());
        }
        if let Some(n) = t.rows_used {
            let _ = writeln!(s, "- Rows analysed: {n}");
        }
        if let Some(d) = t.rows_dropped {
            let _ = writeln!(s, "- Rows dropped for missing values: {d}");
        }
        let _ = writeln!(s, "\n## Summary\n");
        match self.headline {
            Some(h) => {
                let _ = writeln!(
                    s,
                    "Overall bias level: **{} ({})**, the highest level among the metrics below.",
                    h.value(),
                    h.label()
                );
            }
            None => {
                let _ = writeln!(s, "No bias level could be determined.");
            }
        }
        let _ = writeln!(s, "\n## Findings\n");
        if self.findings.is_empty() {
            let _ = writeln!(s, "No metric results.");
        } else {
            let _ = writeln!(s, "| metric | tool | value | level | label |\n|---|---|---|---|---|");
            for f in &self.findings {
                let _ = writeln!(
                    s,
                    "| {} | `{}` | {} = {} | {} | {} |",
                    f.metric_id,
                    f.tool,
                    f.key,
                    fmt_sig(f.value),
                    f.level.value(),
                    f.label
                );
            }
            let _ = writeln!(s, "\nDetails:\n");
            for f in &self.findings {
                let raw: Vec<String> = f.raw.iter().map(|(k, v)| format!("{k}={}", fmt_sig(*v))).collect();
                let _ = writeln!(s, "- {}: {} ({})", f.metric_id, raw.join(", "), f.details);
            }
        }
        if !self.failures.is_empty() {
            let _ = writeln!(s, "\n## Metrics that could not be computed\n");
            for f in &self.failures {
                let _ = writeln!(s, "- {}: {}", f.metric_id, f.error);
            }
        }
        if !self.charts.is_empty() {
            let _ = writeln!(s, "\n## Visualizations\n");
            for c in &self.charts {
                let _ = writeln!(s, "![{}]({})", c.title, c.file);
            }
        }
        let _ = writeln!(s, "\n## Recommendations\n");
        if self.recommendations.is_empty() {
            let _ = writeln!(s, "None available.");
        }
        for r in &self.recommendations {
            let _ = writeln!(s, "- {r}");
        }
        if !self.citations.is_empty() || !self.advisory_methods.is_empty() {
            let _ = writeln!(s, "\n## Methods\n");
            for c in &self.citations {
                let _ = writeln!(s, "- {c}");
            }
            for a in &self.advisory_methods {
                let _ = writeln!(s, "- advisory (not executed): {a}");
            }
        }
        if !self.notes.is_empty() {
            let _ = writeln!(s, "\n## Notes\n");
            for n in &self.notes {
                let _ = writeln!(s, "- {n}");
            }
        }
        let _ = writeln!(s, "\nThresholds: {}", self.threshold_version);
        s
    }

    /// Writes `report.md` and `findings.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ReportError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.md"), self.to_markdown())?;
        std::fs::write(dir.join("findings.json"), self.to_json())?;
        Ok(())
    }
}
